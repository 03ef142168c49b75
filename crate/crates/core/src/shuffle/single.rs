use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::amplify::amplify_invert;
use crate::bsvs::{AnswerMatrix, NoisyMatrix, PrivacyModel, PrivacyParams};
use crate::error::{Error, Result};
use crate::local::{
    collision_accuracy_bound, flatten_support, rr_accuracy_bound, rr_encode, rr_estimate, unflatten,
    CollisionParams,
};

/// Local randomizer applied to each single message before shuffling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingleMessageMechanism {
    #[default]
    RandomizedResponse,
    Collision,
}

impl SingleMessageMechanism {
    /// Accuracy bound of the local randomizer at the amplified local budget.
    pub fn accuracy_bound(self, local_epsilon: f64, k: usize, r: usize, n: usize, labels: usize, beta: f64) -> Result<f64> {
        match self {
            Self::RandomizedResponse => rr_accuracy_bound(local_epsilon, k, r, n, labels, beta),
            Self::Collision => collision_accuracy_bound(local_epsilon, k, r, n, labels, beta),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleMessageOutcome {
    pub local_epsilon: f64,
    pub mechanism: SingleMessageMechanism,
    pub estimate: NoisyMatrix,
}

/// Each client randomizes its one-record answer at the local budget that
/// amplifies to the central `(epsilon, delta)`; the shuffled reports are
/// then aggregated by the matching unbiased estimator.
pub fn single_message_pipeline<R: Rng + ?Sized>(
    answers: &[AnswerMatrix],
    params: &PrivacyParams,
    mechanism: SingleMessageMechanism,
    rng: &mut R,
) -> Result<SingleMessageOutcome> {
    params.validate()?;
    if params.model != PrivacyModel::ShuffleSingle {
        return Err(Error::param(format!("single-message pipeline used with the {} model", params.model)));
    }
    let n = answers.len();
    let local_epsilon = amplify_invert(params.epsilon, n, params.delta)?;
    let shape = (params.s, params.label_count);
    for a in answers {
        a.check_same_shape(shape)?;
    }
    let estimate = match mechanism {
        SingleMessageMechanism::RandomizedResponse => {
            let mut reports = answers
                .iter()
                .map(|a| rr_encode(a, local_epsilon, params.kr(), rng))
                .collect::<Result<Vec<_>>>()?;
            reports.shuffle(rng);
            let counts = crate::bsvs::exact_aggregate(&reports, shape)?;
            rr_estimate(&counts, n, local_epsilon, params.kr())?
        }
        SingleMessageMechanism::Collision => {
            let c = params.k.min(params.s) * params.r;
            let collision = CollisionParams::with_default_length(params.s * params.label_count, c, local_epsilon)?;
            let mut reports = answers
                .iter()
                .map(|a| collision.encode(&flatten_support(a)?, rng))
                .collect::<Result<Vec<_>>>()?;
            reports.shuffle(rng);
            unflatten(collision.estimate(&reports)?, params.s, params.label_count)?
        }
    };
    Ok(SingleMessageOutcome { local_epsilon, mechanism, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsvs::{empirical_accuracy, exact_aggregate};
    use crate::seed::rng_from_seed;

    fn population(n: usize) -> Vec<AnswerMatrix> {
        (0..n)
            .map(|i| {
                let mut a = AnswerMatrix::zeros(2, 3);
                a.add_at(i % 2, (i / 2) % 3, 1);
                a
            })
            .collect()
    }

    #[test]
    fn rejects_small_population_and_wrong_model() {
        let p = PrivacyParams::new(PrivacyModel::ShuffleSingle, 1.0, 1e-6, 1, 1, 2, 3).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(single_message_pipeline(&population(50), &p, SingleMessageMechanism::RandomizedResponse, &mut rng).is_err());
        let central = PrivacyParams::new(PrivacyModel::Central, 1.0, 0.0, 1, 1, 2, 3).unwrap();
        assert!(single_message_pipeline(&population(5000), &central, SingleMessageMechanism::Collision, &mut rng).is_err());
    }

    #[test]
    fn failure_rate_within_local_bound() {
        let n = 20_000;
        let beta = 0.05;
        // a local budget of 1 keeps the Collision bound in its small-epsilon regime
        let central = crate::shuffle::amplify_forward(1.0, n, 1e-6).unwrap();
        let p = PrivacyParams::new(PrivacyModel::ShuffleSingle, central, 1e-6, 1, 1, 2, 3).unwrap();
        let answers = population(n);
        let exact = exact_aggregate(&answers, (2, 3)).unwrap();
        for mechanism in [SingleMessageMechanism::RandomizedResponse, SingleMessageMechanism::Collision] {
            let mut rng = rng_from_seed(40);
            let mut local_epsilon = 0.0;
            let trials: Vec<_> = (0..200)
                .map(|_| {
                    let out = single_message_pipeline(&answers, &p, mechanism, &mut rng).unwrap();
                    local_epsilon = out.local_epsilon;
                    (exact.clone(), out.estimate)
                })
                .collect();
            let eta = mechanism.accuracy_bound(local_epsilon, 1, 1, n, 3, beta).unwrap();
            assert!((local_epsilon - 1.0).abs() < 1e-6);
            assert!(empirical_accuracy(&trials, eta).unwrap().worst_bucket <= beta + 0.02);
        }
    }
}
