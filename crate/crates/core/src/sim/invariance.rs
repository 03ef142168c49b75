use serde::{Deserialize, Serialize};

use super::partition::{partition_records, PartitionScheme};
use super::run::aggregate_for_partition;
use crate::bsvs::{AnswerMatrix, NoisyMatrix, PrivacyModel, PrivacyParams, QuerySet, Record};
use crate::central::central_laplace_mechanism;
use crate::error::Result;
use crate::rknn::DistanceMetric;
use crate::seed::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum InvarianceOutcome {
    /// Every partition gave this aggregate; under the central model the
    /// noisy output from the fixed noise seed is included as well.
    Holds { aggregate: AnswerMatrix, noisy: Option<NoisyMatrix> },
    /// Partition `index` disagreed with the first one.
    Violated { index: usize },
    /// Noise is added per client, so aggregates depend on the partition.
    Inapplicable,
}

impl InvarianceOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds { .. })
    }
}

/// Checks that the pre-noise aggregate, and under the central model the
/// noisy output for `noise_seed`, is the same for every partition.
#[allow(clippy::too_many_arguments)]
pub fn verify_partition_invariance(
    records: &[Record],
    queries: &QuerySet,
    params: &PrivacyParams,
    metric: DistanceMetric,
    schemes: &[(PartitionScheme, usize)],
    partition_seed: u64,
    noise_seed: u64,
) -> Result<InvarianceOutcome> {
    params.validate()?;
    if matches!(params.model, PrivacyModel::Local | PrivacyModel::ShuffleSingle) {
        return Ok(InvarianceOutcome::Inapplicable);
    }
    let params = PrivacyParams { s: queries.len(), ..params.clone() };
    let mut first: Option<(AnswerMatrix, Option<NoisyMatrix>)> = None;
    for (index, &(scheme, n_clients)) in schemes.iter().enumerate() {
        let partition = partition_records(records, scheme, n_clients, partition_seed.wrapping_add(index as u64))?;
        let aggregate = aggregate_for_partition(records, queries, &params, metric, &partition)?;
        let noisy = match params.model {
            PrivacyModel::Central => Some(central_laplace_mechanism(&aggregate, &params, &mut rng_from_seed(noise_seed))?),
            _ => None,
        };
        match &first {
            None => first = Some((aggregate, noisy)),
            Some((a, n)) => {
                let same_noise = match (n, &noisy) {
                    (Some(x), Some(y)) => x.as_flat().iter().zip(y.as_flat()).all(|(p, q)| p.to_bits() == q.to_bits()),
                    _ => true,
                };
                if *a != aggregate || !same_noise {
                    return Ok(InvarianceOutcome::Violated { index });
                }
            }
        }
    }
    Ok(match first {
        Some((aggregate, noisy)) => InvarianceOutcome::Holds { aggregate, noisy },
        None => InvarianceOutcome::Holds { aggregate: AnswerMatrix::zeros(params.s, params.label_count), noisy: None },
    })
}
