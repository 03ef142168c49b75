use serde::{Deserialize, Serialize};

use crate::bsvs::{AnswerMatrix, NoisyMatrix};
use crate::error::{Error, Result};

/// Empirical failure rates of an approximate oracle against a threshold `eta`.
///
/// `per_bucket[t]` is the fraction of trials in which bucket `t` deviated by
/// at least `eta` in max norm; `worst_bucket` is the largest of those and
/// `any_bucket` the fraction of trials in which some bucket failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRates {
    pub trials: usize,
    pub per_bucket: Vec<f64>,
    pub worst_bucket: f64,
    pub any_bucket: f64,
}

pub fn empirical_accuracy(trials: &[(AnswerMatrix, NoisyMatrix)], eta: f64) -> Result<FailureRates> {
    let Some((first, _)) = trials.first() else {
        return Err(Error::param("empirical accuracy needs at least one trial"));
    };
    let shape = first.shape();
    let mut bucket_failures = vec![0usize; shape.0];
    let mut any = 0usize;
    for (exact, noisy) in trials {
        exact.check_same_shape(shape)?;
        let devs = noisy.row_deviations(exact)?;
        let mut failed = false;
        for (count, dev) in bucket_failures.iter_mut().zip(devs) {
            if dev >= eta {
                *count += 1;
                failed = true;
            }
        }
        any += usize::from(failed);
    }
    let n = trials.len() as f64;
    let per_bucket: Vec<f64> = bucket_failures.iter().map(|&c| c as f64 / n).collect();
    Ok(FailureRates {
        trials: trials.len(),
        worst_bucket: per_bucket.iter().cloned().fold(0.0, f64::max),
        per_bucket,
        any_bucket: any as f64 / n,
    })
}
