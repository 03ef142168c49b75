//! Local randomizers: every client privatizes its own one-record answer
//! before anything leaves the device.
//!
//! Sparse answers are flattened row-major, so bucket `l` and label `y` map
//! to index `l * |Y| + y` of a vector with `s * |Y|` coordinates.

mod collision;
mod composite;
mod gse;
mod hash;
mod laplace;
mod report;
mod rr;
mod verify;

pub use collision::{collision_accuracy_bound, CollisionParams, CollisionReport};
pub use composite::{ConcatenationOracle, SeparationOracle, SeparationReport};
pub use gse::{ln_binomial, GseParams};
pub use hash::{hash_to_range, keyed_hash};
pub use laplace::{local_laplace_accuracy_bound, local_laplace_encode};
pub use report::{MechanismId, PrivateReport};
pub use rr::{rr_accuracy_bound, rr_encode, rr_estimate, rr_flip_probability};
pub use verify::{verify_local_dp, DpCheck, EnumerableMechanism, MAX_DP_CHECK_TRIPLES};

use crate::bsvs::{AnswerMatrix, NoisyMatrix};
use crate::error::{Error, Result};

/// Nonzero coordinates of a one-record answer, in increasing order.
pub fn flatten_support(answer: &AnswerMatrix) -> Result<Vec<usize>> {
    if !answer.is_binary() {
        return Err(Error::param("local answers must be binary (one record per client)"));
    }
    Ok(answer.support())
}

/// Reshapes a flat estimate of length `rows * cols` into a matrix.
pub fn unflatten(values: Vec<f64>, rows: usize, cols: usize) -> Result<NoisyMatrix> {
    NoisyMatrix::from_flat(rows, cols, values)
}

/// All `size`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size > n {
        return out;
    }
    let mut current: Vec<usize> = (0..size).collect();
    loop {
        out.push(current.clone());
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - size {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..size {
            current[j] = current[j - 1] + 1;
        }
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

pub(crate) fn log_term(labels: usize, beta: f64) -> Result<f64> {
    crate::central::check_beta(beta)?;
    if labels == 0 {
        return Err(Error::param("label domain must be nonempty"));
    }
    Ok((labels as f64 / beta).ln())
}
