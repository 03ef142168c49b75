use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local budget, central guarantee and population of one amplification step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplificationParams {
    pub local_epsilon: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
}

impl AmplificationParams {
    /// Central budget reached by shuffling `n` reports at `local_epsilon`.
    pub fn from_local(local_epsilon: f64, n: usize, delta: f64) -> Result<Self> {
        Ok(Self { local_epsilon, epsilon: amplify_forward(local_epsilon, n, delta)?, delta, n })
    }

    /// Local budget that shuffles down to the central `epsilon`.
    pub fn from_central(epsilon: f64, n: usize, delta: f64) -> Result<Self> {
        Ok(Self { local_epsilon: amplify_invert(epsilon, n, delta)?, epsilon, delta, n })
    }
}

fn check(n: usize, delta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("amplification needs at least one client"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// Largest admissible local budget, `ln(n / (16 ln(2/delta)))`.
pub fn validity_limit(n: usize, delta: f64) -> Result<f64> {
    check(n, delta)?;
    Ok((n as f64 / (16.0 * (2.0 / delta).ln())).ln())
}

/// Central budget after shuffling `n` local `epsilon0`-DP reports:
/// `ln(1 + (8 sqrt(e^e0 ln(4/delta)) / sqrt(n) + 8 e^e0 / n) (e^e0 - 1)/(e^e0 + 1))`.
pub fn amplify_forward(epsilon0: f64, n: usize, delta: f64) -> Result<f64> {
    let limit = validity_limit(n, delta)?;
    if !(epsilon0 >= 0.0) {
        return Err(Error::param(format!("local epsilon must be nonnegative, got {epsilon0}")));
    }
    if epsilon0 > limit {
        return Err(Error::Infeasible(format!(
            "ln(n / (16 ln(2/delta))) = {limit:.6} < local epsilon {epsilon0}"
        )));
    }
    let e = epsilon0.exp();
    let n = n as f64;
    let spread = 8.0 * (e * (4.0 / delta).ln()).sqrt() / n.sqrt() + 8.0 * e / n;
    Ok((spread * (e - 1.0) / (e + 1.0)).ln_1p())
}

/// Local budget whose amplified central budget equals `target`, by bisection
/// over `(0, validity_limit]` to `1e-9`.
pub fn amplify_invert(target: f64, n: usize, delta: f64) -> Result<f64> {
    let limit = validity_limit(n, delta)?;
    if !(limit > 0.0) {
        return Err(Error::Infeasible(format!("n = {n} admits no positive local budget at delta = {delta}")));
    }
    let ceiling = amplify_forward(limit, n, delta)?;
    if !(target > 0.0 && target <= ceiling) {
        return Err(Error::Infeasible(format!(
            "central epsilon {target} outside the achievable interval (0, {ceiling:.9}]"
        )));
    }
    let (mut lo, mut hi) = (0.0, limit);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if amplify_forward(mid, n, delta)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
