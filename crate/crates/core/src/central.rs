//! Trusted-curator Laplace mechanism over the aggregate answer matrix.
//!
//! One record swap moves the aggregate by at most `2kr` in L1, so adding
//! independent `Laplace(2kr / epsilon)` noise to every entry gives pure
//! `epsilon`-DP. Per bucket, the max-norm error stays below
//! `2kr ln(|Y| / beta) / epsilon` with probability `1 - beta` (a union bound
//! over the `|Y|` entries of the bucket).

use rand::Rng;

use crate::bsvs::{AnswerMatrix, NoisyMatrix, PrivacyModel, PrivacyParams, Record};
use crate::error::{Error, Result};
use crate::rknn::{local_answer, reverse_knn_connect, DistanceMetric};
use crate::bsvs::QuerySet;

/// Inverse CDF of the zero-centered Laplace distribution with scale `scale`.
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param(format!("Laplace scale must be positive and finite, got {scale}")));
    }
    // open interval (0, 1): u = 0 would map to -inf
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    Ok(laplace_inverse_cdf(u, scale))
}

/// Noise scale `2kr / epsilon`; zero when `epsilon` is infinite.
pub fn laplace_scale(params: &PrivacyParams) -> f64 {
    params.sensitivity() / params.epsilon
}

/// Adds independent `Laplace(2kr / epsilon)` noise to every entry.
pub fn central_laplace_mechanism<R: Rng + ?Sized>(
    aggregate: &AnswerMatrix,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<NoisyMatrix> {
    params.validate()?;
    if params.model != PrivacyModel::Central {
        return Err(Error::param(format!(
            "central Laplace mechanism used with the {} model",
            params.model
        )));
    }
    aggregate.check_same_shape((params.s, params.label_count))?;
    let scale = laplace_scale(params);
    let mut noisy = aggregate.to_real();
    if scale > 0.0 {
        for v in noisy.as_flat_mut() {
            *v += sample_laplace(scale, rng)?;
        }
    }
    Ok(noisy)
}

/// `eta = 2kr ln(|Y| / beta) / epsilon`.
pub fn laplace_accuracy_bound(params: &PrivacyParams, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(params.sensitivity() * (params.label_count as f64 / beta).ln() / params.epsilon)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(format!("beta must lie in (0,1), got {beta}")));
    }
    Ok(())
}

/// Natural log of the Laplace output density ratio between two aggregates:
/// `sum |y - b| - |y - a|` over entries, divided by the scale. Bounded by
/// `||a - b||_1 / scale`.
pub fn laplace_log_density_ratio(output: &[f64], a: &[f64], b: &[f64], scale: f64) -> f64 {
    output
        .iter()
        .zip(a.iter().zip(b))
        .map(|(y, (a, b))| ((y - b).abs() - (y - a).abs()) / scale)
        .sum()
}

/// Two datasets of equal size that differ in exactly one record.
#[derive(Clone, Debug)]
pub struct NeighborPair {
    pub original: Vec<Record>,
    pub neighbor: Vec<Record>,
}

impl NeighborPair {
    fn check(&self) -> Result<()> {
        if self.original.len() != self.neighbor.len() {
            return Err(Error::param("neighboring datasets must have equal size"));
        }
        let differing = self
            .original
            .iter()
            .zip(&self.neighbor)
            .filter(|(a, b)| a != b)
            .count();
        if differing > 1 {
            return Err(Error::param(format!(
                "neighboring datasets differ in {differing} records"
            )));
        }
        Ok(())
    }
}

/// Largest L1 distance between exact aggregates over `trials` generated
/// neighbor pairs. Must never exceed `2kr`.
pub fn verify_sensitivity<R, G>(
    queries: &QuerySet,
    k: usize,
    label_count: usize,
    metric: DistanceMetric,
    trials: usize,
    rng: &mut R,
    mut generator: G,
) -> Result<i64>
where
    R: Rng + ?Sized,
    G: FnMut(&mut R) -> NeighborPair,
{
    let s = queries.len();
    let mut worst = 0;
    for _ in 0..trials {
        let pair = generator(rng);
        pair.check()?;
        let a = local_answer(
            &pair.original,
            &reverse_knn_connect(&pair.original, queries, k, metric)?,
            s,
            label_count,
        )?;
        let b = local_answer(
            &pair.neighbor,
            &reverse_knn_connect(&pair.neighbor, queries, k, metric)?,
            s,
            label_count,
        )?;
        worst = worst.max(a.l1_distance(&b)?);
    }
    Ok(worst)
}
