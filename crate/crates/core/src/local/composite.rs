//! Bucket-set and label-vector oracles built from two Collision estimates
//! whose product estimates each answer entry.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::collision::{CollisionParams, CollisionReport};
use crate::bsvs::{LabelVector, NoisyMatrix};
use crate::error::{Error, Result};

fn check_record(s: usize, labels: usize, k: usize, buckets: &[usize], label: &LabelVector) -> Result<()> {
    if buckets.len() != k || buckets.iter().any(|&b| b >= s) {
        return Err(Error::param(format!("expected {k} bucket indices below {s}")));
    }
    if label.domain() != labels {
        return Err(Error::shape(format!("label domain {labels}"), label.domain()));
    }
    Ok(())
}

fn outer_sum(rows: usize, cols: usize, pairs: impl Iterator<Item = (Vec<f64>, Vec<f64>)>) -> Result<NoisyMatrix> {
    let mut out = vec![0.0; rows * cols];
    for (a, b) in pairs {
        for (row, x) in out.chunks_mut(cols).zip(&a) {
            for (cell, y) in row.iter_mut().zip(&b) {
                *cell += x * y;
            }
        }
    }
    NoisyMatrix::from_flat(rows, cols, out)
}

/// Squared error summed over all entries of a rank-one estimate `a_hat b_hat^T`
/// against the rank-one truth `a b^T`, in `O(s + |Y|)`.
fn rank_one_squared_error(a_hat: &[f64], b_hat: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    dot(a_hat, a_hat) * dot(b_hat, b_hat) - 2.0 * dot(a, a_hat) * dot(b, b_hat) + dot(a, a) * dot(b, b)
}

fn indicator(len: usize, ones: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; len];
    for &i in ones {
        v[i] = 1.0;
    }
    v
}

/// Splits the budget evenly: one Collision report for the bucket set
/// (`d = s`, `c = k`) and one for the label vector (`d = |Y|`, `c = r`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationOracle {
    s: usize,
    labels: usize,
    buckets: CollisionParams,
    label: CollisionParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub buckets: CollisionReport,
    pub label: CollisionReport,
}

impl SeparationOracle {
    pub fn new(s: usize, labels: usize, k: usize, r: usize, epsilon: f64) -> Result<Self> {
        Ok(Self {
            s,
            labels,
            buckets: CollisionParams::with_default_length(s, k, epsilon / 2.0)?,
            label: CollisionParams::with_default_length(labels, r, epsilon / 2.0)?,
        })
    }

    pub fn bucket_params(&self) -> &CollisionParams {
        &self.buckets
    }

    pub fn label_params(&self) -> &CollisionParams {
        &self.label
    }

    pub fn encode<R: Rng + ?Sized>(
        &self,
        buckets: &[usize],
        label: &LabelVector,
        rng: &mut R,
    ) -> Result<SeparationReport> {
        check_record(self.s, self.labels, self.buckets.c(), buckets, label)?;
        Ok(SeparationReport {
            buckets: self.buckets.encode(buckets, rng)?,
            label: self.label.encode(label.ones(), rng)?,
        })
    }

    /// Bucket and label indicator estimates recovered from one report.
    pub fn factor_estimates(&self, report: &SeparationReport) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.buckets.estimate(&[report.buckets])?, self.label.estimate(&[report.label])?))
    }

    /// Sum over clients of the per-client outer products.
    pub fn estimate(&self, reports: &[SeparationReport]) -> Result<NoisyMatrix> {
        let factors = reports.iter().map(|r| self.factor_estimates(r)).collect::<Result<Vec<_>>>()?;
        outer_sum(self.s, self.labels, factors.into_iter())
    }

    /// Squared error summed over every entry for one client.
    pub fn squared_error(&self, report: &SeparationReport, buckets: &[usize], label: &LabelVector) -> Result<f64> {
        let (a_hat, b_hat) = self.factor_estimates(report)?;
        Ok(rank_one_squared_error(&a_hat, &b_hat, &indicator(self.s, buckets), &indicator(self.labels, label.ones())))
    }

    /// Expected per-entry squared error of one client's estimate.
    pub fn analytic_mse(&self) -> f64 {
        let second_moment = |p: &CollisionParams, member: bool| p.indicator_variance(member) + member as u8 as f64;
        let (k, r) = (self.buckets.c() as f64, self.label.c() as f64);
        let (s, y) = (self.s as f64, self.labels as f64);
        let (ai, ao) = (second_moment(&self.buckets, true), second_moment(&self.buckets, false));
        let (bi, bo) = (second_moment(&self.label, true), second_moment(&self.label, false));
        let total = k * r * (ai * bi - 1.0) + k * (y - r) * ai * bo + (s - k) * r * ao * bi + (s - k) * (y - r) * ao * bo;
        total / (s * y)
    }
}

/// One Collision report on the concatenated `s + |Y|` vector with `k + r`
/// nonzeros at the full budget.
///
/// [`estimate`](Self::estimate) multiplies the two recovered indicator
/// estimates. Both come from the same report, so on entries where the record
/// is present the product has mean `-1 / (l D)` with `D = e^eps/Omega - 1/l`
/// rather than 1. [`estimate_unbiased`](Self::estimate_unbiased) uses the
/// joint indicator `(X_a + X_b - l X_a X_b - 1/l) / D` instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcatenationOracle {
    s: usize,
    labels: usize,
    k: usize,
    params: CollisionParams,
}

impl ConcatenationOracle {
    pub fn new(s: usize, labels: usize, k: usize, r: usize, epsilon: f64) -> Result<Self> {
        Ok(Self {
            s,
            labels,
            k,
            params: CollisionParams::with_default_length(s + labels, k + r, epsilon)?,
        })
    }

    pub fn params(&self) -> &CollisionParams {
        &self.params
    }

    pub fn encode<R: Rng + ?Sized>(&self, buckets: &[usize], label: &LabelVector, rng: &mut R) -> Result<CollisionReport> {
        check_record(self.s, self.labels, self.k, buckets, label)?;
        let support: Vec<usize> = buckets.iter().copied().chain(label.ones().iter().map(|y| self.s + y)).collect();
        self.params.encode(&support, rng)
    }

    fn hits(&self, report: &CollisionReport) -> Vec<f64> {
        (0..self.s + self.labels)
            .map(|v| (self.params.hash(report.hash_seed, v) == report.message) as u8 as f64)
            .collect()
    }

    /// Bucket and label indicator estimates recovered from one report.
    pub fn factor_estimates(&self, report: &CollisionReport) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut all = self.params.estimate(&[*report])?;
        let labels = all.split_off(self.s);
        Ok((all, labels))
    }

    /// Sum over clients of the products of indicator estimates.
    pub fn estimate(&self, reports: &[CollisionReport]) -> Result<NoisyMatrix> {
        let factors = reports.iter().map(|r| self.factor_estimates(r)).collect::<Result<Vec<_>>>()?;
        outer_sum(self.s, self.labels, factors.into_iter())
    }

    /// Sum over clients of the unbiased joint-indicator estimates.
    pub fn estimate_unbiased(&self, reports: &[CollisionReport]) -> Result<NoisyMatrix> {
        let denominator = self.params.estimator_denominator();
        if !(denominator > 0.0) {
            return Err(Error::param("Concatenation estimator undefined at this budget"));
        }
        let l = self.params.l() as f64;
        let mut out = vec![0.0; self.s * self.labels];
        for report in reports {
            let hits = self.hits(report);
            let (a, b) = hits.split_at(self.s);
            for (row, x) in out.chunks_mut(self.labels).zip(a) {
                for (cell, y) in row.iter_mut().zip(b) {
                    *cell += (x + y - l * x * y - 1.0 / l) / denominator;
                }
            }
        }
        NoisyMatrix::from_flat(self.s, self.labels, out)
    }

    /// Squared error of the product estimate summed over every entry for one client.
    pub fn squared_error(&self, report: &CollisionReport, buckets: &[usize], label: &LabelVector) -> Result<f64> {
        let (a_hat, b_hat) = self.factor_estimates(report)?;
        Ok(rank_one_squared_error(&a_hat, &b_hat, &indicator(self.s, buckets), &indicator(self.labels, label.ones())))
    }

    /// Expected per-entry squared error of one client's estimate, for the
    /// product (`unbiased = false`) or the joint-indicator estimator.
    pub fn analytic_mse(&self, unbiased: bool) -> f64 {
        let l = self.params.l() as f64;
        let q = self.params.hit_probability();
        let denominator = self.params.estimator_denominator();
        let estimate = |x: f64, y: f64| {
            if unbiased {
                (x + y - l * x * y - 1.0 / l) / denominator
            } else {
                (x - 1.0 / l) * (y - 1.0 / l) / (denominator * denominator)
            }
        };
        // joint law of the two hit indicators under an ideal hash
        let case = |a_in: bool, b_in: bool, truth: f64| {
            let (pa, pb) = (if a_in { q } else { 1.0 / l }, if b_in { q } else { 1.0 / l });
            let p11 = match (a_in, b_in) {
                (true, true) => q / l,
                _ => pa * pb,
            };
            let p10 = pa - p11;
            let p01 = pb - p11;
            let p00 = 1.0 - p11 - p10 - p01;
            [(p11, 1.0, 1.0), (p10, 1.0, 0.0), (p01, 0.0, 1.0), (p00, 0.0, 0.0)]
                .iter()
                .map(|&(p, x, y)| p * (estimate(x, y) - truth).powi(2))
                .sum::<f64>()
        };
        let k = self.k as f64;
        let r = (self.params.c() - self.k) as f64;
        let (s, y) = (self.s as f64, self.labels as f64);
        let total = k * r * case(true, true, 1.0)
            + k * (y - r) * case(true, false, 0.0)
            + (s - k) * r * case(false, true, 0.0)
            + (s - k) * (y - r) * case(false, false, 0.0);
        total / (s * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn label(domain: usize, ones: &[usize]) -> LabelVector {
        LabelVector::new(domain, ones.to_vec()).unwrap()
    }

    #[test]
    fn rank_one_error_matches_direct_sum() {
        let a_hat = [0.5f64, -1.0, 2.0];
        let b_hat = [1.5, 0.25];
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 1.0];
        let direct: f64 = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (a_hat[i] * b_hat[j] - a[i] * b[j]).powi(2))
            .sum();
        assert!((rank_one_squared_error(&a_hat, &b_hat, &a, &b) - direct).abs() < 1e-12);
    }

    #[test]
    fn separation_is_unbiased() {
        let oracle = SeparationOracle::new(4, 3, 1, 1, 2.0).unwrap();
        let y = label(3, &[2]);
        let mut rng = rng_from_seed(12);
        let n = 100_000;
        let reports: Vec<_> = (0..n).map(|_| oracle.encode(&[1], &y, &mut rng).unwrap()).collect();
        let est = oracle.estimate(&reports).unwrap();
        let truth_sd = (oracle.analytic_mse() * 12.0).sqrt();
        for q in 0..4 {
            for c in 0..3 {
                let truth = (q == 1 && c == 2) as u8 as f64;
                assert!((est.get(q, c) / n as f64 - truth).abs() < 4.0 * truth_sd / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn huge_budget_has_no_leakage() {
        // hash collisions vanish, so off-support entries are exactly zero
        // up to the 1/l offset; the support entry stays a noisy unbiased estimate
        let oracle = SeparationOracle::new(5, 4, 1, 1, 60.0).unwrap();
        let y = label(4, &[3]);
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let report = oracle.encode(&[2], &y, &mut rng).unwrap();
            let est = oracle.estimate(&[report]).unwrap();
            for q in 0..5 {
                for c in 0..4 {
                    if (q, c) != (2, 3) {
                        assert!(est.get(q, c).abs() < 1e-6);
                    }
                }
            }
            let support = est.get(2, 3);
            assert!([0.0, 2.0, 4.0].iter().any(|v| (support - v).abs() < 1e-6), "{support}");
        }
    }

    #[test]
    fn concatenation_unbiased_variant() {
        let oracle = ConcatenationOracle::new(3, 3, 1, 1, 2.0).unwrap();
        let y = label(3, &[0]);
        let mut rng = rng_from_seed(13);
        let n = 100_000;
        let reports: Vec<_> = (0..n).map(|_| oracle.encode(&[2], &y, &mut rng).unwrap()).collect();
        let est = oracle.estimate_unbiased(&reports).unwrap();
        let sd = (oracle.analytic_mse(true) * 9.0).sqrt();
        for q in 0..3 {
            for c in 0..3 {
                let truth = (q == 2 && c == 0) as u8 as f64;
                assert!((est.get(q, c) / n as f64 - truth).abs() < 4.0 * sd / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn concatenation_product_mean_on_support() {
        let oracle = ConcatenationOracle::new(3, 3, 1, 1, 2.0).unwrap();
        let p = oracle.params();
        let ld = p.l() as f64 * p.estimator_denominator();
        let y = label(3, &[1]);
        let mut rng = rng_from_seed(14);
        let n = 100_000;
        let reports: Vec<_> = (0..n).map(|_| oracle.encode(&[0], &y, &mut rng).unwrap()).collect();
        let mean = oracle.estimate(&reports).unwrap().get(0, 1) / n as f64;
        let sd = (oracle.analytic_mse(false) * 9.0).sqrt();
        assert!((mean + 1.0 / ld).abs() < 4.0 * sd / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn analytic_mse_matches_simulation() {
        let sep = SeparationOracle::new(6, 4, 2, 1, 3.0).unwrap();
        let cat = ConcatenationOracle::new(6, 4, 2, 1, 3.0).unwrap();
        let y = label(4, &[3]);
        let buckets = [1, 4];
        let mut rng = rng_from_seed(15);
        let n = 100_000;
        let mut sep_total = 0.0;
        let mut cat_total = 0.0;
        let mut cat_unbiased = 0.0;
        let truth = {
            let mut t = vec![0.0; 24];
            for b in buckets {
                t[b * 4 + 3] = 1.0;
            }
            t
        };
        for _ in 0..n {
            let r = sep.encode(&buckets, &y, &mut rng).unwrap();
            sep_total += sep.squared_error(&r, &buckets, &y).unwrap();
            let c = cat.encode(&buckets, &y, &mut rng).unwrap();
            cat_total += cat.squared_error(&c, &buckets, &y).unwrap();
            let u = cat.estimate_unbiased(&[c]).unwrap();
            cat_unbiased += u.as_flat().iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        for (sim, analytic) in [
            (sep_total, sep.analytic_mse()),
            (cat_total, cat.analytic_mse(false)),
            (cat_unbiased, cat.analytic_mse(true)),
        ] {
            let sim = sim / (n as f64 * 24.0);
            assert!((sim / analytic - 1.0).abs() < 0.05, "simulated {sim}, analytic {analytic}");
        }
    }

    #[test]
    fn rejects_malformed_records() {
        let oracle = SeparationOracle::new(4, 3, 2, 1, 1.0).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(oracle.encode(&[1], &label(3, &[0]), &mut rng).is_err());
        assert!(oracle.encode(&[1, 4], &label(3, &[0]), &mut rng).is_err());
        assert!(oracle.encode(&[1, 2], &label(4, &[0]), &mut rng).is_err());
    }
}
