use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hash::hash_to_range;
use super::log_term;
use crate::error::{Error, Result};

/// Largest filter length accepted; keeps `l` exactly representable as `f64`.
pub const MAX_FILTER_LENGTH: u64 = 1 << 52;

/// Parameters of the `(d, c, epsilon, l)` Collision mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    d: usize,
    c: usize,
    epsilon: f64,
    l: u64,
}

/// One Collision report: the per-report hash key and the emitted cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollisionReport {
    pub hash_seed: u64,
    pub message: u64,
}

impl CollisionParams {
    pub fn new(d: usize, c: usize, epsilon: f64, l: u64) -> Result<Self> {
        if d == 0 || c == 0 || c > d {
            return Err(Error::param(format!("Collision needs 1 <= c <= d, got c={c}, d={d}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::param(format!("Collision epsilon must be finite and nonnegative, got {epsilon}")));
        }
        if l < 2 {
            return Err(Error::param(format!("filter length must be at least 2, got {l}")));
        }
        if l > MAX_FILTER_LENGTH {
            return Err(Error::TooLarge(format!("filter length {l} exceeds {MAX_FILTER_LENGTH}")));
        }
        Ok(Self { d, c, epsilon, l })
    }

    /// Uses the default filter length `round(2c - 1 + c e^epsilon)`, at least 2.
    pub fn with_default_length(d: usize, c: usize, epsilon: f64) -> Result<Self> {
        Self::new(d, c, epsilon, Self::default_length(c, epsilon)?)
    }

    pub fn default_length(c: usize, epsilon: f64) -> Result<u64> {
        let l = (2.0 * c as f64 - 1.0 + c as f64 * epsilon.exp()).round().max(2.0);
        if !(l <= MAX_FILTER_LENGTH as f64) {
            return Err(Error::TooLarge(format!("filter length for epsilon={epsilon} is {l}")));
        }
        Ok(l as u64)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    /// `Omega = c e^epsilon + l - c`.
    pub fn omega(&self) -> f64 {
        self.c as f64 * self.epsilon.exp() + self.l as f64 - self.c as f64
    }

    /// Probability of each cell hit by the hashed support.
    pub fn hit_probability(&self) -> f64 {
        self.epsilon.exp() / self.omega()
    }

    /// Probability of each cell missed by the hashed support, given the number
    /// of distinct hashed values. `None` when every cell is hit.
    pub fn miss_probability(&self, distinct: u64) -> Option<f64> {
        if distinct >= self.l {
            return None;
        }
        let omega = self.omega();
        Some((omega - self.epsilon.exp() * distinct as f64) / ((self.l - distinct) as f64 * omega))
    }

    /// `e^epsilon / Omega - 1/l`; positive exactly when `l > c` and `epsilon > 0`.
    pub fn estimator_denominator(&self) -> f64 {
        self.hit_probability() - 1.0 / self.l as f64
    }

    fn checked_denominator(&self) -> Result<f64> {
        let denominator = self.estimator_denominator();
        if !(denominator > 0.0) {
            return Err(Error::param(format!(
                "Collision estimator undefined: e^eps/Omega - 1/l = {denominator} (l={}, c={})",
                self.l, self.c
            )));
        }
        Ok(denominator)
    }

    fn check_support(&self, support: &[usize]) -> Result<()> {
        if support.len() != self.c {
            return Err(Error::param(format!(
                "Collision input has {} nonzeros, expected c={}",
                support.len(),
                self.c
            )));
        }
        let distinct: BTreeSet<_> = support.iter().collect();
        if distinct.len() != support.len() || support.iter().any(|&v| v >= self.d) {
            return Err(Error::param("Collision input must be distinct indices below d"));
        }
        Ok(())
    }

    /// Hash of coordinate `v` under a report key.
    pub fn hash(&self, hash_seed: u64, v: usize) -> u64 {
        hash_to_range(hash_seed, v as u64, self.l)
    }

    /// Full output distribution over `0..l` given the hashed support values.
    /// When the support covers every cell the output is uniform.
    pub fn output_probabilities(&self, hashed: &[u64]) -> Vec<f64> {
        let hit: BTreeSet<u64> = hashed.iter().copied().collect();
        let l = self.l as usize;
        match self.miss_probability(hit.len() as u64) {
            None => vec![1.0 / l as f64; l],
            Some(miss) => {
                let mut probabilities = vec![miss; l];
                for &z in &hit {
                    probabilities[z as usize] = self.hit_probability();
                }
                probabilities
            }
        }
    }

    /// Samples one cell given the hashed support values.
    pub fn sample_hashed<R: Rng + ?Sized>(&self, hashed: &[u64], rng: &mut R) -> u64 {
        let hit: Vec<u64> = hashed.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let m = hit.len() as u64;
        if m >= self.l {
            return rng.random_range(0..self.l);
        }
        let hit_mass = m as f64 * self.hit_probability();
        if rng.random::<f64>() < hit_mass {
            return hit[rng.random_range(0..hit.len())];
        }
        loop {
            let z = rng.random_range(0..self.l);
            if hit.binary_search(&z).is_err() {
                return z;
            }
        }
    }

    /// Privatizes a support set of exactly `c` coordinates with a fresh hash key.
    pub fn encode<R: Rng + ?Sized>(&self, support: &[usize], rng: &mut R) -> Result<CollisionReport> {
        let hash_seed = rng.random();
        self.encode_with_seed(support, hash_seed, rng)
    }

    pub fn encode_with_seed<R: Rng + ?Sized>(
        &self,
        support: &[usize],
        hash_seed: u64,
        rng: &mut R,
    ) -> Result<CollisionReport> {
        self.check_support(support)?;
        let hashed: Vec<u64> = support.iter().map(|&v| self.hash(hash_seed, v)).collect();
        Ok(CollisionReport { hash_seed, message: self.sample_hashed(&hashed, rng) })
    }

    /// Unbiased membership estimate for coordinate `v` from one report.
    pub fn indicator_estimate(&self, report: &CollisionReport, v: usize) -> Result<f64> {
        let denominator = self.checked_denominator()?;
        let hit = (self.hash(report.hash_seed, v) == report.message) as u8 as f64;
        Ok((hit - 1.0 / self.l as f64) / denominator)
    }

    /// Summed per-coordinate estimates over all reports, length `d`.
    pub fn estimate(&self, reports: &[CollisionReport]) -> Result<Vec<f64>> {
        let denominator = self.checked_denominator()?;
        let mut hits = vec![0u64; self.d];
        for report in reports {
            if report.message >= self.l {
                return Err(Error::param(format!("message {} outside filter of length {}", report.message, self.l)));
            }
            for (v, h) in hits.iter_mut().enumerate() {
                *h += (self.hash(report.hash_seed, v) == report.message) as u64;
            }
        }
        let offset = reports.len() as f64 / self.l as f64;
        Ok(hits.into_iter().map(|h| (h as f64 - offset) / denominator).collect())
    }

    /// Squared error of one report's estimate summed over all `d` coordinates
    /// against the indicator of `support`.
    pub fn squared_error(&self, report: &CollisionReport, support: &[usize]) -> Result<f64> {
        self.check_support(support)?;
        let denominator = self.checked_denominator()?;
        let miss = -1.0 / self.l as f64 / denominator;
        let hit = (1.0 - 1.0 / self.l as f64) / denominator;
        let hits = (0..self.d).filter(|&v| self.hash(report.hash_seed, v) == report.message).count();
        let support_hits = support.iter().filter(|&&v| self.hash(report.hash_seed, v) == report.message).count();
        let off_hits = (hits - support_hits) as f64;
        let off_misses = (self.d - support.len()) as f64 - off_hits;
        let on_hits = support_hits as f64;
        let on_misses = (support.len() - support_hits) as f64;
        Ok(off_hits * hit * hit
            + off_misses * miss * miss
            + on_hits * (hit - 1.0).powi(2)
            + on_misses * (miss - 1.0).powi(2))
    }

    /// Variance of a single-report indicator estimate under an ideal hash.
    pub fn indicator_variance(&self, member: bool) -> f64 {
        let denominator = self.estimator_denominator();
        let p = if member { self.hit_probability() } else { 1.0 / self.l as f64 };
        p * (1.0 - p) / (denominator * denominator)
    }

    /// Mean squared error per coordinate of a single report.
    pub fn per_entry_mse(&self) -> f64 {
        let c = self.c as f64;
        let d = self.d as f64;
        (c * self.indicator_variance(true) + (d - c) * self.indicator_variance(false)) / d
    }
}

/// Per-bucket max-norm error bound for `n` Collision reports with the
/// default filter length `2kr - 1 + kr e^epsilon`.
pub fn collision_accuracy_bound(epsilon: f64, k: usize, r: usize, n: usize, labels: usize, beta: f64) -> Result<f64> {
    super::check_epsilon(epsilon)?;
    let log = log_term(labels, beta)?;
    let kr = (k * r) as f64;
    let e = epsilon.exp();
    let l = 2.0 * kr - 1.0 + kr * e;
    let numerator = (kr * e + 2.0 * kr - 1.0) * (2.0 * kr * e + kr - 1.0);
    let denominator = kr * (e * e - 1.0) - (e - 1.0);
    Ok(numerator / denominator * (2.0 * n as f64 * log / l).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::subsets;
    use crate::seed::rng_from_seed;

    fn fixture() -> CollisionParams {
        CollisionParams::with_default_length(4, 1, 2f64.ln()).unwrap()
    }

    #[test]
    fn fixture_probabilities() {
        let p = fixture();
        assert_eq!(p.l(), 3);
        assert!((p.omega() - 4.0).abs() < 1e-12);
        let probs = p.output_probabilities(&[1]);
        assert!((probs[1] - 0.5).abs() < 1e-12);
        assert!((probs[0] - 0.25).abs() < 1e-12);
        assert!((probs[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fixture_estimator() {
        let p = fixture();
        let report = CollisionReport { hash_seed: 99, message: p.hash(99, 2) };
        assert!((p.indicator_estimate(&report, 2).unwrap() - 4.0).abs() < 1e-12);
        let miss = CollisionReport { hash_seed: 99, message: (p.hash(99, 2) + 1) % 3 };
        assert!((p.indicator_estimate(&miss, 2).unwrap() + 2.0).abs() < 1e-12);
        // 6 * hit - 2
        assert!((1.0 / (0.5 - 1.0 / 3.0) - 6.0f64).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_is_uniform() {
        let p = CollisionParams::with_default_length(6, 2, 0.0).unwrap();
        for hashed in [[0u64, 1], [2, 2]] {
            for q in p.output_probabilities(&hashed) {
                assert!((q - 1.0 / p.l() as f64).abs() < 1e-15);
            }
        }
        assert!(p.indicator_estimate(&CollisionReport { hash_seed: 0, message: 0 }, 0).is_err());
    }

    #[test]
    fn distributions_sum_to_one() {
        let mut rng = rng_from_seed(4);
        for _ in 0..1000 {
            let c = rng.random_range(1..5usize);
            let eps = rng.random_range(0.0..4.0);
            let p = CollisionParams::with_default_length(20, c, eps).unwrap();
            let hashed: Vec<u64> = (0..c).map(|_| rng.random_range(0..p.l())).collect();
            let total: f64 = p.output_probabilities(&hashed).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_filter_is_uniform() {
        let p = CollisionParams::new(5, 3, 1.0, 2).unwrap();
        assert_eq!(p.miss_probability(2), None);
        assert_eq!(p.output_probabilities(&[0, 1, 1]), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CollisionParams::with_default_length(8, 2, 1.0).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(p.encode(&[1], &mut rng).is_err());
        assert!(p.encode(&[1, 1], &mut rng).is_err());
        assert!(p.encode(&[1, 8], &mut rng).is_err());
        assert!(CollisionParams::new(4, 5, 1.0, 3).is_err());
        assert!(CollisionParams::new(4, 1, 1.0, 1).is_err());
        assert!(CollisionParams::with_default_length(4, 1, 100.0).is_err());
        // l <= c leaves no signal
        assert!(CollisionParams::new(4, 2, 1.0, 2)
            .unwrap()
            .indicator_estimate(&CollisionReport { hash_seed: 0, message: 0 }, 0)
            .is_err());
    }

    #[test]
    fn squared_error_matches_direct_sum() {
        let p = CollisionParams::with_default_length(30, 3, 1.0).unwrap();
        let mut rng = rng_from_seed(4);
        let support = [2, 11, 29];
        for _ in 0..20 {
            let report = p.encode(&support, &mut rng).unwrap();
            let direct: f64 = (0..30)
                .map(|v| {
                    let truth = support.contains(&v) as u8 as f64;
                    (p.indicator_estimate(&report, v).unwrap() - truth).powi(2)
                })
                .sum();
            assert!((p.squared_error(&report, &support).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn sampler_matches_distribution() {
        let p = CollisionParams::with_default_length(10, 2, 1.0).unwrap();
        let hashed = [1u64, 4];
        let probs = p.output_probabilities(&hashed);
        let mut rng = rng_from_seed(5);
        let n = 200_000;
        let mut counts = vec![0usize; p.l() as usize];
        for _ in 0..n {
            counts[p.sample_hashed(&hashed, &mut rng) as usize] += 1;
        }
        for (c, q) in counts.iter().zip(&probs) {
            let sd = (q * (1.0 - q) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - q).abs() < 5.0 * sd);
        }
    }

    /// Expected estimate for one coordinate averaged over every function
    /// `[d] -> [l]` and every output.
    fn ideal_hash_expectation(p: &CollisionParams, support: &[usize], v: usize) -> f64 {
        let d = p.d();
        let l = p.l() as usize;
        let functions = l.pow(d as u32);
        let denominator = p.estimator_denominator();
        let mut total = 0.0;
        for code in 0..functions {
            let h: Vec<u64> = (0..d).map(|i| ((code / l.pow(i as u32)) % l) as u64).collect();
            let hashed: Vec<u64> = support.iter().map(|&s| h[s]).collect();
            for (z, q) in p.output_probabilities(&hashed).into_iter().enumerate() {
                let hit = (h[v] == z as u64) as u8 as f64;
                total += q * (hit - 1.0 / l as f64) / denominator;
            }
        }
        total / functions as f64
    }

    #[test]
    fn single_support_unbiased_by_enumeration() {
        for eps in [0.1, 2f64.ln(), 1.0] {
            let p = CollisionParams::with_default_length(3, 1, eps).unwrap();
            assert!((ideal_hash_expectation(&p, &[1], 1) - 1.0).abs() < 1e-9, "eps {eps}");
            assert!(ideal_hash_expectation(&p, &[1], 0).abs() < 1e-9);
        }
    }

    #[test]
    fn pair_support_unbiased_by_enumeration() {
        let p = CollisionParams::with_default_length(4, 2, 0.5).unwrap();
        for support in subsets(4, 2) {
            for v in 0..4 {
                let truth = support.contains(&v) as u8 as f64;
                assert!((ideal_hash_expectation(&p, &support, v) - truth).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn monte_carlo_unbiased() {
        let p = CollisionParams::with_default_length(8, 2, 1.0).unwrap();
        let support = [2, 5];
        let mut rng = rng_from_seed(6);
        let n = 100_000;
        let reports: Vec<_> = (0..n).map(|_| p.encode(&support, &mut rng).unwrap()).collect();
        let sums = p.estimate(&reports).unwrap();
        for (v, s) in sums.iter().enumerate() {
            let truth = support.contains(&v) as u8 as f64;
            let sd = p.indicator_variance(truth > 0.0).sqrt();
            assert!((s / n as f64 - truth).abs() < 4.0 * sd / (n as f64).sqrt(), "v {v}: {}", s / n as f64);
        }
    }

    #[test]
    fn unseen_cell_gives_negative_estimate() {
        let p = fixture();
        let report = CollisionReport { hash_seed: 1, message: (p.hash(1, 0) + 1) % p.l() };
        assert!(p.indicator_estimate(&report, 0).unwrap() < 0.0);
    }

    #[test]
    fn bound_examples() {
        let e = 1f64.exp();
        let (n, labels, beta) = (100, 10, 0.05);
        let log = (labels as f64 / beta).ln();
        let direct = 2.0 * (e + 1.0) / (e - 1.0) * (2.0 * n as f64 * log / (1.0 + e)).sqrt();
        assert!((collision_accuracy_bound(1.0, 1, 1, n, labels, beta).unwrap() - direct).abs() < 1e-9);

        let mut last = f64::INFINITY;
        for i in 1..=100 {
            let b = collision_accuracy_bound(i as f64 / 100.0, 4, 2, n, labels, beta).unwrap();
            assert!(b < last);
            last = b;
        }

        let ratio = super::super::rr_accuracy_bound(0.1, 4, 4, n, labels, beta).unwrap()
            / collision_accuracy_bound(0.1, 4, 4, n, labels, beta).unwrap();
        assert!((2.0..=8.0).contains(&ratio), "ratio {ratio}");
    }
}
