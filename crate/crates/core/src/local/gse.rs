use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln C(n, k)`; negative infinity when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|j| ((n - j) as f64).ln() - ((j + 1) as f64).ln()).sum()
}

/// Parameters of the subset-output GSE mechanism: outputs a size-`l` subset
/// of `[d]`, tilted by `e^epsilon` when it meets the true support in at least
/// `alpha_min` elements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GseParams {
    d: usize,
    c: usize,
    epsilon: f64,
    l: usize,
    alpha_min: usize,
    /// Probability of each intersection size `0..=min(c, l)`.
    intersection: Vec<f64>,
    ln_omega: f64,
}

impl GseParams {
    pub fn new(d: usize, c: usize, epsilon: f64, l: usize, alpha_min: usize) -> Result<Self> {
        if c == 0 || c > d {
            return Err(Error::param(format!("GSE needs 1 <= c <= d, got c={c}, d={d}")));
        }
        if l == 0 || l > d {
            return Err(Error::param(format!("GSE output size must lie in 1..={d}, got {l}")));
        }
        if alpha_min == 0 || alpha_min > c.min(l) {
            return Err(Error::param(format!(
                "alpha_min must lie in 1..={}, got {alpha_min}",
                c.min(l)
            )));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::param(format!("GSE epsilon must be finite and nonnegative, got {epsilon}")));
        }
        let log_weights: Vec<f64> = (0..=c.min(l))
            .map(|i| {
                let tilt = if i >= alpha_min { epsilon } else { 0.0 };
                tilt + ln_binomial(c, i) + ln_binomial(d - c, l - i)
            })
            .collect();
        let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_weights.iter().map(|w| (w - top).exp()).sum();
        let intersection = log_weights.iter().map(|w| (w - top).exp() / total).collect();
        Ok(Self { d, c, epsilon, l, alpha_min, intersection, ln_omega: top + total.ln() })
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

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn alpha_min(&self) -> usize {
        self.alpha_min
    }

    /// Normalizer over all size-`l` subsets (may overflow to infinity).
    pub fn omega(&self) -> f64 {
        self.ln_omega.exp()
    }

    fn weight(&self, overlap: usize) -> f64 {
        if overlap >= self.alpha_min {
            self.epsilon
        } else {
            0.0
        }
    }

    /// Probability of emitting `subset` given support `support`.
    pub fn subset_probability(&self, support: &[usize], subset: &[usize]) -> f64 {
        if subset.len() != self.l {
            return 0.0;
        }
        let overlap = subset.iter().filter(|z| support.contains(z)).count();
        (self.weight(overlap) - self.ln_omega).exp()
    }

    /// `P[v in Z | v in V]`.
    pub fn p_true(&self) -> f64 {
        self.intersection
            .iter()
            .enumerate()
            .map(|(i, p)| p * i as f64 / self.c as f64)
            .sum()
    }

    /// `P[v in Z | v not in V]`.
    pub fn p_false(&self) -> f64 {
        if self.d == self.c {
            return 0.0;
        }
        self.intersection
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.l - i) as f64 / (self.d - self.c) as f64)
            .sum()
    }

    fn checked_gap(&self) -> Result<(f64, f64)> {
        let (pt, pf) = (self.p_true(), self.p_false());
        if !(pt - pf > 1e-15) {
            return Err(Error::param(format!("GSE estimator undefined: p_t={pt}, p_f={pf}")));
        }
        Ok((pt, pf))
    }

    fn check_support(&self, support: &[usize]) -> Result<Vec<bool>> {
        if support.len() != self.c {
            return Err(Error::param(format!("GSE input has {} nonzeros, expected c={}", support.len(), self.c)));
        }
        let mut member = vec![false; self.d];
        for &v in support {
            if v >= self.d || member[v] {
                return Err(Error::param("GSE input must be distinct indices below d"));
            }
            member[v] = true;
        }
        Ok(member)
    }

    /// Draws an intersection size, then uniform subsets of the support and
    /// of its complement. Output is sorted.
    pub fn encode<R: Rng + ?Sized>(&self, support: &[usize], rng: &mut R) -> Result<Vec<usize>> {
        let member = self.check_support(support)?;
        let mut u: f64 = rng.random();
        let mut size = self.intersection.len() - 1;
        for (i, p) in self.intersection.iter().enumerate() {
            if u < *p {
                size = i;
                break;
            }
            u -= p;
        }
        while self.intersection[size] == 0.0 {
            size -= 1;
        }
        let outside: Vec<usize> = (0..self.d).filter(|&v| !member[v]).collect();
        let mut subset: Vec<usize> = sample(rng, self.c, size).into_iter().map(|i| support[i]).collect();
        subset.extend(sample(rng, outside.len(), self.l - size).into_iter().map(|i| outside[i]));
        subset.sort_unstable();
        Ok(subset)
    }

    /// Unbiased membership estimate for `v` from one output subset.
    pub fn indicator_estimate(&self, subset: &[usize], v: usize) -> Result<f64> {
        let (pt, pf) = self.checked_gap()?;
        Ok((subset.contains(&v) as u8 as f64 - pf) / (pt - pf))
    }

    /// Summed per-coordinate estimates over all outputs, length `d`.
    pub fn estimate(&self, outputs: &[Vec<usize>]) -> Result<Vec<f64>> {
        let (pt, pf) = self.checked_gap()?;
        let mut hits = vec![0u64; self.d];
        for subset in outputs {
            if subset.len() != self.l {
                return Err(Error::param(format!("GSE output of size {}, expected {}", subset.len(), self.l)));
            }
            for &z in subset {
                *hits.get_mut(z).ok_or_else(|| Error::param(format!("GSE output index {z} >= d")))? += 1;
            }
        }
        let offset = outputs.len() as f64 * pf;
        Ok(hits.into_iter().map(|h| (h as f64 - offset) / (pt - pf)).collect())
    }
}
