use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};

/// Discrete-Laplace parameter `q = e^{-epsilon / 4kr}` matching `Laplace(4kr / epsilon)`.
pub fn discrete_laplace_q(epsilon: f64, kr: usize) -> Result<f64> {
    if !(epsilon > 0.0) || kr == 0 {
        return Err(Error::param(format!("need epsilon > 0 and kr >= 1, got {epsilon}, {kr}")));
    }
    Ok((-epsilon / (4 * kr) as f64).exp())
}

/// `P[X = x] = (1 - q) / (1 + q) q^|x|`.
pub fn discrete_laplace_pmf(x: i64, q: f64) -> f64 {
    (1.0 - q) / (1.0 + q) * q.powi(x.unsigned_abs().min(i32::MAX as u64) as i32)
}

pub fn discrete_laplace_variance(q: f64) -> f64 {
    2.0 * q / ((1.0 - q) * (1.0 - q))
}

/// `P[X = x]` for the negative binomial with real shape `shape`:
/// `Gamma(x + shape) / (x! Gamma(shape)) (1 - q)^shape q^x`.
pub fn neg_binomial_pmf(x: u64, shape: f64, q: f64) -> f64 {
    let mut p = (1.0 - q).powf(shape);
    for j in 0..x {
        p *= (j as f64 + shape) / (j as f64 + 1.0) * q;
    }
    p
}

/// Negative binomial draw via its Poisson mixture over a Gamma rate.
pub fn sample_neg_binomial<R: Rng + ?Sized>(shape: f64, q: f64, rng: &mut R) -> Result<u64> {
    if !(shape > 0.0) || !(0.0..1.0).contains(&q) {
        return Err(Error::param(format!("negative binomial needs shape > 0 and q in [0,1), got {shape}, {q}")));
    }
    if q == 0.0 {
        return Ok(0);
    }
    let gamma = Gamma::new(shape, q / (1.0 - q)).map_err(|e| Error::param(e.to_string()))?;
    let rate: f64 = gamma.sample(rng);
    if !(rate > 0.0) {
        return Ok(0);
    }
    let poisson = Poisson::new(rate).map_err(|e| Error::param(e.to_string()))?;
    Ok(poisson.sample(rng) as u64)
}

/// One client's noise share for one coordinate: the difference of two
/// negative binomials of shape `1/n`. Summed over `n` clients it is
/// discrete-Laplace with parameter `q`.
pub fn sample_neg_binomial_share<R: Rng + ?Sized>(n: usize, epsilon: f64, kr: usize, rng: &mut R) -> Result<i64> {
    if n == 0 {
        return Err(Error::param("need at least one client"));
    }
    let q = discrete_laplace_q(epsilon, kr)?;
    let shape = 1.0 / n as f64;
    Ok(sample_neg_binomial(shape, q, rng)? as i64 - sample_neg_binomial(shape, q, rng)? as i64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Chi-square p-value of integer samples against a pmf, pooling the
    /// tails so every cell expects at least 5 observations.
    pub(crate) fn chi_square_pvalue(samples: &[i64], pmf: impl Fn(i64) -> f64) -> f64 {
        let n = samples.len() as f64;
        let mut lo = 0i64;
        while pmf(lo - 1) * n >= 5.0 {
            lo -= 1;
        }
        let mut hi = 0i64;
        while pmf(hi + 1) * n >= 5.0 {
            hi += 1;
        }
        let cells = (hi - lo + 1) as usize;
        let mut observed = vec![0f64; cells + 2];
        for &x in samples {
            let i = if x < lo { 0 } else if x > hi { cells + 1 } else { (x - lo) as usize + 1 };
            observed[i] += 1.0;
        }
        let mut expected: Vec<f64> = (lo..=hi).map(|x| pmf(x) * n).collect();
        let inner: f64 = expected.iter().sum();
        let below: f64 = (1..200).map(|j| pmf(lo - j)).sum::<f64>() * n;
        let above = n - inner - below;
        expected.insert(0, below);
        expected.push(above);
        let mut chi = 0.0;
        let mut dof = 0;
        for (o, e) in observed.iter().zip(&expected) {
            if *e > 0.0 {
                chi += (o - e).powi(2) / e;
                dof += 1;
            }
        }
        1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(chi)
    }

    #[test]
    fn pmfs_normalize() {
        let q = 0.7;
        let total: f64 = (-200..=200).map(|x| discrete_laplace_pmf(x, q)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let total: f64 = (0..2000).map(|x| neg_binomial_pmf(x, 0.3, q)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // shape 1 is geometric
        assert!((neg_binomial_pmf(3, 1.0, q) - 0.3 * q.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn variance_matches_pmf() {
        let q = 0.6;
        let direct: f64 = (-400..=400i64).map(|x| (x * x) as f64 * discrete_laplace_pmf(x, q)).sum();
        assert!((direct - discrete_laplace_variance(q)).abs() < 1e-9);
    }

    #[test]
    fn single_client_share_is_discrete_laplace() {
        let mut rng = rng_from_seed(20);
        let q = discrete_laplace_q(1.0, 1).unwrap();
        let samples: Vec<i64> = (0..100_000).map(|_| sample_neg_binomial_share(1, 1.0, 1, &mut rng).unwrap()).collect();
        assert!(chi_square_pvalue(&samples, |x| discrete_laplace_pmf(x, q)) > 0.01);
        let mean = samples.iter().sum::<i64>() as f64 / samples.len() as f64;
        let sd = discrete_laplace_variance(q).sqrt();
        assert!(mean.abs() < 4.0 * sd / (samples.len() as f64).sqrt());
    }

    #[test]
    fn small_shape_matches_pmf() {
        let mut rng = rng_from_seed(21);
        let (shape, q) = (0.05, 0.8);
        let samples: Vec<i64> = (0..100_000).map(|_| sample_neg_binomial(shape, q, &mut rng).unwrap() as i64).collect();
        let pmf = |x: i64| if x < 0 { 0.0 } else { neg_binomial_pmf(x as u64, shape, q) };
        assert!(chi_square_pvalue(&samples, pmf) > 0.01);
    }

    #[test]
    fn aggregate_over_clients_is_discrete_laplace() {
        let mut rng = rng_from_seed(22);
        let (n, eps, kr) = (100, 2.0, 1);
        let q = discrete_laplace_q(eps, kr).unwrap();
        let samples: Vec<i64> = (0..100_000)
            .map(|_| (0..n).map(|_| sample_neg_binomial_share(n, eps, kr, &mut rng).unwrap()).sum())
            .collect();
        assert!(chi_square_pvalue(&samples, |x| discrete_laplace_pmf(x, q)) > 0.01);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = rng_from_seed(0);
        assert!(sample_neg_binomial_share(0, 1.0, 1, &mut rng).is_err());
        assert!(sample_neg_binomial(0.0, 0.5, &mut rng).is_err());
        assert!(discrete_laplace_q(0.0, 1).is_err());
    }
}
