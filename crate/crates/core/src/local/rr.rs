use rand::Rng;

use super::{check_epsilon, log_term};
use crate::bsvs::{AnswerMatrix, NoisyMatrix};
use crate::error::{Error, Result};

/// Per-bit flip probability `1 / (e^{epsilon / 2kr} + 1)`.
pub fn rr_flip_probability(epsilon: f64, kr: usize) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::param(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if kr == 0 {
        return Err(Error::param("kr must be positive"));
    }
    Ok(1.0 / ((epsilon / (2 * kr) as f64).exp() + 1.0))
}

/// Flips every bit of a binary one-record answer independently.
pub fn rr_encode<R: Rng + ?Sized>(
    answer: &AnswerMatrix,
    epsilon: f64,
    kr: usize,
    rng: &mut R,
) -> Result<AnswerMatrix> {
    if !answer.is_binary() {
        return Err(Error::param("randomized response needs a binary answer"));
    }
    let p = rr_flip_probability(epsilon, kr)?;
    let bits = answer
        .as_flat()
        .iter()
        .map(|&b| if p > 0.0 && rng.random_bool(p) { 1 - b } else { b })
        .collect();
    AnswerMatrix::from_flat(answer.rows(), answer.cols(), bits)
}

/// Unbiased estimate `(count - n p) / (1 - 2p)` from summed reported bits.
pub fn rr_estimate(counts: &AnswerMatrix, n: usize, epsilon: f64, kr: usize) -> Result<NoisyMatrix> {
    if n == 0 {
        return Err(Error::param("estimation needs at least one client"));
    }
    let p = rr_flip_probability(epsilon, kr)?;
    let denominator = 1.0 - 2.0 * p;
    if !(denominator > 0.0) {
        return Err(Error::param("randomized response at epsilon = 0 carries no signal"));
    }
    let values = counts
        .as_flat()
        .iter()
        .map(|&c| (c as f64 - n as f64 * p) / denominator)
        .collect();
    NoisyMatrix::from_flat(counts.rows(), counts.cols(), values)
}

/// Max-norm error bound per bucket, holding with probability `1 - beta`.
pub fn rr_accuracy_bound(epsilon: f64, k: usize, r: usize, n: usize, labels: usize, beta: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let log = log_term(labels, beta)?;
    let e = (epsilon / (2 * k * r) as f64).exp();
    Ok((e + 1.0) / (e - 1.0) * (3.0 * n as f64 * log / (e + 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn flip_probability_examples() {
        assert_eq!(rr_flip_probability(f64::INFINITY, 3).unwrap(), 0.0);
        assert!((rr_flip_probability(2.0 * 3f64.ln(), 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((rr_flip_probability(1e-12, 2).unwrap() - 0.5).abs() < 1e-12);
        assert!(rr_flip_probability(1.0, 0).is_err());
    }

    #[test]
    fn infinite_budget_is_identity() {
        let a = AnswerMatrix::from_rows(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(rr_encode(&a, f64::INFINITY, 2, &mut rng_from_seed(0)).unwrap(), a);
        let bad = AnswerMatrix::from_rows(vec![vec![2, 0]]).unwrap();
        assert!(rr_encode(&bad, 1.0, 1, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn estimator_arithmetic() {
        let eps = 2.0 * 3f64.ln();
        let one = rr_estimate(&AnswerMatrix::from_flat(1, 1, vec![1]).unwrap(), 1, eps, 1).unwrap();
        let zero = rr_estimate(&AnswerMatrix::from_flat(1, 1, vec![0]).unwrap(), 1, eps, 1).unwrap();
        assert!((one.get(0, 0) - 1.5).abs() < 1e-12);
        assert!((zero.get(0, 0) + 0.5).abs() < 1e-12);
        assert!((0.75 * 1.5 + 0.25 * -0.5 - 1.0f64).abs() < 1e-12);
        assert!(rr_estimate(&AnswerMatrix::zeros(1, 1), 0, eps, 1).is_err());
        assert!(rr_estimate(&AnswerMatrix::zeros(1, 1), 1, 0.0, 1).is_err());
    }

    #[test]
    fn zero_truth_mean_vanishes() {
        let eps = 1.0;
        let n = 20;
        let zero = AnswerMatrix::zeros(1, 1);
        let mut rng = rng_from_seed(11);
        let trials = 100_000;
        let mut xs = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mut count = AnswerMatrix::zeros(1, 1);
            for _ in 0..n {
                count.add_at(0, 0, rr_encode(&zero, eps, 1, &mut rng).unwrap().get(0, 0));
            }
            xs.push(rr_estimate(&count, n, eps, 1).unwrap().get(0, 0));
        }
        let mean = xs.iter().sum::<f64>() / trials as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd / (trials as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn bound_shape() {
        let b1 = rr_accuracy_bound(1.0, 1, 2, 100, 10, 0.05).unwrap();
        let b4 = rr_accuracy_bound(1.0, 1, 2, 400, 10, 0.05).unwrap();
        assert!((b4 / b1 - 2.0).abs() < 1e-12);
        let eps = 2.0 * 3f64.ln();
        let n = 50;
        let log = (10.0f64 / 0.05).ln();
        let direct = 2.0 * (3.0 * n as f64 * log / 4.0).sqrt();
        assert!((rr_accuracy_bound(eps, 1, 1, n, 10, 0.05).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn small_epsilon_asymptotics() {
        // eps' = 0.05 with kr = 4
        let (k, r) = (2, 2);
        let eps = 0.05 * 8.0;
        let n = 1000;
        let log = (10.0f64 / 0.05).ln();
        let approx = 4.0 * (k * r) as f64 / eps * (3.0 * n as f64 * log / 2.0).sqrt();
        let exact = rr_accuracy_bound(eps, k, r, n, 10, 0.05).unwrap();
        assert!((exact / approx - 1.0).abs() < 0.1);
    }
}
