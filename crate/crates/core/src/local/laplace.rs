use rand::Rng;

use super::{check_epsilon, log_term};
use crate::bsvs::{AnswerMatrix, NoisyMatrix};
use crate::central::sample_laplace;
use crate::error::Result;

/// Adds `Laplace(2kr / epsilon)` noise to every entry of one client's answer.
pub fn local_laplace_encode<R: Rng + ?Sized>(
    answer: &AnswerMatrix,
    epsilon: f64,
    kr: usize,
    rng: &mut R,
) -> Result<NoisyMatrix> {
    check_epsilon(epsilon)?;
    let scale = 2.0 * kr as f64 / epsilon;
    let mut noisy = answer.to_real();
    if scale > 0.0 {
        for v in noisy.as_flat_mut() {
            *v += sample_laplace(scale, rng)?;
        }
    }
    Ok(noisy)
}

/// `max{ sqrt(8 L k^2 r^2 n^2 / eps^2), 4 L kr / eps }` with `L = ln(|Y| / beta)`.
pub fn local_laplace_accuracy_bound(
    epsilon: f64,
    k: usize,
    r: usize,
    n: usize,
    labels: usize,
    beta: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let log = log_term(labels, beta)?;
    let kr = (k * r) as f64;
    let n = n as f64;
    let sub_gaussian = (8.0 * log * kr * kr * n * n / (epsilon * epsilon)).sqrt();
    let tail = 4.0 * log * kr / epsilon;
    Ok(sub_gaussian.max(tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn infinite_budget_is_identity() {
        let a = AnswerMatrix::from_rows(vec![vec![0, 1]]).unwrap();
        assert_eq!(local_laplace_encode(&a, f64::INFINITY, 1, &mut rng_from_seed(0)).unwrap(), a.to_real());
    }

    #[test]
    fn aggregate_variance_is_additive() {
        let (eps, kr, n) = (2.0, 1, 10);
        let zero = AnswerMatrix::zeros(1, 1);
        let mut rng = rng_from_seed(3);
        let trials = 50_000;
        let sums: Vec<f64> = (0..trials)
            .map(|_| {
                (0..n)
                    .map(|_| local_laplace_encode(&zero, eps, kr, &mut rng).unwrap().get(0, 0))
                    .sum()
            })
            .collect();
        let mean = sums.iter().sum::<f64>() / trials as f64;
        let var = sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let target = n as f64 * 2.0 * (2.0 * kr as f64 / eps).powi(2);
        assert!((var / target - 1.0).abs() < 0.03, "variance {var} vs {target}");
    }

    #[test]
    fn bound_is_max_of_branches() {
        let log = (10.0f64 / 0.1).ln();
        let b = local_laplace_accuracy_bound(0.5, 1, 1, 1, 10, 0.1).unwrap();
        let a1 = (8.0 * log / 0.25).sqrt();
        let a2 = 4.0 * log / 0.5;
        assert!((b - a1.max(a2)).abs() < 1e-12);
        assert_eq!(b, a2);
        let big = local_laplace_accuracy_bound(0.5, 1, 1, 100, 10, 0.1).unwrap();
        assert!((big - 100.0 * a1).abs() < 1e-9);
    }
}
