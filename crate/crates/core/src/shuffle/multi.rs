use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::negbin::{discrete_laplace_q, discrete_laplace_variance, neg_binomial_pmf, sample_neg_binomial_share};
use crate::bsvs::{AnswerMatrix, NoisyMatrix};
use crate::error::{Error, Result};

/// One anonymous message: add `increment` (mod `M`) to coordinate `index`
/// of the flattened answer. Indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShuffleMessage {
    pub index: u32,
    pub increment: u64,
}

/// Protocol parameters shared by every client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiMessageParams {
    pub rows: usize,
    pub cols: usize,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub kr: usize,
    pub modulus: u64,
}

impl MultiMessageParams {
    /// Parameters with the default modulus for `n` clients.
    pub fn new(rows: usize, cols: usize, n: usize, epsilon: f64, delta: f64, kr: usize) -> Result<Self> {
        let modulus = multi_message_modulus(n, kr, epsilon)?;
        Self::with_modulus(rows, cols, n, epsilon, delta, kr, modulus)
    }

    pub fn with_modulus(
        rows: usize,
        cols: usize,
        n: usize,
        epsilon: f64,
        delta: f64,
        kr: usize,
        modulus: u64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || n == 0 {
            return Err(Error::param("shape and client count must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0,1), got {delta}")));
        }
        let d = rows * cols;
        if d > u32::MAX as usize {
            return Err(Error::TooLarge(format!("{d} coordinates do not fit a 32-bit index")));
        }
        let minimum = multi_message_modulus(n, kr, epsilon)?;
        if modulus < minimum {
            return Err(Error::param(format!("modulus {modulus} is below the required {minimum}")));
        }
        Ok(Self { rows, cols, n, epsilon, delta, kr, modulus })
    }

    pub fn d(&self) -> usize {
        self.rows * self.cols
    }

    pub fn q(&self) -> Result<f64> {
        discrete_laplace_q(self.epsilon, self.kr)
    }
}

/// Smallest power of two above `2 (n kr + 6 sigma)`, where `sigma` is the
/// standard deviation of the aggregate discrete-Laplace noise.
pub fn multi_message_modulus(n: usize, kr: usize, epsilon: f64) -> Result<u64> {
    let q = discrete_laplace_q(epsilon, kr)?;
    let reach = 2.0 * ((n * kr) as f64 + 6.0 * discrete_laplace_variance(q).sqrt());
    if !(reach < 2f64.powi(62)) {
        return Err(Error::TooLarge(format!("modulus for reach {reach} exceeds 2^63")));
    }
    Ok((reach.floor() as u64 + 1).next_power_of_two())
}

fn to_ring(value: i64, modulus: u64) -> u64 {
    value.rem_euclid(modulus as i64) as u64
}

/// Encodes one client's answer with explicit per-coordinate noise shares:
/// one unit message per unit of count plus one message per nonzero share,
/// in random order.
pub fn multi_message_encode_with_noise<R: Rng + ?Sized>(
    answer: &AnswerMatrix,
    shares: &[i64],
    params: &MultiMessageParams,
    rng: &mut R,
) -> Result<Vec<ShuffleMessage>> {
    answer.check_same_shape((params.rows, params.cols))?;
    if shares.len() != params.d() {
        return Err(Error::shape(params.d(), shares.len()));
    }
    let mut messages: Vec<ShuffleMessage> = answer
        .as_flat()
        .iter()
        .enumerate()
        .flat_map(|(index, &count)| (0..count).map(move |_| ShuffleMessage { index: index as u32, increment: 1 }))
        .collect();
    for (index, &share) in shares.iter().enumerate() {
        if share != 0 {
            messages.push(ShuffleMessage { index: index as u32, increment: to_ring(share, params.modulus) });
        }
    }
    messages.shuffle(rng);
    Ok(messages)
}

/// Encodes one client's answer with freshly sampled noise shares.
pub fn multi_message_encode<R: Rng + ?Sized>(
    answer: &AnswerMatrix,
    params: &MultiMessageParams,
    rng: &mut R,
) -> Result<Vec<ShuffleMessage>> {
    let shares = (0..params.d())
        .map(|_| sample_neg_binomial_share(params.n, params.epsilon, params.kr, rng))
        .collect::<Result<Vec<_>>>()?;
    multi_message_encode_with_noise(answer, &shares, params, rng)
}

/// Uniformly permutes the pooled messages.
pub fn shuffle<R: Rng + ?Sized>(messages: &mut [ShuffleMessage], rng: &mut R) {
    messages.shuffle(rng);
}

/// Sums messages per coordinate modulo `M` and maps the upper half of the
/// ring to negative values.
pub fn multi_message_decode(messages: &[ShuffleMessage], rows: usize, cols: usize, modulus: u64) -> Result<NoisyMatrix> {
    if modulus < 2 || !modulus.is_power_of_two() {
        return Err(Error::param(format!("modulus must be a power of two, got {modulus}")));
    }
    let mut sums = vec![0u64; rows * cols];
    for m in messages {
        let slot = sums
            .get_mut(m.index as usize)
            .ok_or_else(|| Error::param(format!("message index {} outside {} coordinates", m.index, rows * cols)))?;
        *slot = (*slot + m.increment % modulus) % modulus;
    }
    let values = sums
        .into_iter()
        .map(|v| if v >= modulus / 2 { v as f64 - modulus as f64 } else { v as f64 })
        .collect();
    NoisyMatrix::from_flat(rows, cols, values)
}

/// Exact expected messages per client: `kr` data messages plus one per
/// coordinate whose share is nonzero.
pub fn expected_message_count(d: usize, kr: usize, n: usize, epsilon: f64) -> Result<f64> {
    let q = discrete_laplace_q(epsilon, kr)?;
    let shape = 1.0 / n as f64;
    let mut p_equal = 0.0;
    let mut x = 0;
    loop {
        let p = neg_binomial_pmf(x, shape, q);
        p_equal += p * p;
        if p < 1e-18 && x > 10 {
            break;
        }
        x += 1;
    }
    Ok(kr as f64 + d as f64 * (1.0 - p_equal))
}

/// `kr + d k^2 r^2 ln^2(1/delta) / (epsilon^2 n)`, the asymptotic message
/// count with unit constant.
pub fn expected_message_bound(d: usize, kr: usize, n: usize, epsilon: f64, delta: f64) -> f64 {
    let kr = kr as f64;
    let log = (1.0 / delta).ln();
    kr + d as f64 * kr * kr * log * log / (epsilon * epsilon * n as f64)
}

/// `4kr ln(|Y| / beta) / epsilon`.
pub fn shuffle_accuracy_bound(epsilon: f64, k: usize, r: usize, labels: usize, beta: f64) -> Result<f64> {
    crate::central::check_beta(beta)?;
    crate::local::check_epsilon(epsilon)?;
    Ok(4.0 * (k * r) as f64 * (labels as f64 / beta).ln() / epsilon)
}
