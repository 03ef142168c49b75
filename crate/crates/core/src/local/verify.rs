use super::collision::CollisionParams;
use super::gse::GseParams;
use super::rr::rr_flip_probability;
use super::subsets;
use crate::error::{Error, Result};

/// Upper limit on `(input, input, output)` triples an exhaustive check visits.
pub const MAX_DP_CHECK_TRIPLES: u128 = 1_000_000;

/// A discrete mechanism whose inputs and outputs can be listed.
pub trait EnumerableMechanism {
    fn input_count(&self) -> usize;
    fn output_count(&self) -> usize;
    fn probability(&self, input: usize, output: usize) -> f64;

    /// Largest `ln(P[z | x] / P[z | x'])` over all input pairs and outputs.
    fn max_log_ratio(&self) -> Result<f64> {
        let (inputs, outputs) = (self.input_count(), self.output_count());
        guard(inputs as u128, outputs as u128)?;
        let mut worst = f64::NEG_INFINITY;
        for z in 0..outputs {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for x in 0..inputs {
                let p = self.probability(x, z);
                lo = lo.min(p);
                hi = hi.max(p);
            }
            if hi == 0.0 {
                continue;
            }
            worst = worst.max(if lo == 0.0 { f64::INFINITY } else { (hi / lo).ln() });
        }
        Ok(worst)
    }
}

/// Mechanisms accepted by [`verify_local_dp`].
#[derive(Clone, Debug)]
pub enum DpCheck {
    /// A single bit flipped with probability `1 / (e^eps' + 1)`.
    RandomizedResponseBit { epsilon_prime: f64 },
    /// Collision over every `c`-subset of `[d]`, for one fixed hash key.
    Collision { params: CollisionParams, hash_seed: u64 },
    /// GSE over every `c`-subset input and `l`-subset output.
    Gse { params: GseParams },
    /// Continuous noise; only density-ratio checks apply.
    LocalLaplace { epsilon: f64 },
}

struct RrBit {
    p: f64,
}

impl EnumerableMechanism for RrBit {
    fn input_count(&self) -> usize {
        2
    }

    fn output_count(&self) -> usize {
        2
    }

    fn probability(&self, input: usize, output: usize) -> f64 {
        if input == output {
            1.0 - self.p
        } else {
            self.p
        }
    }
}

struct CollisionTable {
    rows: Vec<Vec<f64>>,
}

impl EnumerableMechanism for CollisionTable {
    fn input_count(&self) -> usize {
        self.rows.len()
    }

    fn output_count(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn probability(&self, input: usize, output: usize) -> f64 {
        self.rows[input][output]
    }
}

struct GseTable<'a> {
    params: &'a GseParams,
    inputs: Vec<Vec<usize>>,
    outputs: Vec<Vec<usize>>,
}

impl EnumerableMechanism for GseTable<'_> {
    fn input_count(&self) -> usize {
        self.inputs.len()
    }

    fn output_count(&self) -> usize {
        self.outputs.len()
    }

    fn probability(&self, input: usize, output: usize) -> f64 {
        self.params.subset_probability(&self.inputs[input], &self.outputs[output])
    }
}

fn count_subsets(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

fn guard(inputs: u128, outputs: u128) -> Result<()> {
    let triples = inputs.saturating_mul(inputs).saturating_mul(outputs);
    if triples > MAX_DP_CHECK_TRIPLES {
        return Err(Error::TooLarge(format!(
            "{triples} triples exceed the exhaustive-check limit of {MAX_DP_CHECK_TRIPLES}"
        )));
    }
    Ok(())
}

/// Exhaustive worst-case privacy loss of a discrete local mechanism.
pub fn verify_local_dp(check: &DpCheck) -> Result<f64> {
    match check {
        DpCheck::RandomizedResponseBit { epsilon_prime } => {
            // kr = 1 turns eps / 2kr into eps'
            RrBit { p: rr_flip_probability(2.0 * epsilon_prime, 1)? }.max_log_ratio()
        }
        DpCheck::Collision { params, hash_seed } => {
            guard(count_subsets(params.d(), params.c()), params.l() as u128)?;
            let rows = subsets(params.d(), params.c())
                .into_iter()
                .map(|support| {
                    let hashed: Vec<u64> = support.iter().map(|&v| params.hash(*hash_seed, v)).collect();
                    params.output_probabilities(&hashed)
                })
                .collect();
            CollisionTable { rows }.max_log_ratio()
        }
        DpCheck::Gse { params } => {
            guard(count_subsets(params.d(), params.c()), count_subsets(params.d(), params.l()))?;
            GseTable {
                params,
                inputs: subsets(params.d(), params.c()),
                outputs: subsets(params.d(), params.l()),
            }
            .max_log_ratio()
        }
        DpCheck::LocalLaplace { .. } => Err(Error::param(
            "continuous mechanisms cannot be verified by enumeration; use density-ratio checks",
        )),
    }
}
