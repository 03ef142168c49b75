//! Bound tables, the exhaustive local-DP suite and figure data.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use rknn_core::bsvs::{LabelVector, PrivacyModel, PrivacyParams};
use rknn_core::central::laplace_accuracy_bound;
use rknn_core::local::{
    collision_accuracy_bound, local_laplace_accuracy_bound, rr_accuracy_bound, verify_local_dp, CollisionParams,
    ConcatenationOracle, DpCheck, GseParams, SeparationOracle,
};
use rknn_core::seed::stage_rng;
use rknn_core::shuffle::{amplify_invert, shuffle_accuracy_bound, SingleMessageMechanism};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    /// Restricts the table to one model.
    pub model: Option<PrivacyModel>,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub r: usize,
    pub labels: usize,
    pub beta: f64,
    /// Client count, needed by the local and single-message bounds.
    pub n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub model: PrivacyModel,
    pub mechanism: String,
    pub eta: f64,
    pub local_epsilon: Option<f64>,
}

/// Max-norm error bound `eta(beta)` of every mechanism that applies.
pub fn bounds_table(q: &BoundQuery) -> Result<Vec<BoundRow>> {
    let wanted = |m: PrivacyModel| q.model.is_none_or(|x| x == m);
    let row = |model, mechanism: &str, eta, local_epsilon| BoundRow { model, mechanism: mechanism.to_string(), eta, local_epsilon };
    let need_n = |model: PrivacyModel| -> Result<Option<usize>> {
        match (q.n, q.model) {
            (Some(n), _) => Ok(Some(n)),
            (None, Some(_)) => Err(HarnessError::config(format!("the {model} bounds need --n"))),
            (None, None) => Ok(None),
        }
    };
    let mut rows = Vec::new();
    if wanted(PrivacyModel::Central) {
        let params = PrivacyParams::new(PrivacyModel::Central, q.epsilon, 0.0, q.k, q.r, 1, q.labels)?;
        rows.push(row(PrivacyModel::Central, "laplace", laplace_accuracy_bound(&params, q.beta)?, None));
    }
    if wanted(PrivacyModel::Local) {
        if let Some(n) = need_n(PrivacyModel::Local)? {
            let (e, k, r, l, b) = (q.epsilon, q.k, q.r, q.labels, q.beta);
            rows.push(row(PrivacyModel::Local, "rr", rr_accuracy_bound(e, k, r, n, l, b)?, None));
            rows.push(row(PrivacyModel::Local, "laplace", local_laplace_accuracy_bound(e, k, r, n, l, b)?, None));
            rows.push(row(PrivacyModel::Local, "collision", collision_accuracy_bound(e, k, r, n, l, b)?, None));
        }
    }
    if wanted(PrivacyModel::ShuffleMulti) {
        let eta = shuffle_accuracy_bound(q.epsilon, q.k, q.r, q.labels, q.beta)?;
        rows.push(row(PrivacyModel::ShuffleMulti, "multi-message", eta, None));
    }
    if wanted(PrivacyModel::ShuffleSingle) {
        if let Some(n) = need_n(PrivacyModel::ShuffleSingle)? {
            let local = amplify_invert(q.epsilon, n, q.delta)?;
            for (name, m) in [("rr", SingleMessageMechanism::RandomizedResponse), ("collision", SingleMessageMechanism::Collision)] {
                let eta = m.accuracy_bound(local, q.k, q.r, n, q.labels, q.beta)?;
                rows.push(row(PrivacyModel::ShuffleSingle, name, eta, Some(local)));
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpRow {
    pub mechanism: String,
    pub instance: String,
    pub epsilon: f64,
    pub max_log_ratio: f64,
    pub pass: bool,
}

pub const DP_TOLERANCE: f64 = 1e-9;
pub const DP_HASH_SEEDS: u64 = 16;

/// Exhaustive worst-case log-ratio checks: randomized response per bit
/// (composed over `2kr` bits for `kr` in 1..=2), Collision on `d = 4` with
/// `c` in 1..=2 for several hash keys, and GSE for `d <= 5`, `l <= 2`,
/// `alpha_min` in 1..=2.
pub fn dp_suite(epsilons: &[f64]) -> Result<Vec<DpRow>> {
    let mut rows = Vec::new();
    for &eps in epsilons {
        let mut push = |mechanism: &str, instance: String, ratio: f64| {
            rows.push(DpRow { mechanism: mechanism.into(), instance, epsilon: eps, max_log_ratio: ratio, pass: ratio <= eps + DP_TOLERANCE });
        };
        for kr in 1..=2usize {
            let bits = (2 * kr) as f64;
            let ratio = verify_local_dp(&DpCheck::RandomizedResponseBit { epsilon_prime: eps / bits })?;
            push("rr", format!("kr={kr}, {bits} bits"), ratio * bits);
        }
        for c in 1..=2 {
            let params = CollisionParams::with_default_length(4, c, eps)?;
            for hash_seed in 0..DP_HASH_SEEDS {
                let ratio = verify_local_dp(&DpCheck::Collision { params: params.clone(), hash_seed })?;
                push("collision", format!("d=4, c={c}, l={}, key={hash_seed}", params.l()), ratio);
            }
        }
        for d in 2..=5 {
            for c in 1..d {
                for l in 1..=2 {
                    for alpha_min in 1..=2 {
                        let Ok(params) = GseParams::new(d, c, eps, l, alpha_min) else { continue };
                        let ratio = verify_local_dp(&DpCheck::Gse { params })?;
                        push("gse", format!("d={d}, c={c}, l={l}, alpha_min={alpha_min}"), ratio);
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub eps: f64,
    pub collision_mse: f64,
    pub separation_mse: f64,
    pub concatenation_mse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseSetup {
    pub s: usize,
    pub labels: usize,
    pub k: usize,
    pub r: usize,
    pub trials: usize,
    pub seed: u64,
}

const MSE_BLOCK: usize = 1000;

fn mse_block(setup: &MseSetup, eps_index: usize, block: usize, trials: usize, flat: &CollisionParams, sep: &SeparationOracle, cat: &ConcatenationOracle) -> Result<[f64; 3]> {
    let mut rng = stage_rng(setup.seed, &format!("mse/{eps_index}"), block as u64);
    let mut sums = [0.0; 3];
    for _ in 0..trials {
        let buckets = sample(&mut rng, setup.s, setup.k).into_vec();
        let classes = sample(&mut rng, setup.labels, setup.r).into_vec();
        let label = LabelVector::new(setup.labels, classes.clone())?;
        let support: Vec<usize> = buckets.iter().flat_map(|&b| classes.iter().map(move |&y| b * setup.labels + y)).collect();
        let report = flat.encode(&support, &mut rng)?;
        sums[0] += flat.squared_error(&report, &support)?;
        let report = sep.encode(&buckets, &label, &mut rng)?;
        sums[1] += sep.squared_error(&report, &buckets, &label)?;
        let report = cat.encode(&buckets, &label, &mut rng)?;
        sums[2] += cat.squared_error(&report, &buckets, &label)?;
    }
    Ok(sums)
}

/// Per-entry mean squared error of one client's estimate for flat
/// Collision, Separation and Concatenation (product estimator), averaged
/// over `trials` random records at every grid point.
pub fn mse_compare(setup: &MseSetup, grid: &[f64], parallel: bool) -> Result<Vec<MseRow>> {
    if setup.trials == 0 {
        return Err(HarnessError::config("need at least one trial"));
    }
    let entries = (setup.s * setup.labels) as f64;
    let blocks = setup.trials.div_ceil(MSE_BLOCK);
    grid.iter()
        .enumerate()
        .map(|(i, &eps)| {
            let flat = CollisionParams::with_default_length(setup.s * setup.labels, setup.k * setup.r, eps)?;
            let sep = SeparationOracle::new(setup.s, setup.labels, setup.k, setup.r, eps)?;
            let cat = ConcatenationOracle::new(setup.s, setup.labels, setup.k, setup.r, eps)?;
            let run = |b: usize| {
                let trials = MSE_BLOCK.min(setup.trials - b * MSE_BLOCK);
                mse_block(setup, i, b, trials, &flat, &sep, &cat)
            };
            let parts: Vec<[f64; 3]> = if parallel {
                (0..blocks).into_par_iter().map(run).collect::<Result<_>>()?
            } else {
                (0..blocks).map(run).collect::<Result<_>>()?
            };
            let mut total = [0.0; 3];
            for p in parts {
                for (t, v) in total.iter_mut().zip(p) {
                    *t += v;
                }
            }
            let scale = setup.trials as f64 * entries;
            Ok(MseRow { eps, collision_mse: total[0] / scale, separation_mse: total[1] / scale, concatenation_mse: total[2] / scale })
        })
        .collect()
}

pub fn mse_csv(rows: &[MseRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| HarnessError::config(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| HarnessError::config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::config(e.to_string()))
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| HarnessError::config(format!("bad grid {text:?}"))))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(HarnessError::config(format!("grid must be start:stop:step, got {text:?}")));
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(HarnessError::config(format!("bad grid {text:?}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}
