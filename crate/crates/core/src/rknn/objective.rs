use serde::{Deserialize, Serialize};

use super::distance::{similarity, DistanceMetric};
use crate::bsvs::{ConnectionMap, QuerySet, Record};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_QUERIES: usize = 4;
pub const BRUTE_FORCE_MAX_RECORDS: usize = 6;

/// Aggregate of per-query scores that a connection graph is judged by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionObjective {
    ArithmeticMean,
    MaxMin,
    HarmonicMean,
}

/// Sum of similarities between query `query` and the records connected to it.
pub fn connection_score(
    query: usize,
    records: &[Record],
    queries: &QuerySet,
    connections: &ConnectionMap,
    metric: DistanceMetric,
) -> Result<f64> {
    let mut score = 0.0;
    for (rec, buckets) in records.iter().zip(connections.iter()) {
        if buckets.contains(&query) {
            score += similarity(metric, queries.get(query), &rec.embedding)?;
        }
    }
    Ok(score)
}

pub fn query_scores(
    records: &[Record],
    queries: &QuerySet,
    connections: &ConnectionMap,
    metric: DistanceMetric,
) -> Result<Vec<f64>> {
    if connections.len() != records.len() {
        return Err(Error::shape(records.len(), connections.len()));
    }
    let mut scores = vec![0.0; queries.len()];
    for (rec, buckets) in records.iter().zip(connections.iter()) {
        for &l in buckets {
            scores[l] += similarity(metric, queries.get(l), &rec.embedding)?;
        }
    }
    Ok(scores)
}

/// Mean, minimum or harmonic mean of the scores. The harmonic mean is 0
/// when any score is 0.
pub fn objective_value(scores: &[f64], objective: ConnectionObjective) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let n = scores.len() as f64;
    match objective {
        ConnectionObjective::ArithmeticMean => scores.iter().sum::<f64>() / n,
        ConnectionObjective::MaxMin => scores.iter().cloned().fold(f64::INFINITY, f64::min),
        ConnectionObjective::HarmonicMean => {
            if scores.iter().any(|&s| !(s > 0.0)) {
                0.0
            } else {
                n / scores.iter().map(|s| 1.0 / s).sum::<f64>()
            }
        }
    }
}

/// Exhaustive search over every graph in which each record connects to
/// exactly `min(k, s)` queries. Scores only grow with extra edges, so this
/// family contains an optimum of every objective over graphs of record
/// degree at most `k`. Among equal optima the lexicographically first
/// (record 0's set most significant, sets in lexicographic order) wins.
pub fn brute_force_best_connection(
    records: &[Record],
    queries: &QuerySet,
    k: usize,
    metric: DistanceMetric,
    objective: ConnectionObjective,
) -> Result<ConnectionMap> {
    let s = queries.len();
    if s > BRUTE_FORCE_MAX_QUERIES || records.len() > BRUTE_FORCE_MAX_RECORDS {
        return Err(Error::TooLarge(format!(
            "brute force handles s <= {BRUTE_FORCE_MAX_QUERIES} and m <= {BRUTE_FORCE_MAX_RECORDS}, got s = {s}, m = {}",
            records.len()
        )));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let sims: Vec<Vec<f64>> = records
        .iter()
        .map(|rec| {
            queries
                .iter()
                .map(|q| similarity(metric, q, &rec.embedding))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let subsets = combinations(s, k.min(s));
    let m = records.len();

    let mut choice = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut scores = vec![0.0; s];
        for (j, &c) in choice.iter().enumerate() {
            for &l in &subsets[c] {
                scores[l] += sims[j][l];
            }
        }
        let value = objective_value(&scores, objective);
        let improves = match &best {
            None => true,
            Some((top, _)) => value > top + 1e-12 * top.abs().max(1.0),
        };
        if improves {
            best = Some((value, choice.clone()));
        }
        // odometer, last record fastest
        let mut pos = m;
        loop {
            if pos == 0 {
                let (_, best_choice) = best.expect("at least one graph is scored");
                let sets = best_choice.iter().map(|&c| subsets[c].clone()).collect();
                return ConnectionMap::new(s, sets);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < subsets.len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// All `size`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}
