use rand::Rng;
use serde::{Deserialize, Serialize};

use super::distance::squared_euclidean;
use crate::bsvs::QuerySet;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iterations: usize,
    /// Stop once no center moves farther than this (Euclidean).
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub queries: QuerySet,
    /// Cluster index of every public sample.
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

/// Clusters the public embeddings into `s` groups with k-means++ seeding
/// followed by Lloyd iterations; the centers become the queries.
pub fn select_queries_cluster(
    public: &[Vec<f64>],
    s: usize,
    seed: u64,
    config: KMeansConfig,
) -> Result<Clustering> {
    if s == 0 {
        return Err(Error::param("need at least one query"));
    }
    if s > public.len() {
        return Err(Error::param(format!(
            "cannot select {s} clusters from {} public samples",
            public.len()
        )));
    }
    let dim = public[0].len();
    if public.iter().any(|p| p.len() != dim) {
        return Err(Error::param("public embeddings have mixed dimensions"));
    }

    let mut rng = rng_from_seed(seed);
    let mut centers = plus_plus_init(public, s, &mut rng);
    let mut assignment = vec![0usize; public.len()];
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(public) {
            *a = nearest(&centers, p);
        }
        let mut sums = vec![vec![0.0; dim]; s];
        let mut counts = vec![0usize; s];
        for (p, &a) in public.iter().zip(&assignment) {
            counts[a] += 1;
            for (acc, v) in sums[a].iter_mut().zip(p) {
                *acc += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..s {
            // an emptied cluster keeps its previous center
            if counts[c] == 0 {
                continue;
            }
            let n = counts[c] as f64;
            let next: Vec<f64> = sums[c].iter().map(|v| v / n).collect();
            shift = shift.max(squared_euclidean(&next, &centers[c]).sqrt());
            centers[c] = next;
        }
        if shift <= config.tolerance {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(public) {
        *a = nearest(&centers, p);
    }

    Ok(Clustering {
        queries: QuerySet::new(centers)?,
        assignment,
        iterations,
    })
}

fn plus_plus_init<R: Rng + ?Sized>(points: &[Vec<f64>], s: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_euclidean(p, &centers[0]))
        .collect();

    while centers.len() < s {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every point coincides with a center: take the first unused one
            chosen.iter().position(|&c| !c).unwrap()
        };
        chosen[pick] = true;
        let center = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_euclidean(p, &center));
        }
        centers.push(center);
    }
    centers
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = squared_euclidean(center, p);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}
