use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rknn::DistanceMetric;

/// Nearest-centroid classifier fitted on labeled query embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyStudent {
    centroids: Vec<Option<Vec<f64>>>,
    metric: DistanceMetric,
}

impl ProxyStudent {
    pub fn fit(embeddings: &[Vec<f64>], labels: &[usize], label_count: usize, metric: DistanceMetric) -> Result<Self> {
        if embeddings.len() != labels.len() {
            return Err(Error::shape(embeddings.len(), labels.len()));
        }
        if embeddings.is_empty() {
            return Err(Error::param("the proxy student needs at least one labeled sample"));
        }
        let dim = embeddings[0].len();
        let mut sums = vec![vec![0.0; dim]; label_count];
        let mut counts = vec![0usize; label_count];
        for (x, &y) in embeddings.iter().zip(labels) {
            if y >= label_count || x.len() != dim {
                return Err(Error::param(format!("bad training sample with label {y}")));
            }
            counts[y] += 1;
            for (s, v) in sums[y].iter_mut().zip(x) {
                *s += v;
            }
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
            .collect();
        Ok(Self { centroids, metric })
    }

    fn distances(&self, x: &[f64]) -> Result<Vec<Option<f64>>> {
        self.centroids
            .iter()
            .map(|c| c.as_ref().map(|c| self.metric.distance(x, c)).transpose())
            .collect()
    }

    /// Class of the nearest centroid; ties go to the smaller class.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for (y, d) in self.distances(x)?.into_iter().enumerate() {
            if let Some(d) = d {
                if d < best.0 {
                    best = (d, y);
                }
            }
        }
        Ok(best.1)
    }

    /// Softmax of negative centroid distances (temperature 1); classes
    /// without a centroid get probability 0.
    pub fn soft(&self, x: &[f64]) -> Result<Vec<f64>> {
        let distances = self.distances(x)?;
        let nearest = distances.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = distances.iter().map(|d| d.map_or(0.0, |d| (nearest - d).exp())).collect();
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn accuracy(&self, embeddings: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
        let predicted = embeddings.iter().map(|x| self.predict(x)).collect::<Result<Vec<_>>>()?;
        crate::rknn::labeling_accuracy(&predicted, truth)
    }
}
