use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// `1 - cos(x, y)`; undefined for zero vectors.
    Cosine,
}

impl DistanceMetric {
    pub fn distance(self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::shape(x.len(), y.len()));
        }
        match self {
            DistanceMetric::Euclidean => Ok(squared_euclidean(x, y).sqrt()),
            DistanceMetric::Cosine => {
                let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
                for (a, b) in x.iter().zip(y) {
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                if nx == 0.0 || ny == 0.0 {
                    return Err(Error::param("cosine distance of a zero vector"));
                }
                let cos = (dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0);
                Ok(1.0 - cos)
            }
        }
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::param(format!("unknown metric {other:?}"))),
        }
    }
}

pub(crate) fn squared_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Positive, bounded, decreasing in distance: `1 / (1 + distance)`.
pub fn similarity(metric: DistanceMetric, q: &[f64], x: &[f64]) -> Result<f64> {
    Ok(1.0 / (1.0 + metric.distance(q, x)?))
}
