use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::bsvs::Record;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// How private records are spread over clients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionScheme {
    /// Uniformly shuffled, then dealt round-robin.
    Iid,
    /// Per-class client proportions drawn from a symmetric Dirichlet.
    Dirichlet { alpha: f64 },
    /// Client `i` holds record `i`.
    SingleRecordPerClient,
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iid => f.write_str("iid"),
            Self::Dirichlet { alpha } => write!(f, "dirichlet:{alpha}"),
            Self::SingleRecordPerClient => f.write_str("single"),
        }
    }
}

impl FromStr for PartitionScheme {
    type Err = Error;

    /// Accepts `iid`, `single` or `dirichlet:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Self::Iid),
            "single" => Ok(Self::SingleRecordPerClient),
            _ => {
                let alpha = s
                    .strip_prefix("dirichlet:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| Error::param(format!("unknown partition scheme {s:?}")))?;
                if !(alpha > 0.0) {
                    return Err(Error::param(format!("Dirichlet alpha must be positive, got {alpha}")));
                }
                Ok(Self::Dirichlet { alpha })
            }
        }
    }
}

/// Assignment of every record to exactly one client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub scheme: PartitionScheme,
    pub n_clients: usize,
    pub assignment: Vec<usize>,
}

impl Partition {
    /// Record indices held by each client, in increasing order.
    pub fn clients(&self) -> Vec<Vec<usize>> {
        let mut clients = vec![Vec::new(); self.n_clients];
        for (record, &client) in self.assignment.iter().enumerate() {
            clients[client].push(record);
        }
        clients
    }
}

fn dirichlet<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::param(e.to_string()))?;
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if !(total > 0.0) {
        // every draw underflowed; fall back to a single random client
        let mut out = vec![0.0; n];
        out[rng.random_range(0..n)] = 1.0;
        return Ok(out);
    }
    Ok(draws.into_iter().map(|g| g / total).collect())
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let mut u: f64 = rng.random();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub fn partition_records(records: &[Record], scheme: PartitionScheme, n_clients: usize, seed: u64) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::param("need at least one client"));
    }
    let m = records.len();
    let mut rng = rng_from_seed(seed);
    let assignment = match scheme {
        PartitionScheme::Iid => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng);
            let mut assignment = vec![0; m];
            for (slot, record) in order.into_iter().enumerate() {
                assignment[record] = slot % n_clients;
            }
            assignment
        }
        PartitionScheme::Dirichlet { alpha } => {
            let classes = records.iter().map(|r| r.label.domain()).max().unwrap_or(0);
            let proportions = (0..classes).map(|_| dirichlet(alpha, n_clients, &mut rng)).collect::<Result<Vec<_>>>()?;
            records
                .iter()
                .map(|r| categorical(&proportions[r.label.primary()], &mut rng))
                .collect()
        }
        PartitionScheme::SingleRecordPerClient => {
            if n_clients != m {
                return Err(Error::param(format!(
                    "one record per client needs exactly {m} clients, got {n_clients}"
                )));
            }
            (0..m).collect()
        }
    };
    Ok(Partition { scheme, n_clients, assignment })
}
