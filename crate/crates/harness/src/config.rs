//! Experiment configuration in a flat key-value text format.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' any*
//! entry   := key ws* '=' ws* value
//! key     := [a-z0-9_]+
//! ```
//!
//! Values run to the end of the line and are trimmed. A key may appear once
//! per file. Command-line flags use the same names with `-` for `_` and
//! override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::error::{HarnessError, Result};
use rknn_core::bsvs::{PrivacyModel, PrivacyParams};
use rknn_core::rknn::DistanceMetric;
use rknn_core::seed::derive_seed;
use rknn_core::shuffle::SingleMessageMechanism;
use rknn_core::sim::{LocalMechanism, PartitionScheme};

pub const KEYS: &[&str] = &[
    "data",
    "classes",
    "per_class",
    "public_per_class",
    "test_per_class",
    "dim",
    "separation",
    "sigma",
    "records",
    "public",
    "public_truth",
    "test",
    "labels",
    "s",
    "k",
    "r",
    "iterations",
    "model",
    "epsilon",
    "delta",
    "beta",
    "n_clients",
    "partition",
    "local_mechanism",
    "single_mechanism",
    "metric",
    "trials",
    "seed",
    "data_seed",
];

/// Parses the key-value text; errors carry the line number.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |message: String| HarnessError::config(format!("line {}: {message}", i + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, found {line:?}")))?;
        let key = key.trim();
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') {
            return Err(at(format!("invalid key {key:?}")));
        }
        if !KEYS.contains(&key) {
            return Err(at(format!("unknown key {key:?}")));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(at(format!("duplicate key {key:?}")));
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config_text(&text).map_err(|e| match e {
        HarnessError::Config(m) => HarnessError::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv {
        records: PathBuf,
        public: PathBuf,
        public_truth: Option<PathBuf>,
        test: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub labels: usize,
    pub s: usize,
    pub k: usize,
    pub r: usize,
    pub iterations: usize,
    pub model: PrivacyModel,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    /// Defaults to one client per record under the `single` partition.
    pub n_clients: Option<usize>,
    pub partition: PartitionScheme,
    pub local_mechanism: LocalMechanism,
    pub single_mechanism: SingleMessageMechanism,
    pub metric: DistanceMetric,
    pub trials: usize,
    pub seed: u64,
    pub data_seed: u64,
}

struct Values(BTreeMap<String, String>);

impl Values {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| HarnessError::config(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| HarnessError::config(format!("missing required key {key}")))
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        let Some(p) = self.get::<PathBuf>(key)? else { return Ok(None) };
        if !p.exists() {
            return Err(HarnessError::config(format!("{key}: {} does not exist", p.display())));
        }
        Ok(Some(p))
    }
}

fn parse_single(s: &str) -> Result<SingleMessageMechanism> {
    match s {
        "rr" | "randomized-response" => Ok(SingleMessageMechanism::RandomizedResponse),
        "collision" => Ok(SingleMessageMechanism::Collision),
        other => Err(HarnessError::config(format!("unknown single-message mechanism {other:?}"))),
    }
}

impl ExperimentConfig {
    /// Builds and validates a config from merged key-value pairs.
    pub fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Self> {
        if let Some(key) = pairs.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(HarnessError::config(format!("unknown key {key:?}")));
        }
        let v = Values(pairs);
        let seed: u64 = v.required("seed")?;
        let r = v.or("r", 1)?;
        let (data, labels) = match v.or("data", "synthetic".to_string())?.as_str() {
            "synthetic" => {
                let d = SyntheticSpec::default();
                let spec = SyntheticSpec {
                    classes: v.or("classes", d.classes)?,
                    per_class: v.or("per_class", d.per_class)?,
                    public_per_class: v.or("public_per_class", d.public_per_class)?,
                    test_per_class: v.or("test_per_class", d.test_per_class)?,
                    dim: v.or("dim", v.or("classes", d.dim)?)?,
                    separation: v.or("separation", d.separation)?,
                    sigma: v.or("sigma", d.sigma)?,
                    r,
                };
                spec.validate()?;
                let labels = spec.classes;
                if let Some(l) = v.get::<usize>("labels")? {
                    if l != labels {
                        return Err(HarnessError::config(format!("labels = {l} disagrees with classes = {labels}")));
                    }
                }
                (DataSource::Synthetic(spec), labels)
            }
            "csv" => (
                DataSource::Csv {
                    records: v.path("records")?.ok_or_else(|| HarnessError::config("missing required key records"))?,
                    public: v.path("public")?.ok_or_else(|| HarnessError::config("missing required key public"))?,
                    public_truth: v.path("public_truth")?,
                    test: v.path("test")?,
                },
                v.required("labels")?,
            ),
            other => return Err(HarnessError::config(format!("data must be synthetic or csv, got {other:?}"))),
        };
        let model: PrivacyModel = v.or("model", PrivacyModel::Central)?;
        let default_delta = if model.is_pure() { 0.0 } else { 1e-6 };
        let config = Self {
            data,
            labels,
            s: v.or("s", 40)?,
            k: v.or("k", 1)?,
            r,
            iterations: v.or("iterations", 1)?,
            model,
            epsilon: v.or("epsilon", 1.0)?,
            delta: v.or("delta", default_delta)?,
            beta: v.or("beta", 0.05)?,
            n_clients: v.get("n_clients")?,
            partition: v.or("partition", PartitionScheme::Iid)?,
            local_mechanism: v.or("local_mechanism", LocalMechanism::default())?,
            single_mechanism: v.get::<String>("single_mechanism")?.map_or(Ok(SingleMessageMechanism::default()), |s| parse_single(&s))?,
            metric: v.or("metric", DistanceMetric::Euclidean)?,
            trials: v.or("trials", 1)?,
            seed,
            data_seed: v.or("data_seed", derive_seed(seed, "data", 0))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn privacy(&self) -> Result<PrivacyParams> {
        Ok(PrivacyParams::new(self.model, self.epsilon, self.delta, self.k, self.r, self.s, self.labels)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.privacy()?;
        if self.trials == 0 || self.iterations == 0 {
            return Err(HarnessError::config("trials and iterations must be at least 1"));
        }
        if self.n_clients == Some(0) {
            return Err(HarnessError::config("n_clients must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(HarnessError::config(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        Ok(())
    }
}
