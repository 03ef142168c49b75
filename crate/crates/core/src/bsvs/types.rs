use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sparse `{0,1}` label over a domain of `domain` classes with exactly
/// `cardinality()` ones. One-hot labels are the `r = 1` case.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector {
    domain: usize,
    ones: Vec<usize>,
}

impl LabelVector {
    pub fn new(domain: usize, mut ones: Vec<usize>) -> Result<Self> {
        ones.sort_unstable();
        ones.dedup();
        if ones.is_empty() {
            return Err(Error::param("label vector needs at least one class"));
        }
        if let Some(&c) = ones.iter().find(|&&c| c >= domain) {
            return Err(Error::param(format!(
                "label {c} out of range for {domain} classes"
            )));
        }
        Ok(Self { domain, ones })
    }

    pub fn one_hot(domain: usize, class: usize) -> Result<Self> {
        Self::new(domain, vec![class])
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn cardinality(&self) -> usize {
        self.ones.len()
    }

    /// Indices of the ones, ascending.
    pub fn ones(&self) -> &[usize] {
        &self.ones
    }

    /// Smallest class index carried by the label.
    pub fn primary(&self) -> usize {
        self.ones[0]
    }

    pub fn contains(&self, class: usize) -> bool {
        self.ones.binary_search(&class).is_ok()
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut dense = vec![0u8; self.domain];
        for &c in &self.ones {
            dense[c] = 1;
        }
        dense
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub embedding: Vec<f64>,
    pub label: LabelVector,
}

impl Record {
    pub fn new(id: impl Into<String>, embedding: Vec<f64>, label: LabelVector) -> Self {
        Self {
            id: id.into(),
            embedding,
            label,
        }
    }
}

/// Checks that all records share one embedding dimension and one label domain.
pub(crate) fn check_records(records: &[Record]) -> Result<()> {
    let Some(first) = records.first() else {
        return Ok(());
    };
    let dim = first.embedding.len();
    let domain = first.label.domain();
    for (j, rec) in records.iter().enumerate() {
        if rec.embedding.len() != dim {
            return Err(Error::shape(
                format!("embedding dimension {dim}"),
                format!("dimension {} at record {j}", rec.embedding.len()),
            ));
        }
        if rec.label.domain() != domain {
            return Err(Error::shape(
                format!("label domain {domain}"),
                format!("domain {} at record {j}", rec.label.domain()),
            ));
        }
    }
    Ok(())
}

/// The `s` query embeddings, indexed `0..s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    queries: Vec<Vec<f64>>,
}

impl QuerySet {
    pub fn new(queries: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = queries.first() else {
            return Err(Error::param("query set must hold at least one query"));
        };
        let dim = first.len();
        if let Some(q) = queries.iter().find(|q| q.len() != dim) {
            return Err(Error::shape(
                format!("query dimension {dim}"),
                format!("dimension {}", q.len()),
            ));
        }
        Ok(Self { queries })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.queries[0].len()
    }

    pub fn get(&self, l: usize) -> &[f64] {
        &self.queries[l]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.queries.iter().map(Vec::as_slice)
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.queries
    }
}

/// Per-record bucket sets `T_j`, each a sorted set of query indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionMap {
    query_count: usize,
    sets: Vec<Vec<usize>>,
}

impl ConnectionMap {
    pub fn new(query_count: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut sets = sets;
        for (j, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::param(format!("duplicate query index in T_{j}")));
            }
            if let Some(&l) = set.iter().find(|&&l| l >= query_count) {
                return Err(Error::param(format!(
                    "query index {l} out of range for {query_count} queries"
                )));
            }
        }
        Ok(Self { query_count, sets })
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn buckets(&self, record: usize) -> &[usize] {
        &self.sets[record]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }

    /// Largest `|T_j|` in the map.
    pub fn max_degree(&self) -> usize {
        self.sets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of records connected to each query.
    pub fn query_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.query_count];
        for set in &self.sets {
            for &l in set {
                deg[l] += 1;
            }
        }
        deg
    }

    pub fn select(&self, records: &[usize]) -> ConnectionMap {
        ConnectionMap {
            query_count: self.query_count,
            sets: records.iter().map(|&j| self.sets[j].clone()).collect(),
        }
    }
}

/// Integer label counts, `rows` queries by `cols` classes, row major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerMatrix {
    rows: usize,
    cols: usize,
    counts: Vec<i64>,
}

impl AnswerMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            counts: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::param("ragged answer matrix"));
        }
        if rows.iter().flatten().any(|&c| c < 0) {
            return Err(Error::param("answer counts must be nonnegative"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(rows: usize, cols: usize, counts: Vec<i64>) -> Result<Self> {
        if counts.len() != rows * cols {
            return Err(Error::shape(rows * cols, counts.len()));
        }
        Ok(Self { rows, cols, counts })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.counts[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i64] {
        &self.counts[row * self.cols..(row + 1) * self.cols]
    }

    /// Row-major flattened counts: index `l * cols + c`.
    pub fn as_flat(&self) -> &[i64] {
        &self.counts
    }

    pub fn add_at(&mut self, row: usize, col: usize, amount: i64) {
        self.counts[row * self.cols + col] += amount;
    }

    pub fn l1_norm(&self) -> i64 {
        self.counts.iter().map(|c| c.abs()).sum()
    }

    pub fn l1_distance(&self, other: &AnswerMatrix) -> Result<i64> {
        self.check_same_shape(other.shape())?;
        Ok(self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    pub fn is_binary(&self) -> bool {
        self.counts.iter().all(|&c| c == 0 || c == 1)
    }

    /// Flat indices of nonzero entries, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_real(&self) -> NoisyMatrix {
        NoisyMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::shape(
                format!("{}x{}", shape.0, shape.1),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [i64] {
        &mut self.counts
    }
}

/// Real-valued counts after noise or estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl NoisyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::param("ragged matrix"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(rows * cols, values.len()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn add_assign(&mut self, other: &NoisyMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    /// Largest absolute deviation from `exact` within each row (bucket).
    pub fn row_deviations(&self, exact: &AnswerMatrix) -> Result<Vec<f64>> {
        exact.check_same_shape(self.shape())?;
        Ok((0..self.rows)
            .map(|l| {
                self.row(l)
                    .iter()
                    .zip(exact.row(l))
                    .map(|(&a, &b)| (a - b as f64).abs())
                    .fold(0.0, f64::max)
            })
            .collect())
    }

    /// Largest absolute deviation from `exact` over the whole matrix.
    pub fn max_deviation(&self, exact: &AnswerMatrix) -> Result<f64> {
        Ok(self.row_deviations(exact)?.into_iter().fold(0.0, f64::max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrivacyModel {
    Central,
    Local,
    ShuffleMulti,
    ShuffleSingle,
}

impl PrivacyModel {
    pub fn is_pure(self) -> bool {
        matches!(self, PrivacyModel::Central | PrivacyModel::Local)
    }
}

impl std::str::FromStr for PrivacyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(Self::Central),
            "local" => Ok(Self::Local),
            "shuffle-multi" => Ok(Self::ShuffleMulti),
            "shuffle-single" => Ok(Self::ShuffleSingle),
            other => Err(Error::param(format!("unknown privacy model {other:?}"))),
        }
    }
}

impl std::fmt::Display for PrivacyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Central => "central",
            Self::Local => "local",
            Self::ShuffleMulti => "shuffle-multi",
            Self::ShuffleSingle => "shuffle-single",
        })
    }
}

/// Privacy budget plus the problem shape the budget is calibrated for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub model: PrivacyModel,
    pub k: usize,
    pub r: usize,
    pub s: usize,
    pub label_count: usize,
}

impl PrivacyParams {
    /// Validates the invariants: `epsilon > 0` (infinity allowed and
    /// meaning "no noise"), pure models take `delta = 0`, shuffle models
    /// `0 < delta < 1`, `k, s >= 1`, `1 <= r <= label_count`, and at least
    /// two classes.
    pub fn new(
        model: PrivacyModel,
        epsilon: f64,
        delta: f64,
        k: usize,
        r: usize,
        s: usize,
        label_count: usize,
    ) -> Result<Self> {
        let params = Self {
            epsilon,
            delta,
            model,
            k,
            r,
            s,
            label_count,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.model.is_pure() {
            if self.delta != 0.0 {
                return Err(Error::param(format!(
                    "{} model is pure DP and needs delta = 0, got {}",
                    self.model, self.delta
                )));
            }
        } else if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!(
                "{} model needs 0 < delta < 1, got {}",
                self.model, self.delta
            )));
        }
        if self.k == 0 || self.s == 0 {
            return Err(Error::param("k and s must be at least 1"));
        }
        if self.label_count < 2 {
            return Err(Error::param("label domain needs at least 2 classes"));
        }
        if self.r == 0 || self.r > self.label_count {
            return Err(Error::param(format!(
                "r must lie in 1..={}, got {}",
                self.label_count, self.r
            )));
        }
        Ok(())
    }

    /// `k * r`: the most ones a single record can contribute.
    pub fn kr(&self) -> usize {
        self.k * self.r
    }

    /// L1 sensitivity of the aggregate under a one-record swap.
    pub fn sensitivity(&self) -> f64 {
        2.0 * self.kr() as f64
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }
}

/// `(eta, beta)`: max-norm error below `eta` with probability at least `1 - beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub eta: f64,
    pub beta: f64,
}

impl AccuracySpec {
    pub fn new(eta: f64, beta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::param(format!("eta must be positive, got {eta}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param(format!("beta must lie in (0,1), got {beta}")));
        }
        Ok(Self { eta, beta })
    }
}
