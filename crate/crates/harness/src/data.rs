//! Synthetic Gaussian mixtures and the embeddings CSV format.
//!
//! CSV header: `id,label,e1,...,e<d>`. Labels are `|`-separated class
//! indices (`3|7`) and left empty for unlabeled public samples.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use rknn_core::bsvs::{LabelVector, Record};
use rknn_core::seed::stage_rng;

/// Isotropic Gaussian mixture with one mean per class. Class means sit on
/// scaled coordinate axes, so every pair is `separation` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub public_per_class: usize,
    pub test_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
    /// Labels per record; `r > 1` adds the next `r - 1` classes (cyclically).
    pub r: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            per_class: 6000,
            public_per_class: 100,
            test_per_class: 100,
            dim: 10,
            separation: 10.0,
            sigma: 1.0,
            r: 1,
        }
    }
}

impl SyntheticSpec {
    /// Separation in units of the within-class standard deviation.
    pub fn separability(&self) -> f64 {
        self.separation / self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(HarnessError::config("synthetic data needs at least 2 classes"));
        }
        if self.dim < self.classes {
            return Err(HarnessError::config(format!(
                "embedding dimension {} is below the class count {}",
                self.dim, self.classes
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(HarnessError::config("sigma must be positive and separation nonnegative"));
        }
        if self.r == 0 || self.r > self.classes {
            return Err(HarnessError::config(format!("r must lie in 1..={}", self.classes)));
        }
        if self.per_class == 0 || self.public_per_class == 0 {
            return Err(HarnessError::config("need private and public samples"));
        }
        Ok(())
    }
}

/// Embeddings with optional labels, as stored in one CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    pub labels: Vec<Option<LabelVector>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, Vec::len)
    }

    /// Every row as a record; fails on an unlabeled row.
    pub fn to_records(&self) -> Result<Vec<Record>> {
        self.ids
            .iter()
            .zip(&self.embeddings)
            .zip(&self.labels)
            .map(|((id, x), y)| {
                let label = y.clone().ok_or_else(|| HarnessError::config(format!("record {id} has no label")))?;
                Ok(Record::new(id.clone(), x.clone(), label))
            })
            .collect()
    }

    /// Primary class of every row, if all rows are labeled.
    pub fn primary_labels(&self) -> Option<Vec<usize>> {
        self.labels.iter().map(|y| y.as_ref().map(LabelVector::primary)).collect()
    }

    pub fn from_records(records: &[Record]) -> Self {
        Self {
            ids: records.iter().map(|r| r.id.clone()).collect(),
            embeddings: records.iter().map(|r| r.embedding.clone()).collect(),
            labels: records.iter().map(|r| Some(r.label.clone())).collect(),
        }
    }
}

/// Private records, labeled public split and labeled test split.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub records: Vec<Record>,
    pub public: Dataset,
    pub test: Dataset,
}

fn draw(spec: &SyntheticSpec, prefix: &str, per_class: usize, seed: u64, stage: &str) -> Result<Dataset> {
    let mut rng = stage_rng(seed, stage, 0);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| HarnessError::config(e.to_string()))?;
    let offset = spec.separation / std::f64::consts::SQRT_2;
    let total = spec.classes * per_class;
    let mut out = Dataset { ids: Vec::with_capacity(total), embeddings: Vec::with_capacity(total), labels: Vec::with_capacity(total) };
    for i in 0..total {
        let class = i % spec.classes;
        let mut x: Vec<f64> = (0..spec.dim).map(|_| noise.sample(&mut rng)).collect();
        x[class] += offset;
        let ones = (0..spec.r).map(|j| (class + j) % spec.classes).collect();
        out.ids.push(format!("{prefix}{i}"));
        out.embeddings.push(x);
        out.labels.push(Some(LabelVector::new(spec.classes, ones)?));
    }
    Ok(out)
}

/// Deterministic in `seed`; the three splits use independent streams.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Synthetic> {
    spec.validate()?;
    let records = draw(spec, "r", spec.per_class, seed, "synthetic/records")?.to_records()?;
    let public = draw(spec, "p", spec.public_per_class, seed, "synthetic/public")?;
    let test = draw(spec, "t", spec.test_per_class, seed, "synthetic/test")?;
    Ok(Synthetic { records, public, test })
}

/// Writes `id,label,e1..`; `{}` formatting of `f64` round-trips exactly.
pub fn write_embeddings_csv(path: &Path, data: &Dataset, with_labels: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |e: csv::Error| HarnessError::io(path, std::io::Error::other(e));
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((1..=data.dim()).map(|j| format!("e{j}")));
    writer.write_record(&header).map_err(csv_err)?;
    for ((id, x), y) in data.ids.iter().zip(&data.embeddings).zip(&data.labels) {
        let label = match y {
            Some(y) if with_labels => y.ones().iter().map(usize::to_string).collect::<Vec<_>>().join("|"),
            _ => String::new(),
        };
        let mut row = vec![id.clone(), label];
        row.extend(x.iter().map(f64::to_string));
        writer.write_record(&row).map_err(csv_err)?;
    }
    let mut inner = writer.into_inner().map_err(|e| HarnessError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| HarnessError::io(path, e))
}

fn parse_label(field: &str, label_count: usize) -> std::result::Result<Option<LabelVector>, String> {
    if field.trim().is_empty() {
        return Ok(None);
    }
    let ones = field
        .split('|')
        .map(|c| c.trim().parse::<usize>().map_err(|_| format!("label {c:?} is not a class index")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if let Some(c) = ones.iter().find(|&&c| c >= label_count) {
        return Err(format!("label {c} outside {label_count} classes"));
    }
    LabelVector::new(label_count, ones).map(Some).map_err(|e| e.to_string())
}

/// Loads an embeddings CSV; the dimension comes from the header. Errors
/// name the offending line (the header is line 1).
pub fn load_embeddings_csv(path: &Path, label_count: usize) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let parse_err = |line: u64, message: String| HarnessError::Parse { path: path.to_path_buf(), line, message };
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let dim = header.len().saturating_sub(2);
    let expected: Vec<String> =
        ["id".to_string(), "label".to_string()].into_iter().chain((1..=dim).map(|j| format!("e{j}"))).collect();
    if dim == 0 || header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(1, format!("header must be {}", expected.join(","))));
    }
    let mut data = Dataset { ids: Vec::new(), embeddings: Vec::new(), labels: Vec::new() };
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            return Err(parse_err(line, format!("expected {} columns, found {}", header.len(), row.len())));
        }
        let label = parse_label(&row[1], label_count).map_err(|m| parse_err(line, m))?;
        let embedding = (2..row.len())
            .map(|j| {
                row[j].trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    parse_err(line, format!("column {} value {:?} is not a finite number", header[j].trim(), &row[j]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        data.ids.push(row[0].trim().to_string());
        data.embeddings.push(embedding);
        data.labels.push(label);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_rows() {
        let f = write("id,label,e1,e2\na,0,1.5,2\nb,,0,-1e-3\n");
        let d = load_embeddings_csv(f.path(), 2).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.embeddings[1], vec![0.0, -1e-3]);
        assert_eq!(d.labels[0].as_ref().unwrap().ones(), &[0]);
        assert!(d.labels[1].is_none());
    }

    #[test]
    fn multi_hot_label() {
        let f = write("id,label,e1\na,3|7,0.5\n");
        let d = load_embeddings_csv(f.path(), 10).unwrap();
        let y = d.labels[0].as_ref().unwrap();
        assert_eq!(y.ones(), &[3, 7]);
        assert_eq!(y.to_dense().iter().filter(|&&b| b == 1).count(), 2);
    }

    #[test]
    fn errors_name_the_line() {
        let missing = write("id,label,e1,e2\na,0,1,2\nb,1,3\n");
        let err = load_embeddings_csv(missing.path(), 2).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let text = write("id,label,e1\na,0,x\n");
        assert!(load_embeddings_csv(text.path(), 2).unwrap_err().to_string().contains("line 2"));
        let range = write("id,label,e1\na,0,1\nb,5,1\n");
        assert!(load_embeddings_csv(range.path(), 2).unwrap_err().to_string().contains("line 3"));
        let header = write("id,label,x1\na,0,1\n");
        assert!(load_embeddings_csv(header.path(), 2).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn round_trip_is_lossless() {
        let spec = SyntheticSpec { classes: 3, per_class: 20, public_per_class: 5, test_per_class: 1, dim: 4, r: 2, ..SyntheticSpec::default() };
        let data = generate_synthetic(&spec, 8).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        let records = Dataset::from_records(&data.records);
        write_embeddings_csv(f.path(), &records, true).unwrap();
        assert_eq!(load_embeddings_csv(f.path(), 3).unwrap(), records);
        write_embeddings_csv(f.path(), &data.public, false).unwrap();
        let public = load_embeddings_csv(f.path(), 3).unwrap();
        assert_eq!(public.embeddings, data.public.embeddings);
        assert!(public.labels.iter().all(Option::is_none));
    }

    #[test]
    fn synthetic_is_reproducible() {
        let spec = SyntheticSpec { per_class: 50, ..SyntheticSpec::default() };
        assert_eq!(generate_synthetic(&spec, 1).unwrap(), generate_synthetic(&spec, 1).unwrap());
        assert_ne!(generate_synthetic(&spec, 1).unwrap().records, generate_synthetic(&spec, 2).unwrap().records);
    }

    #[test]
    fn well_separated_pair_is_nearest_neighbor_separable() {
        let spec = SyntheticSpec { classes: 2, dim: 2, per_class: 2000, public_per_class: 2000, separation: 10.0, ..SyntheticSpec::default() };
        let data = generate_synthetic(&spec, 5).unwrap();
        let truth = data.public.primary_labels().unwrap();
        let mut hits = 0;
        for (x, &y) in data.public.embeddings.iter().zip(&truth) {
            let nearest = data
                .records
                .iter()
                .min_by(|a, b| {
                    let da: f64 = a.embedding.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum();
                    let db: f64 = b.embedding.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            hits += usize::from(nearest.label.primary() == y);
        }
        assert!(hits as f64 / truth.len() as f64 >= 0.999);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_synthetic(&SyntheticSpec { classes: 1, ..SyntheticSpec::default() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { dim: 3, ..SyntheticSpec::default() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { sigma: 0.0, ..SyntheticSpec::default() }, 0).is_err());
    }
}
