use super::distance::DistanceMetric;
use crate::bsvs::{check_records, AnswerMatrix, ConnectionMap, QuerySet, Record};
use crate::error::{Error, Result};

/// Connects every record to its `min(k, s)` nearest queries. Equal
/// distances resolve to the smaller query index.
pub fn reverse_knn_connect(
    records: &[Record],
    queries: &QuerySet,
    k: usize,
    metric: DistanceMetric,
) -> Result<ConnectionMap> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    check_records(records)?;
    let take = k.min(queries.len());
    let mut sets = Vec::with_capacity(records.len());
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(queries.len());
    for rec in records {
        scratch.clear();
        for (l, q) in queries.iter().enumerate() {
            scratch.push((metric.distance(&rec.embedding, q)?, l));
        }
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take < scratch.len() {
            scratch.select_nth_unstable_by(take - 1, by_distance);
        }
        let mut set: Vec<usize> = scratch[..take].iter().map(|&(_, l)| l).collect();
        set.sort_unstable();
        sets.push(set);
    }
    ConnectionMap::new(queries.len(), sets)
}

/// One client's label counts: row `l` sums the labels of the records whose
/// bucket set contains `l`.
pub fn local_answer(
    records: &[Record],
    connections: &ConnectionMap,
    s: usize,
    label_count: usize,
) -> Result<AnswerMatrix> {
    if connections.len() != records.len() {
        return Err(Error::shape(
            format!("{} connection sets", records.len()),
            connections.len(),
        ));
    }
    if connections.query_count() != s {
        return Err(Error::shape(format!("{s} queries"), connections.query_count()));
    }
    let mut answer = AnswerMatrix::zeros(s, label_count);
    for (rec, buckets) in records.iter().zip(connections.iter()) {
        if let Some(&c) = rec.label.ones().iter().find(|&&c| c >= label_count) {
            return Err(Error::param(format!(
                "record {} has label {c} outside {label_count} classes",
                rec.id
            )));
        }
        for &l in buckets {
            for &c in rec.label.ones() {
                answer.add_at(l, c, 1);
            }
        }
    }
    Ok(answer)
}

/// How many queries would pick each record among their `k` nearest records
/// under forward k-NN labeling. This is the per-record exposure reverse
/// k-NN avoids; it can reach `s`.
pub fn forward_knn_exposure(
    records: &[Record],
    queries: &QuerySet,
    k: usize,
    metric: DistanceMetric,
) -> Result<Vec<usize>> {
    let mut exposure = vec![0usize; records.len()];
    if records.is_empty() {
        return Ok(exposure);
    }
    let take = k.min(records.len());
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(records.len());
    for q in queries.iter() {
        scratch.clear();
        for (j, rec) in records.iter().enumerate() {
            scratch.push((metric.distance(q, &rec.embedding)?, j));
        }
        if take < scratch.len() {
            scratch.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        for &(_, j) in &scratch[..take] {
            exposure[j] += 1;
        }
    }
    Ok(exposure)
}
