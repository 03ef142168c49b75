use crate::bsvs::QuerySet;
use crate::error::{Error, Result};

/// Picks the `s` samples with the smallest top-1 minus top-2 probability
/// margin among those not yet `taken`; ties go to the smaller index. With
/// fewer than `s` candidates all of them are returned.
///
/// Returns the chosen sample indices (ascending by margin, then index) and
/// the matching query set.
pub fn select_queries_uncertainty(
    public: &[Vec<f64>],
    soft_labels: &[Vec<f64>],
    taken: &[bool],
    s: usize,
) -> Result<(Vec<usize>, Option<QuerySet>)> {
    if soft_labels.len() != public.len() || taken.len() != public.len() {
        return Err(Error::shape(
            format!("{} soft labels and flags", public.len()),
            format!("{} soft labels, {} flags", soft_labels.len(), taken.len()),
        ));
    }
    let mut candidates: Vec<(f64, usize)> = soft_labels
        .iter()
        .enumerate()
        .filter(|&(i, _)| !taken[i])
        .map(|(i, p)| (margin(p), i))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(s);
    let chosen: Vec<usize> = candidates.into_iter().map(|(_, i)| i).collect();
    let queries = if chosen.is_empty() {
        None
    } else {
        Some(QuerySet::new(chosen.iter().map(|&i| public[i].clone()).collect())?)
    };
    Ok((chosen, queries))
}

fn margin(p: &[f64]) -> f64 {
    let (mut top1, mut top2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in p {
        if v > top1 {
            top2 = top1;
            top1 = v;
        } else if v > top2 {
            top2 = v;
        }
    }
    if top2 == f64::NEG_INFINITY {
        return top1.max(0.0);
    }
    top1 - top2
}

/// Gives every public sample the label of its cluster.
pub fn propagate_labels(assignment: &[usize], query_labels: &[usize]) -> Result<Vec<usize>> {
    assignment
        .iter()
        .map(|&c| {
            query_labels.get(c).copied().ok_or_else(|| {
                Error::param(format!("cluster {c} has no label ({} labels)", query_labels.len()))
            })
        })
        .collect()
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn labeling_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::param("accuracy of an empty labeling"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}
