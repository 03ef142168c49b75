use crate::bsvs::AnswerMatrix;
use crate::error::{Error, Result};

/// Elementwise sum of per-client answers. `shape` is required so that an
/// empty client list still yields a well-formed zero matrix.
pub fn exact_aggregate(answers: &[AnswerMatrix], shape: (usize, usize)) -> Result<AnswerMatrix> {
    let mut total = AnswerMatrix::zeros(shape.0, shape.1);
    for answer in answers {
        answer.check_same_shape(shape)?;
        for (acc, &c) in total.counts_mut().iter_mut().zip(answer.as_flat()) {
            *acc += c;
        }
    }
    Ok(total)
}

/// Index of the largest count; ties go to the smallest index.
pub fn hard_label(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// A row with no positive count carries no label information.
pub fn is_degenerate(row: &[f64]) -> bool {
    row.iter().all(|&v| !(v > 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabel {
    pub probabilities: Vec<f64>,
    /// Set when every count was nonpositive and the uniform distribution was
    /// returned instead.
    pub degenerate: bool,
    /// Set when at least one negative count was clamped to zero.
    pub clamped: bool,
}

/// Normalized counts after clamping negatives to zero.
pub fn soft_label(row: &[f64]) -> SoftLabel {
    let clamped = row.iter().any(|&v| v < 0.0);
    let positive: Vec<f64> = row.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = positive.iter().sum();
    if !(total > 0.0) {
        let n = row.len().max(1) as f64;
        return SoftLabel {
            probabilities: vec![1.0 / n; row.len()],
            degenerate: true,
            clamped,
        };
    }
    SoftLabel {
        probabilities: positive.iter().map(|&v| v / total).collect(),
        degenerate: false,
        clamped,
    }
}

/// `row[true_label]` minus the largest other entry.
pub fn count_gap(row: &[f64], true_label: usize) -> Result<f64> {
    if row.len() < 2 {
        return Err(Error::param("count gap needs at least two classes"));
    }
    if true_label >= row.len() {
        return Err(Error::param(format!(
            "label {true_label} out of range for {} classes",
            row.len()
        )));
    }
    let rival = row
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != true_label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(row[true_label] - rival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: Vec<Vec<i64>>) -> AnswerMatrix {
        AnswerMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let a1 = m(vec![vec![1, 0], vec![0, 0]]);
        let a2 = m(vec![vec![1, 0], vec![0, 1]]);
        let sum = exact_aggregate(&[a1.clone(), a2.clone()], (2, 2)).unwrap();
        assert_eq!(sum, m(vec![vec![2, 0], vec![0, 1]]));
        assert_eq!(sum.l1_norm(), a1.l1_norm() + a2.l1_norm());
        assert_eq!(exact_aggregate(&[a1.clone()], (2, 2)).unwrap(), a1);
        assert_eq!(exact_aggregate(&[], (2, 2)).unwrap(), AnswerMatrix::zeros(2, 2));
    }

    #[test]
    fn aggregate_rejects_shape_mismatch() {
        let a = m(vec![vec![1, 0]]);
        let b = m(vec![vec![1, 0, 0]]);
        assert!(matches!(
            exact_aggregate(&[a, b], (1, 2)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn hard_label_examples() {
        assert_eq!(hard_label(&[2.0, 0.0]), 0);
        assert_eq!(hard_label(&[1.0, 1.0]), 0);
        assert_eq!(hard_label(&[0.3, 5.1, -2.0]), 1);
        assert_eq!(hard_label(&[0.0, 0.0, 0.0]), 0);
        assert!(is_degenerate(&[0.0, -1.0]));
        assert!(!is_degenerate(&[0.0, 1.0]));
    }

    #[test]
    fn soft_label_examples() {
        assert_eq!(soft_label(&[2.0, 2.0]).probabilities, vec![0.5, 0.5]);
        assert_eq!(soft_label(&[3.0, 0.0, 1.0]).probabilities, vec![0.75, 0.0, 0.25]);
        let clamped = soft_label(&[-1.0, 2.0]);
        assert_eq!(clamped.probabilities, vec![0.0, 1.0]);
        assert!(clamped.clamped && !clamped.degenerate);
        let flat = soft_label(&[-1.0, 0.0]);
        assert!(flat.degenerate);
        assert_eq!(flat.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn count_gap_examples() {
        assert_eq!(count_gap(&[5.0, 2.0, 1.0], 0).unwrap(), 3.0);
        assert_eq!(count_gap(&[1.0, 1.0], 0).unwrap(), 0.0);
        assert_eq!(count_gap(&[0.0, 4.0], 0).unwrap(), -4.0);
        assert!(count_gap(&[1.0], 0).is_err());
        assert!(count_gap(&[1.0, 2.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn soft_label_is_a_distribution(row in prop::collection::vec(-50.0f64..50.0, 2..12)) {
            let soft = soft_label(&row);
            let total: f64 = soft.probabilities.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(soft.probabilities.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn argmax_of_soft_matches_hard(row in prop::collection::vec(0u32..1000, 2..12)) {
            let row: Vec<f64> = row.into_iter().map(f64::from).collect();
            let soft = soft_label(&row);
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            let tied = row.iter().filter(|&&v| v == max).count() > 1;
            prop_assume!(!soft.clamped && !soft.degenerate && !tied);
            prop_assert_eq!(hard_label(&soft.probabilities), hard_label(&row));
        }

        #[test]
        fn aggregate_is_order_invariant(
            flat in prop::collection::vec(prop::collection::vec(0i64..5, 6), 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let answers: Vec<AnswerMatrix> = flat
                .into_iter()
                .map(|c| AnswerMatrix::from_flat(2, 3, c).unwrap())
                .collect();
            let mut shuffled = answers.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(
                exact_aggregate(&answers, (2, 3)).unwrap(),
                exact_aggregate(&shuffled, (2, 3)).unwrap()
            );
        }
    }
}
