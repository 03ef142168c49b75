use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Record-level privacy accounting across the iterations of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub per_iteration_epsilon: Vec<f64>,
    pub per_iteration_k: Vec<usize>,
    /// Queries each record was connected to, summed over iterations.
    pub queries_touched: Vec<usize>,
    /// Queries that would have picked each record under forward k-NN.
    pub forward_knn_exposure: Vec<usize>,
}

impl BudgetLedger {
    pub fn new(records: usize) -> Self {
        Self {
            queries_touched: vec![0; records],
            forward_knn_exposure: vec![0; records],
            ..Self::default()
        }
    }

    /// Charges one iteration: its budget, its `k`, the per-record
    /// connection degrees and the forward k-NN comparison column.
    pub fn record_iteration(&mut self, epsilon: f64, k: usize, degrees: &[usize], forward: &[usize]) -> Result<()> {
        let m = self.queries_touched.len();
        if degrees.len() != m || forward.len() != m {
            return Err(Error::shape(m, degrees.len().max(forward.len())));
        }
        if let Some(d) = degrees.iter().find(|&&d| d > k) {
            return Err(Error::Infeasible(format!("a record touched {d} queries with k = {k}")));
        }
        self.per_iteration_epsilon.push(epsilon);
        self.per_iteration_k.push(k);
        for (t, d) in self.queries_touched.iter_mut().zip(degrees) {
            *t += d;
        }
        for (t, d) in self.forward_knn_exposure.iter_mut().zip(forward) {
            *t += d;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub iterations: usize,
    /// Pure-DP spend of every record: the sum of per-iteration budgets.
    pub total_epsilon: f64,
    pub max_queries_touched: usize,
    /// `k` summed over iterations; `max_queries_touched` never exceeds it.
    pub degree_limit: usize,
    pub max_forward_knn_exposure: usize,
}

/// Totals across one or more runs over the same records.
pub fn account_budget(ledgers: &[BudgetLedger]) -> Result<BudgetSummary> {
    let Some(first) = ledgers.first() else {
        return Err(Error::param("no ledgers to account"));
    };
    let m = first.queries_touched.len();
    let mut touched = vec![0usize; m];
    let mut forward = vec![0usize; m];
    let mut summary = BudgetSummary {
        iterations: 0,
        total_epsilon: 0.0,
        max_queries_touched: 0,
        degree_limit: 0,
        max_forward_knn_exposure: 0,
    };
    for ledger in ledgers {
        if ledger.queries_touched.len() != m {
            return Err(Error::shape(m, ledger.queries_touched.len()));
        }
        summary.iterations += ledger.per_iteration_epsilon.len();
        summary.total_epsilon += ledger.per_iteration_epsilon.iter().sum::<f64>();
        summary.degree_limit += ledger.per_iteration_k.iter().sum::<usize>();
        for (t, d) in touched.iter_mut().zip(&ledger.queries_touched) {
            *t += d;
        }
        for (t, d) in forward.iter_mut().zip(&ledger.forward_knn_exposure) {
            *t += d;
        }
    }
    summary.max_queries_touched = touched.into_iter().max().unwrap_or(0);
    summary.max_forward_knn_exposure = forward.into_iter().max().unwrap_or(0);
    if summary.max_queries_touched > summary.degree_limit {
        return Err(Error::Infeasible("record degree exceeds the summed k".into()));
    }
    Ok(summary)
}
