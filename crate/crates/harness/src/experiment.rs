//! Runs `simulate` trials and persists the results JSON.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::data::{generate_synthetic, load_embeddings_csv};
use crate::error::{HarnessError, Result};
use rknn_core::bsvs::Record;
use rknn_core::seed::derive_seed;
use rknn_core::sim::{account_budget, run_algorithm1, BudgetSummary, SimConfig, SimInput, SimOutcome};

pub const SCHEMA_VERSION: u32 = 1;

/// Private records, public embeddings and optional evaluation labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedData {
    pub records: Vec<Record>,
    pub public: Vec<Vec<f64>>,
    pub public_truth: Option<Vec<usize>>,
    pub test: Option<(Vec<Vec<f64>>, Vec<usize>)>,
}

impl LoadedData {
    pub fn input(&self) -> SimInput<'_> {
        SimInput {
            records: &self.records,
            public: &self.public,
            public_truth: self.public_truth.as_deref(),
            test: self.test.as_ref().map(|(x, y)| (x.as_slice(), y.as_slice())),
        }
    }
}

pub fn load_data(config: &ExperimentConfig) -> Result<LoadedData> {
    match &config.data {
        DataSource::Synthetic(spec) => {
            let data = generate_synthetic(spec, config.data_seed)?;
            Ok(LoadedData {
                public_truth: data.public.primary_labels(),
                test: data.test.primary_labels().map(|y| (data.test.embeddings.clone(), y)),
                public: data.public.embeddings,
                records: data.records,
            })
        }
        DataSource::Csv { records, public, public_truth, test } => {
            let records = load_embeddings_csv(records, config.labels)?.to_records()?;
            let public = load_embeddings_csv(public, config.labels)?;
            let public_truth = match public_truth {
                Some(path) => {
                    let truth = load_embeddings_csv(path, config.labels)?;
                    let labels = truth
                        .primary_labels()
                        .ok_or_else(|| HarnessError::config(format!("{} has unlabeled rows", path.display())))?;
                    if truth.ids != public.ids {
                        return Err(HarnessError::config("public_truth rows do not match the public file"));
                    }
                    Some(labels)
                }
                None => public.primary_labels(),
            };
            let test = match test {
                Some(path) => {
                    let t = load_embeddings_csv(path, config.labels)?;
                    let y = t.primary_labels().ok_or_else(|| HarnessError::config(format!("{} has unlabeled rows", path.display())))?;
                    Some((t.embeddings, y))
                }
                None => None,
            };
            Ok(LoadedData { records, public: public.embeddings, public_truth, test })
        }
    }
}

pub fn sim_config(config: &ExperimentConfig, record_count: usize, parallel: bool) -> Result<SimConfig> {
    let n_clients = config.n_clients.unwrap_or(match config.partition {
        rknn_core::sim::PartitionScheme::SingleRecordPerClient => record_count,
        _ => 10,
    });
    let mut sim = SimConfig::new(config.privacy()?, n_clients);
    sim.iterations = config.iterations;
    sim.metric = config.metric;
    sim.partition = config.partition;
    sim.local_mechanism = config.local_mechanism;
    sim.single_message_mechanism = config.single_mechanism;
    sim.beta = config.beta;
    sim.parallel = parallel;
    Ok(sim)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub acc_pl: Option<f64>,
    pub acc_proxy: Option<f64>,
    /// Largest max-norm error over the iterations.
    pub max_error: f64,
    /// Hard labels of every labeled query, in selection order.
    pub labels: Vec<usize>,
    pub failed_buckets: usize,
    pub buckets: usize,
}

impl TrialResult {
    pub fn from_outcome(trial: usize, seed: u64, outcome: &SimOutcome) -> Self {
        let iterations = &outcome.report.iterations;
        Self {
            trial,
            seed,
            acc_pl: outcome.acc_pl,
            acc_proxy: outcome.acc_proxy,
            max_error: iterations.iter().map(|it| it.max_error).fold(0.0, f64::max),
            labels: outcome.query_labels.clone(),
            failed_buckets: iterations.iter().map(|it| it.failed_buckets).sum(),
            buckets: iterations.iter().filter(|it| it.bound.is_some()).map(|it| it.query_count).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    /// Mean and sample standard deviation of `acc_pl`.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub mean_acc_proxy: Option<f64>,
    /// Fraction of bucket releases whose error reached the bound.
    pub empirical_beta: Option<f64>,
}

pub fn summarize(per_trial: &[TrialResult]) -> Result<Summary> {
    if per_trial.is_empty() {
        return Err(HarnessError::config("cannot summarize an empty trial list"));
    }
    let mean_std = |values: Option<Vec<f64>>| -> (Option<f64>, Option<f64>) {
        let Some(v) = values else { return (None, None) };
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        (Some(mean), Some(var.sqrt()))
    };
    let (mean, std) = mean_std(per_trial.iter().map(|t| t.acc_pl).collect());
    let (mean_acc_proxy, _) = mean_std(per_trial.iter().map(|t| t.acc_proxy).collect());
    let buckets: usize = per_trial.iter().map(|t| t.buckets).sum();
    let failed: usize = per_trial.iter().map(|t| t.failed_buckets).sum();
    Ok(Summary {
        trials: per_trial.len(),
        mean,
        std,
        mean_acc_proxy,
        empirical_beta: (buckets > 0).then(|| failed as f64 / buckets as f64),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub per_trial: Vec<TrialResult>,
    pub summary: Summary,
    /// Per-run accounting; every trial is an independent run over the same
    /// records, so the largest per-run values are reported.
    pub budget_ledger_summary: BudgetSummary,
}

/// Runs every trial with seed `derive_seed(seed, "trial", i)`.
pub fn run_experiment(config: &ExperimentConfig, parallel: bool) -> Result<Results> {
    config.validate()?;
    let data = load_data(config)?;
    let sim = sim_config(config, data.records.len(), parallel)?;
    let trial = |i: usize| -> Result<(TrialResult, BudgetSummary)> {
        let seed = derive_seed(config.seed, "trial", i as u64);
        let outcome = run_algorithm1(data.input(), &sim, seed)?;
        let budget = account_budget(std::slice::from_ref(&outcome.report.ledger))?;
        Ok((TrialResult::from_outcome(i, seed, &outcome), budget))
    };
    let outputs: Vec<(TrialResult, BudgetSummary)> = if parallel {
        (0..config.trials).into_par_iter().map(trial).collect::<Result<_>>()?
    } else {
        (0..config.trials).map(trial).collect::<Result<_>>()?
    };
    let (per_trial, budgets): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    let budget_ledger_summary = budgets
        .into_iter()
        .reduce(|a, b| BudgetSummary {
            iterations: a.iterations.max(b.iterations),
            total_epsilon: a.total_epsilon.max(b.total_epsilon),
            max_queries_touched: a.max_queries_touched.max(b.max_queries_touched),
            degree_limit: a.degree_limit.max(b.degree_limit),
            max_forward_knn_exposure: a.max_forward_knn_exposure.max(b.max_forward_knn_exposure),
        })
        .ok_or_else(|| HarnessError::config("no trials"))?;
    Ok(Results { schema: SCHEMA_VERSION, config: config.clone(), summary: summarize(&per_trial)?, per_trial, budget_ledger_summary })
}

pub fn results_json(results: &Results) -> Result<String> {
    let mut text = serde_json::to_string_pretty(results).map_err(|e| HarnessError::config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn write_results(results: &Results, path: &Path) -> Result<()> {
    if results.per_trial.is_empty() {
        return Err(HarnessError::config("refusing to write results without trials"));
    }
    std::fs::write(path, results_json(results)?).map_err(|e| HarnessError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Results> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let results: Results = serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    if results.schema != SCHEMA_VERSION {
        return Err(HarnessError::config(format!("unsupported results schema {}", results.schema)));
    }
    Ok(results)
}
