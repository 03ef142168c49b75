use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::budget::BudgetLedger;
use super::partition::{partition_records, Partition, PartitionScheme};
use super::student::ProxyStudent;
use crate::bsvs::{
    check_records, exact_aggregate, hard_label, is_degenerate, AnswerMatrix, ConnectionMap, NoisyMatrix,
    PrivacyModel, PrivacyParams, QuerySet, Record,
};
use crate::central::{central_laplace_mechanism, laplace_accuracy_bound};
use crate::error::{Error, Result};
use crate::local::{
    collision_accuracy_bound, flatten_support, local_laplace_accuracy_bound, local_laplace_encode,
    rr_accuracy_bound, rr_encode, rr_estimate, unflatten, CollisionParams, CollisionReport,
};
use crate::rknn::{
    forward_knn_exposure, reverse_knn_connect, select_queries_cluster, select_queries_uncertainty,
    DistanceMetric, KMeansConfig,
};
use crate::seed::{derive_seed, stage_rng, StageRng};
use crate::shuffle::{
    multi_message_decode, multi_message_encode, multi_message_modulus, shuffle, shuffle_accuracy_bound,
    single_message_pipeline, MultiMessageParams, ShuffleMessage, SingleMessageMechanism,
};

/// Per-record randomizer used under the local model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalMechanism {
    #[default]
    RandomizedResponse,
    Laplace,
    Collision,
}

impl fmt::Display for LocalMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RandomizedResponse => "rr",
            Self::Laplace => "laplace",
            Self::Collision => "collision",
        })
    }
}

impl FromStr for LocalMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rr" | "randomized-response" => Ok(Self::RandomizedResponse),
            "laplace" => Ok(Self::Laplace),
            "collision" => Ok(Self::Collision),
            other => Err(Error::param(format!("unknown local mechanism {other:?}"))),
        }
    }
}

/// Everything a simulation run needs besides the data.
///
/// `privacy.s` is the number of queries per iteration and `privacy.epsilon`
/// (and `delta`) the total budget, split evenly over `iterations`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub privacy: PrivacyParams,
    pub iterations: usize,
    pub metric: DistanceMetric,
    pub partition: PartitionScheme,
    pub n_clients: usize,
    pub local_mechanism: LocalMechanism,
    pub single_message_mechanism: SingleMessageMechanism,
    /// Failure probability used for the reported per-iteration bound.
    pub beta: f64,
    pub parallel: bool,
    pub kmeans: KMeansConfig,
}

impl SimConfig {
    pub fn new(privacy: PrivacyParams, n_clients: usize) -> Self {
        Self {
            privacy,
            iterations: 1,
            metric: DistanceMetric::Euclidean,
            partition: PartitionScheme::Iid,
            n_clients,
            local_mechanism: LocalMechanism::default(),
            single_message_mechanism: SingleMessageMechanism::default(),
            beta: 0.05,
            parallel: true,
            kmeans: KMeansConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.privacy.validate()?;
        if self.iterations == 0 {
            return Err(Error::param("need at least one iteration"));
        }
        if self.n_clients == 0 {
            return Err(Error::param("need at least one client"));
        }
        crate::central::check_beta(self.beta)
    }
}

/// Public data and optional ground truth for evaluation.
#[derive(Clone, Copy, Debug)]
pub struct SimInput<'a> {
    pub records: &'a [Record],
    pub public: &'a [Vec<f64>],
    pub public_truth: Option<&'a [usize]>,
    pub test: Option<(&'a [Vec<f64>], &'a [usize])>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub query_count: usize,
    pub noisy_counts: NoisyMatrix,
    pub hard_labels: Vec<usize>,
    pub degenerate: Vec<bool>,
    /// Max-norm accuracy bound of the mechanism at `beta`; absent when the
    /// budget is infinite.
    pub bound: Option<f64>,
    /// Largest deviation from the exact aggregate of the contributing records.
    pub max_error: f64,
    /// Buckets whose deviation reached `bound`.
    pub failed_buckets: usize,
    /// Per-report budget under the single-message shuffle model.
    pub local_epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismReport {
    pub model: PrivacyModel,
    pub iterations: Vec<IterationReport>,
    pub ledger: BudgetLedger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub report: MechanismReport,
    pub partition: Partition,
    pub query_embeddings: Vec<Vec<f64>>,
    pub query_labels: Vec<usize>,
    /// Label of every public sample: that of its nearest labeled query.
    pub public_labels: Vec<usize>,
    pub acc_pl: Option<f64>,
    pub acc_proxy: Option<f64>,
}

enum Contribution {
    Counts(AnswerMatrix),
    Noisy(NoisyMatrix),
    Collision(CollisionReport),
    Messages(Vec<ShuffleMessage>),
}

struct ClientOutput {
    exact: AnswerMatrix,
    contribution: Contribution,
}

fn client_answer(records: &[Record], connections: &ConnectionMap, members: &[usize], shape: (usize, usize)) -> Result<AnswerMatrix> {
    let mut answer = AnswerMatrix::zeros(shape.0, shape.1);
    for &j in members {
        let label = &records[j].label;
        if let Some(&c) = label.ones().iter().find(|&&c| c >= shape.1) {
            return Err(Error::param(format!("record {} has label {c} outside {} classes", records[j].id, shape.1)));
        }
        for &l in connections.buckets(j) {
            for &c in label.ones() {
                answer.add_at(l, c, 1);
            }
        }
    }
    Ok(answer)
}

fn pick_one(members: &[usize], rng: &mut StageRng) -> Vec<usize> {
    if members.is_empty() {
        Vec::new()
    } else {
        vec![members[rng.random_range(0..members.len())]]
    }
}

struct Iteration<'a> {
    records: &'a [Record],
    connections: &'a ConnectionMap,
    clients: &'a [Vec<usize>],
    params: &'a PrivacyParams,
    config: &'a SimConfig,
    master_seed: u64,
    t: usize,
}

impl Iteration<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.params.s, self.params.label_count)
    }

    fn client(&self, i: usize, multi: Option<&MultiMessageParams>) -> Result<ClientOutput> {
        let mut rng = stage_rng(self.master_seed, &format!("client/{}", self.t), i as u64);
        let members = &self.clients[i];
        let eps = self.params.epsilon;
        let kr = self.params.kr();
        let one_record = matches!(self.params.model, PrivacyModel::Local | PrivacyModel::ShuffleSingle);
        let used = if one_record { pick_one(members, &mut rng) } else { members.clone() };
        let exact = client_answer(self.records, self.connections, &used, self.shape())?;
        let contribution = match self.params.model {
            PrivacyModel::Central | PrivacyModel::ShuffleSingle => Contribution::Counts(exact.clone()),
            PrivacyModel::Local => match self.config.local_mechanism {
                LocalMechanism::RandomizedResponse => Contribution::Counts(rr_encode(&exact, eps, kr, &mut rng)?),
                LocalMechanism::Laplace => Contribution::Noisy(local_laplace_encode(&exact, eps, kr, &mut rng)?),
                LocalMechanism::Collision => {
                    let collision = self.collision_params()?;
                    Contribution::Collision(collision.encode(&flatten_support(&exact)?, &mut rng)?)
                }
            },
            PrivacyModel::ShuffleMulti => match multi {
                Some(multi) => Contribution::Messages(multi_message_encode(&exact, multi, &mut rng)?),
                None => Contribution::Counts(exact.clone()),
            },
        };
        Ok(ClientOutput { exact, contribution })
    }

    fn collision_params(&self) -> Result<CollisionParams> {
        let p = self.params;
        CollisionParams::with_default_length(p.s * p.label_count, p.k.min(p.s) * p.r, p.epsilon)
    }

    fn multi_params(&self) -> Result<MultiMessageParams> {
        let p = self.params;
        let modulus = multi_message_modulus(self.records.len().max(1), p.kr(), p.epsilon)?;
        MultiMessageParams::with_modulus(p.s, p.label_count, self.clients.len(), p.epsilon, p.delta, p.kr(), modulus)
    }

    /// Returns the noisy aggregate, the exact aggregate it estimates, the
    /// accuracy bound and the single-message local budget.
    fn run(&self) -> Result<(NoisyMatrix, AnswerMatrix, Option<f64>, Option<f64>)> {
        let p = self.params;
        let shape = self.shape();
        let n = self.clients.len();
        let multi = match p.model {
            PrivacyModel::ShuffleMulti if p.epsilon.is_finite() => Some(self.multi_params()?),
            _ => None,
        };
        let outputs: Vec<ClientOutput> = if self.config.parallel {
            (0..n).into_par_iter().map(|i| self.client(i, multi.as_ref())).collect::<Result<_>>()?
        } else {
            (0..n).map(|i| self.client(i, multi.as_ref())).collect::<Result<_>>()?
        };
        let exact_parts: Vec<AnswerMatrix> = outputs.iter().map(|o| o.exact.clone()).collect();
        let exact = exact_aggregate(&exact_parts, shape)?;
        let mut noise_rng = stage_rng(self.master_seed, "noise", self.t as u64);
        let beta = self.config.beta;
        let finite = p.epsilon.is_finite();
        let (k, r, labels) = (p.k, p.r, p.label_count);
        let mut local_epsilon = None;

        let (noisy, bound) = match p.model {
            PrivacyModel::Central => (
                central_laplace_mechanism(&exact, p, &mut noise_rng)?,
                finite.then(|| laplace_accuracy_bound(p, beta)).transpose()?,
            ),
            PrivacyModel::Local => match self.config.local_mechanism {
                LocalMechanism::RandomizedResponse => {
                    let reports: Vec<AnswerMatrix> = outputs.into_iter().map(|o| counts(o.contribution)).collect::<Result<_>>()?;
                    let summed = exact_aggregate(&reports, shape)?;
                    (
                        rr_estimate(&summed, n, p.epsilon, p.kr())?,
                        finite.then(|| rr_accuracy_bound(p.epsilon, k, r, n, labels, beta)).transpose()?,
                    )
                }
                LocalMechanism::Laplace => {
                    let mut total = NoisyMatrix::zeros(shape.0, shape.1);
                    for o in outputs {
                        match o.contribution {
                            Contribution::Noisy(m) => total.add_assign(&m)?,
                            _ => return Err(Error::param("unexpected client contribution")),
                        }
                    }
                    (total, finite.then(|| local_laplace_accuracy_bound(p.epsilon, k, r, n, labels, beta)).transpose()?)
                }
                LocalMechanism::Collision => {
                    let reports: Vec<CollisionReport> = outputs
                        .into_iter()
                        .map(|o| match o.contribution {
                            Contribution::Collision(rep) => Ok(rep),
                            _ => Err(Error::param("unexpected client contribution")),
                        })
                        .collect::<Result<_>>()?;
                    let estimate = self.collision_params()?.estimate(&reports)?;
                    (
                        unflatten(estimate, shape.0, shape.1)?,
                        Some(collision_accuracy_bound(p.epsilon, k, r, n, labels, beta)?),
                    )
                }
            },
            PrivacyModel::ShuffleMulti => match multi {
                None => (exact.to_real(), None),
                Some(multi) => {
                    let mut pool: Vec<ShuffleMessage> = Vec::new();
                    for o in outputs {
                        match o.contribution {
                            Contribution::Messages(m) => pool.extend(m),
                            _ => return Err(Error::param("unexpected client contribution")),
                        }
                    }
                    shuffle(&mut pool, &mut noise_rng);
                    (
                        multi_message_decode(&pool, shape.0, shape.1, multi.modulus)?,
                        Some(shuffle_accuracy_bound(p.epsilon, k, r, labels, beta)?),
                    )
                }
            },
            PrivacyModel::ShuffleSingle => {
                if !finite {
                    (exact.to_real(), None)
                } else {
                    let answers: Vec<AnswerMatrix> = outputs.into_iter().map(|o| counts(o.contribution)).collect::<Result<_>>()?;
                    let mechanism = self.config.single_message_mechanism;
                    let outcome = single_message_pipeline(&answers, p, mechanism, &mut noise_rng)?;
                    local_epsilon = Some(outcome.local_epsilon);
                    let bound = mechanism.accuracy_bound(outcome.local_epsilon, k, r, n, labels, beta)?;
                    (outcome.estimate, Some(bound))
                }
            }
        };
        Ok((noisy, exact, bound, local_epsilon))
    }
}

fn counts(c: Contribution) -> Result<AnswerMatrix> {
    match c {
        Contribution::Counts(m) => Ok(m),
        _ => Err(Error::param("unexpected client contribution")),
    }
}

fn nearest_index(points: &[Vec<f64>], x: &[f64], metric: DistanceMetric) -> Result<usize> {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in points.iter().enumerate() {
        let d = metric.distance(x, p)?;
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

/// Runs the record-level private labeling loop: select queries, connect
/// records by reverse k-NN, answer per client, aggregate under the privacy
/// model, label the queries and refit the proxy student.
///
/// Seeds: partition `derive_seed(m, "partition", 0)`, clustering
/// `derive_seed(m, "kmeans", 0)`, client `i` at iteration `t` draws from
/// `stage_rng(m, "client/t", i)` and the aggregate stage from
/// `stage_rng(m, "noise", t)`, so parallel and sequential runs agree.
pub fn run_algorithm1(input: SimInput<'_>, config: &SimConfig, master_seed: u64) -> Result<SimOutcome> {
    config.validate()?;
    let SimInput { records, public, public_truth, test } = input;
    check_records(records)?;
    if let Some(truth) = public_truth {
        if truth.len() != public.len() {
            return Err(Error::shape(public.len(), truth.len()));
        }
    }
    let privacy = &config.privacy;
    if privacy.model == PrivacyModel::Local && privacy.epsilon.is_infinite() && config.local_mechanism == LocalMechanism::Collision {
        return Err(Error::param("the collision mechanism needs a finite budget"));
    }
    let partition = partition_records(records, config.partition, config.n_clients, derive_seed(master_seed, "partition", 0))?;
    let clients = partition.clients();
    let t_total = config.iterations as f64;
    let epsilon = privacy.epsilon / t_total;
    let delta = privacy.delta / t_total;

    let mut ledger = BudgetLedger::new(records.len());
    let mut reports = Vec::with_capacity(config.iterations);
    let mut labeled_x: Vec<Vec<f64>> = Vec::new();
    let mut labeled_y: Vec<usize> = Vec::new();
    let mut taken = vec![false; public.len()];
    let mut student: Option<ProxyStudent> = None;

    for t in 1..=config.iterations {
        let queries = if t == 1 {
            select_queries_cluster(public, privacy.s, derive_seed(master_seed, "kmeans", 0), config.kmeans)?.queries
        } else {
            let model = student.as_ref().ok_or_else(|| Error::param("no student after the first iteration"))?;
            let soft = public.iter().map(|x| model.soft(x)).collect::<Result<Vec<_>>>()?;
            let (chosen, queries) = select_queries_uncertainty(public, &soft, &taken, privacy.s)?;
            let Some(queries) = queries else { break };
            for i in chosen {
                taken[i] = true;
            }
            queries
        };
        let params = PrivacyParams { epsilon, delta, s: queries.len(), ..privacy.clone() };
        params.validate()?;
        let connections = reverse_knn_connect(records, &queries, params.k, config.metric)?;
        let forward = forward_knn_exposure(records, &queries, params.k, config.metric)?;
        let degrees: Vec<usize> = connections.iter().map(<[usize]>::len).collect();
        ledger.record_iteration(epsilon, params.k, &degrees, &forward)?;

        let iteration = Iteration {
            records,
            connections: &connections,
            clients: &clients,
            params: &params,
            config,
            master_seed,
            t,
        };
        let (noisy, exact, bound, local_epsilon) = iteration.run()?;
        let deviations = noisy.row_deviations(&exact)?;
        let max_error = deviations.iter().copied().fold(0.0, f64::max);
        let failed_buckets = bound.map_or(0, |b| deviations.iter().filter(|&&d| d >= b).count());
        let hard_labels: Vec<usize> = (0..noisy.rows()).map(|l| hard_label(noisy.row(l))).collect();
        let degenerate: Vec<bool> = (0..noisy.rows()).map(|l| is_degenerate(noisy.row(l))).collect();

        labeled_x.extend(queries.iter().map(<[f64]>::to_vec));
        labeled_y.extend(&hard_labels);
        student = Some(ProxyStudent::fit(&labeled_x, &labeled_y, privacy.label_count, config.metric)?);

        reports.push(IterationReport {
            iteration: t,
            epsilon,
            delta,
            query_count: queries.len(),
            noisy_counts: noisy,
            hard_labels,
            degenerate,
            bound,
            max_error,
            failed_buckets,
            local_epsilon,
        });
    }

    let public_labels = public
        .iter()
        .map(|x| nearest_index(&labeled_x, x, config.metric).map(|i| labeled_y[i]))
        .collect::<Result<Vec<_>>>()?;
    let acc_pl = public_truth.map(|truth| crate::rknn::labeling_accuracy(&public_labels, truth)).transpose()?;
    let acc_proxy = match (test, &student) {
        (Some((x, y)), Some(model)) => Some(model.accuracy(x, y)?),
        _ => None,
    };
    Ok(SimOutcome {
        report: MechanismReport { model: privacy.model, iterations: reports, ledger },
        partition,
        query_embeddings: labeled_x,
        query_labels: labeled_y,
        public_labels,
        acc_pl,
        acc_proxy,
    })
}

/// Queries for the invariance check are taken as given, not selected.
pub(crate) fn aggregate_for_partition(
    records: &[Record],
    queries: &QuerySet,
    params: &PrivacyParams,
    metric: DistanceMetric,
    partition: &Partition,
) -> Result<AnswerMatrix> {
    let connections = reverse_knn_connect(records, queries, params.k, metric)?;
    let shape = (queries.len(), params.label_count);
    let parts = partition
        .clients()
        .iter()
        .map(|members| client_answer(records, &connections, members, shape))
        .collect::<Result<Vec<_>>>()?;
    exact_aggregate(&parts, shape)
}
