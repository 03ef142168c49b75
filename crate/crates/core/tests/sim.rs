use rand::Rng;
use rand_distr::{Distribution, Normal};
use rknn_core::bsvs::{hard_label, LabelVector, PrivacyModel, PrivacyParams, QuerySet, Record};
use rknn_core::rknn::DistanceMetric;
use rknn_core::seed::rng_from_seed;
use rknn_core::shuffle::SingleMessageMechanism;
use rknn_core::sim::{
    account_budget, run_algorithm1, verify_partition_invariance, InvarianceOutcome, LocalMechanism, PartitionScheme,
    SimConfig, SimInput,
};

fn fixture() -> (Vec<Record>, Vec<Vec<f64>>, Vec<usize>) {
    let rec = |id: &str, x: f64, y: f64, c: usize| Record::new(id, vec![x, y], LabelVector::one_hot(2, c).unwrap());
    let records = vec![rec("x1", 1.0, 0.0, 0), rec("x2", 9.0, 0.0, 1), rec("x3", 0.0, 9.0, 1), rec("x4", 0.0, 1.0, 0)];
    let public = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]];
    (records, public, vec![0, 1, 1])
}

struct Mixture {
    records: Vec<Record>,
    public: Vec<Vec<f64>>,
    truth: Vec<usize>,
}

fn mixture(classes: usize, per_class: usize, public_per_class: usize, separation: f64, seed: u64) -> Mixture {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let point = |c: usize, rng: &mut rknn_core::seed::StageRng| -> Vec<f64> {
        (0..classes).map(|j| if j == c { separation } else { 0.0 } + noise.sample(rng)).collect()
    };
    let mut records = Vec::new();
    for i in 0..classes * per_class {
        let c = i % classes;
        records.push(Record::new(format!("r{i}"), point(c, &mut rng), LabelVector::one_hot(classes, c).unwrap()));
    }
    let (mut public, mut truth) = (Vec::new(), Vec::new());
    for i in 0..classes * public_per_class {
        let c = i % classes;
        public.push(point(c, &mut rng));
        truth.push(c);
    }
    Mixture { records, public, truth }
}

fn central(eps: f64, k: usize, s: usize, labels: usize) -> PrivacyParams {
    PrivacyParams::new(PrivacyModel::Central, eps, 0.0, k, 1, s, labels).unwrap()
}

#[test]
fn fixture_noiseless_labels() {
    let (records, public, truth) = fixture();
    let config = SimConfig::new(central(1e6, 1, 3, 2), 2);
    let input = SimInput { records: &records, public: &public, public_truth: Some(&truth), test: None };
    let out = run_algorithm1(input, &config, 7).unwrap();
    assert_eq!(out.public_labels, vec![0, 1, 1]);
    assert_eq!(out.acc_pl, Some(1.0));
    let summary = account_budget(&[out.report.ledger]).unwrap();
    assert_eq!(summary.max_queries_touched, 1);
    assert_eq!(summary.total_epsilon, 1e6);
}

#[test]
fn fixture_tiny_budget_is_near_random() {
    let (records, public, truth) = fixture();
    let config = SimConfig { parallel: false, ..SimConfig::new(central(0.001, 1, 3, 2), 2) };
    let runs = 1000;
    let mut hits = 0usize;
    for seed in 0..runs {
        let input = SimInput { records: &records, public: &public, public_truth: Some(&truth), test: None };
        let out = run_algorithm1(input, &config, seed).unwrap();
        hits += out.public_labels.iter().zip(&truth).filter(|(a, b)| a == b).count();
    }
    let rate = hits as f64 / (3 * runs) as f64;
    // 4 sigma of a Bernoulli(1/2) mean over 3000 labels is about 0.037
    assert!((rate - 0.5).abs() < 0.04, "match rate {rate}");
}

#[test]
fn infinite_budget_matches_non_private_pipeline() {
    let data = mixture(3, 60, 10, 6.0, 1);
    let models = [
        (PrivacyModel::Central, 0.0, LocalMechanism::default()),
        (PrivacyModel::Local, 0.0, LocalMechanism::RandomizedResponse),
        (PrivacyModel::Local, 0.0, LocalMechanism::Laplace),
        (PrivacyModel::ShuffleMulti, 1e-6, LocalMechanism::default()),
    ];
    for (model, delta, mechanism) in models {
        let params = PrivacyParams::new(model, f64::INFINITY, delta, 2, 1, 6, 3).unwrap();
        let scheme = if model == PrivacyModel::Local { PartitionScheme::SingleRecordPerClient } else { PartitionScheme::Iid };
        let clients = if model == PrivacyModel::Local { data.records.len() } else { 7 };
        let config = SimConfig { partition: scheme, local_mechanism: mechanism, iterations: 2, ..SimConfig::new(params, clients) };
        let input = SimInput { records: &data.records, public: &data.public, public_truth: Some(&data.truth), test: None };
        let out = run_algorithm1(input, &config, 3).unwrap();
        for it in &out.report.iterations {
            assert_eq!(it.max_error, 0.0, "{model}");
            let expected: Vec<usize> = (0..it.noisy_counts.rows()).map(|l| hard_label(it.noisy_counts.row(l))).collect();
            assert_eq!(it.hard_labels, expected);
            assert!(it.noisy_counts.as_flat().iter().all(|v| v.fract() == 0.0));
        }
    }
}

#[test]
fn ledger_degree_within_k_times_t() {
    let data = mixture(4, 50, 20, 4.0, 2);
    for (k, t) in [(1, 1), (2, 3), (3, 2)] {
        let params = central(0.3, k, 5, 4);
        let config = SimConfig { iterations: t, ..SimConfig::new(params, 5) };
        let input = SimInput { records: &data.records, public: &data.public, public_truth: None, test: None };
        let out = run_algorithm1(input, &config, 11).unwrap();
        let summary = account_budget(&[out.report.ledger.clone()]).unwrap();
        assert!(summary.max_queries_touched <= k * t);
        assert!((summary.total_epsilon - 0.3).abs() < 1e-12);
        assert!(out.report.ledger.per_iteration_epsilon.iter().all(|&e| (e - 0.3 / t as f64).abs() < 1e-15));
    }
}

#[test]
fn later_iterations_add_queries() {
    let data = mixture(3, 40, 20, 5.0, 4);
    let config = SimConfig { iterations: 3, ..SimConfig::new(central(30.0, 1, 4, 3), 4) };
    let input = SimInput { records: &data.records, public: &data.public, public_truth: Some(&data.truth), test: None };
    let out = run_algorithm1(input, &config, 5).unwrap();
    assert_eq!(out.report.iterations.len(), 3);
    assert_eq!(out.query_labels.len(), 12);
    assert_eq!(out.query_embeddings.len(), 12);
}

#[test]
fn sequential_and_parallel_agree_for_every_model() {
    let data = mixture(3, 30, 10, 5.0, 6);
    let cases = [
        (PrivacyModel::Central, 0.0, 4, PartitionScheme::Iid, LocalMechanism::default()),
        (PrivacyModel::Local, 0.0, 90, PartitionScheme::SingleRecordPerClient, LocalMechanism::Collision),
        (PrivacyModel::Local, 0.0, 9, PartitionScheme::Dirichlet { alpha: 0.5 }, LocalMechanism::Laplace),
        (PrivacyModel::ShuffleMulti, 1e-6, 9, PartitionScheme::Iid, LocalMechanism::default()),
    ];
    for (model, delta, clients, scheme, mechanism) in cases {
        let params = PrivacyParams::new(model, 2.0, delta, 1, 1, 4, 3).unwrap();
        let base = SimConfig { partition: scheme, local_mechanism: mechanism, ..SimConfig::new(params, clients) };
        let input = SimInput { records: &data.records, public: &data.public, public_truth: Some(&data.truth), test: None };
        let par = run_algorithm1(input, &SimConfig { parallel: true, ..base.clone() }, 9).unwrap();
        let seq = run_algorithm1(input, &SimConfig { parallel: false, ..base }, 9).unwrap();
        assert_eq!(serde_json::to_string(&par).unwrap(), serde_json::to_string(&seq).unwrap(), "{model}");
    }
}

#[test]
fn single_message_shuffle_runs() {
    let data = mixture(2, 2_000, 10, 6.0, 8);
    let params = PrivacyParams::new(PrivacyModel::ShuffleSingle, 0.5, 1e-6, 1, 1, 2, 2).unwrap();
    let config = SimConfig {
        partition: PartitionScheme::SingleRecordPerClient,
        single_message_mechanism: SingleMessageMechanism::RandomizedResponse,
        ..SimConfig::new(params, data.records.len())
    };
    let input = SimInput { records: &data.records, public: &data.public, public_truth: Some(&data.truth), test: None };
    let out = run_algorithm1(input, &config, 1).unwrap();
    let it = &out.report.iterations[0];
    assert!(it.local_epsilon.unwrap() > 0.5);
    assert!(it.bound.is_some());
    assert!(out.acc_pl.unwrap() > 0.9);
}

#[test]
fn accuracy_does_not_improve_with_more_noise() {
    let data = mixture(4, 100, 25, 5.0, 12);
    let mean_acc = |eps: f64| -> f64 {
        let config = SimConfig::new(central(eps, 1, 8, 4), 4);
        (0..20)
            .map(|seed| {
                let input = SimInput { records: &data.records, public: &data.public, public_truth: Some(&data.truth), test: None };
                run_algorithm1(input, &config, seed).unwrap().acc_pl.unwrap()
            })
            .sum::<f64>()
            / 20.0
    };
    let (high, low) = (mean_acc(1.0), mean_acc(0.01));
    assert!(high >= low, "acc(1) = {high}, acc(0.01) = {low}");
}

#[test]
fn proxy_student_reports_test_accuracy() {
    let data = mixture(3, 50, 20, 8.0, 13);
    let test = mixture(3, 1, 30, 8.0, 14);
    let config = SimConfig::new(central(1e6, 1, 6, 3), 3);
    let input = SimInput {
        records: &data.records,
        public: &data.public,
        public_truth: Some(&data.truth),
        test: Some((&test.public, &test.truth)),
    };
    let out = run_algorithm1(input, &config, 2).unwrap();
    assert!(out.acc_proxy.unwrap() > 0.95);
}

#[test]
fn invariance_on_fixture() {
    let (records, _, _) = fixture();
    let queries = QuerySet::new(vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
    let schemes = [
        (PartitionScheme::Iid, 2),
        (PartitionScheme::Dirichlet { alpha: 0.1 }, 3),
        (PartitionScheme::SingleRecordPerClient, 4),
    ];
    let out = verify_partition_invariance(&records, &queries, &central(1.0, 1, 3, 2), DistanceMetric::Euclidean, &schemes, 0, 5).unwrap();
    match out {
        InvarianceOutcome::Holds { aggregate, noisy } => {
            assert_eq!(aggregate.as_flat(), &[2, 0, 0, 1, 0, 1]);
            assert!(noisy.is_some());
        }
        other => panic!("{other:?}"),
    }
    let local = PrivacyParams::new(PrivacyModel::Local, 1.0, 0.0, 1, 1, 3, 2).unwrap();
    assert_eq!(
        verify_partition_invariance(&records, &queries, &local, DistanceMetric::Euclidean, &schemes, 0, 5).unwrap(),
        InvarianceOutcome::Inapplicable
    );
}

#[test]
fn invariance_on_random_datasets() {
    let mut rng = rng_from_seed(21);
    for trial in 0..10 {
        let data = mixture(5, 200, 1, 3.0, 100 + trial);
        let queries = QuerySet::new((0..8).map(|_| (0..5).map(|_| rng.random_range(-1.0..4.0)).collect()).collect()).unwrap();
        let mut schemes = vec![(PartitionScheme::SingleRecordPerClient, 1000)];
        for _ in 0..10 {
            schemes.push((PartitionScheme::Iid, rng.random_range(1..50)));
            schemes.push((PartitionScheme::Dirichlet { alpha: 0.1 }, rng.random_range(1..50)));
        }
        let params = PrivacyParams::new(PrivacyModel::ShuffleMulti, 1.0, 1e-6, 2, 1, 8, 5).unwrap();
        let out = verify_partition_invariance(&data.records, &queries, &params, DistanceMetric::Euclidean, &schemes, trial, 0).unwrap();
        assert!(out.holds());
    }
}
