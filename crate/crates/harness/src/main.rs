use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

use rknn_core::bsvs::PrivacyModel;
use rknn_core::shuffle::{amplify_forward, amplify_invert};
use rknn_harness::analysis::{bounds_table, dp_suite, mse_compare, mse_csv, parse_grid, BoundQuery, MseSetup};
use rknn_harness::config::{read_config_file, ExperimentConfig, KEYS};
use rknn_harness::data::{generate_synthetic, write_embeddings_csv, Dataset, SyntheticSpec};
use rknn_harness::experiment::{results_json, run_experiment};
use rknn_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "rknn", version, about = "Record-level private federated labeling via reverse k-NN")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic Gaussian-mixture dataset as CSV files.
    Gen(GenArgs),
    /// Run the labeling loop over several trials and write results JSON.
    Simulate(SimulateArgs),
    /// Print the max-norm accuracy bound of every mechanism.
    Bounds(BoundsArgs),
    /// Run the exhaustive local-DP checker suite.
    VerifyDp(VerifyArgs),
    /// Per-entry MSE of Collision, Separation and Concatenation as CSV.
    MseCompare(MseArgs),
    /// Shuffle amplification: local to central budget, or back.
    Amplify(AmplifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 6000)]
    per_class: usize,
    #[arg(long, default_value_t = 100)]
    public_per_class: usize,
    #[arg(long, default_value_t = 100)]
    test_per_class: usize,
    /// Defaults to the class count.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    r: usize,
}

/// One optional flag per config key; values stay raw text until merged.
struct KeyFlags(BTreeMap<String, String>);

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

impl FromArgMatches for KeyFlags {
    fn from_arg_matches(matches: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let mut out = BTreeMap::new();
        for key in KEYS.iter().filter(|&&k| k != "seed") {
            if let Some(v) = matches.get_one::<String>(key) {
                out.insert(key.to_string(), v.clone());
            }
        }
        Ok(Self(out))
    }

    fn update_from_arg_matches(&mut self, matches: &ArgMatches) -> std::result::Result<(), clap::Error> {
        *self = Self::from_arg_matches(matches)?;
        Ok(())
    }
}

impl Args for KeyFlags {
    fn augment_args(cmd: Command) -> Command {
        KEYS.iter().filter(|&&k| k != "seed").fold(cmd, |cmd, &key| {
            cmd.arg(clap::Arg::new(key).long(flag_name(key)).value_name("VALUE").help(format!("Config key {key}")))
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Key-value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Results JSON path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials and clients on one thread.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    keys: KeyFlags,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    model: Option<PrivacyModel>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long)]
    labels: usize,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    /// Client count for the local and single-message bounds.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, std::f64::consts::LN_2, 1.0, 2.0])]
    eps: Vec<f64>,
    /// Print every case, not only the per-mechanism summary.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct MseArgs {
    #[arg(long, default_value_t = 200)]
    s: usize,
    #[arg(long, default_value_t = 50)]
    labels: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// `start:stop:step`, inclusive.
    #[arg(long, default_value = "1:6:0.5")]
    eps_grid: String,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AmplifyArgs {
    /// Local budget, or the central target with `--invert`.
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    invert: bool,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| HarnessError::io("<stdout>", e)),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        classes: a.classes,
        per_class: a.per_class,
        public_per_class: a.public_per_class,
        test_per_class: a.test_per_class,
        dim: a.dim.unwrap_or(a.classes),
        separation: a.separation,
        sigma: a.sigma,
        r: a.r,
    };
    let data = generate_synthetic(&spec, a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| HarnessError::io(&a.out, e))?;
    write_embeddings_csv(&a.out.join("records.csv"), &Dataset::from_records(&data.records), true)?;
    write_embeddings_csv(&a.out.join("public.csv"), &data.public, false)?;
    write_embeddings_csv(&a.out.join("public_truth.csv"), &data.public, true)?;
    write_embeddings_csv(&a.out.join("test.csv"), &data.test, true)?;
    println!(
        "wrote {} records, {} public and {} test samples to {} (separation/sigma = {})",
        data.records.len(),
        data.public.len(),
        data.test.len(),
        a.out.display(),
        spec.separability()
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut pairs = match &a.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    pairs.extend(a.keys.0);
    pairs.insert("seed".into(), a.seed.to_string());
    let config = ExperimentConfig::from_pairs(pairs)?;
    let results = run_experiment(&config, !a.sequential)?;
    write_output(a.out.as_deref(), &results_json(&results)?)
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let query = BoundQuery { model: a.model, epsilon: a.eps, delta: a.delta, k: a.k, r: a.r, labels: a.labels, beta: a.beta, n: a.n };
    let rows = bounds_table(&query)?;
    if a.json {
        let text = serde_json::to_string_pretty(&rows).map_err(|e| HarnessError::config(e.to_string()))?;
        println!("{text}");
        return Ok(());
    }
    for row in rows {
        match row.local_epsilon {
            Some(local) => println!("{} {} {:.2} (local epsilon {local:.6})", row.model, row.mechanism, row.eta),
            None => println!("{} {} {:.2}", row.model, row.mechanism, row.eta),
        }
    }
    Ok(())
}

fn verify_dp(a: VerifyArgs) -> Result<()> {
    let rows = dp_suite(&a.eps)?;
    let mut groups: BTreeMap<(String, u64), (usize, usize, f64, f64)> = BTreeMap::new();
    for row in &rows {
        if a.verbose || !row.pass {
            let status = if row.pass { "PASS" } else { "FAIL" };
            println!("{status} {} [{}] eps={} max_log_ratio={:.12}", row.mechanism, row.instance, row.epsilon, row.max_log_ratio);
        }
        let g = groups.entry((row.mechanism.clone(), row.epsilon.to_bits())).or_insert((0, 0, row.epsilon, f64::NEG_INFINITY));
        g.0 += 1;
        g.1 += usize::from(row.pass);
        g.3 = g.3.max(row.max_log_ratio);
    }
    for ((mechanism, _), (cases, passed, eps, worst)) in &groups {
        println!("{mechanism} eps={eps:.6}: {passed}/{cases} cases pass, worst ratio {worst:.12}");
    }
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(HarnessError::config("some mechanisms exceed their privacy budget"))
    }
}

fn mse(a: MseArgs) -> Result<()> {
    let grid = parse_grid(&a.eps_grid)?;
    let setup = MseSetup { s: a.s, labels: a.labels, k: a.k, r: a.r, trials: a.trials, seed: a.seed };
    let rows = mse_compare(&setup, &grid, true)?;
    write_output(a.out.as_deref(), &mse_csv(&rows)?)
}

fn amplify(a: AmplifyArgs) -> Result<()> {
    if a.invert {
        println!("{:.6}", amplify_invert(a.eps, a.n, a.delta)?);
    } else {
        println!("{:.6}", amplify_forward(a.eps, a.n, a.delta)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Cmd::Gen(a) => gen(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Bounds(a) => bounds(a),
        Cmd::VerifyDp(a) => verify_dp(a),
        Cmd::MseCompare(a) => mse(a),
        Cmd::Amplify(a) => amplify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
