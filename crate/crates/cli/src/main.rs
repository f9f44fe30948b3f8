use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unlearn::data::{gen_adversarial_sequence, gen_synthetic_dataset, Model};
use unlearn::distributed::dist_learn;
use unlearn::harness::{
    emit_report, read_records, run_experiment, run_retrain_baseline, unlearn_accuracy_bound, verify_unlearning_certificate,
    write_json, ChainConfig, ExperimentConfig, Prepared, Summary, OUTPUT_DIR_ENV, SUMMARY_FILE,
};
use unlearn::rng::StreamKind;
use unlearn::unlearn::learn;
use unlearn::Error;

const EXIT_CERTIFICATE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "unlearn", version, about = "Certified unlearning experiments for convex ERM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an update stream for the configured dataset and write it as JSONL.
    GenUpdates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn once and write the resulting state snapshot.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Run learn/update chains for every trial and write the report.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Retrain privately after every update to accuracy `alpha`.
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Measure unlearn-vs-retrain gaps and check them against Δ and ε.
    Certify {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute the summary of an existing records file.
    Report {
        /// JSONL records; defaults to `<output>/records.jsonl`.
        records: Option<PathBuf>,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output: Option<PathBuf>,
    },
}

/// Config file plus overrides; precedence is file < dedicated flags < `--set`.
#[derive(Args)]
struct Common {
    /// Flat TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set lambda=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "data")]
    data_path: Option<PathBuf>,
    #[arg(long = "updates")]
    updates_path: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> unlearn::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let flags = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("mode", self.mode.clone()),
            ("loss", self.loss.clone()),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("delta", self.delta.map(|v| v.to_string())),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("xi", self.xi.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("data_path", path(&self.data_path)),
            ("updates_path", path(&self.updates_path)),
            ("update_strategy", self.strategy.clone()),
            ("update_length", self.length.map(|v| v.to_string())),
            ("output", path(&self.output)),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.apply_overrides(&self.set)?;
        Ok(cfg)
    }
}

enum Outcome {
    Done,
    CertificateFailed,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_)
        | Error::InvalidParameter { .. }
        | Error::InsufficientIterations { .. }
        | Error::BudgetExceeded { .. }
        | Error::RequiresStrongConvexity
        | Error::Unreachable { .. }
        | Error::OutOfBounds(_)
        | Error::Dimension { .. } => EXIT_CONFIG,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        _ => 1,
    }
}

fn create_dir(dir: &Path) -> unlearn::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

/// Prints to stdout; a closed pipe is not an error.
fn print_json<T: serde::Serialize>(value: &T) -> unlearn::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io { path: PathBuf::from("<stdout>"), source: e }),
        _ => Ok(()),
    }
}

fn default_out(cfg: &ExperimentConfig, out: &Option<PathBuf>, file: &str) -> unlearn::Result<PathBuf> {
    match out {
        Some(p) => Ok(p.clone()),
        None => {
            let dir = cfg.output_dir();
            create_dir(&dir)?;
            Ok(dir.join(file))
        }
    }
}

fn gen_data(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> unlearn::Result<Outcome> {
    let model = match cfg.model.as_str() {
        "logistic" => Model::Logistic,
        _ => Model::Linear { noise: cfg.noise },
    };
    cfg.prepare()?;
    let seeds = unlearn::rng::Seeds::new(cfg.seed).trial(0);
    let ds = gen_synthetic_dataset(cfg.n, cfg.d, model, &cfg.bounds()?, &mut seeds.stream(StreamKind::Data, 0))?.dataset;
    let path = default_out(cfg, out, "data.csv")?;
    ds.write_csv(&path)?;
    log::info!("wrote {} points to {}", ds.len(), path.display());
    Ok(Outcome::Done)
}

fn gen_updates(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> unlearn::Result<Outcome> {
    let prepared = cfg.prepare()?;
    let inputs = prepared.trial(0)?;
    let seq = gen_adversarial_sequence(&inputs.dataset, &cfg.update_spec()?, &mut inputs.seeds.stream(StreamKind::Updates, 0))?;
    let path = default_out(cfg, out, "updates.jsonl")?;
    seq.write_jsonl(&path)?;
    log::info!("wrote {} updates to {}", seq.len(), path.display());
    Ok(Outcome::Done)
}

fn train(p: &Prepared) -> unlearn::Result<Outcome> {
    let inputs = p.trial(0)?;
    let dir = p.config.output_dir();
    create_dir(&dir)?;
    let path = dir.join("state.json");
    match &p.chain {
        ChainConfig::Single(c) => {
            let state = learn(inputs.dataset, c, inputs.seeds.stream(StreamKind::Noise, 0))?;
            write_json(&path, &state.snapshot(c.mode()))?;
            print_json(&state.published())?;
        }
        ChainConfig::Distributed(c) => {
            let state = dist_learn(inputs.dataset, c, &inputs.seeds)?;
            write_json(&path, &state.snapshot())?;
            print_json(&state.published())?;
        }
    }
    Ok(Outcome::Done)
}

fn run(p: &Prepared) -> unlearn::Result<Outcome> {
    let records = run_experiment(p)?;
    let dir = p.config.output_dir();
    let summary = emit_report(&records, &dir)?;
    write_json(&dir.join("config.json"), &p.config)?;
    print_json(&summary)?;
    Ok(Outcome::Done)
}

fn baseline(p: &Prepared) -> unlearn::Result<Outcome> {
    let alpha = match (p.config.alpha, &p.chain) {
        (Some(a), _) => a,
        (None, ChainConfig::Single(c)) => unlearn_accuracy_bound(c),
        (None, ChainConfig::Distributed(_)) => return Err(Error::Config("baseline needs `alpha` or a single-model mode".into())),
    };
    let records = run_retrain_baseline(p, alpha)?;
    let summary = emit_report(&records, &p.config.output_dir().join("baseline"))?;
    print_json(&summary)?;
    Ok(Outcome::Done)
}

fn certify(p: &Prepared) -> unlearn::Result<Outcome> {
    let report = verify_unlearning_certificate(p, p.config.trials)?;
    let dir = p.config.output_dir();
    create_dir(&dir)?;
    write_json(&dir.join("certificate.json"), &report)?;
    println!(
        "{}: max gap {:.6e} / bound {:.6e}, epsilon at bound {:.6} / target {}",
        if report.passed { "CERTIFIED" } else { "NOT CERTIFIED" },
        report.max_gap,
        report.gap_bound,
        report.certified_epsilon,
        report.epsilon
    );
    if let Some(round) = report.failed_rounds.first() {
        eprintln!("first failing round: {round}");
    }
    Ok(if report.passed { Outcome::Done } else { Outcome::CertificateFailed })
}

fn report(records: &Option<PathBuf>, output: &Option<PathBuf>) -> unlearn::Result<Outcome> {
    let dir = output.clone().unwrap_or_else(|| ExperimentConfig::default().output_dir());
    let path = records.clone().unwrap_or_else(|| dir.join("records.jsonl"));
    let summary = Summary::of(&read_records(&path)?);
    let target = path.parent().unwrap_or(Path::new(".")).join(SUMMARY_FILE);
    write_json(&target, &summary)?;
    print_json(&summary)?;
    Ok(Outcome::Done)
}

fn dispatch(cli: Cli) -> unlearn::Result<Outcome> {
    match cli.command {
        Command::GenData { common, out } => gen_data(&common.load()?, &out),
        Command::GenUpdates { common, out } => gen_updates(&common.load()?, &out),
        Command::Train { common } => train(&common.load()?.prepare()?),
        Command::Run { common } => run(&common.load()?.prepare()?),
        Command::Baseline { common } => baseline(&common.load()?.prepare()?),
        Command::Certify { common } => certify(&common.load()?.prepare()?),
        Command::Report { records, output } => report(&records, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CertificateFailed) => ExitCode::from(EXIT_CERTIFICATE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
