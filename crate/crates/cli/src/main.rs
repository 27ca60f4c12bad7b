use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use jd2p::config::{ConfigError, ExperimentManifest, Scheme};
use jd2p::dataset::{parse_idx, DatasetError, LabeledDataset};
use jd2p::report;
use jd2p::sim::{prepare_pairs, run_experiment, summarize, sweep, SimError};
use jd2p::validate::{self, ValidationOptions, SUITES};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "jd2p", version, about = "Energy-efficient edge learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the numerical self-check suites.
    Validate {
        /// Override a suite tolerance, e.g. `chi_square=1e-12`. Repeatable.
        #[arg(long = "tolerance", value_name = "SUITE=VALUE", value_parser = parse_tolerance)]
        tolerances: Vec<(String, f64)>,
        /// Also write the report to DIR/validation.csv.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run every (pair, seed, scheme) of the manifest.
    Run(RunArgs),
    /// Sweep the training window over the manifest's tau fractions.
    SweepTau {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated tau values as fractions of the slot length.
        #[arg(long, value_delimiter = ',', value_name = "F,F,...")]
        tau_fractions: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment manifest (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for the CSV tables.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the manifest.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    parallel: Option<usize>,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected SUITE=VALUE, got `{s}`"))?;
    if !SUITES.contains(&name) {
        return Err(format!("unknown suite `{name}`; known: {}", SUITES.join(", ")));
    }
    let value: f64 = value.parse().map_err(|e| format!("bad tolerance `{value}`: {e}"))?;
    Ok((name.to_string(), value))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Self::new(EXIT_IO, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            SimError::Dataset(d) => d.into(),
            other => Self::new(EXIT_VALIDATION, format!("simulation failed: {other}")),
        }
    }
}

fn write_out(dir: &Path, tables: &[(&str, String)]) -> Result<(), Failure> {
    report::write_tables(dir, tables)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write to {}: {e}", dir.display())))
}

fn cmd_validate(tolerances: Vec<(String, f64)>, out: Option<PathBuf>) -> Result<(), Failure> {
    let opts = ValidationOptions {
        tolerances: tolerances.into_iter().collect(),
        ..Default::default()
    };
    let reports = validate::run_all(&opts);
    let text = validate::render(&reports);
    print!("{text}");
    if let Some(dir) = out {
        write_out(&dir, &[("validation.csv", text)])?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        for r in reports.iter().filter(|r| !r.passed) {
            eprintln!(
                "suite {} failed: max error {:e} > tolerance {:e} ({})",
                r.name, r.max_abs_error, r.tolerance, r.worst
            );
        }
        Err(Failure::new(EXIT_VALIDATION, format!("failed suites: {}", failed.join(", "))))
    }
}

struct Loaded {
    manifest: ExperimentManifest,
    master: u64,
    train: LabeledDataset,
    test: LabeledDataset,
}

fn load(args: &RunArgs) -> Result<Loaded, Failure> {
    let manifest = ExperimentManifest::load(&args.config)?;
    if let Some(n) = args.parallel {
        if n == 0 {
            return Err(Failure::new(EXIT_CONFIG, "--parallel must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_CONFIG, format!("thread pool: {e}")))?;
    }
    let d = &manifest.data;
    let train = parse_idx(&d.train_images, &d.train_labels)?;
    let test = parse_idx(&d.test_images, &d.test_labels)?;
    info!("loaded {} training and {} test samples", train.len(), test.len());
    Ok(Loaded {
        master: args.seed.unwrap_or(manifest.experiment.master_seed),
        manifest,
        train,
        test,
    })
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let Loaded {
        manifest,
        master,
        train,
        test,
    } = load(&args)?;
    let cfg = &manifest.sim;
    let exp = &manifest.experiment;
    let pairs = exp.pair_list()?;
    let prepared = prepare_pairs(&train, &test, &pairs, cfg)?;
    let outcomes = run_experiment(&prepared, cfg, master, &exp.seeds, &exp.schemes)?;
    for o in &outcomes {
        for run in &o.runs {
            if run.scheme != Scheme::FullOffload {
                run.ledger
                    .verify(&o.context.cascade, cfg.bits_per_feature as f64)
                    .map_err(|e| Failure::new(EXIT_VALIDATION, format!("ledger check: {e}")))?;
            }
        }
    }
    let table = summarize(&outcomes, cfg.tau);
    write_out(
        &args.out,
        &[
            ("runs.csv", report::runs_csv(&outcomes)),
            ("rounds.csv", report::rounds_csv(&outcomes)),
            ("cascades.csv", report::cascades_csv(&outcomes)),
            ("summary.csv", report::summary_csv(&table)),
            ("gains.csv", report::gains_csv(&table)),
            ("pair_means.csv", report::pair_means_csv(&table)),
        ],
    )?;
    for g in &table.gains {
        info!(
            "jd2p vs {}: {:.2} dB mean over {} pairs",
            g.baseline.name(),
            g.gain_db_mean,
            g.pairs
        );
    }
    info!("wrote tables to {}", args.out.display());
    Ok(())
}

fn cmd_sweep_tau(args: RunArgs, fractions: Option<Vec<f64>>) -> Result<(), Failure> {
    let Loaded {
        manifest,
        master,
        train,
        test,
    } = load(&args)?;
    let exp = &manifest.experiment;
    let fractions = fractions.unwrap_or_else(|| exp.tau_fractions.clone());
    let grid = fractions
        .iter()
        .map(|&f| {
            let mut cfg = manifest.sim.clone();
            cfg.tau = f * cfg.slot;
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pairs = exp.pair_list()?;
    let prepared = prepare_pairs(&train, &test, &pairs, &manifest.sim)?;
    let table = sweep(&grid, &prepared, master, &exp.seeds)?;
    write_out(
        &args.out,
        &[
            ("tau_sweep.csv", report::gains_csv(&table)),
            ("tau_sweep_summary.csv", report::summary_csv(&table)),
            ("tau_sweep_pair_means.csv", report::pair_means_csv(&table)),
        ],
    )?;
    info!("wrote tables to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { tolerances, out } => cmd_validate(tolerances, out),
        Command::Run(args) => cmd_run(args),
        Command::SweepTau { run, tau_fractions } => cmd_sweep_tau(run, tau_fractions),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
