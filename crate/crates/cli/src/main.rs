//! `simnoc`: runs mesh NoC experiments described by INI configs.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime error, 3 validation error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use simnoc_core::error::ConfigError;
use simnoc_core::harness::{self, ExperimentConfig, Outcome, Report, RunMode};
use simnoc_core::metrics;
use simnoc_core::traffic::{parse_trace, validate_trace};
use simnoc_core::topology::allocate_address_map;
use simnoc_core::{Error, Preset, TrafficKind};

#[derive(Parser)]
#[command(name = "simnoc", version, about = "Cycle-level AXI mesh NoC simulator")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode named in the config (single by default).
    Run(RunArgs),
    /// Sweep the injected load.
    Sweep(RunArgs),
    /// Run every pattern at every burst size.
    Matrix(RunArgs),
    /// Replay a trace file on the config's NoC.
    Replay {
        trace: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a config, or a trace against a config.
    Validate {
        /// Config or trace file. Files whose first entry is a `[section]`
        /// header are configs.
        path: PathBuf,
        /// Config a trace is checked against. Defaults to slim_4x4.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory, overriding `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulations run in parallel. Defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Where an error surfaced, which decides the exit code.
enum Failure {
    Config(String),
    Runtime(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) | Failure::Validation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) => Failure::Config(msg),
            Error::Trace(_) => Failure::Validation(msg),
            Error::SweepPoint { source, .. } if matches!(*source, Error::Config(_)) => Failure::Config(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

const DEFAULT_OUT: &str = "simnoc-out";

fn load(args: &RunArgs, mode: Option<RunMode>, trace: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = harness::parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(m) = mode {
        cfg.run.mode = m;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.run.out = Some(o.clone());
    }
    cfg.run.out.get_or_insert_with(|| PathBuf::from(DEFAULT_OUT));
    // Relative paths inside a config resolve against the config's directory.
    let base = args.config.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.layer_table, &mut cfg.trace].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(t) = trace {
        cfg.traffic.kind = TrafficKind::TraceReplay;
        cfg.trace = Some(t.to_path_buf());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(report: &Report, cfg: &ExperimentConfig) {
    match &report.outcome {
        Outcome::Single(stats) => {
            let tp = metrics::aggregated_throughput(stats, cfg.noc.clock_hz).unwrap_or(0.0);
            let util = metrics::utilization(tp, &cfg.noc).unwrap_or(0.0);
            println!(
                "throughput {:.3} GB/s, utilization {:.2}%, {} transfers in {} cycles",
                tp / 1e9,
                util * 100.0,
                stats.completed_transfers,
                stats.measured_cycles
            );
            if let Ok(l) = metrics::latency_stats(stats) {
                println!("latency mean {:.1}, p50 {}, p95 {}, p99 {} cycles", l.mean, l.p50, l.p95, l.p99);
            }
        }
        Outcome::Sweep(curve) => {
            for (i, p) in curve.points.iter().enumerate() {
                let mark = if i == curve.saturation_point { " (saturation)" } else { "" };
                println!("load {:.3}: {:.3} GB/s{mark}", p.load, p.throughput_bps / 1e9);
            }
        }
        Outcome::Matrix(cells) => {
            for c in cells {
                println!("{} {} B: {:.3} GB/s", c.pattern, c.burst_bytes, c.throughput_bps / 1e9);
            }
        }
    }
    for f in &report.files {
        info!("wrote {}", f.display());
    }
    info!("wall time {:.2} s", report.wall_time_s);
}

fn looks_like_config(text: &str) -> bool {
    text.lines()
        .map(|l| l.split(['#', ';']).next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.starts_with('['))
}

fn validate(path: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if looks_like_config(&text) {
        let cfg = harness::parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        println!("{}: valid config, {}x{} mesh", path.display(), cfg.noc.rows, cfg.noc.cols);
        return Ok(());
    }
    let noc = match config {
        Some(c) => harness::load_config(c)?.noc,
        None => Preset::Slim4x4.config(),
    };
    let invalid = |e: simnoc_core::error::TraceError| Failure::Validation(format!("{}: {e}", path.display()));
    let records = parse_trace(&text).map_err(invalid)?;
    let map = allocate_address_map(&noc)?;
    validate_trace(&records, &noc, &map).map_err(invalid)?;
    println!("{}: valid trace, {} records", path.display(), records.len());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let (args, mode, trace) = match cli.command {
        Command::Validate { path, config } => return validate(&path, config.as_deref()),
        Command::Run(a) => (a, None, None),
        Command::Sweep(a) => (a, Some(RunMode::Sweep), None),
        Command::Matrix(a) => (a, Some(RunMode::Matrix), None),
        Command::Replay { trace, run } => (run, Some(RunMode::Single), Some(trace)),
    };
    let cfg = load(&args, mode, trace.as_deref())?;
    let records = match &cfg.trace {
        Some(t) if cfg.traffic.kind == TrafficKind::TraceReplay => {
            Some(harness::load_trace(t, &cfg.noc).map_err(|e| match Failure::from(e) {
                Failure::Validation(m) => Failure::Validation(format!("{}: {m}", t.display())),
                other => other,
            })?)
        }
        _ => None,
    };
    info!("running {} on a {}x{} mesh", cfg.run.mode.name(), cfg.noc.rows, cfg.noc.cols);
    let report = harness::execute(&cfg, records.as_deref(), args.jobs)?;
    summarize(&report, &cfg);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("simnoc: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
