//! Experiment configs and run modes.
//!
//! A config is INI text with three sections:
//!
//! ```text
//! [noc]
//! preset = slim_4x4        # applied first, whatever its position
//! data_width = 64          # explicit keys override the preset
//!
//! [traffic]
//! kind = uniform_random
//! load = 1.0
//! min_bytes = 4
//! max_bytes = 1024
//!
//! [run]
//! mode = sweep             # single | sweep | matrix
//! seed = 7
//! loads = 0.1 0.2 0.5 1.0
//! ```
//!
//! Every run can write a `manifest.ini` holding the fully resolved config.
//! The manifest parses as a config and re-runs to the same CSVs.

mod ini;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::axi::{Channel, ChannelSet};
use crate::error::{ConfigError, Error};
use crate::metrics::{self, MatrixCell, SimStats, SweepCurve, SATURATION_GAIN};
use crate::sim::{Simulator, TrafficSource};
use crate::topology::{allocate_address_map, Connectivity, Coord, MotMode, NocConfig, Preset};
use crate::traffic::{
    build_source, materialize, mix64, read_trace, validate_trace, LayerTable, ReplaySource, TraceRecord,
    TrafficKind, TrafficSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunMode {
    Single,
    Sweep,
    Matrix,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Single => "single",
            RunMode::Sweep => "sweep",
            RunMode::Matrix => "matrix",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [RunMode::Single, RunMode::Sweep, RunMode::Matrix]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// The `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: RunMode,
    /// Cycles excluded from statistics. Defaults to 10 000 for Poisson
    /// traffic and 0 for finite workloads.
    pub warmup: Option<u64>,
    /// Measured cycles after warmup when not draining.
    pub cycles: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Run until every request completed instead of for a fixed window.
    /// Defaults to true for finite workloads.
    pub drain: Option<bool>,
    pub drain_limit: u64,
    pub loads: Vec<f64>,
    pub saturation_gain: f64,
    pub patterns: Vec<TrafficKind>,
    pub burst_sizes: Vec<u64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            mode: RunMode::Single,
            warmup: None,
            cycles: 100_000,
            seed: 0,
            out: None,
            drain: None,
            drain_limit: 100_000_000,
            loads: (1..=10).map(|i| f64::from(i) / 10.0).collect(),
            saturation_gain: SATURATION_GAIN,
            patterns: vec![TrafficKind::AllGlobal, TrafficKind::MaxTwoHop, TrafficKind::MaxSingleHop],
            burst_sizes: vec![4, 64, 1024, 10240, 65536],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub noc: NocConfig,
    pub traffic: TrafficSpec,
    /// Layer table replacing the bundled one for DNN kinds.
    pub layer_table: Option<PathBuf>,
    /// Trace file for `trace_replay`.
    pub trace: Option<PathBuf>,
    pub run: RunSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            noc: Preset::Slim4x4.config(),
            traffic: TrafficSpec::new(TrafficKind::UniformRandom),
            layer_table: None,
            trace: None,
            run: RunSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn warmup(&self) -> u64 {
        self.run
            .warmup
            .unwrap_or(if self.traffic.kind.is_poisson() { 10_000 } else { 0 })
    }

    pub fn drain(&self) -> bool {
        self.run.drain.unwrap_or(!self.traffic.kind.is_poisson())
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noc.validate().map_err(|e| prefix("noc", e))?;
        self.traffic.validate(&self.noc)?;
        let run = &self.run;
        if run.loads.is_empty() {
            return Err(ConfigError::invalid("run.loads", "no points"));
        }
        if run.loads.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(ConfigError::invalid("run.loads", "points must lie in (0, 1]"));
        }
        if run.loads.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::invalid("run.loads", "points must be strictly increasing"));
        }
        if !(run.saturation_gain > 0.0 && run.saturation_gain.is_finite()) {
            return Err(ConfigError::invalid("run.saturation_gain", "must be positive"));
        }
        if run.patterns.is_empty() || run.patterns.iter().any(|k| !k.is_poisson()) {
            return Err(ConfigError::invalid("run.patterns", "needs one or more Poisson patterns"));
        }
        if run.burst_sizes.is_empty() || run.burst_sizes.contains(&0) {
            return Err(ConfigError::invalid("run.burst_sizes", "needs one or more positive sizes"));
        }
        if let Some(&b) = run.burst_sizes.iter().find(|&&b| b > self.noc.endpoint_region_bytes) {
            return Err(ConfigError::invalid("run.burst_sizes", format!("{b} exceeds the endpoint region")));
        }
        if run.mode == RunMode::Sweep && !self.traffic.kind.is_poisson() {
            return Err(ConfigError::invalid("run.mode", "sweeps need a Poisson traffic.kind"));
        }
        if self.traffic.kind == TrafficKind::TraceReplay && self.trace.is_none() && run.mode == RunMode::Single {
            return Err(ConfigError::invalid("traffic.trace", "trace_replay needs a trace file"));
        }
        if !self.drain() && run.cycles == 0 {
            return Err(ConfigError::invalid("run.cycles", "must be positive"));
        }
        if self.drain() && self.traffic.kind.is_poisson() && self.traffic.horizon.is_none() {
            return Err(ConfigError::invalid("run.drain", "Poisson traffic drains only with traffic.horizon set"));
        }
        Ok(())
    }

    /// The resolved config as INI text, with every key explicit.
    pub fn to_ini(&self) -> String {
        let n = &self.noc;
        let t = &self.traffic;
        let r = &self.run;
        let mut s = String::new();
        let _ = writeln!(s, "[noc]");
        let _ = writeln!(s, "rows = {}", n.rows);
        let _ = writeln!(s, "cols = {}", n.cols);
        let _ = writeln!(s, "addr_width = {}", n.addr_width);
        let _ = writeln!(s, "data_width = {}", n.data_width);
        let _ = writeln!(s, "id_width = {}", n.id_width);
        let _ = writeln!(s, "max_outstanding = {}", n.max_outstanding);
        let _ = writeln!(s, "mot_mode = {}", n.mot_mode.name());
        let _ = writeln!(s, "connectivity = {}", n.connectivity.name());
        let _ = writeln!(s, "register_slices = {}", channels_text(n.register_slices));
        let _ = writeln!(s, "clock_hz = {}", n.clock_hz);
        let _ = writeln!(s, "endpoint_region_bytes = {}", n.endpoint_region_bytes);
        let _ = writeln!(s, "address_base = {:#x}", n.address_base);
        let _ = writeln!(s, "masters = {}", coords_text(&n.masters, n));
        let _ = writeln!(s, "slaves = {}", coords_text(&n.slaves, n));
        let _ = writeln!(s, "fifo_depth = {}", n.fifo_depth);
        let _ = writeln!(s, "slave_latency = {}", n.slave_latency);
        let _ = writeln!(s, "max_burst_beats = {}", n.max_burst_beats);
        let _ = writeln!(s, "\n[traffic]");
        let _ = writeln!(s, "kind = {}", t.kind);
        let _ = writeln!(s, "load = {}", t.injected_load);
        let _ = writeln!(s, "min_bytes = {}", t.min_bytes);
        let _ = writeln!(s, "max_bytes = {}", t.max_bytes);
        let _ = writeln!(s, "write_fraction = {}", t.write_fraction);
        if let Some(h) = t.horizon {
            let _ = writeln!(s, "horizon = {h}");
        }
        let _ = writeln!(s, "global_slave = {}", coord_text(t.global_slave));
        let _ = writeln!(s, "l2 = {}", coord_text(t.l2));
        let _ = writeln!(s, "gradient_exchange = {}", t.gradient_exchange);
        if let Some(p) = &self.layer_table {
            let _ = writeln!(s, "layer_table = {}", p.display());
        }
        if let Some(p) = &self.trace {
            let _ = writeln!(s, "trace = {}", p.display());
        }
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "mode = {}", r.mode.name());
        let _ = writeln!(s, "warmup = {}", self.warmup());
        let _ = writeln!(s, "cycles = {}", r.cycles);
        let _ = writeln!(s, "seed = {}", r.seed);
        if let Some(p) = &r.out {
            let _ = writeln!(s, "out = {}", p.display());
        }
        let _ = writeln!(s, "drain = {}", self.drain());
        let _ = writeln!(s, "drain_limit = {}", r.drain_limit);
        let _ = writeln!(s, "loads = {}", join(&r.loads));
        let _ = writeln!(s, "saturation_gain = {}", r.saturation_gain);
        let _ = writeln!(s, "patterns = {}", join(&r.patterns));
        let _ = writeln!(s, "burst_sizes = {}", join(&r.burst_sizes));
        s
    }

    /// The traffic spec with its layer table loaded and `seed` applied.
    fn traffic_spec(&self, seed: u64) -> Result<TrafficSpec, Error> {
        let mut spec = self.traffic.clone();
        spec.seed = seed;
        if let Some(path) = &self.layer_table {
            let file = fs::File::open(path).map_err(|source| io_error(path, source))?;
            spec.layer_table = Some(Arc::new(LayerTable::from_csv(file)?));
        }
        Ok(spec)
    }
}

fn prefix(section: &str, e: ConfigError) -> ConfigError {
    match e {
        ConfigError::Invalid { field, reason } => ConfigError::Invalid {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn coord_text(c: Coord) -> String {
    format!("{},{}", c.row, c.col)
}

fn coords_text(list: &[Coord], config: &NocConfig) -> String {
    let all: Vec<Coord> = (0..config.num_nodes()).map(|i| config.coord_of(i)).collect();
    if list == all.as_slice() {
        "all".into()
    } else if list.is_empty() {
        "none".into()
    } else {
        list.iter().map(|&c| coord_text(c)).collect::<Vec<_>>().join(" ")
    }
}

fn channels_text(set: ChannelSet) -> String {
    if set == ChannelSet::ALL {
        "all".into()
    } else if set.is_empty() {
        "none".into()
    } else {
        set.iter().map(|c| c.name().to_ascii_lowercase()).collect::<Vec<_>>().join(" ")
    }
}

const NOC_KEYS: [&str; 18] = [
    "preset",
    "rows",
    "cols",
    "addr_width",
    "data_width",
    "id_width",
    "max_outstanding",
    "mot_mode",
    "connectivity",
    "register_slices",
    "clock_hz",
    "endpoint_region_bytes",
    "address_base",
    "masters",
    "slaves",
    "fifo_depth",
    "slave_latency",
    "max_burst_beats",
];
const TRAFFIC_KEYS: [&str; 11] = [
    "kind",
    "load",
    "min_bytes",
    "max_bytes",
    "write_fraction",
    "horizon",
    "global_slave",
    "l2",
    "gradient_exchange",
    "layer_table",
    "trace",
];
const RUN_KEYS: [&str; 11] = [
    "mode",
    "warmup",
    "cycles",
    "seed",
    "out",
    "drain",
    "drain_limit",
    "loads",
    "saturation_gain",
    "patterns",
    "burst_sizes",
];
/// Written by runs for the record; ignored when parsing.
const MANIFEST_KEYS: [&str; 5] = ["tool", "version", "wall_time_s", "seed_derivation", "outputs"];

/// A value parser bound to one `section.key` and its line.
struct Field<'a> {
    name: String,
    value: &'a str,
    line: usize,
}

impl Field<'_> {
    fn fail(&self, what: &str) -> ConfigError {
        ConfigError::Syntax {
            line: self.line,
            reason: format!("{}: expected {what}, found `{}`", self.name, self.value),
        }
    }

    fn uint<T: std::str::FromStr>(&self) -> Result<T, ConfigError> {
        let v = self.value.replace('_', "");
        if let Some(hex) = v.strip_prefix("0x") {
            let n = u64::from_str_radix(hex, 16).map_err(|_| self.fail("an unsigned integer"))?;
            return n.to_string().parse().map_err(|_| self.fail("an unsigned integer in range"));
        }
        v.parse().map_err(|_| self.fail("an unsigned integer"))
    }

    fn float(&self) -> Result<f64, ConfigError> {
        self.value.parse().map_err(|_| self.fail("a number"))
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.fail("true or false")),
        }
    }

    fn name_of<T>(&self, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<T, ConfigError> {
        parse(self.value).ok_or_else(|| self.fail(what))
    }

    fn coord(&self) -> Result<Coord, ConfigError> {
        parse_coord(self.value).ok_or_else(|| self.fail("`row,col`"))
    }

    fn coords(&self, config: &NocConfig) -> Result<Vec<Coord>, ConfigError> {
        match self.value {
            "all" => Ok((0..config.num_nodes()).map(|i| config.coord_of(i)).collect()),
            "none" => Ok(Vec::new()),
            v => v
                .split_whitespace()
                .map(|t| parse_coord(t).ok_or_else(|| self.fail("`all`, `none` or `row,col` pairs")))
                .collect(),
        }
    }

    fn list<T>(&self, item: impl Fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>, ConfigError> {
        self.value
            .split([' ', '\t', ','])
            .filter(|t| !t.is_empty())
            .map(|t| item(t).ok_or_else(|| self.fail(what)))
            .collect()
    }
}

fn parse_coord(s: &str) -> Option<Coord> {
    let (r, c) = s.split_once(',')?;
    Some(Coord::new(r.trim().parse().ok()?, c.trim().parse().ok()?))
}

/// Parses config text. The preset applies before any explicit key, and the
/// result passes every config invariant.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = ini::parse(text)?;
    let mut cfg = ExperimentConfig::default();
    for s in &sections {
        let known: &[&str] = match s.name.as_str() {
            "noc" => &NOC_KEYS,
            "traffic" => &TRAFFIC_KEYS,
            "run" => &RUN_KEYS,
            "manifest" => &MANIFEST_KEYS,
            other => {
                return Err(ConfigError::Syntax {
                    line: s.line,
                    reason: format!("unknown section [{other}]"),
                })
            }
        };
        if let Some(e) = s.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            return Err(ConfigError::Syntax {
                line: e.line,
                reason: format!("unknown key `{}` in [{}]", e.key, s.name),
            });
        }
    }
    let field = |section: &str, key: &str| -> Option<Field<'_>> {
        let s = sections.iter().find(|s| s.name == section)?;
        let e = s.entries.iter().find(|e| e.key == key)?;
        Some(Field {
            name: format!("{section}.{key}"),
            value: e.value.as_str(),
            line: e.line,
        })
    };

    let mut noc = match field("noc", "preset") {
        Some(f) => f.name_of(Preset::parse, "slim_4x4, wide_4x4 or slim_2x2")?.config(),
        None => NocConfig::mesh(4, 4),
    };
    let rows = field("noc", "rows").map(|f| f.uint()).transpose()?.unwrap_or(noc.rows);
    let cols = field("noc", "cols").map(|f| f.uint()).transpose()?.unwrap_or(noc.cols);
    if (rows, cols) != (noc.rows, noc.cols) {
        let resized = NocConfig::mesh(rows, cols);
        noc.rows = rows;
        noc.cols = cols;
        noc.masters = resized.masters;
        noc.slaves = resized.slaves;
    }
    for key in NOC_KEYS.iter().skip(3) {
        let Some(f) = field("noc", key) else { continue };
        match *key {
            "addr_width" => noc.addr_width = f.uint()?,
            "data_width" => noc.data_width = f.uint()?,
            "id_width" => noc.id_width = f.uint()?,
            "max_outstanding" => noc.max_outstanding = f.uint()?,
            "mot_mode" => noc.mot_mode = f.name_of(MotMode::parse, "per_direction or combined")?,
            "connectivity" => noc.connectivity = f.name_of(Connectivity::parse, "partial or full")?,
            "register_slices" => {
                noc.register_slices = match f.value {
                    "all" => ChannelSet::ALL,
                    "none" => ChannelSet::NONE,
                    _ => f.list(Channel::parse, "`all`, `none` or channel names")?.into_iter().collect(),
                }
            }
            "clock_hz" => noc.clock_hz = f.float()?,
            "endpoint_region_bytes" => noc.endpoint_region_bytes = f.uint()?,
            "address_base" => noc.address_base = f.uint()?,
            "masters" => noc.masters = f.coords(&noc)?,
            "slaves" => noc.slaves = f.coords(&noc)?,
            "fifo_depth" => noc.fifo_depth = f.uint()?,
            "slave_latency" => noc.slave_latency = f.uint()?,
            "max_burst_beats" => noc.max_burst_beats = f.uint()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    cfg.noc = noc;

    let t = &mut cfg.traffic;
    if let Some(f) = field("traffic", "kind") {
        t.kind = f.name_of(TrafficKind::parse, "a traffic kind")?;
    }
    for key in TRAFFIC_KEYS.iter().skip(1) {
        let Some(f) = field("traffic", key) else { continue };
        match *key {
            "load" => t.injected_load = f.float()?,
            "min_bytes" => t.min_bytes = f.uint()?,
            "max_bytes" => t.max_bytes = f.uint()?,
            "write_fraction" => t.write_fraction = f.float()?,
            "horizon" => t.horizon = Some(f.uint()?),
            "global_slave" => t.global_slave = f.coord()?,
            "l2" => t.l2 = f.coord()?,
            "gradient_exchange" => t.gradient_exchange = f.boolean()?,
            "layer_table" => cfg.layer_table = Some(PathBuf::from(f.value)),
            "trace" => cfg.trace = Some(PathBuf::from(f.value)),
            _ => unreachable!("key list and match arms agree"),
        }
    }

    let r = &mut cfg.run;
    for key in RUN_KEYS {
        let Some(f) = field("run", key) else { continue };
        match key {
            "mode" => r.mode = f.name_of(RunMode::parse, "single, sweep or matrix")?,
            "warmup" => r.warmup = Some(f.uint()?),
            "cycles" => r.cycles = f.uint()?,
            "seed" => r.seed = f.uint()?,
            "out" => r.out = Some(PathBuf::from(f.value)),
            "drain" => r.drain = Some(f.boolean()?),
            "drain_limit" => r.drain_limit = f.uint()?,
            "loads" => r.loads = f.list(|s| s.parse().ok(), "numbers")?,
            "saturation_gain" => r.saturation_gain = f.float()?,
            "patterns" => r.patterns = f.list(TrafficKind::parse, "traffic kinds")?,
            "burst_sizes" => r.burst_sizes = f.list(|s| s.parse().ok(), "byte counts")?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|source| io_error(path, source))?;
    Ok(parse_config(&text)?)
}

/// One simulation over `source`, for a fixed window or until drained.
fn simulate(cfg: &ExperimentConfig, source: Box<dyn TrafficSource + Send>) -> Result<SimStats, Error> {
    let mut sim = Simulator::new(&cfg.noc, source)?;
    let warmup = cfg.warmup();
    sim.set_warmup(warmup);
    if cfg.drain() {
        sim.run_to_drain(cfg.run.drain_limit)?;
    } else {
        sim.run(warmup + cfg.run.cycles)?;
    }
    Ok(sim.stats())
}

/// Loads and validates a trace against the config's address map.
pub fn load_trace(path: &Path, config: &NocConfig) -> Result<Vec<TraceRecord>, Error> {
    let records = read_trace(path)?;
    let map = allocate_address_map(config)?;
    validate_trace(&records, config, &map)?;
    Ok(records)
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<SimStats, Error> {
    if cfg.traffic.kind == TrafficKind::TraceReplay {
        let path = cfg
            .trace
            .as_ref()
            .ok_or_else(|| ConfigError::invalid("traffic.trace", "trace_replay needs a trace file"))?;
        let records = load_trace(path, &cfg.noc)?;
        return run_replay(cfg, &records);
    }
    simulate(cfg, build_source(&cfg.traffic_spec(cfg.run.seed)?, &cfg.noc)?)
}

/// Replays already validated records.
pub fn run_replay(cfg: &ExperimentConfig, records: &[TraceRecord]) -> Result<SimStats, Error> {
    simulate(cfg, Box::new(ReplaySource::new(records, &cfg.noc)?))
}

/// Seed of sweep point `index`.
pub fn sweep_seed(base: u64, index: usize) -> u64 {
    mix64(base, index as u64)
}

/// Seed of the matrix cell at (`pattern`, `burst`) positions in the grid.
pub fn matrix_seed(base: u64, pattern: usize, burst: usize) -> u64 {
    mix64(mix64(base, pattern as u64), burst as u64)
}

const SEED_DERIVATION: &str = "single: seed; sweep point i: mix64(seed, i); \
matrix cell (p, b): mix64(mix64(seed, p), b) with p, b positions in run.patterns and run.burst_sizes";

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepCurve, Error> {
    if !cfg.traffic.kind.is_poisson() {
        return Err(ConfigError::invalid("traffic.kind", "sweeps need a Poisson pattern").into());
    }
    metrics::sweep_with(&cfg.noc, &cfg.run.loads, cfg.run.saturation_gain, |i, load| {
        let spec = cfg.traffic_spec(sweep_seed(cfg.run.seed, i))?.with_load(load);
        simulate(cfg, build_source(&spec, &cfg.noc)?)
    })
}

/// Every pattern at every maximum burst size, in row-major order. A cell's
/// size range is `[min(min_bytes, size), size]`.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<Vec<MatrixCell>, Error> {
    let cells: Vec<(usize, usize)> = (0..cfg.run.patterns.len())
        .flat_map(|p| (0..cfg.run.burst_sizes.len()).map(move |b| (p, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(p, b)| {
            let kind = cfg.run.patterns[p];
            let size = cfg.run.burst_sizes[b];
            let mut spec = cfg.traffic_spec(matrix_seed(cfg.run.seed, p, b))?;
            spec.kind = kind;
            spec.min_bytes = spec.min_bytes.min(size);
            spec.max_bytes = size;
            let stats = simulate(cfg, build_source(&spec, &cfg.noc)?)?;
            let throughput_bps = metrics::aggregated_throughput(&stats, cfg.noc.clock_hz)?;
            Ok(MatrixCell {
                pattern: kind.name().to_string(),
                burst_bytes: size,
                throughput_bps,
                utilization: metrics::utilization(throughput_bps, &cfg.noc)?,
            })
        })
        .collect()
}

/// Result of one harness invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Single(SimStats),
    Sweep(SweepCurve),
    Matrix(Vec<MatrixCell>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outcome: Outcome,
    /// Files written, manifest last.
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
}

/// Runs `cfg.run.mode` on a pool of `jobs` threads (all cores when `None`)
/// and writes CSVs plus `manifest.ini` to `cfg.run.out` if set.
/// `records` replaces the traffic source with a trace.
pub fn execute(cfg: &ExperimentConfig, records: Option<&[TraceRecord]>, jobs: Option<usize>) -> Result<Report, Error> {
    cfg.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ConfigError::invalid("jobs", e.to_string()))?;
    let outcome = pool.install(|| -> Result<Outcome, Error> {
        Ok(match (records, cfg.run.mode) {
            (Some(r), _) => Outcome::Single(run_replay(cfg, r)?),
            (None, RunMode::Single) => Outcome::Single(run_single(cfg)?),
            (None, RunMode::Sweep) => Outcome::Sweep(run_sweep(cfg)?),
            (None, RunMode::Matrix) => Outcome::Matrix(run_matrix(cfg)?),
        })
    })?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let files = match &cfg.run.out {
        Some(dir) => write_outputs(cfg, &outcome, dir, wall_time_s)?,
        None => Vec::new(),
    };
    Ok(Report {
        outcome,
        files,
        wall_time_s,
    })
}

fn create(path: &Path) -> Result<fs::File, Error> {
    fs::File::create(path).map_err(|source| io_error(path, source))
}

fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome, dir: &Path, wall_time_s: f64) -> Result<Vec<PathBuf>, Error> {
    fs::create_dir_all(dir).map_err(|source| io_error(dir, source))?;
    let mut files = Vec::new();
    match outcome {
        Outcome::Single(stats) => {
            let path = dir.join("stats.csv");
            metrics::write_stats_csv(stats, &cfg.noc, create(&path)?)?;
            files.push(path);
            let path = dir.join("links.csv");
            metrics::write_links_csv(stats, create(&path)?)?;
            files.push(path);
        }
        Outcome::Sweep(curve) => {
            let path = dir.join("sweep.csv");
            metrics::write_sweep_csv(curve, create(&path)?)?;
            files.push(path);
        }
        Outcome::Matrix(cells) => {
            let path = dir.join("matrix.csv");
            metrics::write_matrix_csv(cells, create(&path)?)?;
            files.push(path);
        }
    }
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let mut manifest = String::from("# Resolved experiment; re-run with `simnoc run manifest.ini`.\n[manifest]\n");
    let _ = writeln!(manifest, "tool = simnoc");
    let _ = writeln!(manifest, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "wall_time_s = {wall_time_s:.3}");
    let _ = writeln!(manifest, "seed_derivation = {SEED_DERIVATION}");
    let _ = writeln!(manifest, "outputs = {}\n", names.join(" "));
    manifest.push_str(&cfg.to_ini());
    let path = dir.join("manifest.ini");
    fs::write(&path, manifest).map_err(|source| io_error(&path, source))?;
    files.push(path);
    Ok(files)
}

/// Writes the request list `cfg` would issue as a trace file. Poisson
/// traffic needs `traffic.horizon`.
pub fn write_materialized_trace(cfg: &ExperimentConfig, path: &Path) -> Result<usize, Error> {
    let records = materialize(&cfg.traffic_spec(cfg.run.seed)?, &cfg.noc)?;
    fs::write(path, crate::traffic::write_trace(&records)).map_err(|source| io_error(path, source))?;
    Ok(records.len())
}
