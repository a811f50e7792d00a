//! Traffic generation: Poisson synthetic patterns, emulated DNN workloads
//! and trace record/replay.

mod dnn;
mod synthetic;
mod trace;

use std::sync::Arc;

pub use dnn::{gen_dnn_parallel_conv, gen_dnn_pipelined_conv, gen_dnn_training, Layer, LayerTable};
pub use synthetic::{destination_sets, PoissonSource};
pub use trace::{parse_trace, read_trace, validate_trace, write_trace, ReplaySource, TraceRecord};

use crate::error::{ConfigError, Error};
use crate::sim::TrafficSource;
use crate::topology::{Coord, NocConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficKind {
    UniformRandom,
    AllGlobal,
    MaxTwoHop,
    MaxSingleHop,
    DnnTraining,
    DnnParallelConv,
    DnnPipelinedConv,
    TraceReplay,
}

impl TrafficKind {
    pub const ALL: [TrafficKind; 8] = [
        TrafficKind::UniformRandom,
        TrafficKind::AllGlobal,
        TrafficKind::MaxTwoHop,
        TrafficKind::MaxSingleHop,
        TrafficKind::DnnTraining,
        TrafficKind::DnnParallelConv,
        TrafficKind::DnnPipelinedConv,
        TrafficKind::TraceReplay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrafficKind::UniformRandom => "uniform_random",
            TrafficKind::AllGlobal => "all_global",
            TrafficKind::MaxTwoHop => "max_two_hop",
            TrafficKind::MaxSingleHop => "max_single_hop",
            TrafficKind::DnnTraining => "dnn_training",
            TrafficKind::DnnParallelConv => "dnn_parallel_conv",
            TrafficKind::DnnPipelinedConv => "dnn_pipelined_conv",
            TrafficKind::TraceReplay => "trace_replay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Open-loop Poisson arrivals, as opposed to a finite request list.
    pub fn is_poisson(self) -> bool {
        matches!(
            self,
            TrafficKind::UniformRandom | TrafficKind::AllGlobal | TrafficKind::MaxTwoHop | TrafficKind::MaxSingleHop
        )
    }

    pub fn is_dnn(self) -> bool {
        matches!(
            self,
            TrafficKind::DnnTraining | TrafficKind::DnnParallelConv | TrafficKind::DnnPipelinedConv
        )
    }
}

impl std::fmt::Display for TrafficKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Declarative description of a traffic pattern or workload.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    pub kind: TrafficKind,
    /// Offered load per master as a fraction of DW/8 bytes per cycle.
    pub injected_load: f64,
    pub min_bytes: u64,
    pub max_bytes: u64,
    /// Fraction of transfers that are writes.
    pub write_fraction: f64,
    pub seed: u64,
    /// Poisson sources issue nothing at or after this cycle.
    pub horizon: Option<u64>,
    /// Slave of the all-global pattern.
    pub global_slave: Coord,
    /// Endpoint hosting the shared L2 memory in DNN workloads.
    pub l2: Coord,
    /// Ring gradient exchange in the training workload.
    pub gradient_exchange: bool,
    /// Replaces the bundled layer table of the DNN kinds.
    pub layer_table: Option<Arc<LayerTable>>,
}

impl TrafficSpec {
    pub fn new(kind: TrafficKind) -> Self {
        TrafficSpec {
            kind,
            injected_load: 1.0,
            min_bytes: 4,
            max_bytes: 4,
            write_fraction: 0.5,
            seed: 0,
            horizon: None,
            global_slave: Coord::new(2, 1),
            l2: Coord::new(0, 0),
            gradient_exchange: true,
            layer_table: None,
        }
    }

    pub fn with_bursts(mut self, min_bytes: u64, max_bytes: u64) -> Self {
        self.min_bytes = min_bytes;
        self.max_bytes = max_bytes;
        self
    }

    pub fn with_load(mut self, load: f64) -> Self {
        self.injected_load = load;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, config: &NocConfig) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.injected_load) {
            return Err(ConfigError::invalid("traffic.load", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return Err(ConfigError::invalid("traffic.write_fraction", "must lie in [0, 1]"));
        }
        if self.min_bytes == 0 {
            return Err(ConfigError::invalid("traffic.min_bytes", "must be positive"));
        }
        if self.max_bytes < self.min_bytes {
            return Err(ConfigError::invalid("traffic.max_bytes", "below min_bytes"));
        }
        if self.max_bytes > config.endpoint_region_bytes {
            return Err(ConfigError::invalid(
                "traffic.max_bytes",
                format!("exceeds the {}-byte endpoint region", config.endpoint_region_bytes),
            ));
        }
        // Only the coordinates the kind reads must exist on this mesh.
        let used = [
            ("traffic.global_slave", self.global_slave, self.kind == TrafficKind::AllGlobal),
            ("traffic.l2", self.l2, self.kind.is_dnn()),
        ];
        for (field, c, _) in used.into_iter().filter(|u| u.2) {
            if !config.contains(c) {
                return Err(ConfigError::invalid(field, format!("{c} outside the mesh")));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `seed ^ x`, used to derive independent
/// streams from one base seed.
pub fn mix64(seed: u64, x: u64) -> u64 {
    let mut z = (seed ^ x.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The finite request list of a DNN workload.
pub fn generate_records(spec: &TrafficSpec, config: &NocConfig) -> Result<Vec<TraceRecord>, Error> {
    let table = match &spec.layer_table {
        Some(t) => t.clone(),
        None => Arc::new(match spec.kind {
            TrafficKind::DnnTraining => LayerTable::resnet34_shrunk(),
            _ => LayerTable::vgg16_tiled(),
        }),
    };
    Ok(match spec.kind {
        TrafficKind::DnnTraining => gen_dnn_training(spec, config, &table)?,
        TrafficKind::DnnParallelConv => gen_dnn_parallel_conv(spec, config, &table)?,
        TrafficKind::DnnPipelinedConv => gen_dnn_pipelined_conv(spec, config, &table)?,
        k => {
            return Err(ConfigError::invalid("traffic.kind", format!("{k} has no finite request list")).into());
        }
    })
}

/// A live source for `spec`. Trace replay needs the records and goes
/// through [`ReplaySource`] instead.
pub fn build_source(spec: &TrafficSpec, config: &NocConfig) -> Result<Box<dyn TrafficSource + Send>, Error> {
    spec.validate(config)?;
    if spec.kind.is_poisson() {
        return Ok(Box::new(PoissonSource::new(spec, config)?));
    }
    if spec.kind == TrafficKind::TraceReplay {
        return Err(ConfigError::invalid("traffic.kind", "trace_replay needs a trace file").into());
    }
    let records = generate_records(spec, config)?;
    Ok(Box::new(ReplaySource::new(&records, config)?))
}

/// Pulls every request the source would issue, in per-master order. Poisson
/// sources need a horizon to terminate.
pub fn materialize(spec: &TrafficSpec, config: &NocConfig) -> Result<Vec<TraceRecord>, Error> {
    if spec.kind.is_poisson() && spec.horizon.is_none() {
        return Err(ConfigError::invalid("traffic.horizon", "required to materialize Poisson traffic").into());
    }
    let mut source = build_source(spec, config)?;
    let mut out = Vec::new();
    for m in 0..config.masters.len() {
        while let Some(r) = source.next_request(m) {
            out.push(TraceRecord::from(&r));
        }
    }
    out.sort_by_key(|r| r.issue_cycle);
    Ok(out)
}
