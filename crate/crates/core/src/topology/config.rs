use std::fmt;

use crate::axi::{Channel, ChannelSet};
use crate::error::ConfigError;

use super::Coord;

/// Crossbar connectivity inside each crosspoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connectivity {
    /// Only the ingress/egress pairs that dimension-ordered routing can use.
    Partial,
    /// Every ingress reaches every egress.
    Full,
}

impl Connectivity {
    pub fn name(self) -> &'static str {
        match self {
            Connectivity::Partial => "partial",
            Connectivity::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "partial" => Some(Connectivity::Partial),
            "full" => Some(Connectivity::Full),
            _ => None,
        }
    }
}

/// How the outstanding-transaction limit is applied at a master.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotMode {
    /// Reads and writes each get MOT slots.
    PerDirection,
    /// Reads and writes share MOT slots.
    Combined,
}

impl MotMode {
    pub fn name(self) -> &'static str {
        match self {
            MotMode::PerDirection => "per_direction",
            MotMode::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per_direction" => Some(MotMode::PerDirection),
            "combined" => Some(MotMode::Combined),
            _ => None,
        }
    }
}

/// Named parameter sets used in the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Slim4x4,
    Wide4x4,
    Slim2x2,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Slim4x4, Preset::Wide4x4, Preset::Slim2x2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Slim4x4 => "slim_4x4",
            Preset::Wide4x4 => "wide_4x4",
            Preset::Slim2x2 => "slim_2x2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn config(self) -> NocConfig {
        match self {
            Preset::Slim4x4 => NocConfig::mesh(4, 4),
            Preset::Wide4x4 => NocConfig {
                data_width: 512,
                ..NocConfig::mesh(4, 4)
            },
            // The 2x2 instance is characterized with IW = 2 and MOT = 1.
            Preset::Slim2x2 => NocConfig {
                id_width: 2,
                max_outstanding: 1,
                ..NocConfig::mesh(2, 2)
            },
        }
    }
}

/// Design-time parameters of the mesh plus the engine's microarchitectural knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct NocConfig {
    pub rows: usize,
    pub cols: usize,
    /// AW in bits, 32 or 64.
    pub addr_width: u32,
    /// DW in bits, power of two in [8, 1024].
    pub data_width: u32,
    /// IW in bits, [1, 16].
    pub id_width: u32,
    /// MOT, [1, 128].
    pub max_outstanding: u32,
    pub mot_mode: MotMode,
    pub connectivity: Connectivity,
    /// Channels carrying a one-cycle register slice at every crosspoint egress.
    pub register_slices: ChannelSet,
    pub clock_hz: f64,
    pub endpoint_region_bytes: u64,
    pub address_base: u64,
    /// Master endpoints, in master-index order.
    pub masters: Vec<Coord>,
    /// Slave endpoints; each owns one address region.
    pub slaves: Vec<Coord>,
    /// Ingress FIFO depth per channel.
    pub fifo_depth: usize,
    /// Slave service latency in cycles.
    pub slave_latency: u64,
    pub max_burst_beats: u32,
}

impl NocConfig {
    /// A `rows`x`cols` mesh with one master and one slave per crosspoint and
    /// the slim defaults (AW=32, DW=32, IW=4, MOT=8, slices on all channels).
    pub fn mesh(rows: usize, cols: usize) -> Self {
        let all: Vec<Coord> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| Coord::new(r, c)))
            .collect();
        NocConfig {
            rows,
            cols,
            addr_width: 32,
            data_width: 32,
            id_width: 4,
            max_outstanding: 8,
            mot_mode: MotMode::PerDirection,
            connectivity: Connectivity::Partial,
            register_slices: ChannelSet::ALL,
            clock_hz: 1e9,
            endpoint_region_bytes: 1 << 20,
            address_base: 0,
            masters: all.clone(),
            slaves: all,
            fifo_depth: 2,
            slave_latency: 1,
            max_burst_beats: 256,
        }
    }

    pub fn beat_bytes(&self) -> u32 {
        self.data_width / 8
    }

    pub fn num_nodes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    /// Row-major node index.
    pub fn node_index(&self, c: Coord) -> usize {
        c.row * self.cols + c.col
    }

    pub fn coord_of(&self, index: usize) -> Coord {
        Coord::new(index / self.cols, index % self.cols)
    }

    pub fn master_index(&self, c: Coord) -> Option<usize> {
        self.masters.iter().position(|&m| m == c)
    }

    pub fn has_slice(&self, channel: Channel) -> bool {
        self.register_slices.contains(channel)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ConfigError::invalid("rows/cols", "mesh dimensions must be >= 1"));
        }
        if self.addr_width != 32 && self.addr_width != 64 {
            return Err(ConfigError::invalid("addr_width", "must be 32 or 64"));
        }
        if !self.data_width.is_power_of_two() || !(8..=1024).contains(&self.data_width) {
            return Err(ConfigError::invalid(
                "data_width",
                "must be a power of two in [8, 1024]",
            ));
        }
        if !(1..=16).contains(&self.id_width) {
            return Err(ConfigError::invalid("id_width", "must be in [1, 16]"));
        }
        if !(1..=128).contains(&self.max_outstanding) {
            return Err(ConfigError::invalid("max_outstanding", "must be in [1, 128]"));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(ConfigError::invalid("clock_hz", "must be positive"));
        }
        if self.endpoint_region_bytes == 0
            || !self.endpoint_region_bytes.is_multiple_of(self.beat_bytes() as u64)
        {
            return Err(ConfigError::invalid(
                "endpoint_region_bytes",
                "must be a positive multiple of data_width/8",
            ));
        }
        if !self.address_base.is_multiple_of(self.beat_bytes() as u64) {
            return Err(ConfigError::invalid(
                "address_base",
                "must be aligned to data_width/8",
            ));
        }
        if self.fifo_depth == 0 {
            return Err(ConfigError::invalid("fifo_depth", "must be >= 1"));
        }
        if !(1..=256).contains(&self.max_burst_beats) {
            return Err(ConfigError::invalid("max_burst_beats", "must be in [1, 256]"));
        }
        for (field, list) in [("masters", &self.masters), ("slaves", &self.slaves)] {
            if list.len() > self.num_nodes() {
                return Err(ConfigError::invalid(field, "more endpoints than crosspoints"));
            }
            if let Some(c) = list.iter().find(|c| !self.contains(**c)) {
                return Err(ConfigError::invalid(field, format!("{c} lies outside the mesh")));
            }
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(ConfigError::invalid(field, "duplicate endpoint coordinate"));
            }
        }
        if (1u64 << self.id_width) < self.masters.len() as u64 {
            return Err(ConfigError::invalid(
                "id_width",
                format!("2^IW < masters ({} < {})", 1u64 << self.id_width, self.masters.len()),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
