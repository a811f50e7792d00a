//! Transaction, burst and beat model of the AXI-style protocol.

use std::fmt;

use crate::error::AxiError;
use crate::topology::Coord;

/// AXI4 forbids bursts from crossing a 4 KiB address boundary.
pub const BOUNDARY_BYTES: u64 = 4096;
/// AXI4 INCR burst length limit.
pub const MAX_BURST_BEATS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Aw,
    W,
    B,
    Ar,
    R,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::Aw, Channel::W, Channel::B, Channel::Ar, Channel::R];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_response(self) -> bool {
        matches!(self, Channel::B | Channel::R)
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Aw => "AW",
            Channel::W => "W",
            Channel::B => "B",
            Channel::Ar => "AR",
            Channel::R => "R",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of channels, e.g. those carrying a register slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub const NONE: ChannelSet = ChannelSet(0);
    pub const ALL: ChannelSet = ChannelSet(0b1_1111);

    pub fn single(c: Channel) -> Self {
        ChannelSet(1 << c.index())
    }

    pub fn contains(self, c: Channel) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn insert(&mut self, c: Channel) {
        self.0 |= 1 << c.index();
    }

    pub fn iter(self) -> impl Iterator<Item = Channel> {
        Channel::ALL.into_iter().filter(move |c| self.contains(*c))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl FromIterator<Channel> for ChannelSet {
    fn from_iter<I: IntoIterator<Item = Channel>>(iter: I) -> Self {
        let mut s = ChannelSet::NONE;
        iter.into_iter().for_each(|c| s.insert(c));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Read,
    Write,
}

impl Direction {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Direction::Read => 'R',
            Direction::Write => 'W',
        }
    }
}

/// A DMA transfer as handed to a master endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransferRequest {
    pub master: Coord,
    pub direction: Direction,
    pub base_address: u64,
    pub total_bytes: u64,
    pub id: u32,
    pub issue_cycle: u64,
}

/// One INCR burst. The last beat of a transfer may carry fewer than
/// `beat_bytes` payload bytes when the transfer size is not a beat multiple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Burst {
    /// Index of the parent transfer within its split.
    pub transfer: u64,
    pub master: Coord,
    pub direction: Direction,
    pub id: u32,
    pub start_address: u64,
    pub num_beats: u32,
    pub beat_bytes: u32,
    /// Payload bytes carried by this burst.
    pub bytes: u64,
}

impl Burst {
    /// Bus footprint: `num_beats * beat_bytes`.
    pub fn span(&self) -> u64 {
        self.num_beats as u64 * self.beat_bytes as u64
    }

    pub fn beats(&self) -> impl Iterator<Item = Beat> + '_ {
        (0..self.num_beats).map(move |i| Beat {
            beat_index: i,
            is_last: i + 1 == self.num_beats,
            payload_bytes: self.beat_payload(i),
        })
    }

    pub fn beat_payload(&self, index: u32) -> u32 {
        let before = index as u64 * self.beat_bytes as u64;
        (self.bytes - before).min(self.beat_bytes as u64) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Beat {
    pub beat_index: u32,
    pub is_last: bool,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RespStatus {
    #[default]
    Okay,
    DecodeError,
}

/// A unit travelling on one of the five channels. AW/AR messages name their
/// burst through `burst`, whose full metadata lives in the engine's burst
/// table; W/R messages are beats; B messages are response tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelMessage {
    pub channel: Channel,
    pub burst: u32,
    /// Transaction id as seen on the current link (remapped per hop).
    pub id: u32,
    pub beat_index: u32,
    pub last: bool,
    pub bytes: u32,
    pub status: RespStatus,
}

/// Splits a transfer into maximal INCR bursts that respect the 4 KiB
/// boundary and the `max_beats` cap.
pub fn split_transfer(req: &TransferRequest, data_width: u32, max_beats: u32) -> Result<Vec<Burst>, AxiError> {
    let beat_bytes = data_width / 8;
    if req.total_bytes == 0 {
        return Err(AxiError::Empty);
    }
    if !req.base_address.is_multiple_of(beat_bytes as u64) {
        return Err(AxiError::Misaligned {
            address: req.base_address,
            beat_bytes,
        });
    }
    let max_bytes = max_beats as u64 * beat_bytes as u64;
    let mut bursts = Vec::new();
    let mut addr = req.base_address;
    let mut remaining = req.total_bytes;
    while remaining > 0 {
        let to_boundary = BOUNDARY_BYTES - addr % BOUNDARY_BYTES;
        let chunk = remaining.min(to_boundary).min(max_bytes);
        bursts.push(Burst {
            transfer: 0,
            master: req.master,
            direction: req.direction,
            id: req.id,
            start_address: addr,
            num_beats: chunk.div_ceil(beat_bytes as u64) as u32,
            beat_bytes,
            bytes: chunk,
        });
        addr += chunk;
        remaining -= chunk;
    }
    Ok(bursts)
}

/// AXI ordering: same master, same id, same direction.
pub fn ordering_constraint(a: &Burst, b: &Burst) -> bool {
    a.master == b.master && a.id == b.id && a.direction == b.direction
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ZeroBeats,
    TooManyBeats { beats: u32, max: u32 },
    CrossesBoundary { start: u64, end: u64 },
    Misaligned { start: u64 },
    NotContiguous { expected: u64, found: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroBeats => write!(f, "num_beats = 0"),
            Violation::TooManyBeats { max, beats } => write!(f, "num_beats > {max} (got {beats})"),
            Violation::CrossesBoundary { start, end } => {
                write!(f, "burst [{start:#x}, {end:#x}) crosses a 4 KiB boundary")
            }
            Violation::Misaligned { start } => write!(f, "start address {start:#x} not beat-aligned"),
            Violation::NotContiguous { expected, found } => {
                write!(f, "sibling burst starts at {found:#x}, expected {expected:#x}")
            }
        }
    }
}

/// First violation found in `bursts`, with its position.
pub fn compliance_check(bursts: &[Burst], max_beats: u32) -> Result<(), (usize, Violation)> {
    for (i, b) in bursts.iter().enumerate() {
        if b.num_beats == 0 {
            return Err((i, Violation::ZeroBeats));
        }
        if b.num_beats > max_beats {
            return Err((
                i,
                Violation::TooManyBeats {
                    beats: b.num_beats,
                    max: max_beats,
                },
            ));
        }
        if b.start_address % b.beat_bytes as u64 != 0 {
            return Err((i, Violation::Misaligned { start: b.start_address }));
        }
        let end = b.start_address + b.span();
        if b.start_address / BOUNDARY_BYTES != (end - 1) / BOUNDARY_BYTES {
            return Err((
                i,
                Violation::CrossesBoundary {
                    start: b.start_address,
                    end,
                },
            ));
        }
        if i > 0 {
            let prev = &bursts[i - 1];
            if prev.transfer == b.transfer && prev.master == b.master {
                let expected = prev.start_address + prev.bytes;
                if expected != b.start_address {
                    return Err((
                        i,
                        Violation::NotContiguous {
                            expected,
                            found: b.start_address,
                        },
                    ));
                }
            }
        }
    }
    Ok(())
}
