//! Trace files: UTF-8 lines `cycle row col dir addr_hex bytes id`, with
//! `#` starting a comment.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::axi::{Direction, TransferRequest};
use crate::error::{Error, TraceError};
use crate::sim::TrafficSource;
use crate::topology::{AddressMap, Coord, NocConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub issue_cycle: u64,
    pub master: Coord,
    pub direction: Direction,
    pub address: u64,
    pub bytes: u64,
    pub id: u32,
}

impl From<&TransferRequest> for TraceRecord {
    fn from(r: &TransferRequest) -> Self {
        TraceRecord {
            issue_cycle: r.issue_cycle,
            master: r.master,
            direction: r.direction,
            address: r.base_address,
            bytes: r.total_bytes,
            id: r.id,
        }
    }
}

impl TraceRecord {
    pub fn request(&self) -> TransferRequest {
        TransferRequest {
            master: self.master,
            direction: self.direction,
            base_address: self.address,
            total_bytes: self.bytes,
            id: self.id,
            issue_cycle: self.issue_cycle,
        }
    }
}

pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut out = String::from("# cycle row col dir addr bytes id\n");
    for r in records {
        let _ = writeln!(
            out,
            "{} {} {} {} {:#x} {} {}",
            r.issue_cycle,
            r.master.row,
            r.master.col,
            r.direction.symbol(),
            r.address,
            r.bytes,
            r.id
        );
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        let err = |reason: String| TraceError::Parse { line, reason };
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let int = |s: &str, what: &str| s.parse::<u64>().map_err(|e| err(format!("bad {what} `{s}`: {e}")));
        let direction = match f[3] {
            "R" | "r" => Direction::Read,
            "W" | "w" => Direction::Write,
            d => return Err(err(format!("bad direction `{d}`, expected R or W"))),
        };
        let hex = f[4].strip_prefix("0x").or_else(|| f[4].strip_prefix("0X")).unwrap_or(f[4]);
        let address = u64::from_str_radix(hex, 16).map_err(|e| err(format!("bad address `{}`: {e}", f[4])))?;
        let id = int(f[6], "id")?;
        out.push(TraceRecord {
            issue_cycle: int(f[0], "cycle")?,
            master: Coord::new(int(f[1], "row")? as usize, int(f[2], "col")? as usize),
            direction,
            address,
            bytes: int(f[5], "bytes")?,
            id: u32::try_from(id).map_err(|_| err(format!("id {id} out of range")))?,
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_trace(&text)?)
}

/// Checks every record against the configuration: master endpoint, ID width,
/// alignment, a mapped target holding the whole transfer, and non-decreasing
/// issue cycles per master.
pub fn validate_trace(records: &[TraceRecord], config: &NocConfig, map: &AddressMap) -> Result<(), TraceError> {
    let mut last = vec![0u64; config.masters.len()];
    let beat = u64::from(config.beat_bytes());
    for (i, r) in records.iter().enumerate() {
        let fail = |reason: String| TraceError::Invalid { index: i + 1, reason };
        if !config.contains(r.master) {
            return Err(fail(format!("coordinate {} outside the {}x{} mesh", r.master, config.rows, config.cols)));
        }
        let Some(m) = config.master_index(r.master) else {
            return Err(fail(format!("{} is not a master endpoint", r.master)));
        };
        if u64::from(r.id) >> config.id_width != 0 {
            return Err(fail(format!("id {} does not fit in {} bits", r.id, config.id_width)));
        }
        if r.bytes == 0 {
            return Err(fail("zero-byte transfer".into()));
        }
        if r.address % beat != 0 {
            return Err(fail(format!("address {:#x} not aligned to {beat}-byte beats", r.address)));
        }
        let region = map
            .lookup(r.address)
            .filter(|g| config.slaves.contains(&g.coord))
            .ok_or_else(|| fail(format!("address {:#x} is not mapped to a slave", r.address)))?;
        if r.address + r.bytes > region.end() {
            return Err(fail(format!("transfer runs past the region of {}", region.coord)));
        }
        if r.issue_cycle < last[m] {
            return Err(fail(format!("issue cycle {} goes back in time for master {}", r.issue_cycle, r.master)));
        }
        last[m] = r.issue_cycle;
    }
    Ok(())
}

/// Replays records in file order per master.
#[derive(Debug, Clone, Default)]
pub struct ReplaySource {
    queues: Vec<VecDeque<TransferRequest>>,
}

impl ReplaySource {
    pub fn new(records: &[TraceRecord], config: &NocConfig) -> Result<Self, TraceError> {
        let mut queues = vec![VecDeque::new(); config.masters.len()];
        for (i, r) in records.iter().enumerate() {
            let m = config.master_index(r.master).ok_or_else(|| TraceError::Invalid {
                index: i + 1,
                reason: format!("{} is not a master endpoint", r.master),
            })?;
            queues[m].push_back(r.request());
        }
        Ok(ReplaySource { queues })
    }
}

impl TrafficSource for ReplaySource {
    fn next_request(&mut self, master: usize) -> Option<TransferRequest> {
        self.queues[master].pop_front()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::allocate_address_map;
    use proptest::prelude::*;

    fn record(cycle: u64, row: usize, col: usize, w: bool, addr: u64, bytes: u64, id: u32) -> TraceRecord {
        TraceRecord {
            issue_cycle: cycle,
            master: Coord::new(row, col),
            direction: if w { Direction::Write } else { Direction::Read },
            address: addr,
            bytes,
            id,
        }
    }

    #[test]
    fn empty_trace() {
        assert!(parse_trace("").unwrap().is_empty());
        assert!(parse_trace("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = parse_trace("0 0 0 R 0x0 4 0\n1 0 0 X 0x0 4 0\n").unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 2, .. }));
        let err = parse_trace("\n\n0 0 0 R 0x0 4\n").unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 3, .. }));
    }

    #[test]
    fn validation_names_the_record() {
        let cfg = NocConfig::mesh(2, 2);
        let map = allocate_address_map(&cfg).unwrap();
        let good = record(0, 0, 0, true, 0x100000, 64, 1);
        assert!(validate_trace(&[good], &cfg, &map).is_ok());
        let unmapped = record(0, 0, 1, false, 0xF000_0000, 4, 0);
        let err = validate_trace(&[good, unmapped], &cfg, &map).unwrap_err();
        assert!(err.to_string().starts_with("record 2:"), "{err}");
        let outside = record(0, 5, 0, false, 0, 4, 0);
        assert!(matches!(validate_trace(&[outside], &cfg, &map), Err(TraceError::Invalid { index: 1, .. })));
        let backwards = [record(5, 0, 0, true, 0, 4, 0), record(4, 0, 0, true, 0, 4, 0)];
        assert!(validate_trace(&backwards, &cfg, &map).is_err());
        let overrun = record(0, 0, 0, true, 0xFFFF0, 0x20, 0);
        assert!(validate_trace(&[overrun], &cfg, &map).is_err());
        let wide_id = record(0, 0, 0, true, 0, 4, 16);
        assert!(validate_trace(&[wide_id], &cfg, &map).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn write_then_parse_is_identity(
            raw in prop::collection::vec((0u64..1 << 40, 0usize..64, 0usize..64, any::<bool>(), 0u64..1 << 48, 1u64..1 << 20, 0u32..65536), 0..700)
        ) {
            let records: Vec<TraceRecord> = raw.into_iter().map(|(c, r, k, w, a, b, i)| record(c, r, k, w, a, b, i)).collect();
            prop_assert_eq!(parse_trace(&write_trace(&records)).unwrap(), records);
        }
    }
}
