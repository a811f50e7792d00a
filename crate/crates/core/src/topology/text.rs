//! Line-based text form of address maps and routing tables.
//!
//! ```text
//! region <base-hex> <size-hex> <row> <col> <role>
//! route <row> <col> <base-hex> <size-hex> <port>
//! ```

use std::fmt::Write as _;

use super::{AddressMap, Coord, EndpointRole, Port, Region, RouteEntry, RoutingTable, RoutingTables};
use crate::error::ConfigError;

pub fn write_address_map(map: &AddressMap) -> String {
    let mut out = String::new();
    for r in map.regions() {
        let _ = writeln!(
            out,
            "region {:#x} {:#x} {} {} {}",
            r.base,
            r.size,
            r.coord.row,
            r.coord.col,
            r.role.name()
        );
    }
    out
}

pub fn write_routing_tables(tables: &RoutingTables) -> String {
    let mut out = String::new();
    for (c, t) in tables.iter() {
        for e in t.entries() {
            let _ = writeln!(out, "route {} {} {:#x} {:#x} {}", c.row, c.col, e.base, e.size, e.port);
        }
    }
    out
}

fn parse_hex(s: &str, line: usize) -> Result<u64, ConfigError> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(&digits.replace('_', ""), 16).map_err(|e| ConfigError::Syntax {
        line,
        reason: format!("bad hex `{s}`: {e}"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize, ConfigError> {
    s.parse().map_err(|e| ConfigError::Syntax {
        line,
        reason: format!("bad integer `{s}`: {e}"),
    })
}

fn records<'a>(text: &'a str, keyword: &'a str, arity: usize) -> impl Iterator<Item = Result<(usize, Vec<&'a str>), ConfigError>> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != keyword || fields.len() != arity + 1 {
            return Some(Err(ConfigError::Syntax {
                line: i + 1,
                reason: format!("expected `{keyword}` with {arity} fields"),
            }));
        }
        Some(Ok((i + 1, fields[1..].to_vec())))
    })
}

pub fn parse_address_map(text: &str, addr_width: u32) -> Result<AddressMap, ConfigError> {
    let mut regions = Vec::new();
    for rec in records(text, "region", 5) {
        let (line, f) = rec?;
        regions.push(Region {
            base: parse_hex(f[0], line)?,
            size: parse_hex(f[1], line)?,
            coord: Coord::new(parse_usize(f[2], line)?, parse_usize(f[3], line)?),
            role: EndpointRole::parse(f[4]).ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("unknown role `{}`", f[4]),
            })?,
        });
    }
    AddressMap::from_regions(regions, addr_width)
}

pub fn parse_routing_tables(text: &str, rows: usize, cols: usize) -> Result<RoutingTables, ConfigError> {
    let mut entries: Vec<Vec<RouteEntry>> = vec![Vec::new(); rows * cols];
    for rec in records(text, "route", 5) {
        let (line, f) = rec?;
        let c = Coord::new(parse_usize(f[0], line)?, parse_usize(f[1], line)?);
        if c.row >= rows || c.col >= cols {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("crosspoint {c} outside {rows}x{cols} mesh"),
            });
        }
        entries[c.row * cols + c.col].push(RouteEntry {
            base: parse_hex(f[2], line)?,
            size: parse_hex(f[3], line)?,
            port: Port::parse(f[4]).ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("unknown port `{}`", f[4]),
            })?,
        });
    }
    Ok(RoutingTables::new(
        rows,
        cols,
        entries.into_iter().map(RoutingTable::new).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{allocate_address_map, build_mesh, generate_routing_tables, NocConfig};

    #[test]
    fn text_round_trip() {
        let cfg = NocConfig::mesh(3, 3);
        let map = allocate_address_map(&cfg).unwrap();
        let text = write_address_map(&map);
        assert!(text.starts_with("region 0x0 0x100000 0 0 slave\n"));
        assert_eq!(parse_address_map(&text, 32).unwrap(), map);

        let tables = generate_routing_tables(&build_mesh(&cfg).unwrap(), &map).unwrap();
        let text = write_routing_tables(&tables);
        assert_eq!(parse_routing_tables(&text, 3, 3).unwrap(), tables);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_address_map("# header\nregion 0x0 0x10 0 0 slave\nregion zz 0x10 0 1 slave\n", 32).unwrap_err();
        assert_eq!(err.to_string().split(':').next().unwrap(), "line 3");
        let err = parse_routing_tables("route 9 9 0x0 0x10 N\n", 2, 2).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }
}
