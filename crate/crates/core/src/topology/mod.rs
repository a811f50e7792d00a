//! Mesh construction, address map and YX routing tables.
//!
//! Coordinates are `(row, col)` with row 0 at the top. A route first moves
//! vertically until the destination row is reached, then horizontally, and
//! ends on the `Local` port of the destination crosspoint.

mod cdg;
mod config;
mod text;

use std::fmt;

pub use cdg::{check_deadlock_freedom, CdgReport, ChannelNetwork, DeadlockVerdict, DirectedLink};
pub use config::{Connectivity, MotMode, NocConfig, Preset};
pub use text::{parse_address_map, parse_routing_tables, write_address_map, write_routing_tables};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    North,
    East,
    South,
    West,
    Local,
}

impl Port {
    pub const ALL: [Port; 5] = [Port::North, Port::East, Port::South, Port::West, Port::Local];
    pub const MESH: [Port; 4] = [Port::North, Port::East, Port::South, Port::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Port> {
        Port::ALL.get(i).copied()
    }

    pub fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            Port::Local => Port::Local,
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Port::North | Port::South)
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Port::East | Port::West)
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::North => "N",
            Port::East => "E",
            Port::South => "S",
            Port::West => "W",
            Port::Local => "L",
        }
    }

    pub fn parse(s: &str) -> Option<Port> {
        match s {
            "N" | "North" | "north" => Some(Port::North),
            "E" | "East" | "east" => Some(Port::East),
            "S" | "South" | "south" => Some(Port::South),
            "W" | "West" | "west" => Some(Port::West),
            "L" | "Local" | "local" => Some(Port::Local),
            _ => None,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Connectivity {
    /// Whether a crossbar connects `ingress` to `egress`.
    ///
    /// Partial crossbars drop U-turns and the turns dimension-ordered routing
    /// never takes: horizontal-to-vertical on the request networks (YX) and
    /// vertical-to-horizontal on the response networks, which retrace requests.
    pub fn allows(self, ingress: Port, egress: Port, response: bool) -> bool {
        match self {
            Connectivity::Full => true,
            Connectivity::Partial => {
                if ingress == Port::Local || egress == Port::Local {
                    return true;
                }
                if ingress == egress {
                    return false;
                }
                // The packet travels away from its ingress port.
                let travelling_vertical = ingress.is_vertical();
                if response {
                    !(travelling_vertical && egress.is_horizontal())
                } else {
                    !(!travelling_vertical && egress.is_vertical())
                }
            }
        }
    }
}

/// A crosspoint and the ports present at its grid position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crosspoint {
    pub coord: Coord,
    /// Mesh ports towards existing neighbours, followed by `Local`.
    pub ports: Vec<Port>,
}

impl Crosspoint {
    pub fn mesh_port_count(&self) -> usize {
        self.ports.len() - 1
    }
}

/// Undirected inter-crosspoint link; `a` precedes `b` in row-major order.
/// Every link carries the five AXI channels in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub a: Coord,
    pub b: Coord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub rows: usize,
    pub cols: usize,
    pub crosspoints: Vec<Crosspoint>,
}

impl Mesh {
    pub fn neighbor(&self, c: Coord, port: Port) -> Option<Coord> {
        neighbor(self.rows, self.cols, c, port)
    }

    pub fn crosspoint(&self, c: Coord) -> &Crosspoint {
        &self.crosspoints[c.row * self.cols + c.col]
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    pub fn links(&self) -> Vec<Link> {
        let mut links = Vec::new();
        for xp in &self.crosspoints {
            for port in [Port::East, Port::South] {
                if let Some(n) = self.neighbor(xp.coord, port) {
                    links.push(Link { a: xp.coord, b: n });
                }
            }
        }
        links.sort();
        links
    }
}

pub(crate) fn neighbor(rows: usize, cols: usize, c: Coord, port: Port) -> Option<Coord> {
    match port {
        Port::North if c.row > 0 => Some(Coord::new(c.row - 1, c.col)),
        Port::South if c.row + 1 < rows => Some(Coord::new(c.row + 1, c.col)),
        Port::West if c.col > 0 => Some(Coord::new(c.row, c.col - 1)),
        Port::East if c.col + 1 < cols => Some(Coord::new(c.row, c.col + 1)),
        _ => None,
    }
}

/// Instantiates the crosspoint grid. Corner crosspoints get two mesh ports,
/// edge crosspoints three and interior ones four, each plus `Local`.
pub fn build_mesh(config: &NocConfig) -> Result<Mesh, ConfigError> {
    config.validate()?;
    let mut crosspoints = Vec::with_capacity(config.num_nodes());
    for row in 0..config.rows {
        for col in 0..config.cols {
            let coord = Coord::new(row, col);
            let mut ports: Vec<Port> = Port::MESH
                .into_iter()
                .filter(|&p| neighbor(config.rows, config.cols, coord, p).is_some())
                .collect();
            ports.push(Port::Local);
            crosspoints.push(Crosspoint { coord, ports });
        }
    }
    Ok(Mesh {
        rows: config.rows,
        cols: config.cols,
        crosspoints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndpointRole {
    Master,
    Slave,
    Memory,
}

impl EndpointRole {
    pub fn name(self) -> &'static str {
        match self {
            EndpointRole::Master => "master",
            EndpointRole::Slave => "slave",
            EndpointRole::Memory => "memory",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "master" => Some(EndpointRole::Master),
            "slave" => Some(EndpointRole::Slave),
            "memory" => Some(EndpointRole::Memory),
            _ => None,
        }
    }

    /// Slaves and memories answer transactions and therefore get routed to.
    pub fn is_target(self) -> bool {
        !matches!(self, EndpointRole::Master)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub base: u64,
    pub size: u64,
    pub coord: Coord,
    pub role: EndpointRole,
}

impl Region {
    pub fn end(&self) -> u64 {
        self.base + self.size
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr - self.base < self.size
    }
}

/// Disjoint regions sorted by base address.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AddressMap {
    regions: Vec<Region>,
}

impl AddressMap {
    /// Builds a map from arbitrary regions, checking disjointness and the
    /// address width.
    pub fn from_regions(mut regions: Vec<Region>, addr_width: u32) -> Result<Self, ConfigError> {
        regions.sort_by_key(|r| r.base);
        let limit: u128 = 1u128 << addr_width;
        for r in &regions {
            if r.size == 0 {
                return Err(ConfigError::invalid("region", format!("empty region at {:#x}", r.base)));
            }
            let end = r.base as u128 + r.size as u128;
            if end > limit {
                return Err(ConfigError::AddressOverflow {
                    needed: end,
                    available: limit,
                });
            }
        }
        for w in regions.windows(2) {
            if w[0].end() > w[1].base {
                return Err(ConfigError::invalid(
                    "region",
                    format!("regions at {:#x} and {:#x} overlap", w[0].base, w[1].base),
                ));
            }
        }
        Ok(AddressMap { regions })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn lookup(&self, addr: u64) -> Option<&Region> {
        let i = self.regions.partition_point(|r| r.end() <= addr);
        self.regions.get(i).filter(|r| r.contains(addr))
    }

    pub fn region_of(&self, coord: Coord) -> Option<&Region> {
        self.regions
            .iter()
            .find(|r| r.coord == coord && r.role.is_target())
    }
}

/// One contiguous region per slave endpoint, in row-major endpoint order,
/// starting at `address_base`.
pub fn allocate_address_map(config: &NocConfig) -> Result<AddressMap, ConfigError> {
    if config.endpoint_region_bytes == 0 {
        return Err(ConfigError::invalid("endpoint_region_bytes", "must be > 0"));
    }
    let mut slaves = config.slaves.clone();
    slaves.sort();
    let needed = config.address_base as u128
        + config.endpoint_region_bytes as u128 * slaves.len() as u128;
    let available = 1u128 << config.addr_width;
    if needed > available {
        return Err(ConfigError::AddressOverflow { needed, available });
    }
    let regions = slaves
        .iter()
        .enumerate()
        .map(|(i, &coord)| Region {
            base: config.address_base + i as u64 * config.endpoint_region_bytes,
            size: config.endpoint_region_bytes,
            coord,
            role: EndpointRole::Slave,
        })
        .collect();
    AddressMap::from_regions(regions, config.addr_width)
}

/// Egress-port sequence of the YX route from `src` to `dst`, ending in `Local`.
pub fn yx_route(src: Coord, dst: Coord) -> Vec<Port> {
    let mut path = Vec::with_capacity(src.manhattan(dst) + 1);
    let vertical = if dst.row > src.row { Port::South } else { Port::North };
    path.extend(std::iter::repeat_n(vertical, src.row.abs_diff(dst.row)));
    let horizontal = if dst.col > src.col { Port::East } else { Port::West };
    path.extend(std::iter::repeat_n(horizontal, src.col.abs_diff(dst.col)));
    path.push(Port::Local);
    path
}

/// First hop of the YX route.
pub fn yx_next_hop(src: Coord, dst: Coord) -> Port {
    if dst.row > src.row {
        Port::South
    } else if dst.row < src.row {
        Port::North
    } else if dst.col > src.col {
        Port::East
    } else if dst.col < src.col {
        Port::West
    } else {
        Port::Local
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RouteEntry {
    pub base: u64,
    pub size: u64,
    pub port: Port,
}

impl RouteEntry {
    pub fn end(&self) -> u64 {
        self.base + self.size
    }
}

/// Address-range to egress-port table of one crosspoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoutingTable {
    entries: Vec<RouteEntry>,
}

impl RoutingTable {
    pub fn new(mut entries: Vec<RouteEntry>) -> Self {
        entries.sort_by_key(|e| e.base);
        RoutingTable { entries }
    }

    pub fn entries(&self) -> &[RouteEntry] {
        &self.entries
    }

    pub fn lookup(&self, addr: u64) -> Option<Port> {
        let i = self.entries.partition_point(|e| e.end() <= addr);
        self.entries
            .get(i)
            .filter(|e| addr >= e.base)
            .map(|e| e.port)
    }

    /// Merges abutting entries that share an egress port.
    pub fn coalesce(&mut self) {
        let mut out: Vec<RouteEntry> = Vec::with_capacity(self.entries.len());
        for e in self.entries.drain(..) {
            match out.last_mut() {
                Some(last) if last.port == e.port && last.end() == e.base => last.size += e.size,
                _ => out.push(e),
            }
        }
        self.entries = out;
    }
}

/// Routing tables of every crosspoint, indexed row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTables {
    pub rows: usize,
    pub cols: usize,
    tables: Vec<RoutingTable>,
}

impl RoutingTables {
    pub fn new(rows: usize, cols: usize, tables: Vec<RoutingTable>) -> Self {
        assert_eq!(tables.len(), rows * cols);
        RoutingTables { rows, cols, tables }
    }

    pub fn table(&self, c: Coord) -> &RoutingTable {
        &self.tables[c.row * self.cols + c.col]
    }

    pub fn table_mut(&mut self, c: Coord) -> &mut RoutingTable {
        &mut self.tables[c.row * self.cols + c.col]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Coord, &RoutingTable)> {
        let cols = self.cols;
        self.tables
            .iter()
            .enumerate()
            .map(move |(i, t)| (Coord::new(i / cols, i % cols), t))
    }

    pub fn coalesce(&mut self) {
        self.tables.iter_mut().for_each(RoutingTable::coalesce);
    }

    /// Follows table entries hop by hop from `from` for `addr`. Returns the
    /// crosspoint where the address is delivered locally together with the
    /// egress ports taken, or `None` if the walk hits a missing entry or
    /// exceeds `max_hops`.
    pub fn walk(&self, from: Coord, addr: u64, max_hops: usize) -> Option<(Coord, Vec<Port>)> {
        let mut at = from;
        let mut ports = Vec::new();
        loop {
            let port = self.table(at).lookup(addr)?;
            ports.push(port);
            if port == Port::Local {
                return Some((at, ports));
            }
            if ports.len() > max_hops {
                return None;
            }
            at = neighbor(self.rows, self.cols, at, port)?;
        }
    }
}

/// For every crosspoint and slave region, the egress port is the first hop
/// of the YX route from that crosspoint to the region's owner.
pub fn generate_routing_tables(mesh: &Mesh, map: &AddressMap) -> Result<RoutingTables, ConfigError> {
    let targets: Vec<&Region> = map.regions().iter().filter(|r| r.role.is_target()).collect();
    if let Some(r) = targets.iter().find(|r| !mesh.contains(r.coord)) {
        return Err(ConfigError::UnownedRegion {
            base: r.base,
            coord: r.coord,
        });
    }
    let tables = mesh
        .crosspoints
        .iter()
        .map(|xp| {
            RoutingTable::new(
                targets
                    .iter()
                    .map(|r| RouteEntry {
                        base: r.base,
                        size: r.size,
                        port: yx_next_hop(xp.coord, r.coord),
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(RoutingTables::new(mesh.rows, mesh.cols, tables))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    const MIB: u64 = 1 << 20;

    #[test]
    fn mesh_sizes() {
        let m = build_mesh(&NocConfig::mesh(2, 2)).unwrap();
        assert_eq!(m.crosspoints.len(), 4);
        assert_eq!(m.links().len(), 4);

        let m = build_mesh(&NocConfig::mesh(1, 1)).unwrap();
        assert_eq!(m.crosspoints.len(), 1);
        assert!(m.links().is_empty());
        assert_eq!(m.crosspoints[0].ports, vec![Port::Local]);

        let m = build_mesh(&NocConfig::mesh(4, 4)).unwrap();
        assert_eq!(m.crosspoints.len(), 16);
        // 3x4 horizontal + 4x3 vertical
        assert_eq!(m.links().len(), 24);
    }

    #[test]
    fn port_counts_by_position() {
        let m = build_mesh(&NocConfig::mesh(4, 4)).unwrap();
        let count = |r, c| m.crosspoint(Coord::new(r, c)).mesh_port_count();
        assert_eq!(count(0, 0), 2);
        assert_eq!(count(3, 3), 2);
        assert_eq!(count(0, 1), 3);
        assert_eq!(count(2, 0), 3);
        assert_eq!(count(1, 1), 4);
    }

    #[test]
    fn build_rejects_small_id_width() {
        let cfg = NocConfig {
            id_width: 3,
            ..NocConfig::mesh(4, 4)
        };
        assert!(build_mesh(&cfg).is_err());
    }

    #[test]
    fn row_major_address_map() {
        let cfg = NocConfig {
            endpoint_region_bytes: MIB,
            ..NocConfig::mesh(2, 2)
        };
        let map = allocate_address_map(&cfg).unwrap();
        let got: Vec<(u64, u64, Coord)> = map.regions().iter().map(|r| (r.base, r.end(), r.coord)).collect();
        assert_eq!(
            got,
            vec![
                (0, MIB, Coord::new(0, 0)),
                (MIB, 2 * MIB, Coord::new(0, 1)),
                (2 * MIB, 3 * MIB, Coord::new(1, 0)),
                (3 * MIB, 4 * MIB, Coord::new(1, 1)),
            ]
        );
        assert_eq!(map.lookup(MIB + 5).unwrap().coord, Coord::new(0, 1));
        assert!(map.lookup(4 * MIB).is_none());
    }

    #[test]
    fn address_map_overflow() {
        let cfg = NocConfig {
            endpoint_region_bytes: 16 * MIB,
            ..NocConfig::mesh(4, 4)
        };
        let map = allocate_address_map(&cfg).unwrap();
        assert_eq!(map.regions().last().unwrap().end(), 256 * MIB);

        let cfg = NocConfig {
            endpoint_region_bytes: 512 * MIB,
            ..NocConfig::mesh(4, 4)
        };
        assert!(matches!(
            allocate_address_map(&cfg),
            Err(ConfigError::AddressOverflow { .. })
        ));
    }

    #[test]
    fn yx_examples() {
        assert_eq!(yx_route(Coord::new(0, 0), Coord::new(0, 0)), vec![Port::Local]);
        assert_eq!(
            yx_route(Coord::new(0, 0), Coord::new(2, 1)),
            vec![Port::South, Port::South, Port::East, Port::Local]
        );
    }

    fn bfs_distance(rows: usize, cols: usize, src: Coord, dst: Coord) -> usize {
        let mut dist = vec![usize::MAX; rows * cols];
        let mut q = VecDeque::from([src]);
        dist[src.row * cols + src.col] = 0;
        while let Some(c) = q.pop_front() {
            for p in Port::MESH {
                if let Some(n) = neighbor(rows, cols, c, p) {
                    let i = n.row * cols + n.col;
                    if dist[i] == usize::MAX {
                        dist[i] = dist[c.row * cols + c.col] + 1;
                        q.push_back(n);
                    }
                }
            }
        }
        dist[dst.row * cols + dst.col]
    }

    #[test]
    fn yx_paths_are_shortest_and_legal() {
        for (rows, cols) in [(4, 4), (8, 8), (3, 5)] {
            for s in 0..rows * cols {
                for d in 0..rows * cols {
                    let src = Coord::new(s / cols, s % cols);
                    let dst = Coord::new(d / cols, d % cols);
                    let path = yx_route(src, dst);
                    assert_eq!(path.len(), bfs_distance(rows, cols, src, dst) + 1);
                    let first_h = path.iter().position(|p| p.is_horizontal()).unwrap_or(path.len());
                    assert!(path[first_h..].iter().all(|p| !p.is_vertical()));
                    // walking the ports lands on dst
                    let mut at = src;
                    for p in &path[..path.len() - 1] {
                        at = neighbor(rows, cols, at, *p).unwrap();
                    }
                    assert_eq!(at, dst);
                }
            }
        }
    }

    #[test]
    fn table_examples_and_exhaustive_walk() {
        let cfg = NocConfig::mesh(4, 4);
        let mesh = build_mesh(&cfg).unwrap();
        let map = allocate_address_map(&cfg).unwrap();
        let tables = generate_routing_tables(&mesh, &map).unwrap();
        let r21 = map.region_of(Coord::new(2, 1)).unwrap();
        assert_eq!(tables.table(Coord::new(0, 0)).lookup(r21.base), Some(Port::South));
        assert_eq!(tables.table(Coord::new(2, 1)).lookup(r21.base), Some(Port::Local));

        for xp in &mesh.crosspoints {
            for port in &tables.table(xp.coord).entries().iter().map(|e| e.port).collect::<Vec<_>>() {
                assert!(xp.ports.contains(port), "{} has no {port}", xp.coord);
            }
            for r in map.regions() {
                let (end, ports) = tables.walk(xp.coord, r.base + 4, 8).unwrap();
                assert_eq!(end, r.coord);
                assert!(ports.len() <= cfg.rows + cfg.cols);
                assert_eq!(ports, yx_route(xp.coord, r.coord));
            }
        }
    }

    #[test]
    fn coalescing_preserves_lookup() {
        let cfg = NocConfig::mesh(4, 4);
        let mesh = build_mesh(&cfg).unwrap();
        let map = allocate_address_map(&cfg).unwrap();
        let tables = generate_routing_tables(&mesh, &map).unwrap();
        let mut merged = tables.clone();
        merged.coalesce();
        assert!(merged.table(Coord::new(0, 0)).entries().len() < tables.table(Coord::new(0, 0)).entries().len());
        for (c, t) in tables.iter() {
            for r in map.regions() {
                for addr in [r.base, r.base + r.size / 2, r.end() - 1] {
                    assert_eq!(t.lookup(addr), merged.table(c).lookup(addr));
                }
            }
        }
    }

    #[test]
    fn unowned_region_is_rejected() {
        let cfg = NocConfig::mesh(2, 2);
        let mesh = build_mesh(&cfg).unwrap();
        let map = AddressMap::from_regions(
            vec![Region {
                base: 0,
                size: 4096,
                coord: Coord::new(5, 5),
                role: EndpointRole::Slave,
            }],
            32,
        )
        .unwrap();
        assert!(matches!(
            generate_routing_tables(&mesh, &map),
            Err(ConfigError::UnownedRegion { .. })
        ));
    }

    #[test]
    fn partial_connectivity_turns() {
        let c = Connectivity::Partial;
        // requests: vertical then horizontal
        assert!(c.allows(Port::North, Port::East, false));
        assert!(!c.allows(Port::East, Port::North, false));
        assert!(!c.allows(Port::South, Port::South, false));
        // responses retrace: horizontal then vertical
        assert!(c.allows(Port::East, Port::North, true));
        assert!(!c.allows(Port::North, Port::East, true));
        assert!(Connectivity::Full.allows(Port::East, Port::North, false));
    }
}
