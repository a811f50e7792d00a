//! Channel dependency graph analysis of routing tables.

use std::collections::{BTreeMap, BTreeSet};

use super::{neighbor, Coord, Mesh, Port, RoutingTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedLink {
    pub from: Coord,
    pub to: Coord,
}

impl DirectedLink {
    fn reversed(self) -> Self {
        DirectedLink {
            from: self.to,
            to: self.from,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelNetwork {
    /// AW, W and AR: table-routed.
    Request,
    /// B and R: retrace the request path.
    Response,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeadlockVerdict {
    Acyclic,
    /// A dependency cycle, listed in dependency order.
    Cyclic(Vec<DirectedLink>),
}

impl DeadlockVerdict {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, DeadlockVerdict::Acyclic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdgReport {
    pub request: DeadlockVerdict,
    pub response: DeadlockVerdict,
    /// (crosspoint, address) pairs whose table walk never reached `Local`.
    pub unterminated: Vec<(Coord, u64)>,
}

impl CdgReport {
    pub fn is_acyclic(&self) -> bool {
        self.request.is_acyclic() && self.response.is_acyclic()
    }

    pub fn witness(&self) -> Option<(ChannelNetwork, &[DirectedLink])> {
        if let DeadlockVerdict::Cyclic(c) = &self.request {
            return Some((ChannelNetwork::Request, c));
        }
        if let DeadlockVerdict::Cyclic(c) = &self.response {
            return Some((ChannelNetwork::Response, c));
        }
        None
    }
}

type Graph = BTreeMap<DirectedLink, BTreeSet<DirectedLink>>;

/// Builds the request and response channel dependency graphs over every
/// routed (crosspoint, region) path and searches each for a cycle.
pub fn check_deadlock_freedom(mesh: &Mesh, tables: &RoutingTables) -> CdgReport {
    let mut request = Graph::new();
    let mut response = Graph::new();
    let mut unterminated = Vec::new();
    let max_hops = 4 * mesh.rows * mesh.cols;

    let mut addrs: BTreeSet<u64> = BTreeSet::new();
    for (_, t) in tables.iter() {
        addrs.extend(t.entries().iter().map(|e| e.base));
    }

    for xp in &mesh.crosspoints {
        for &addr in &addrs {
            let path = walk_links(tables, xp.coord, addr, max_hops);
            let (links, complete) = path;
            if !complete {
                unterminated.push((xp.coord, addr));
            }
            for w in links.windows(2) {
                request.entry(w[0]).or_default().insert(w[1]);
                response.entry(w[1].reversed()).or_default().insert(w[0].reversed());
            }
            for l in &links {
                request.entry(*l).or_default();
                response.entry(l.reversed()).or_default();
            }
        }
    }

    CdgReport {
        request: find_cycle(&request),
        response: find_cycle(&response),
        unterminated,
    }
}

/// Inter-crosspoint links along a table walk; `false` if the walk did not
/// end on a `Local` entry.
fn walk_links(tables: &RoutingTables, from: Coord, addr: u64, max_hops: usize) -> (Vec<DirectedLink>, bool) {
    let mut at = from;
    let mut links = Vec::new();
    while links.len() <= max_hops {
        let Some(port) = tables.table(at).lookup(addr) else {
            return (links, false);
        };
        if port == Port::Local {
            return (links, true);
        }
        let Some(next) = neighbor(tables.rows, tables.cols, at, port) else {
            return (links, false);
        };
        links.push(DirectedLink { from: at, to: next });
        at = next;
    }
    (links, false)
}

fn find_cycle(graph: &Graph) -> DeadlockVerdict {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let nodes: Vec<DirectedLink> = graph.keys().copied().collect();
    let index: BTreeMap<DirectedLink, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let succ: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| graph[n].iter().map(|m| index[m]).collect())
        .collect();
    let mut mark = vec![Mark::White; nodes.len()];

    for root in 0..nodes.len() {
        if mark[root] != Mark::White {
            continue;
        }
        // (node, next successor position)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Grey;
        while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
            if let Some(&next) = succ[node].get(*pos) {
                *pos += 1;
                match mark[next] {
                    Mark::White => {
                        mark[next] = Mark::Grey;
                        stack.push((next, 0));
                    }
                    Mark::Grey => {
                        let start = stack.iter().position(|&(n, _)| n == next).unwrap();
                        return DeadlockVerdict::Cyclic(stack[start..].iter().map(|&(n, _)| nodes[n]).collect());
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop();
            }
        }
    }
    DeadlockVerdict::Acyclic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{
        allocate_address_map, build_mesh, generate_routing_tables, NocConfig, RouteEntry, RoutingTable,
    };

    fn yx_report(rows: usize, cols: usize) -> CdgReport {
        let cfg = NocConfig {
            id_width: 8,
            ..NocConfig::mesh(rows, cols)
        };
        let mesh = build_mesh(&cfg).unwrap();
        let map = allocate_address_map(&cfg).unwrap();
        let tables = generate_routing_tables(&mesh, &map).unwrap();
        check_deadlock_freedom(&mesh, &tables)
    }

    #[test]
    fn yx_tables_are_acyclic() {
        for (r, c) in [(1, 1), (2, 2), (4, 4), (3, 6), (8, 8)] {
            let rep = yx_report(r, c);
            assert!(rep.is_acyclic(), "{r}x{c}: {:?}", rep.witness());
            assert!(rep.unterminated.is_empty());
        }
    }

    /// Clockwise ring (0,0) -> (0,1) -> (1,1) -> (1,0) -> (0,0) on a 2x2 mesh.
    pub(crate) fn ring_tables() -> (Mesh, RoutingTables) {
        let cfg = NocConfig::mesh(2, 2);
        let mesh = build_mesh(&cfg).unwrap();
        let map = allocate_address_map(&cfg).unwrap();
        let clockwise = |c: Coord| match (c.row, c.col) {
            (0, 0) => Port::East,
            (0, 1) => Port::South,
            (1, 1) => Port::West,
            _ => Port::North,
        };
        let tables = mesh
            .crosspoints
            .iter()
            .map(|xp| {
                RoutingTable::new(
                    map.regions()
                        .iter()
                        .map(|r| RouteEntry {
                            base: r.base,
                            size: r.size,
                            port: if r.coord == xp.coord { Port::Local } else { clockwise(xp.coord) },
                        })
                        .collect(),
                )
            })
            .collect();
        (mesh, RoutingTables::new(2, 2, tables))
    }

    #[test]
    fn ring_of_turns_is_cyclic() {
        let (mesh, tables) = ring_tables();
        let rep = check_deadlock_freedom(&mesh, &tables);
        let (net, cycle) = rep.witness().expect("cycle");
        assert_eq!(net, ChannelNetwork::Request);
        assert_eq!(cycle.len(), 4);
        for i in 0..4 {
            assert_eq!(cycle[i].to, cycle[(i + 1) % 4].from);
        }
        let mut froms: Vec<Coord> = cycle.iter().map(|l| l.from).collect();
        froms.sort();
        assert_eq!(
            froms,
            vec![Coord::new(0, 0), Coord::new(0, 1), Coord::new(1, 0), Coord::new(1, 1)]
        );
    }

    #[test]
    fn looping_table_is_reported_unterminated() {
        let cfg = NocConfig::mesh(1, 2);
        let mesh = build_mesh(&cfg).unwrap();
        let entry = |port| RoutingTable::new(vec![RouteEntry { base: 0, size: 64, port }]);
        let tables = RoutingTables::new(1, 2, vec![entry(Port::East), entry(Port::West)]);
        let rep = check_deadlock_freedom(&mesh, &tables);
        assert_eq!(rep.unterminated.len(), 2);
        assert!(!rep.is_acyclic());
    }
}
