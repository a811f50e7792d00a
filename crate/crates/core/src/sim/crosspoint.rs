//! Crosspoint: five per-channel crossbars with address decode, ID remapping
//! and round-robin arbitration per egress.

use std::io::Write;

use super::lane::{Lanes, ERR, LOCAL, PORTS};
use super::slab::Slab;
use super::{BurstRecord, Counters};
use crate::axi::{Channel, ChannelMessage, Direction};
use crate::error::EngineError;
use crate::topology::{Connectivity, Coord, Port, RoutingTable};

#[derive(Debug, Clone, Copy)]
struct RemapEntry {
    out_id: u32,
    ingress: usize,
    orig_id: u32,
    inflight: u32,
}

#[derive(Debug)]
pub(crate) struct Crosspoint {
    pub coord: Coord,
    node: usize,
    neighbors: [Option<usize>; 4],
    has_slave: bool,
    table: RoutingTable,
    connectivity: Connectivity,
    id_limit: u32,
    rr: [[usize; PORTS]; 5],
    /// Egress R lane owned by an ingress until its burst's last beat.
    r_lock: [Option<usize>; PORTS],
    /// Per ingress: egress of the granted AW whose W beats are pending.
    w_route: [Option<usize>; PORTS],
    /// Per egress: ingress whose W beats it currently carries.
    w_owner: [Option<usize>; PORTS],
    /// Per direction and egress.
    remap: [[Vec<RemapEntry>; PORTS]; 2],
}

fn dir_of(c: Channel) -> Direction {
    match c {
        Channel::Aw | Channel::W | Channel::B => Direction::Write,
        Channel::Ar | Channel::R => Direction::Read,
    }
}

impl Crosspoint {
    pub fn new(
        coord: Coord,
        node: usize,
        neighbors: [Option<usize>; 4],
        has_slave: bool,
        table: RoutingTable,
        connectivity: Connectivity,
        id_width: u32,
    ) -> Self {
        Crosspoint {
            coord,
            node,
            neighbors,
            has_slave,
            table,
            connectivity,
            id_limit: 1 << id_width,
            rr: [[0; PORTS]; 5],
            r_lock: [None; PORTS],
            w_route: [None; PORTS],
            w_owner: [None; PORTS],
            remap: Default::default(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.remap.iter().flatten().all(Vec::is_empty)
            && self.w_route.iter().all(Option::is_none)
            && self.r_lock.iter().all(Option::is_none)
    }

    fn out_lane(&self, lanes: &Lanes, c: Channel, egress: usize) -> usize {
        match egress {
            LOCAL => lanes.endpoint(self.node, c),
            ERR => lanes.err(self.node, c),
            p => {
                let nb = self.neighbors[p].expect("egress toward a missing neighbor");
                lanes.inbound(nb, c, Port::from_index(p).unwrap().opposite().index())
            }
        }
    }

    /// Egress slot for a request entering through `ingress`. Unmapped
    /// addresses and connections the crossbar lacks go to the error slave.
    fn decode(&self, ingress: usize, addr: u64) -> usize {
        let Some(port) = self.table.lookup(addr) else {
            return ERR;
        };
        let e = port.index();
        let present = if e == LOCAL { self.has_slave } else { self.neighbors[e].is_some() };
        let allowed = self
            .connectivity
            .allows(Port::from_index(ingress).unwrap(), port, false);
        if present && allowed {
            e
        } else {
            ERR
        }
    }

    /// Outbound ID for (ingress, id) at `egress`, or `None` if the request
    /// must stall: the pair is in flight toward another egress, or all IDs
    /// at this egress are taken.
    fn remap_for(&self, d: Direction, ingress: usize, id: u32, egress: usize) -> Option<u32> {
        for (e, table) in self.remap[d.index()].iter().enumerate() {
            if let Some(entry) = table.iter().find(|x| x.ingress == ingress && x.orig_id == id) {
                return (e == egress).then_some(entry.out_id);
            }
        }
        let used = &self.remap[d.index()][egress];
        (0..self.id_limit).find(|o| used.iter().all(|x| x.out_id != *o))
    }

    fn bind(&mut self, d: Direction, ingress: usize, id: u32, egress: usize, out_id: u32) {
        let table = &mut self.remap[d.index()][egress];
        match table.iter_mut().find(|x| x.out_id == out_id) {
            Some(entry) => entry.inflight += 1,
            None => table.push(RemapEntry {
                out_id,
                ingress,
                orig_id: id,
                inflight: 1,
            }),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn forward(
        &mut self,
        now: u64,
        lanes: &mut Lanes,
        counters: &mut Counters,
        log: &mut Option<Box<dyn Write + Send>>,
        c: Channel,
        ingress: usize,
        egress: usize,
        new_id: u32,
    ) -> ChannelMessage {
        let from = lanes.inbound(self.node, c, ingress);
        let to = self.out_lane(lanes, c, egress);
        let m = lanes.transfer(from, to, now, |m| m.id = new_id);
        counters.progress = true;
        counters.link_busy(now, self.node, egress, c);
        if let Some(w) = log {
            let dst = match egress {
                LOCAL => "local".to_string(),
                ERR => "err".to_string(),
                p => {
                    let p = Port::from_index(p).unwrap();
                    p.name().to_string()
                }
            };
            let _ = writeln!(w, "{now} {} {} {dst} {} {} {}", c.name(), self.coord, m.id, m.beat_index, u8::from(m.last));
        }
        self.rr[c.index()][egress] = (ingress + 1) % PORTS;
        m
    }

    pub fn step(
        &mut self,
        now: u64,
        lanes: &mut Lanes,
        bursts: &Slab<BurstRecord>,
        counters: &mut Counters,
        log: &mut Option<Box<dyn Write + Send>>,
    ) -> Result<(), EngineError> {
        for c in [Channel::B, Channel::R] {
            self.step_response(now, c, lanes, counters, log)?;
        }
        for c in [Channel::Aw, Channel::Ar] {
            self.step_request(now, c, lanes, bursts, counters, log);
        }
        self.step_write_data(now, lanes, counters, log);
        Ok(())
    }

    fn step_request(
        &mut self,
        now: u64,
        c: Channel,
        lanes: &mut Lanes,
        bursts: &Slab<BurstRecord>,
        counters: &mut Counters,
        log: &mut Option<Box<dyn Write + Send>>,
    ) {
        let d = dir_of(c);
        // (egress, outbound id, original id) per ingress with a grantable head
        let mut want: [Option<(usize, u32, u32)>; PORTS] = [None; PORTS];
        for (p, slot) in want.iter_mut().enumerate().take(LOCAL + 1) {
            // Likewise an ingress holds at most one burst awaiting its W beats.
            if c == Channel::Aw && self.w_route[p].is_some() {
                continue;
            }
            if let Some(m) = lanes.get(lanes.inbound(self.node, c, p)).head(now) {
                let e = self.decode(p, bursts.get(m.burst).burst.start_address);
                *slot = self.remap_for(d, p, m.id, e).map(|o| (e, o, m.id));
            }
        }
        for e in 0..PORTS {
            // Write bursts pass like wormhole packets: an egress carries one
            // burst's W beats at a time. Interleaved W orders across hops can
            // otherwise wait on each other in a cycle.
            if c == Channel::Aw && self.w_owner[e].is_some() {
                continue;
            }
            let start = self.rr[c.index()][e];
            let Some(p) = (0..PORTS)
                .map(|k| (start + k) % PORTS)
                .find(|&p| matches!(want[p], Some((x, _, _)) if x == e))
            else {
                continue;
            };
            if !lanes.get(self.out_lane(lanes, c, e)).can_push(now) {
                continue;
            }
            let (_, out_id, orig_id) = want[p].unwrap();
            self.forward(now, lanes, counters, log, c, p, e, out_id);
            self.bind(d, p, orig_id, e, out_id);
            if c == Channel::Aw {
                self.w_route[p] = Some(e);
                self.w_owner[e] = Some(p);
            }
        }
    }

    fn step_write_data(
        &mut self,
        now: u64,
        lanes: &mut Lanes,
        counters: &mut Counters,
        log: &mut Option<Box<dyn Write + Send>>,
    ) {
        for e in 0..PORTS {
            let Some(p) = self.w_owner[e] else {
                continue;
            };
            let Some(id) = lanes.get(lanes.inbound(self.node, Channel::W, p)).head(now).map(|m| m.id) else {
                continue;
            };
            if !lanes.get(self.out_lane(lanes, Channel::W, e)).can_push(now) {
                continue;
            }
            let m = self.forward(now, lanes, counters, log, Channel::W, p, e, id);
            if m.last {
                self.w_owner[e] = None;
                self.w_route[p] = None;
            }
        }
    }

    fn step_response(
        &mut self,
        now: u64,
        c: Channel,
        lanes: &mut Lanes,
        counters: &mut Counters,
        log: &mut Option<Box<dyn Write + Send>>,
    ) -> Result<(), EngineError> {
        let d = dir_of(c);
        // (egress, restored id) per ingress
        let mut want: [Option<(usize, u32)>; PORTS] = [None; PORTS];
        for (p, slot) in want.iter_mut().enumerate() {
            let Some(m) = lanes.get(lanes.inbound(self.node, c, p)).head(now) else {
                continue;
            };
            let entry = self.remap[d.index()][p]
                .iter()
                .find(|x| x.out_id == m.id)
                .ok_or(EngineError::MissingRemap {
                    cycle: now,
                    xp: self.coord,
                    id: m.id,
                })?;
            *slot = Some((entry.ingress, entry.orig_id));
        }
        for e in 0..=LOCAL {
            let locked = if c == Channel::R { self.r_lock[e] } else { None };
            let start = self.rr[c.index()][e];
            let Some(p) = (0..PORTS)
                .map(|k| (start + k) % PORTS)
                .find(|&p| matches!(want[p], Some((x, _)) if x == e) && locked.is_none_or(|l| l == p))
            else {
                continue;
            };
            if !lanes.get(self.out_lane(lanes, c, e)).can_push(now) {
                continue;
            }
            let orig_id = want[p].unwrap().1;
            let upstream_id = lanes.get(lanes.inbound(self.node, c, p)).head(now).unwrap().id;
            let m = self.forward(now, lanes, counters, log, c, p, e, orig_id);
            if c == Channel::R {
                self.r_lock[e] = if m.last { None } else { Some(p) };
            }
            if m.last {
                let table = &mut self.remap[d.index()][p];
                let i = table.iter().position(|x| x.out_id == upstream_id).unwrap();
                table[i].inflight -= 1;
                if table[i].inflight == 0 {
                    table.swap_remove(i);
                }
            }
        }
        Ok(())
    }
}
