//! Cycle-driven simulation engine.
//!
//! Every lane has one producer and one consumer, and a message pushed in
//! cycle `t` is visible no earlier than `t + 1`. Results therefore do not
//! depend on the order in which components are stepped within a cycle.

mod crosspoint;
mod endpoint;
mod lane;
mod slab;

use std::io::Write;

use crate::axi::{Burst, Channel, Direction, TransferRequest};
use crate::error::{EngineError, Error};
use crate::metrics::{LinkBusy, SimStats};
use crate::topology::{
    allocate_address_map, build_mesh, generate_routing_tables, AddressMap, NocConfig, Port, RoutingTables,
};

use crosspoint::Crosspoint;
pub use endpoint::Injection;
use endpoint::{Master, Slave};
use lane::{Lanes, PORTS};
use slab::Slab;

/// Cycles without any movement, while work is in flight, before the engine
/// reports a stall.
pub const STALL_LIMIT: u64 = 10_000;

/// Supplies transfer requests to masters. Requests for one master must come
/// in non-decreasing `issue_cycle` order; `None` ends that master's stream.
pub trait TrafficSource {
    fn next_request(&mut self, master: usize) -> Option<TransferRequest>;
}

/// A source that never issues anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTraffic;

impl TrafficSource for NoTraffic {
    fn next_request(&mut self, _: usize) -> Option<TransferRequest> {
        None
    }
}

impl<T: TrafficSource + ?Sized> TrafficSource for Box<T> {
    fn next_request(&mut self, master: usize) -> Option<TransferRequest> {
        (**self).next_request(master)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BurstRecord {
    pub burst: Burst,
    /// Position among the master's bursts with the same (id, direction).
    pub seq: u64,
    #[allow(dead_code)]
    pub master: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TransferRecord {
    pub req: TransferRequest,
    pub bursts_left: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Counters {
    pub measure_start: u64,
    pub injected: [u64; 2],
    pub delivered_total: [u64; 2],
    pub delivered_window: [u64; 2],
    pub discarded: [u64; 2],
    pub completed: u64,
    pub latencies: Vec<u64>,
    pub busy: Vec<u64>,
    pub progress: bool,
    /// Completed transfers in completion order, when recording.
    pub completions: Option<Vec<TransferRequest>>,
}

impl Counters {
    fn new(nodes: usize) -> Self {
        Counters {
            measure_start: 0,
            injected: [0; 2],
            delivered_total: [0; 2],
            delivered_window: [0; 2],
            discarded: [0; 2],
            completed: 0,
            latencies: Vec::new(),
            busy: vec![0; nodes * PORTS * 5],
            progress: false,
            completions: None,
        }
    }

    #[inline]
    pub fn deliver(&mut self, now: u64, d: Direction, bytes: u64) {
        self.delivered_total[d.index()] += bytes;
        if now >= self.measure_start {
            self.delivered_window[d.index()] += bytes;
        }
    }

    #[inline]
    pub fn link_busy(&mut self, now: u64, node: usize, egress: usize, c: Channel) {
        if now >= self.measure_start {
            self.busy[(node * PORTS + egress) * 5 + c.index()] += 1;
        }
    }

    pub fn complete_transfer(&mut self, now: u64, req: &TransferRequest) {
        if let Some(log) = &mut self.completions {
            log.push(*req);
        }
        if now >= self.measure_start {
            self.completed += 1;
            self.latencies.push(now - req.issue_cycle);
        }
    }
}

/// Byte balance of a run: `injected = delivered + discarded + resident`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conservation {
    pub injected: u64,
    pub delivered: u64,
    /// Payload answered by the decode-error slave.
    pub discarded: u64,
    /// Payload still held in backlogs, lanes and slaves.
    pub resident: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.injected == self.delivered + self.discarded + self.resident
    }
}

/// One NoC instance plus its traffic source.
pub struct Simulator {
    config: NocConfig,
    map: AddressMap,
    lanes: Lanes,
    xps: Vec<Crosspoint>,
    masters: Vec<Master>,
    slaves: Vec<Slave>,
    err_slaves: Vec<Slave>,
    bursts: Slab<BurstRecord>,
    transfers: Slab<TransferRecord>,
    counters: Counters,
    source: Box<dyn TrafficSource + Send>,
    log: Option<Box<dyn Write + Send>>,
    now: u64,
    idle: u64,
    peak_outstanding: u32,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("now", &self.now)
            .field("bursts_in_flight", &self.bursts.len())
            .finish_non_exhaustive()
    }
}

impl Simulator {
    /// Builds the mesh, address map and YX routing tables for `config`.
    pub fn new(config: &NocConfig, source: impl TrafficSource + Send + 'static) -> Result<Self, Error> {
        let mesh = build_mesh(config)?;
        let map = allocate_address_map(config)?;
        let tables = generate_routing_tables(&mesh, &map)?;
        Self::with_tables(config, map, &tables, source)
    }

    /// Uses caller-supplied address map and routing tables.
    pub fn with_tables(
        config: &NocConfig,
        map: AddressMap,
        tables: &RoutingTables,
        source: impl TrafficSource + Send + 'static,
    ) -> Result<Self, Error> {
        config.validate()?;
        let nodes = config.num_nodes();
        let lanes = Lanes::new(nodes, config.fifo_depth, |c| config.has_slice(c));
        let xps = (0..nodes)
            .map(|n| {
                let coord = config.coord_of(n);
                let mut neighbors = [None; 4];
                for p in Port::MESH {
                    neighbors[p.index()] =
                        crate::topology::neighbor(config.rows, config.cols, coord, p).map(|c| config.node_index(c));
                }
                Crosspoint::new(
                    coord,
                    n,
                    neighbors,
                    config.slaves.contains(&coord),
                    tables.table(coord).clone(),
                    config.connectivity,
                    config.id_width,
                )
            })
            .collect();
        let masters = config
            .masters
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                Master::new(
                    i,
                    c,
                    config.node_index(c),
                    config.max_outstanding,
                    config.mot_mode,
                    config.data_width,
                    config.max_burst_beats,
                )
            })
            .collect();
        let slaves = config
            .slaves
            .iter()
            .map(|&c| Slave::memory(c, config.node_index(c), config.slave_latency, &lanes))
            .collect();
        let err_slaves = (0..nodes)
            .map(|n| Slave::decode_error(config.coord_of(n), n, config.slave_latency, &lanes))
            .collect();
        Ok(Simulator {
            config: config.clone(),
            map,
            lanes,
            xps,
            masters,
            slaves,
            err_slaves,
            bursts: Slab::default(),
            transfers: Slab::default(),
            counters: Counters::new(nodes),
            source: Box::new(source),
            log: None,
            now: 0,
            idle: 0,
            peak_outstanding: 0,
        })
    }

    /// Counters only accumulate from cycle `warmup` on.
    pub fn set_warmup(&mut self, warmup: u64) {
        self.counters.measure_start = warmup;
    }

    /// Per-hop event log, one line per forwarded message:
    /// `cycle channel src dst id beat_index last`.
    /// Starts keeping every completed transfer, warmup included, in
    /// completion order. See [`Simulator::completions`].
    pub fn record_completions(&mut self) {
        self.counters.completions.get_or_insert_with(Vec::new);
    }

    pub fn completions(&self) -> &[TransferRequest] {
        self.counters.completions.as_deref().unwrap_or(&[])
    }

    pub fn set_event_log(&mut self, log: Box<dyn Write + Send>) {
        self.log = Some(log);
    }

    pub fn config(&self) -> &NocConfig {
        &self.config
    }

    pub fn address_map(&self) -> &AddressMap {
        &self.map
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Highest per-master outstanding count seen, per the MOT mode.
    pub fn peak_outstanding(&self) -> u32 {
        self.peak_outstanding
    }

    /// Offers a transfer directly to master `master`, bypassing the source.
    pub fn inject(&mut self, master: usize, req: &TransferRequest) -> Injection {
        self.masters[master].inject(req, &mut self.transfers, &mut self.counters)
    }

    pub fn step(&mut self) -> Result<(), EngineError> {
        let now = self.now;
        self.counters.progress = false;
        for m in &mut self.masters {
            m.step(
                now,
                &mut self.lanes,
                &mut self.bursts,
                &mut self.transfers,
                &mut self.counters,
                &mut self.source,
            )?;
            let o = match self.config.mot_mode {
                crate::topology::MotMode::PerDirection => {
                    m.outstanding(Direction::Read).max(m.outstanding(Direction::Write))
                }
                crate::topology::MotMode::Combined => m.outstanding(Direction::Read) + m.outstanding(Direction::Write),
            };
            self.peak_outstanding = self.peak_outstanding.max(o);
        }
        for xp in &mut self.xps {
            xp.step(now, &mut self.lanes, &self.bursts, &mut self.counters, &mut self.log)?;
        }
        for s in self.err_slaves.iter_mut().chain(self.slaves.iter_mut()) {
            s.step(now, &mut self.lanes, &self.bursts, &mut self.counters)?;
        }

        if self.counters.progress || self.bursts.len() == 0 {
            self.idle = 0;
        } else {
            self.idle += 1;
            if self.idle >= STALL_LIMIT {
                return Err(EngineError::Stalled {
                    cycle: now,
                    idle: self.idle,
                });
            }
        }
        self.now += 1;
        Ok(())
    }

    pub fn run(&mut self, cycles: u64) -> Result<(), EngineError> {
        for _ in 0..cycles {
            self.step()?;
        }
        Ok(())
    }

    /// Steps until every source is exhausted and every transfer completed.
    pub fn run_to_drain(&mut self, limit: u64) -> Result<(), EngineError> {
        let end = self.now.saturating_add(limit);
        while !self.is_drained() {
            if self.now >= end {
                return Err(EngineError::DrainTimeout { limit });
            }
            self.step()?;
        }
        Ok(())
    }

    pub fn is_drained(&self) -> bool {
        self.bursts.len() == 0
            && self.transfers.len() == 0
            && self.masters.iter().all(Master::is_idle)
            && self.slaves.iter().chain(&self.err_slaves).all(Slave::is_idle)
            && self.xps.iter().all(Crosspoint::is_idle)
            && self.lanes.iter().all(|l| l.is_empty())
    }

    /// Byte balance over the whole run, with the resident term obtained by
    /// scanning every queue rather than from the counters.
    pub fn conservation(&self) -> Conservation {
        let mut resident = 0;
        for m in &self.masters {
            resident += m.backlog_bytes(Direction::Read) + m.backlog_bytes(Direction::Write);
            resident += m.unsent_write_bytes(&self.bursts);
        }
        for l in self.lanes.iter() {
            for msg in l.messages() {
                resident += match msg.channel {
                    Channel::W | Channel::R => msg.bytes as u64,
                    Channel::Ar => self.bursts.get(msg.burst).burst.bytes,
                    Channel::Aw | Channel::B => 0,
                };
            }
        }
        for s in self.slaves.iter().chain(&self.err_slaves) {
            resident += s.pending_read_bytes(&self.bursts);
        }
        Conservation {
            injected: self.counters.injected.iter().sum(),
            delivered: self.counters.delivered_total.iter().sum(),
            discarded: self.counters.discarded.iter().sum(),
            resident,
        }
    }

    /// Statistics over the measurement window `[warmup, now)`.
    pub fn stats(&self) -> SimStats {
        let c = &self.counters;
        let mut link_busy = Vec::new();
        for (i, &cycles) in c.busy.iter().enumerate() {
            if cycles == 0 {
                continue;
            }
            let ch = Channel::ALL[i % 5];
            let egress = (i / 5) % PORTS;
            let node = i / (5 * PORTS);
            link_busy.push(LinkBusy {
                xp: self.config.coord_of(node),
                egress: Port::from_index(egress),
                channel: ch,
                busy_cycles: cycles,
            });
        }
        SimStats {
            warmup_cycles: c.measure_start.min(self.now),
            measured_cycles: self.now.saturating_sub(c.measure_start),
            read_bytes: c.delivered_window[Direction::Read.index()],
            write_bytes: c.delivered_window[Direction::Write.index()],
            completed_transfers: c.completed,
            link_busy,
            latencies: c.latencies.clone(),
            data_width: self.config.data_width,
            clock_hz: self.config.clock_hz,
        }
    }
}

#[cfg(test)]
mod tests;
