//! DMA master and memory slave endpoints.

use std::collections::{HashMap, VecDeque};

use super::lane::{Lanes, ERR, LOCAL};
use super::slab::Slab;
use super::{BurstRecord, Counters, TrafficSource, TransferRecord};
use crate::axi::{split_transfer, Burst, Channel, ChannelMessage, Direction, RespStatus, TransferRequest};
use crate::error::EngineError;
use crate::topology::{Coord, MotMode};

/// Transfers staged per direction ahead of acceptance.
const STAGE_CAP: usize = 16;

const DIRS: [Direction; 2] = [Direction::Read, Direction::Write];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injection {
    Accepted,
    Deferred,
}

/// A DMA engine. Accepted transfers are split into bursts and issued on
/// AW/AR while fewer than MOT bursts are outstanding.
#[derive(Debug)]
pub struct Master {
    pub index: usize,
    pub coord: Coord,
    pub(crate) node: usize,
    mot: u32,
    mot_mode: MotMode,
    data_width: u32,
    max_beats: u32,
    lookahead: Option<TransferRequest>,
    exhausted: bool,
    staged: [VecDeque<TransferRequest>; 2],
    backlog: [VecDeque<Burst>; 2],
    outstanding: [u32; 2],
    /// Write bursts whose W beats are still to be sent: (burst, next beat).
    w_issue: VecDeque<(u32, u32)>,
    issue_seq: HashMap<(u32, Direction), u64>,
    complete_seq: HashMap<(u32, Direction), u64>,
}

impl Master {
    pub(crate) fn new(
        index: usize,
        coord: Coord,
        node: usize,
        mot: u32,
        mot_mode: MotMode,
        data_width: u32,
        max_beats: u32,
    ) -> Self {
        Master {
            index,
            coord,
            node,
            mot,
            mot_mode,
            data_width,
            max_beats,
            lookahead: None,
            exhausted: false,
            staged: Default::default(),
            backlog: Default::default(),
            outstanding: [0; 2],
            w_issue: VecDeque::new(),
            issue_seq: HashMap::new(),
            complete_seq: HashMap::new(),
        }
    }

    pub fn outstanding(&self, d: Direction) -> u32 {
        self.outstanding[d.index()]
    }

    fn has_mot_room(&self, d: Direction) -> bool {
        match self.mot_mode {
            MotMode::PerDirection => self.outstanding[d.index()] < self.mot,
            MotMode::Combined => self.outstanding[0] + self.outstanding[1] < self.mot,
        }
    }

    /// Accepts `req` iff MOT headroom exists for its direction and the
    /// bursts of the previously accepted transfer have all been issued.
    pub(crate) fn inject(
        &mut self,
        req: &TransferRequest,
        transfers: &mut Slab<TransferRecord>,
        counters: &mut Counters,
    ) -> Injection {
        let d = req.direction.index();
        if !self.backlog[d].is_empty() || !self.has_mot_room(req.direction) {
            return Injection::Deferred;
        }
        // Requests are validated before they reach the engine.
        let mut bursts = split_transfer(req, self.data_width, self.max_beats).expect("validated request");
        let handle = transfers.insert(TransferRecord {
            req: *req,
            bursts_left: bursts.len() as u32,
        });
        for b in &mut bursts {
            b.transfer = handle as u64;
        }
        counters.injected[d] += req.total_bytes;
        self.backlog[d].extend(bursts);
        Injection::Accepted
    }

    pub(crate) fn is_idle(&self) -> bool {
        self.exhausted
            && self.lookahead.is_none()
            && self.staged.iter().all(VecDeque::is_empty)
            && self.backlog.iter().all(VecDeque::is_empty)
            && self.outstanding == [0, 0]
            && self.w_issue.is_empty()
    }

    pub(crate) fn backlog_bytes(&self, d: Direction) -> u64 {
        self.backlog[d.index()].iter().map(|b| b.bytes).sum()
    }

    pub(crate) fn unsent_write_bytes(&self, bursts: &Slab<BurstRecord>) -> u64 {
        self.w_issue
            .iter()
            .map(|&(h, next)| {
                let b = &bursts.get(h).burst;
                (next..b.num_beats).map(|i| b.beat_payload(i) as u64).sum::<u64>()
            })
            .sum()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step(
        &mut self,
        now: u64,
        lanes: &mut Lanes,
        bursts: &mut Slab<BurstRecord>,
        transfers: &mut Slab<TransferRecord>,
        counters: &mut Counters,
        source: &mut dyn TrafficSource,
    ) -> Result<(), EngineError> {
        self.consume_responses(now, lanes, bursts, transfers, counters)?;
        self.pull(now, source);

        for d in DIRS {
            if let Some(req) = self.staged[d.index()].front().copied() {
                if self.inject(&req, transfers, counters) == Injection::Accepted {
                    self.staged[d.index()].pop_front();
                }
            }
        }

        for d in DIRS {
            let ch = if d == Direction::Write { Channel::Aw } else { Channel::Ar };
            let lane = lanes.inbound(self.node, ch, LOCAL);
            if self.backlog[d.index()].is_empty() || !self.has_mot_room(d) || !lanes.get(lane).can_push(now) {
                continue;
            }
            let burst = self.backlog[d.index()].pop_front().unwrap();
            let seq = self.issue_seq.entry((burst.id, d)).or_insert(0);
            let handle = bursts.insert(BurstRecord {
                burst,
                seq: *seq,
                master: self.index,
            });
            *seq += 1;
            lanes.get_mut(lane).push(
                now,
                ChannelMessage {
                    channel: ch,
                    burst: handle,
                    id: burst.id,
                    beat_index: 0,
                    last: true,
                    bytes: 0,
                    status: RespStatus::Okay,
                },
            );
            self.outstanding[d.index()] += 1;
            counters.progress = true;
            if d == Direction::Write {
                self.w_issue.push_back((handle, 0));
            }
        }

        let w_lane = lanes.inbound(self.node, Channel::W, LOCAL);
        if let Some(&(h, next)) = self.w_issue.front() {
            if lanes.get(w_lane).can_push(now) {
                let b = &bursts.get(h).burst;
                let last = next + 1 == b.num_beats;
                lanes.get_mut(w_lane).push(
                    now,
                    ChannelMessage {
                        channel: Channel::W,
                        burst: h,
                        id: b.id,
                        beat_index: next,
                        last,
                        bytes: b.beat_payload(next),
                        status: RespStatus::Okay,
                    },
                );
                counters.progress = true;
                if last {
                    self.w_issue.pop_front();
                } else {
                    self.w_issue.front_mut().unwrap().1 += 1;
                }
            }
        }

        let total = self.outstanding[0] + self.outstanding[1];
        let over = match self.mot_mode {
            MotMode::PerDirection => self.outstanding.iter().copied().find(|&o| o > self.mot),
            MotMode::Combined => (total > self.mot).then_some(total),
        };
        if let Some(outstanding) = over {
            return Err(EngineError::MotExceeded {
                cycle: now,
                master: self.coord,
                outstanding,
                limit: self.mot,
            });
        }
        Ok(())
    }

    fn pull(&mut self, now: u64, source: &mut dyn TrafficSource) {
        loop {
            if self.lookahead.is_none() && !self.exhausted {
                self.lookahead = source.next_request(self.index);
                self.exhausted = self.lookahead.is_none();
            }
            match self.lookahead {
                Some(req) if req.issue_cycle <= now && self.staged[req.direction.index()].len() < STAGE_CAP => {
                    self.staged[req.direction.index()].push_back(req);
                    self.lookahead = None;
                }
                _ => break,
            }
        }
    }

    fn consume_responses(
        &mut self,
        now: u64,
        lanes: &mut Lanes,
        bursts: &mut Slab<BurstRecord>,
        transfers: &mut Slab<TransferRecord>,
        counters: &mut Counters,
    ) -> Result<(), EngineError> {
        let b_lane = lanes.endpoint(self.node, Channel::B);
        if lanes.get(b_lane).head(now).is_some() {
            let m = lanes.get_mut(b_lane).pop(now);
            counters.progress = true;
            self.complete(now, m.burst, Direction::Write, bursts, transfers, counters)?;
        }
        let r_lane = lanes.endpoint(self.node, Channel::R);
        if lanes.get(r_lane).head(now).is_some() {
            let m = lanes.get_mut(r_lane).pop(now);
            counters.progress = true;
            if m.status == RespStatus::Okay {
                counters.deliver(now, Direction::Read, m.bytes as u64);
            } else {
                counters.discarded[Direction::Read.index()] += m.bytes as u64;
            }
            if m.last {
                self.complete(now, m.burst, Direction::Read, bursts, transfers, counters)?;
            }
        }
        Ok(())
    }

    fn complete(
        &mut self,
        now: u64,
        handle: u32,
        d: Direction,
        bursts: &mut Slab<BurstRecord>,
        transfers: &mut Slab<TransferRecord>,
        counters: &mut Counters,
    ) -> Result<(), EngineError> {
        let rec = bursts.remove(handle);
        let expected = self.complete_seq.entry((rec.burst.id, d)).or_insert(0);
        if rec.seq != *expected {
            return Err(EngineError::OrderViolation {
                cycle: now,
                master: self.coord,
                id: rec.burst.id,
            });
        }
        *expected += 1;
        self.outstanding[d.index()] -= 1;
        let t = rec.burst.transfer as u32;
        let tr = transfers.get_mut(t);
        tr.bursts_left -= 1;
        if tr.bursts_left == 0 {
            let tr = transfers.remove(t);
            counters.complete_transfer(now, &tr.req);
        }
        Ok(())
    }
}

/// Idealized memory: fixed service latency, then one beat per cycle on R,
/// and one W beat accepted per cycle. The same model answers decode errors
/// behind each crosspoint's error port, with payload discarded.
#[derive(Debug)]
pub(crate) struct Slave {
    pub coord: Coord,
    status: RespStatus,
    latency: u64,
    aw_in: usize,
    w_in: usize,
    ar_in: usize,
    b_out: usize,
    r_out: usize,
    w_expect: VecDeque<(u32, u32)>,
    b_pending: VecDeque<(u64, ChannelMessage)>,
    /// (ready cycle, burst, id, next beat)
    r_pending: VecDeque<(u64, u32, u32, u32)>,
}

impl Slave {
    pub fn memory(coord: Coord, node: usize, latency: u64, lanes: &Lanes) -> Self {
        Self::with_lanes(coord, RespStatus::Okay, latency, |c| lanes.endpoint(node, c), |c| lanes.inbound(node, c, LOCAL))
    }

    pub fn decode_error(coord: Coord, node: usize, latency: u64, lanes: &Lanes) -> Self {
        Self::with_lanes(coord, RespStatus::DecodeError, latency, |c| lanes.err(node, c), |c| lanes.inbound(node, c, ERR))
    }

    fn with_lanes(
        coord: Coord,
        status: RespStatus,
        latency: u64,
        input: impl Fn(Channel) -> usize,
        output: impl Fn(Channel) -> usize,
    ) -> Self {
        Slave {
            coord,
            status,
            latency,
            aw_in: input(Channel::Aw),
            w_in: input(Channel::W),
            ar_in: input(Channel::Ar),
            b_out: output(Channel::B),
            r_out: output(Channel::R),
            w_expect: VecDeque::new(),
            b_pending: VecDeque::new(),
            r_pending: VecDeque::new(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.w_expect.is_empty() && self.b_pending.is_empty() && self.r_pending.is_empty()
    }

    /// Read payload accepted but not yet returned.
    pub fn pending_read_bytes(&self, bursts: &Slab<BurstRecord>) -> u64 {
        self.r_pending
            .iter()
            .map(|&(_, h, _, next)| {
                let b = &bursts.get(h).burst;
                (next..b.num_beats).map(|i| b.beat_payload(i) as u64).sum::<u64>()
            })
            .sum()
    }

    pub fn step(
        &mut self,
        now: u64,
        lanes: &mut Lanes,
        bursts: &Slab<BurstRecord>,
        counters: &mut Counters,
    ) -> Result<(), EngineError> {
        if let Some(m) = lanes.get(self.aw_in).head(now).copied() {
            lanes.get_mut(self.aw_in).pop(now);
            self.w_expect.push_back((m.burst, m.id));
            counters.progress = true;
        }

        if let (Some(m), Some(&(burst, id))) = (lanes.get(self.w_in).head(now).copied(), self.w_expect.front()) {
            if m.burst != burst {
                return Err(EngineError::WriteDataOrder {
                    cycle: now,
                    slave: self.coord,
                });
            }
            lanes.get_mut(self.w_in).pop(now);
            counters.progress = true;
            if self.status == RespStatus::Okay {
                counters.deliver(now, Direction::Write, m.bytes as u64);
            } else {
                counters.discarded[Direction::Write.index()] += m.bytes as u64;
            }
            if m.last {
                self.w_expect.pop_front();
                self.b_pending.push_back((
                    now + self.latency,
                    ChannelMessage {
                        channel: Channel::B,
                        burst,
                        id,
                        beat_index: 0,
                        last: true,
                        bytes: 0,
                        status: self.status,
                    },
                ));
            }
        }

        if let Some(&(ready, m)) = self.b_pending.front() {
            if ready <= now && lanes.get(self.b_out).can_push(now) {
                lanes.get_mut(self.b_out).push(now, m);
                self.b_pending.pop_front();
                counters.progress = true;
            }
        }

        if let Some(m) = lanes.get(self.ar_in).head(now).copied() {
            lanes.get_mut(self.ar_in).pop(now);
            self.r_pending.push_back((now + self.latency, m.burst, m.id, 0));
            counters.progress = true;
        }

        if let Some(&(ready, h, id, next)) = self.r_pending.front() {
            if ready <= now && lanes.get(self.r_out).can_push(now) {
                let b = &bursts.get(h).burst;
                let last = next + 1 == b.num_beats;
                lanes.get_mut(self.r_out).push(
                    now,
                    ChannelMessage {
                        channel: Channel::R,
                        burst: h,
                        id,
                        beat_index: next,
                        last,
                        bytes: b.beat_payload(next),
                        status: self.status,
                    },
                );
                counters.progress = true;
                if last {
                    self.r_pending.pop_front();
                } else {
                    self.r_pending.front_mut().unwrap().3 += 1;
                }
            }
        }
        Ok(())
    }
}
