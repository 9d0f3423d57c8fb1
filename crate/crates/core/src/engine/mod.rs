//! Cycle-driven wormhole simulation of the lane-buffered Delta network.
//!
//! Each cycle has two halves. The flow-control half walks the fabric from the
//! last stage back to the sources and decides which head flits may move: a
//! flit moves only if its downstream slot will be free once this cycle's
//! downstream departures are taken into account, and it wins its physical
//! output channel. The data half then moves every granted flit one hop.

mod lane;

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{LaneSelection, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, RunCollector};
use crate::topology::{Hop, NetworkShape};
use crate::traffic::{BernoulliTraffic, Packet, PacketId, TrafficSource};

pub use lane::{allocate_lane, Lane};
use lane::NONE;

const SOURCE_BIT: u32 = 1 << 31;

/// Lanes per buffer are tracked in a 64-bit occupancy mask.
pub const MAX_LANES: u32 = 64;

/// Fabric parameters independent of the traffic pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FabricParams {
    pub radix: u32,
    pub n_lanes: u32,
    pub lane_capacity: u32,
    pub n_flits: u32,
    pub lane_selection: LaneSelection,
    /// Flits one input buffer may send per cycle (1 or 2).
    pub crossbar_speedup: u32,
}

impl FabricParams {
    pub fn from_config(config: &SimConfig) -> Self {
        FabricParams {
            radix: config.radix,
            n_lanes: config.n_lanes,
            lane_capacity: config.effective_lane_capacity(),
            n_flits: config.n_flits,
            lane_selection: config.lane_selection,
            crossbar_speedup: config.crossbar_speedup,
        }
    }
}

/// Position of one lane in the fabric. `buffer` is `2·se + input port`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneRef {
    pub stage: usize,
    pub buffer: usize,
    pub lane: usize,
}

impl LaneRef {
    pub fn se(&self) -> usize {
        self.buffer / 2
    }

    pub fn input_port(&self) -> u8 {
        (self.buffer % 2) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Source(usize),
    Lane(LaneRef),
    Sink(usize),
}

/// A physical channel; at most one flit crosses it per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Injection(usize),
    Output { stage: usize, se: usize, port: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdvanceGrant {
    pub from: Endpoint,
    pub to: Endpoint,
    pub channel: Channel,
    pub packet: PacketId,
    pub seq: u32,
}

/// An output channel contested by more than one eligible head flit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arbitration {
    pub stage: usize,
    pub se: usize,
    pub port: u8,
    pub candidates: u32,
    pub winner: LaneRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub sink: usize,
    pub packet: PacketId,
    pub seq: u32,
}

/// What happened in one cycle.
#[derive(Debug)]
pub struct CycleReport<'a> {
    pub cycle: u64,
    pub flits_delivered: u32,
    pub deliveries: &'a [Delivery],
    pub completed: &'a [Packet],
    pub arbitrations: &'a [Arbitration],
    pub busy_lanes: usize,
    pub total_lanes: usize,
}

#[derive(Debug, Clone, Copy)]
struct RawGrant {
    /// Lane index, or `SOURCE_BIT | source`.
    from: u32,
    /// Lane index, or `SOURCE_BIT | sink`.
    to: u32,
    seq: u32,
    slot: u32,
    port: u8,
}

#[derive(Debug, Clone)]
struct Slot {
    id: PacketId,
    source: usize,
    destination: usize,
    generated: u64,
    injected: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Injection {
    slot: u32,
    lane: u32,
    next_seq: u32,
}

/// Packets not yet started wait in FIFO order; started packets keep their
/// stage-0 lane and share the injection channel with each other.
#[derive(Debug, Default, Clone)]
struct SourceQueue {
    waiting: VecDeque<u32>,
    injecting: Vec<Injection>,
}

/// Live network state: buffers, source queues and counters.
pub struct Simulation<T> {
    shape: NetworkShape,
    params: FabricParams,
    lanes: Vec<Lane>,
    /// Per buffer, bit `l` set while lane `l` holds at least one flit.
    occupied: Vec<u64>,
    cursors: Vec<u32>,
    sources: Vec<SourceQueue>,
    slots: Vec<Slot>,
    free_slots: Vec<u32>,
    traffic: T,
    arb_rng: ChaCha8Rng,
    cycle: u64,
    next_id: PacketId,

    grants: Vec<RawGrant>,
    candidates: [Vec<u32>; 2],
    arbitrations: Vec<Arbitration>,
    deliveries: Vec<Delivery>,
    completed: Vec<Packet>,

    packets_generated: u64,
    packets_delivered: u64,
    flits_delivered: u64,
    busy_lanes: usize,

    trace: Option<Box<dyn Write + Send>>,
}

/// Arbitration stream of a run: independent of the arrival stream so that
/// runs differing only in fabric parameters see identical traffic.
pub fn arbitration_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn traffic_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

impl Simulation<BernoulliTraffic<ChaCha8Rng>> {
    /// Uniform Bernoulli traffic as described by `config`, seeded with `seed`.
    pub fn from_config(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let traffic = BernoulliTraffic::new(config.arrival_model()?, traffic_rng(seed));
        Simulation::new(FabricParams::from_config(config), traffic, seed)
    }
}

impl<T: TrafficSource> Simulation<T> {
    pub fn new(params: FabricParams, traffic: T, seed: u64) -> Result<Self> {
        let shape = NetworkShape::new(params.radix)?;
        if params.n_lanes == 0 || params.n_lanes > MAX_LANES {
            return Err(Error::config("n_lanes", format!("{} is outside 1..={MAX_LANES}", params.n_lanes)));
        }
        if params.lane_capacity == 0 {
            return Err(Error::config("lane_capacity", "must be at least 1"));
        }
        if params.n_flits == 0 {
            return Err(Error::config("n_flits", "must be at least 1"));
        }
        if !(1..=2).contains(&params.crossbar_speedup) {
            return Err(Error::config("crossbar_speedup", "must be 1 or 2"));
        }
        let buffers = shape.stages() * shape.ports();
        Ok(Simulation {
            shape,
            params,
            lanes: vec![Lane::default(); buffers * params.n_lanes as usize],
            occupied: vec![0; buffers],
            cursors: vec![0; buffers],
            sources: vec![SourceQueue::default(); shape.ports()],
            slots: Vec::new(),
            free_slots: Vec::new(),
            traffic,
            arb_rng: arbitration_rng(seed),
            cycle: 0,
            next_id: 0,
            grants: Vec::new(),
            candidates: [Vec::new(), Vec::new()],
            arbitrations: Vec::new(),
            deliveries: Vec::new(),
            completed: Vec::new(),
            packets_generated: 0,
            packets_delivered: 0,
            flits_delivered: 0,
            busy_lanes: 0,
            trace: None,
        })
    }

    /// Emits one text line per flit event: `cycle event packet stage se lane`.
    pub fn set_trace(&mut self, sink: Box<dyn Write + Send>) {
        self.trace = Some(sink);
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    /// Index of the next cycle to execute.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn total_lanes(&self) -> usize {
        self.lanes.len()
    }

    pub fn busy_lanes(&self) -> usize {
        self.busy_lanes
    }

    pub fn packets_generated(&self) -> u64 {
        self.packets_generated
    }

    pub fn packets_delivered(&self) -> u64 {
        self.packets_delivered
    }

    pub fn flits_delivered(&self) -> u64 {
        self.flits_delivered
    }

    /// Packets generated but not yet fully delivered.
    pub fn packets_in_flight(&self) -> u64 {
        self.packets_generated - self.packets_delivered
    }

    pub fn traffic_exhausted(&self) -> bool {
        self.traffic.exhausted(self.cycle) && self.packets_in_flight() == 0
    }

    pub fn lane(&self, at: LaneRef) -> &Lane {
        &self.lanes[self.lane_index(at.stage, at.buffer, at.lane)]
    }

    /// Packet owning the lane at `at`, if any.
    pub fn lane_owner(&self, at: LaneRef) -> Option<PacketId> {
        let lane = self.lane(at);
        (!lane.is_free()).then(|| self.slots[lane.owner as usize].id)
    }

    /// Packets at `source` whose header has not entered the fabric yet.
    pub fn source_backlog(&self, source: usize) -> usize {
        self.sources[source].waiting.len()
    }

    #[inline]
    fn lane_index(&self, stage: usize, buffer: usize, lane: usize) -> usize {
        (stage * self.shape.ports() + buffer) * self.params.n_lanes as usize + lane
    }

    fn lane_ref(&self, index: usize) -> LaneRef {
        let n_lanes = self.params.n_lanes as usize;
        let ports = self.shape.ports();
        let lane = index % n_lanes;
        let buf = index / n_lanes;
        LaneRef {
            stage: buf / ports,
            buffer: buf % ports,
            lane,
        }
    }

    /// Executes one cycle: arrivals, flow control, data movement.
    pub fn step(&mut self) -> Result<CycleReport<'_>> {
        self.arbitrations.clear();
        self.deliveries.clear();
        self.completed.clear();

        self.generate();
        self.flow_control_pass();
        let delivered = self.data_pass()?;

        let report = CycleReport {
            cycle: self.cycle,
            flits_delivered: delivered,
            deliveries: &self.deliveries,
            completed: &self.completed,
            arbitrations: &self.arbitrations,
            busy_lanes: self.busy_lanes,
            total_lanes: self.lanes.len(),
        };
        self.cycle += 1;
        Ok(report)
    }

    /// Grants decided in the most recent cycle.
    pub fn last_grants(&self) -> Vec<AdvanceGrant> {
        self.grants.iter().map(|g| self.describe(g)).collect()
    }

    fn describe(&self, g: &RawGrant) -> AdvanceGrant {
        let (from, channel) = if g.from & SOURCE_BIT != 0 {
            let src = (g.from & !SOURCE_BIT) as usize;
            (Endpoint::Source(src), Channel::Injection(src))
        } else {
            let at = self.lane_ref(g.from as usize);
            let ch = Channel::Output {
                stage: at.stage,
                se: at.se(),
                port: g.port,
            };
            (Endpoint::Lane(at), ch)
        };
        let to = if g.to & SOURCE_BIT != 0 {
            Endpoint::Sink((g.to & !SOURCE_BIT) as usize)
        } else {
            Endpoint::Lane(self.lane_ref(g.to as usize))
        };
        AdvanceGrant {
            from,
            to,
            channel,
            packet: self.slots[g.slot as usize].id,
            seq: g.seq,
        }
    }

    fn emit_trace(&mut self, event: &str, slot: u32, lane: Option<usize>, sink: Option<usize>) {
        let Some(t) = self.trace.as_mut() else {
            return;
        };
        let id = self.slots[slot as usize].id;
        let line = match (lane, sink) {
            (Some(index), _) => {
                let n_lanes = self.params.n_lanes as usize;
                let ports = self.shape.ports();
                let buf = index / n_lanes;
                format!("{} {event} {id} {} {} {}", self.cycle, buf / ports, (buf % ports) / 2, index % n_lanes)
            }
            (None, Some(out)) => format!("{} {event} {id} {} {} -", self.cycle, self.shape.stages(), out),
            (None, None) => format!("{} {event} {id} - - -", self.cycle),
        };
        let _ = writeln!(t, "{line}");
    }

    fn generate(&mut self) {
        let cycle = self.cycle;
        let ports = self.shape.ports();
        let mut fresh: Vec<(usize, usize)> = Vec::new();
        self.traffic.generate(cycle, ports, &mut |s, d| fresh.push((s, d)));
        for (source, destination) in fresh {
            assert!(source < ports && destination < ports, "traffic outside the fabric");
            let slot = Slot {
                id: self.next_id,
                source,
                destination,
                generated: cycle,
                injected: None,
            };
            self.next_id += 1;
            let index = match self.free_slots.pop() {
                Some(i) => {
                    self.slots[i as usize] = slot;
                    i
                }
                None => {
                    self.slots.push(slot);
                    (self.slots.len() - 1) as u32
                }
            };
            self.sources[source].waiting.push_back(index);
            self.packets_generated += 1;
            self.emit_trace("generate", index, None, None);
        }
    }

    fn flow_control_pass(&mut self) {
        self.grants.clear();
        let cycle = self.cycle;
        let stages = self.shape.stages();
        let ses = self.shape.ses_per_stage();
        let n_lanes = self.params.n_lanes as usize;
        let cap = self.params.lane_capacity;
        let n_flits = self.params.n_flits;
        let single_read = self.params.crossbar_speedup == 1;

        for stage in (0..stages).rev() {
            let last = stage + 1 == stages;
            for se in 0..ses {
                let first_buf = stage * self.shape.ports() + 2 * se;
                let masks = [self.occupied[first_buf], self.occupied[first_buf + 1]];
                if masks == [0, 0] {
                    continue;
                }
                self.candidates[0].clear();
                self.candidates[1].clear();
                for (b, mut mask) in masks.into_iter().enumerate() {
                    let base = (first_buf + b) * n_lanes;
                    while mask != 0 {
                        let idx = base + mask.trailing_zeros() as usize;
                        mask &= mask - 1;
                        let lane = &self.lanes[idx];
                        let eligible = last
                            // a header without a downstream lane is checked per channel below
                            || lane.next == NONE
                            || self.lanes[lane.next as usize].occupancy_after_departure(cycle) < cap;
                        if eligible {
                            self.candidates[lane.out_port as usize].push(idx as u32);
                        }
                    }
                }

                // With one crossbar input per buffer, a buffer holding candidates for
                // both outputs can feed only one of them; the port served first is drawn.
                let mut order = [0u8, 1];
                if single_read {
                    let bufs = |c: &[u32]| c.iter().fold(0u8, |m, &i| m | 1 << (i as usize / n_lanes - first_buf));
                    let shared = bufs(&self.candidates[0]) & bufs(&self.candidates[1]);
                    if shared != 0 && self.arb_rng.gen_bool(0.5) {
                        order = [1, 0];
                    }
                }
                let mut used_buf = usize::MAX;
                for port in order {
                    if used_buf != usize::MAX {
                        self.candidates[port as usize].retain(|&c| c as usize / n_lanes != used_buf);
                    }
                    if self.candidates[port as usize].is_empty() {
                        continue;
                    }
                    let hop = self.shape.hop(stage, se, port);
                    // Downstream free lane, if any header needs one.
                    let mut target_buffer = None;
                    if let Hop::Switch { se: dse, port: dport } = hop {
                        let dbuf = 2 * dse + dport as usize;
                        let dbase = self.lane_index(stage + 1, dbuf, 0);
                        let lanes = &self.lanes;
                        let needs_alloc = self.candidates[port as usize]
                            .iter()
                            .any(|&c| lanes[c as usize].next == NONE);
                        if needs_alloc {
                            let has_free = lanes[dbase..dbase + n_lanes].iter().any(Lane::is_free);
                            if !has_free {
                                self.candidates[port as usize].retain(|&c| lanes[c as usize].next != NONE);
                            }
                        }
                        target_buffer = Some((dbuf, dbase));
                    }
                    let cands = &self.candidates[port as usize];
                    let winner = match cands.len() {
                        0 => continue,
                        1 => cands[0],
                        n => {
                            let w = cands[self.arb_rng.gen_range(0..n)];
                            self.arbitrations.push(Arbitration {
                                stage,
                                se,
                                port,
                                candidates: n as u32,
                                winner: self.lane_ref(w as usize),
                            });
                            w
                        }
                    };
                    let w = winner as usize;
                    if single_read {
                        used_buf = w / n_lanes;
                    }
                    self.lanes[w].departed_at = cycle + 1;
                    let seq = self.lanes[w].head_seq;
                    let to = match (hop, target_buffer) {
                        (Hop::Sink(out), _) => SOURCE_BIT | out as u32,
                        (Hop::Switch { .. }, Some((dbuf, dbase))) => {
                            if self.lanes[w].next == NONE {
                                let owner = self.lanes[w].owner;
                                let dest = self.slots[owner as usize].destination;
                                let pick = allocate_lane(
                                    &self.lanes[dbase..dbase + n_lanes],
                                    self.params.lane_selection,
                                    &mut self.cursors[(stage + 1) * self.shape.ports() + dbuf],
                                    &mut self.arb_rng,
                                )
                                .expect("free lane checked above");
                                let out_port = self.shape.route_bit(dest, stage + 1);
                                self.lanes[dbase + pick].claim(owner, out_port);
                                self.busy_lanes += 1;
                                self.lanes[w].next = (dbase + pick) as u32;
                            }
                            self.lanes[w].next
                        }
                        _ => unreachable!(),
                    };
                    debug_assert!(seq < n_flits);
                    self.grants.push(RawGrant {
                        from: winner,
                        to,
                        seq,
                        slot: self.lanes[w].owner,
                        port,
                    });
                }
            }
        }

        self.injection_pass();
    }

    /// One flit per source per cycle enters stage 0: either the next flit of
    /// a worm already injecting, or the header of the oldest waiting packet
    /// if a stage-0 lane is free. Eligible contenders are drawn uniformly.
    fn injection_pass(&mut self) {
        let cycle = self.cycle;
        let n_lanes = self.params.n_lanes as usize;
        let cap = self.params.lane_capacity;
        let mut ready: Vec<usize> = Vec::new();
        for src in 0..self.sources.len() {
            ready.clear();
            let q = &self.sources[src];
            for (i, inj) in q.injecting.iter().enumerate() {
                if self.lanes[inj.lane as usize].occupancy_after_departure(cycle) < cap {
                    ready.push(i);
                }
            }
            let (se, port) = self.shape.entry(src);
            let buf = 2 * se + port as usize;
            let base = self.lane_index(0, buf, 0);
            let header_ready = !q.waiting.is_empty() && self.lanes[base..base + n_lanes].iter().any(Lane::is_free);
            let contenders = ready.len() + header_ready as usize;
            let pick = match contenders {
                0 => continue,
                1 => 0,
                n => self.arb_rng.gen_range(0..n),
            };
            if pick < ready.len() {
                let inj = self.sources[src].injecting[ready[pick]];
                self.grants.push(RawGrant {
                    from: SOURCE_BIT | src as u32,
                    to: inj.lane,
                    seq: inj.next_seq,
                    slot: inj.slot,
                    port: 0,
                });
                continue;
            }
            let q = &mut self.sources[src];
            let slot = q.waiting.pop_front().expect("header contender implies a waiting packet");
            let lane = allocate_lane(
                &self.lanes[base..base + n_lanes],
                self.params.lane_selection,
                &mut self.cursors[buf],
                &mut self.arb_rng,
            )
            .expect("free lane checked above");
            let dest = self.slots[slot as usize].destination;
            let out_port = self.shape.route_bit(dest, 0);
            self.lanes[base + lane].claim(slot, out_port);
            self.busy_lanes += 1;
            self.slots[slot as usize].injected = Some(cycle);
            self.sources[src].injecting.push(Injection {
                slot,
                lane: (base + lane) as u32,
                next_seq: 0,
            });
            self.grants.push(RawGrant {
                from: SOURCE_BIT | src as u32,
                to: (base + lane) as u32,
                seq: 0,
                slot,
                port: 0,
            });
        }
    }

    fn data_pass(&mut self) -> Result<u32> {
        let cycle = self.cycle;
        let n_flits = self.params.n_flits;
        let mut delivered = 0;
        for gi in 0..self.grants.len() {
            let g = self.grants[gi];
            let is_tail = g.seq + 1 == n_flits;

            let slot = if g.from & SOURCE_BIT != 0 {
                let src = (g.from & !SOURCE_BIT) as usize;
                let q = &mut self.sources[src];
                let Some(pos) = q.injecting.iter().position(|i| i.slot == g.slot) else {
                    return Err(self.violation(format!("source {src} has no worm for packet slot {}", g.slot)));
                };
                let inj = &mut q.injecting[pos];
                if inj.next_seq != g.seq {
                    return Err(self.violation(format!("source {src} injected seq {} out of order", g.seq)));
                }
                inj.next_seq += 1;
                let slot = inj.slot;
                if is_tail {
                    q.injecting.remove(pos);
                }
                if g.seq == 0 {
                    self.emit_trace("inject", slot, Some(g.to as usize), None);
                }
                slot
            } else {
                let from = g.from as usize;
                let lane = &mut self.lanes[from];
                if lane.len == 0 || lane.head_seq != g.seq {
                    return Err(self.violation(format!("lane {from} lost flit {}", g.seq)));
                }
                let slot = lane.owner;
                lane.head_seq += 1;
                lane.len -= 1;
                if lane.len == 0 {
                    let n_lanes = self.params.n_lanes as usize;
                    self.occupied[from / n_lanes] &= !(1u64 << (from % n_lanes));
                }
                if is_tail {
                    if lane.len != 0 {
                        return Err(self.violation(format!("lane {from} holds flits behind a tail")));
                    }
                    lane.release();
                    self.busy_lanes -= 1;
                }
                slot
            };

            if g.to & SOURCE_BIT != 0 {
                let sink = (g.to & !SOURCE_BIT) as usize;
                let s = &self.slots[slot as usize];
                if s.destination != sink {
                    return Err(self.violation(format!("packet {} reached sink {sink}", s.id)));
                }
                delivered += 1;
                self.flits_delivered += 1;
                self.deliveries.push(Delivery {
                    sink,
                    packet: s.id,
                    seq: g.seq,
                });
                if is_tail {
                    let mut p = Packet::new(s.id, s.source, s.destination, n_flits, s.generated);
                    p.injected_cycle = s.injected;
                    p.delivered_cycle = Some(cycle);
                    self.completed.push(p);
                    self.packets_delivered += 1;
                    self.emit_trace("deliver", slot, None, Some(sink));
                    self.free_slots.push(slot);
                }
            } else {
                let to = g.to as usize;
                let lane = &mut self.lanes[to];
                if lane.owner != slot || lane.head_seq + lane.len != g.seq {
                    return Err(self.violation(format!("lane {to} received out-of-worm flit {}", g.seq)));
                }
                lane.len += 1;
                if lane.len == 1 {
                    let n_lanes = self.params.n_lanes as usize;
                    self.occupied[to / n_lanes] |= 1u64 << (to % n_lanes);
                }
                if g.seq == 0 {
                    self.emit_trace("advance", slot, Some(to), None);
                }
            }
        }
        Ok(delivered)
    }

    fn violation(&self, what: String) -> Error {
        Error::Invariant {
            cycle: self.cycle,
            what,
        }
    }

    /// Full consistency check of the state: flit conservation and lane contents.
    pub fn check_invariants(&self) -> Result<()> {
        let n_flits = self.params.n_flits as u64;
        let cap = self.params.lane_capacity;
        let mut resident = 0u64;
        for (i, lane) in self.lanes.iter().enumerate() {
            if lane.len > cap {
                return Err(self.violation(format!("lane {i} holds {} > {cap} flits", lane.len)));
            }
            if lane.is_free() {
                if lane.len != 0 {
                    return Err(self.violation(format!("unowned lane {i} holds flits")));
                }
                continue;
            }
            if (lane.head_seq + lane.len) as u64 > n_flits {
                return Err(self.violation(format!("lane {i} seq range exceeds the packet")));
            }
            resident += lane.len as u64;
        }
        let n_lanes = self.params.n_lanes as usize;
        for (i, lane) in self.lanes.iter().enumerate() {
            let bit = self.occupied[i / n_lanes] >> (i % n_lanes) & 1 == 1;
            if bit != (lane.len > 0) {
                return Err(self.violation(format!("occupancy mask of lane {i} is stale")));
            }
        }
        let busy = self.lanes.iter().filter(|l| !l.is_free()).count();
        if busy != self.busy_lanes {
            return Err(self.violation(format!("busy lane count {} != {busy}", self.busy_lanes)));
        }
        let mut queued = 0u64;
        for q in &self.sources {
            queued += q.waiting.len() as u64 * n_flits;
            queued += q.injecting.iter().map(|i| n_flits - i.next_seq as u64).sum::<u64>();
        }
        let generated = self.packets_generated * n_flits;
        // delivered flits of packets still in flight are part of flits_delivered
        if generated != queued + resident + self.flits_delivered {
            return Err(self.violation(format!(
                "flit conservation: generated {generated} != queued {queued} + resident {resident} + delivered {}",
                self.flits_delivered
            )));
        }
        Ok(())
    }

    /// Runs until the collector reports termination.
    pub fn run_with(&mut self, collector: &mut RunCollector) -> Result<()> {
        loop {
            let report = self.step()?;
            let done = collector.observe(&report);
            if cfg!(debug_assertions) {
                self.check_invariants()?;
            }
            if done {
                break;
            }
        }
        self.check_invariants()
    }
}

/// One complete run under `config` with the given seed.
pub fn run(config: &SimConfig, seed: u64) -> Result<MetricsRecord> {
    let mut sim = Simulation::from_config(config, seed)?;
    let mut collector = RunCollector::new(config)?;
    sim.run_with(&mut collector)?;
    Ok(collector.finish(config, seed, sim.packets_in_flight()))
}
