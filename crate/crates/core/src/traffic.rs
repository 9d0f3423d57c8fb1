//! Packet generation and flit splitting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NetworkShape, RoutingTag};

pub type PacketId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: PacketId,
    pub source: usize,
    pub destination: usize,
    pub n_flits: u32,
    pub generated_cycle: u64,
    pub injected_cycle: Option<u64>,
    pub delivered_cycle: Option<u64>,
}

impl Packet {
    pub fn new(id: PacketId, source: usize, destination: usize, n_flits: u32, generated_cycle: u64) -> Self {
        Packet {
            id,
            source,
            destination,
            n_flits,
            generated_cycle,
            injected_cycle: None,
            delivered_cycle: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlitKind {
    Header,
    Body,
    Tail,
    /// One-flit packet: header and tail at once.
    Single,
}

impl FlitKind {
    pub fn of(seq: u32, n_flits: u32) -> FlitKind {
        match (seq == 0, seq + 1 == n_flits) {
            (true, true) => FlitKind::Single,
            (true, false) => FlitKind::Header,
            (false, true) => FlitKind::Tail,
            (false, false) => FlitKind::Body,
        }
    }

    pub fn is_header(self) -> bool {
        matches!(self, FlitKind::Header | FlitKind::Single)
    }

    pub fn is_tail(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::Single)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flit {
    pub packet_id: PacketId,
    pub kind: FlitKind,
    pub seq: u32,
    /// Only the header carries a tag.
    pub tag: Option<RoutingTag>,
}

/// Splits a packet into its flit sequence, header first.
pub fn flitize(packet: &Packet, shape: &NetworkShape) -> Result<Vec<Flit>> {
    if packet.n_flits == 0 {
        return Err(Error::config("n_flits", "a packet needs at least one flit"));
    }
    let tag = shape.routing_tag(packet.destination)?;
    Ok((0..packet.n_flits)
        .map(|seq| {
            let kind = FlitKind::of(seq, packet.n_flits);
            Flit {
                packet_id: packet.id,
                kind,
                seq,
                tag: kind.is_header().then(|| tag.clone()),
            }
        })
        .collect())
}

/// How a configured offered load maps onto the per-input packet probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadInterpretation {
    /// Load is flits per cycle per input; λ = load / n_flits.
    #[default]
    FlitRate,
    /// Load is already the packet probability λ.
    PacketRate,
}

impl std::str::FromStr for LoadInterpretation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flit-rate" => Ok(LoadInterpretation::FlitRate),
            "packet-rate" => Ok(LoadInterpretation::PacketRate),
            other => Err(Error::config("load_as", format!("unknown interpretation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    /// Packet probability per input per cycle.
    pub lambda: f64,
    /// Offered load as configured.
    pub offered_load: f64,
}

impl ArrivalModel {
    pub fn new(offered_load: f64, n_flits: u32, interpretation: LoadInterpretation) -> Result<Self> {
        if !(0.0..=1.0).contains(&offered_load) {
            return Err(Error::config(
                "offered_load",
                format!("{offered_load} is outside [0, 1]"),
            ));
        }
        if n_flits == 0 {
            return Err(Error::config("n_flits", "must be at least 1"));
        }
        let lambda = match interpretation {
            LoadInterpretation::FlitRate => offered_load / n_flits as f64,
            LoadInterpretation::PacketRate => offered_load,
        };
        Ok(ArrivalModel {
            lambda,
            offered_load,
        })
    }

    /// Bernoulli trial per input; each success gets a uniform destination.
    pub fn sample<R: Rng + ?Sized>(&self, ports: usize, rng: &mut R, mut emit: impl FnMut(usize, usize)) {
        if self.lambda <= 0.0 {
            return;
        }
        for source in 0..ports {
            if rng.gen_bool(self.lambda) {
                emit(source, rng.gen_range(0..ports));
            }
        }
    }
}

/// Packets generated at `cycle`, numbered from `next_id`.
pub fn sample_arrivals<R: Rng + ?Sized>(
    model: &ArrivalModel,
    shape: &NetworkShape,
    n_flits: u32,
    rng: &mut R,
    cycle: u64,
    next_id: &mut PacketId,
) -> Vec<Packet> {
    let mut out = Vec::new();
    model.sample(shape.ports(), rng, |source, destination| {
        out.push(Packet::new(*next_id, source, destination, n_flits, cycle));
        *next_id += 1;
    });
    out
}

/// `bin(k, λ/k)` probability of `n` arrivals at a first-stage SE.
pub fn binomial_first_stage_pmf(n: u32, lambda: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::config("k", "SE degree must be positive"));
    }
    let p = lambda / k as f64;
    if !(0.0..=1.0).contains(&p) || lambda.is_nan() {
        return Err(Error::config("lambda", format!("{lambda} gives λ/k outside [0, 1]")));
    }
    if n > k {
        return Ok(0.0);
    }
    let choose = (0..n).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64);
    Ok(choose * p.powi(n as i32) * (1.0 - p).powi((k - n) as i32))
}

/// Where the engine gets new packets from.
pub trait TrafficSource {
    /// Calls `emit(source, destination)` for every packet generated at `cycle`.
    fn generate(&mut self, cycle: u64, ports: usize, emit: &mut dyn FnMut(usize, usize));

    /// True once no further packets can appear.
    fn exhausted(&self, _cycle: u64) -> bool {
        false
    }
}

pub struct BernoulliTraffic<R> {
    model: ArrivalModel,
    rng: R,
}

impl<R: Rng> BernoulliTraffic<R> {
    pub fn new(model: ArrivalModel, rng: R) -> Self {
        BernoulliTraffic { model, rng }
    }
}

impl<R: Rng> TrafficSource for BernoulliTraffic<R> {
    fn generate(&mut self, _cycle: u64, ports: usize, emit: &mut dyn FnMut(usize, usize)) {
        self.model.sample(ports, &mut self.rng, emit);
    }

    fn exhausted(&self, _cycle: u64) -> bool {
        self.model.lambda <= 0.0
    }
}

/// Replays a fixed list of `(cycle, source, destination)` arrivals.
#[derive(Debug, Clone, Default)]
pub struct ScriptedTraffic {
    arrivals: Vec<(u64, usize, usize)>,
    next: usize,
}

impl ScriptedTraffic {
    pub fn new(mut arrivals: Vec<(u64, usize, usize)>) -> Self {
        // stable: same-cycle arrivals keep their listed order
        arrivals.sort_by_key(|a| a.0);
        ScriptedTraffic { arrivals, next: 0 }
    }
}

impl TrafficSource for ScriptedTraffic {
    fn generate(&mut self, cycle: u64, _ports: usize, emit: &mut dyn FnMut(usize, usize)) {
        while let Some(&(at, src, dst)) = self.arrivals.get(self.next) {
            if at > cycle {
                break;
            }
            emit(src, dst);
            self.next += 1;
        }
    }

    fn exhausted(&self, _cycle: u64) -> bool {
        self.next >= self.arrivals.len()
    }
}
