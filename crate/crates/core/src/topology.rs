//! Delta network of 2x2 switching elements.
//!
//! Links between stages are addressed by an `L`-bit link address. Stage `s`
//! pairs the two addresses that differ only in bit `L-1-s`: the SE index is
//! the address with that bit removed and the input port is the bit itself.
//! Leaving on output port `p` writes `p` into the same bit, so after the last
//! stage the link address equals the destination and the routing tag can be
//! consumed most-significant bit first (an indirect binary butterfly).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_RADIX: u32 = 20;

/// Degree of every switching element.
pub const SE_DEGREE: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    radix: u32,
}

impl NetworkShape {
    pub fn new(radix: u32) -> Result<Self> {
        if !(1..=MAX_RADIX).contains(&radix) {
            return Err(Error::config(
                "radix",
                format!("{radix} is outside 1..={MAX_RADIX}"),
            ));
        }
        Ok(NetworkShape { radix })
    }

    /// Number of stages, `L`.
    pub fn radix(&self) -> u32 {
        self.radix
    }

    pub fn stages(&self) -> usize {
        self.radix as usize
    }

    /// Port count `N = 2^L`.
    pub fn ports(&self) -> usize {
        1usize << self.radix
    }

    pub fn ses_per_stage(&self) -> usize {
        self.ports() / 2
    }

    pub fn total_ses(&self) -> usize {
        self.ses_per_stage() * self.stages()
    }

    /// Links between consecutive stages, `N·(L-1)`.
    pub fn internal_links(&self) -> usize {
        self.ports() * (self.stages() - 1)
    }

    pub fn routing_tag(&self, destination: usize) -> Result<RoutingTag> {
        if destination >= self.ports() {
            return Err(Error::config(
                "destination",
                format!("{destination} is not below N = {}", self.ports()),
            ));
        }
        let bits = (0..self.stages())
            .map(|stage| self.route_bit(destination, stage))
            .collect();
        Ok(RoutingTag { destination, bits })
    }

    /// Output port selected at `stage` by a packet heading to `destination`.
    #[inline]
    pub fn route_bit(&self, destination: usize, stage: usize) -> u8 {
        ((destination >> self.bit_at(stage)) & 1) as u8
    }

    /// SE and input port at stage 0 fed by `source`.
    pub fn entry(&self, source: usize) -> (usize, u8) {
        self.split(source, 0)
    }

    /// Where output `out_port` of SE `se` at `stage` leads.
    pub fn next_hop(&self, stage: usize, se: usize, out_port: u8) -> Result<Hop> {
        if stage >= self.stages() {
            return Err(Error::config(
                "stage",
                format!("{stage} is not below L = {}", self.radix),
            ));
        }
        if se >= self.ses_per_stage() || out_port > 1 {
            return Err(Error::config(
                "port",
                format!("SE {se} port {out_port} does not exist at stage {stage}"),
            ));
        }
        Ok(self.hop(stage, se, out_port))
    }

    /// Unchecked variant of [`next_hop`](Self::next_hop) for the engine's hot loop.
    #[inline]
    pub(crate) fn hop(&self, stage: usize, se: usize, out_port: u8) -> Hop {
        let link = insert_bit(se, self.bit_at(stage), out_port as usize);
        if stage + 1 == self.stages() {
            Hop::Sink(link)
        } else {
            let (se, port) = self.split(link, stage + 1);
            Hop::Switch { se, port }
        }
    }

    #[inline]
    fn bit_at(&self, stage: usize) -> u32 {
        self.radix - 1 - stage as u32
    }

    #[inline]
    fn split(&self, link: usize, stage: usize) -> (usize, u8) {
        let bit = self.bit_at(stage);
        (remove_bit(link, bit), ((link >> bit) & 1) as u8)
    }
}

#[inline]
fn remove_bit(value: usize, bit: u32) -> usize {
    let low = value & ((1 << bit) - 1);
    ((value >> (bit + 1)) << bit) | low
}

#[inline]
fn insert_bit(value: usize, bit: u32, b: usize) -> usize {
    let low = value & ((1 << bit) - 1);
    ((value >> bit) << (bit + 1)) | (b << bit) | low
}

/// Destination of a link leaving an SE output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    Switch { se: usize, port: u8 },
    Sink(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortAddress {
    pub stage: usize,
    pub se: usize,
    pub side: Side,
    pub port: u8,
}

impl PortAddress {
    pub fn new(shape: &NetworkShape, stage: usize, se: usize, side: Side, port: u8) -> Result<Self> {
        if stage >= shape.stages() || se >= shape.ses_per_stage() || port > 1 {
            return Err(Error::config(
                "port",
                format!("({stage}, {se}, {port}) is outside the {}-stage network", shape.radix()),
            ));
        }
        Ok(PortAddress { stage, se, side, port })
    }
}

/// Destination address as consumed by the switches, one bit per stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTag {
    pub destination: usize,
    /// Most significant bit first; `bits[i]` is the output port at stage `i`.
    pub bits: Vec<u8>,
}

impl RoutingTag {
    pub fn port_at(&self, stage: usize) -> u8 {
        self.bits[stage]
    }
}
