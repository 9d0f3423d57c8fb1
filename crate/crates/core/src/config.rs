//! Run configuration shared by the engine and the command-line harness.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::MAX_LANES;
use crate::error::{Error, Result};
use crate::topology::{NetworkShape, MAX_RADIX};
use crate::traffic::{ArrivalModel, LoadInterpretation};

/// Which capacity throughput is normalized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Delivered flits per cycle divided by `N`.
    #[default]
    PerPort,
    /// Delivered packets per cycle divided by `N / (L + P - 1)`.
    #[serde(alias = "eq5")]
    IdealDelay,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-port" => Ok(Normalization::PerPort),
            "ideal-delay" | "eq5" => Ok(Normalization::IdealDelay),
            other => Err(Error::config("normalization", format!("unknown mode {other:?}"))),
        }
    }
}

/// How a header picks among the free lanes of a buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaneSelection {
    #[default]
    LowestFree,
    Random,
    RoundRobin,
}

impl std::str::FromStr for LaneSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest-free" => Ok(LaneSelection::LowestFree),
            "random" => Ok(LaneSelection::Random),
            "round-robin" => Ok(LaneSelection::RoundRobin),
            other => Err(Error::config("lane_selection", format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub radix: u32,
    pub n_lanes: u32,
    /// Flits per lane.
    pub lane_capacity: u32,
    /// When set, lane capacity becomes `channel_storage / n_lanes` (fixed storage per link).
    pub channel_storage: Option<u32>,
    pub n_flits: u32,
    pub offered_load: f64,
    pub load_as: LoadInterpretation,
    pub warmup_cycles: u64,
    pub max_cycles: u64,
    pub steady_window: u64,
    pub steady_windows: u32,
    pub steady_tolerance: f64,
    pub replications: u32,
    pub seed: u64,
    pub normalization: Normalization,
    pub lane_selection: LaneSelection,
    /// Flits one input buffer may forward per cycle. 1 models a crossbar with one
    /// input per physical channel; 2 lets a buffer feed both outputs at once.
    pub crossbar_speedup: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            radix: 4,
            n_lanes: 2,
            lane_capacity: 2,
            channel_storage: None,
            n_flits: 12,
            offered_load: 0.5,
            load_as: LoadInterpretation::FlitRate,
            warmup_cycles: 1000,
            max_cycles: 20_000,
            steady_window: 1000,
            steady_windows: 5,
            steady_tolerance: 0.04,
            replications: 10,
            seed: 1,
            normalization: Normalization::PerPort,
            lane_selection: LaneSelection::LowestFree,
            crossbar_speedup: 1,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_RADIX).contains(&self.radix) {
            return Err(Error::config("radix", format!("{} is outside 1..={MAX_RADIX}", self.radix)));
        }
        if self.n_lanes == 0 || self.n_lanes > MAX_LANES {
            return Err(Error::config("n_lanes", format!("{} is outside 1..={MAX_LANES}", self.n_lanes)));
        }
        if self.lane_capacity == 0 {
            return Err(Error::config("lane_capacity", "must be at least 1"));
        }
        if let Some(total) = self.channel_storage {
            if total < self.n_lanes {
                return Err(Error::config(
                    "channel_storage",
                    format!("{total} flits cannot give each of {} lanes a slot", self.n_lanes),
                ));
            }
        }
        if self.n_flits == 0 {
            return Err(Error::config("n_flits", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.offered_load) {
            return Err(Error::config(
                "offered_load",
                format!("{} is outside [0, 1]", self.offered_load),
            ));
        }
        if self.max_cycles == 0 {
            return Err(Error::config("max_cycles", "must be positive"));
        }
        if self.warmup_cycles >= self.max_cycles {
            return Err(Error::config(
                "warmup_cycles",
                format!("{} must be below max_cycles {}", self.warmup_cycles, self.max_cycles),
            ));
        }
        if self.steady_window == 0 {
            return Err(Error::config("steady_window", "must be positive"));
        }
        if self.steady_windows < 2 {
            return Err(Error::config("steady_windows", "need at least two windows for a deviation"));
        }
        if !(self.steady_tolerance > 0.0) {
            return Err(Error::config("steady_tolerance", "must be positive"));
        }
        if !(1..=2).contains(&self.crossbar_speedup) {
            return Err(Error::config("crossbar_speedup", format!("{} is not 1 or 2", self.crossbar_speedup)));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<NetworkShape> {
        NetworkShape::new(self.radix)
    }

    pub fn arrival_model(&self) -> Result<ArrivalModel> {
        ArrivalModel::new(self.offered_load, self.n_flits, self.load_as)
    }

    /// Per-lane capacity after applying the fixed-storage mode.
    pub fn effective_lane_capacity(&self) -> u32 {
        match self.channel_storage {
            Some(total) => total / self.n_lanes,
            None => self.lane_capacity,
        }
    }

    /// Seed of replication `replica`.
    pub fn replica_seed(&self, replica: u32) -> u64 {
        self.seed.wrapping_add(replica as u64)
    }
}
