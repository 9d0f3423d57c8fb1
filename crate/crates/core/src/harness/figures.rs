//! Presets that regenerate the data behind each published figure.

use std::fmt;
use std::str::FromStr;

use super::{AnalyticAxes, ExperimentKind, ExperimentSpec, SweepAxes};
use crate::costmodel::{CostConfig, FabricKind};
use crate::error::{Error, Result};
use crate::reliability::unit_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
        FigureId::Fig9,
        FigureId::Fig10,
        FigureId::Fig11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::Fig9 => "fig9",
            FigureId::Fig10 => "fig10",
            FigureId::Fig11 => "fig11",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config("figure", format!("unknown figure {s:?} (fig5..fig11)")))
    }
}

/// Fills in the preset axes of `id`. Run-length and replication settings
/// come from `user.base`; output settings are kept.
pub fn figure_spec(id: FigureId, user: &ExperimentSpec) -> ExperimentSpec {
    let mut spec = user.clone();
    let radix_3_10: Vec<u32> = (3..=10).collect();
    let reliability = |lanes: Vec<u32>| AnalyticAxes {
        r_grid: unit_grid(100),
        n_lanes: lanes,
        radix: radix_3_10.clone(),
        ..AnalyticAxes::default()
    };
    // the published cost magnitudes correspond to one unit per switch
    let cost = |lanes: Vec<u32>, kinds: Vec<FabricKind>| AnalyticAxes {
        n_lanes: lanes,
        radix: (1..=10).collect(),
        kinds,
        cost: CostConfig { se_cost_units: 1 },
        ..AnalyticAxes::default()
    };
    match id {
        FigureId::Fig5 => {
            spec.kind = ExperimentKind::Reliability;
            spec.analytic = reliability(vec![2]);
        }
        FigureId::Fig6 => {
            spec.kind = ExperimentKind::Reliability;
            spec.analytic = reliability(vec![4]);
        }
        FigureId::Fig7 => {
            spec.kind = ExperimentKind::Reliability;
            spec.analytic = reliability(vec![1, 2]);
        }
        FigureId::Fig8 => {
            spec.kind = ExperimentKind::Cost;
            spec.analytic = cost(vec![1, 2, 4, 6, 8, 10, 12], vec![FabricKind::Proposed]);
        }
        FigureId::Fig9 => {
            spec.kind = ExperimentKind::Cost;
            spec.analytic = cost(vec![1, 2, 4, 10], FabricKind::ALL.to_vec());
        }
        // one-flit lanes: at most 12 flits stored per channel
        FigureId::Fig10 => {
            spec.kind = ExperimentKind::Sweep;
            spec.base.lane_capacity = 1;
            spec.base.channel_storage = None;
            spec.base.n_flits = 12;
            spec.axes = SweepAxes {
                radix: vec![4, 5, 7, 9, 10],
                n_lanes: (1..=12).collect(),
                offered_load: vec![0.8],
                ..SweepAxes::default()
            };
        }
        FigureId::Fig11 => {
            spec.kind = ExperimentKind::Sweep;
            spec.base.lane_capacity = 1;
            spec.base.channel_storage = None;
            spec.base.n_flits = 12;
            spec.axes = SweepAxes {
                radix: vec![8],
                n_lanes: vec![1, 2, 4, 6, 8, 10],
                offered_load: (1..=19).map(|i| (5 * i) as f64 / 100.0).collect(),
                ..SweepAxes::default()
            };
        }
    }
    spec
}
