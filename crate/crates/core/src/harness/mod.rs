//! Experiment orchestration: single runs, sweeps, analytic tables and the
//! figure presets, with replication fan-out and deterministic output order.

mod figures;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::costmodel::{cost_sweep, CostConfig, FabricKind};
use crate::engine::Simulation;
use crate::error::{Error, Result};
use crate::metrics::{aggregate_replications, MetricsRecord, RunCollector};
use crate::reliability::reliability_sweep;

pub use figures::{figure_spec, FigureId};
pub use output::{read_rows_csv, read_rows_json, OutputFormat, ResultRow, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    Sweep,
    Reliability,
    Cost,
    Figure(FigureId),
}

/// Swept simulation parameters; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepAxes {
    pub radix: Vec<u32>,
    pub n_lanes: Vec<u32>,
    pub lane_capacity: Vec<u32>,
    pub n_flits: Vec<u32>,
    pub offered_load: Vec<f64>,
}

impl SweepAxes {
    /// Every combination over `base`, radix outermost and load innermost.
    pub fn expand(&self, base: &SimConfig) -> Vec<SimConfig> {
        fn or<T: Copy>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let mut out = Vec::new();
        for radix in or(&self.radix, base.radix) {
            for n_lanes in or(&self.n_lanes, base.n_lanes) {
                for lane_capacity in or(&self.lane_capacity, base.lane_capacity) {
                    for n_flits in or(&self.n_flits, base.n_flits) {
                        for offered_load in or(&self.offered_load, base.offered_load) {
                            out.push(SimConfig { radix, n_lanes, lane_capacity, n_flits, offered_load, ..base.clone() });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Axes of the closed-form tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticAxes {
    pub r_grid: Vec<f64>,
    pub n_lanes: Vec<u32>,
    pub radix: Vec<u32>,
    pub kinds: Vec<FabricKind>,
    pub cost: CostConfig,
}

impl Default for AnalyticAxes {
    fn default() -> Self {
        AnalyticAxes {
            r_grid: crate::reliability::unit_grid(100),
            n_lanes: vec![1, 2, 4],
            radix: (1..=10).collect(),
            kinds: FabricKind::ALL.to_vec(),
            cost: CostConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub base: SimConfig,
    pub axes: SweepAxes,
    pub analytic: AnalyticAxes,
    /// Also emit one row per replication after each aggregate row.
    pub per_replication: bool,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    /// Flit event trace of the first replication of a single run.
    pub trace: Option<PathBuf>,
    pub parallel: bool,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, base: SimConfig) -> Self {
        ExperimentSpec {
            kind,
            base,
            axes: SweepAxes::default(),
            analytic: AnalyticAxes::default(),
            per_replication: false,
            format: OutputFormat::Csv,
            output: None,
            trace: None,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Simulate | ExperimentKind::Sweep | ExperimentKind::Figure(_) => {
                for c in self.axes.expand(&self.base) {
                    c.validate()?;
                }
                if self.trace.is_some() && self.kind != ExperimentKind::Simulate {
                    return Err(Error::config("trace", "only single runs can be traced"));
                }
                Ok(())
            }
            ExperimentKind::Reliability => {
                if self.analytic.r_grid.is_empty() || self.analytic.n_lanes.is_empty() || self.analytic.radix.is_empty() {
                    return Err(Error::config("reliability", "every axis must be non-empty"));
                }
                Ok(())
            }
            ExperimentKind::Cost => {
                if self.analytic.kinds.is_empty() || self.analytic.n_lanes.is_empty() || self.analytic.radix.is_empty() {
                    return Err(Error::config("cost", "every axis must be non-empty"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub written: Option<PathBuf>,
}

/// All replications of one configuration, in replica order.
pub fn replicate(config: &SimConfig, parallel: bool) -> Result<Vec<MetricsRecord>> {
    let seeds: Vec<u64> = (0..config.replications).map(|i| config.replica_seed(i)).collect();
    if parallel {
        seeds.par_iter().map(|&s| crate::engine::run(config, s)).collect()
    } else {
        seeds.iter().map(|&s| crate::engine::run(config, s)).collect()
    }
}

/// Runs every configuration and returns aggregate rows (and per-replication
/// rows when asked) in configuration order.
pub fn run_configs(configs: &[SimConfig], per_replication: bool, parallel: bool) -> Result<Vec<ResultRow>> {
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.replications).map(move |r| (i, c.replica_seed(r))))
        .collect();
    let run = |&(i, seed): &(usize, u64)| crate::engine::run(&configs[i], seed);
    let records: Vec<MetricsRecord> = if parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };

    let mut rows = Vec::new();
    let mut rest = records.as_slice();
    for (i, c) in configs.iter().enumerate() {
        let (mine, tail) = rest.split_at(c.replications as usize);
        rest = tail;
        rows.push(ResultRow::from_summary(i.to_string(), c.seed, &aggregate_replications(mine)?));
        if per_replication {
            for (r, rec) in mine.iter().enumerate() {
                rows.push(ResultRow::from_record(format!("{i}-{r}"), rec));
            }
        }
    }
    Ok(rows)
}

fn traced_run(config: &SimConfig, path: &Path) -> Result<()> {
    let mut sim = Simulation::from_config(config, config.replica_seed(0))?;
    sim.set_trace(Box::new(BufWriter::new(File::create(path)?)));
    let mut collector = RunCollector::new(config)?;
    sim.run_with(&mut collector)
}

/// Builds the table for `spec` and writes it to `spec.output` if set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let spec = match spec.kind {
        ExperimentKind::Figure(id) => figure_spec(id, spec),
        _ => spec.clone(),
    };
    spec.validate()?;
    let a = &spec.analytic;
    let table = match spec.kind {
        ExperimentKind::Simulate | ExperimentKind::Sweep | ExperimentKind::Figure(_) => {
            let configs = spec.axes.expand(&spec.base);
            if spec.kind == ExperimentKind::Simulate && configs.len() != 1 {
                return Err(Error::config("simulate", "takes one value per parameter; use sweep for lists"));
            }
            if let Some(path) = &spec.trace {
                traced_run(&configs[0], path)?;
            }
            Table::Runs(run_configs(&configs, spec.per_replication, spec.parallel)?)
        }
        ExperimentKind::Reliability => Table::Reliability(reliability_sweep(&a.r_grid, &a.n_lanes, &a.radix)?),
        ExperimentKind::Cost => Table::Cost(cost_sweep(&a.radix, &a.n_lanes, &a.kinds, &a.cost)?),
    };
    let written = match &spec.output {
        Some(path) => {
            let located = |e: std::io::Error| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(located)?;
            }
            let mut out = BufWriter::new(File::create(path).map_err(located)?);
            table.write(spec.format, &mut out)?;
            out.flush()?;
            Some(path.clone())
        }
        None => None,
    };
    Ok(Outcome { table, written })
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(ExperimentKind::Simulate),
            "sweep" => Ok(ExperimentKind::Sweep),
            "reliability" => Ok(ExperimentKind::Reliability),
            "cost" => Ok(ExperimentKind::Cost),
            other => other.parse().map(ExperimentKind::Figure),
        }
    }
}
