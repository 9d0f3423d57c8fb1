//! Result rows and their CSV / JSON encodings.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Normalization;
use crate::costmodel::{write_cost_csv, CostRow};
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, Summary};
use crate::reliability::{write_reliability_csv, ReliabilityRow};
use crate::traffic::LoadInterpretation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config("format", format!("unknown format {other:?}"))),
        }
    }
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// One simulation output row. Aggregate rows carry replication means; count
/// columns are therefore floating point. The columns after
/// `undelivered_packets` are additions to the fixed schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub radix: u32,
    #[serde(rename = "N")]
    pub n_ports: usize,
    pub n_lanes: u32,
    pub lane_capacity: u32,
    pub n_flits: u32,
    pub offered_load: f64,
    pub seed: u64,
    pub cycles_measured: f64,
    pub steady_state_reached: bool,
    pub packets_delivered: f64,
    pub flits_delivered: f64,
    pub throughput_flits_per_cycle: f64,
    pub normalized_throughput: f64,
    pub mean_wait: f64,
    pub mean_service: f64,
    pub mean_total_delay: f64,
    pub buffer_utilization: f64,
    pub undelivered_packets: f64,
    pub replications: usize,
    pub normalized_throughput_sd: f64,
    pub mean_total_delay_sd: f64,
    pub load_as: LoadInterpretation,
    pub normalization: Normalization,
}

impl ResultRow {
    pub fn from_summary(run_id: String, base_seed: u64, s: &Summary) -> Self {
        ResultRow {
            run_id,
            radix: s.key.radix,
            n_ports: s.key.n_ports,
            n_lanes: s.key.n_lanes,
            lane_capacity: s.key.lane_capacity,
            n_flits: s.key.n_flits,
            offered_load: s.key.offered_load,
            seed: base_seed,
            cycles_measured: s.cycles_measured.mean,
            steady_state_reached: s.steady_state_reached,
            packets_delivered: s.packets_delivered.mean,
            flits_delivered: s.flits_delivered.mean,
            throughput_flits_per_cycle: s.throughput_flits_per_cycle.mean,
            normalized_throughput: s.normalized_throughput.mean,
            mean_wait: s.mean_wait.mean,
            mean_service: s.mean_service.mean,
            mean_total_delay: s.mean_total_delay.mean,
            buffer_utilization: s.buffer_utilization.mean,
            undelivered_packets: s.undelivered_packets.mean,
            replications: s.replications,
            normalized_throughput_sd: s.normalized_throughput.sd,
            mean_total_delay_sd: s.mean_total_delay.sd,
            load_as: s.key.load_as,
            normalization: s.key.normalization,
        }
    }

    pub fn from_record(run_id: String, r: &MetricsRecord) -> Self {
        ResultRow {
            run_id,
            radix: r.key.radix,
            n_ports: r.key.n_ports,
            n_lanes: r.key.n_lanes,
            lane_capacity: r.key.lane_capacity,
            n_flits: r.key.n_flits,
            offered_load: r.key.offered_load,
            seed: r.seed,
            cycles_measured: r.cycles_measured as f64,
            steady_state_reached: r.steady_state_reached,
            packets_delivered: r.packets_delivered as f64,
            flits_delivered: r.flits_delivered as f64,
            throughput_flits_per_cycle: r.throughput_flits_per_cycle,
            normalized_throughput: r.normalized_throughput,
            mean_wait: r.mean_wait,
            mean_service: r.mean_service,
            mean_total_delay: r.mean_total_delay,
            buffer_utilization: r.buffer_utilization,
            undelivered_packets: r.undelivered_packets as f64,
            replications: 1,
            normalized_throughput_sd: 0.0,
            mean_total_delay_sd: 0.0,
            load_as: r.key.load_as,
            normalization: r.key.normalization,
        }
    }
}

/// Rows produced by one experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Runs(Vec<ResultRow>),
    Reliability(Vec<ReliabilityRow>),
    Cost(Vec<CostRow>),
}

impl Table {
    pub fn len(&self) -> usize {
        match self {
            Table::Runs(r) => r.len(),
            Table::Reliability(r) => r.len(),
            Table::Cost(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write<W: Write>(&self, format: OutputFormat, mut out: W) -> Result<()> {
        match (self, format) {
            (Table::Runs(rows), OutputFormat::Csv) => {
                let mut w = csv::Writer::from_writer(out);
                for row in rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            (Table::Reliability(rows), OutputFormat::Csv) => write_reliability_csv(rows, out)?,
            (Table::Cost(rows), OutputFormat::Csv) => write_cost_csv(rows, out)?,
            (Table::Runs(rows), OutputFormat::Json) => write_json(rows, &mut out)?,
            (Table::Reliability(rows), OutputFormat::Json) => write_json(rows, &mut out)?,
            (Table::Cost(rows), OutputFormat::Json) => write_json(rows, &mut out)?,
        }
        Ok(())
    }
}

fn write_json<T: Serialize, W: Write>(rows: &[T], out: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn read_rows_json<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_reader(input)?)
}
