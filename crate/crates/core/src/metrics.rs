//! Throughput, delay and utilization metrics, steady-state detection and
//! replication averaging.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::{LaneSelection, Normalization, SimConfig};
use crate::engine::CycleReport;
use crate::error::{Error, Result};
use crate::topology::NetworkShape;
use crate::traffic::{LoadInterpretation, Packet};

/// Contention-free delay of a `packet_len`-flit packet over `stages` stages.
pub fn ideal_delay(stages: u32, packet_len: u32) -> u64 {
    assert!(stages >= 1 && packet_len >= 1, "ideal delay needs L ≥ 1 and P ≥ 1");
    stages as u64 + packet_len as u64 - 1
}

/// Packets per cycle when `n_max` packets circulate without contention.
pub fn max_throughput(n_max: u64, stages: u32, packet_len: u32) -> f64 {
    n_max as f64 / ideal_delay(stages, packet_len) as f64
}

/// Delivered flits per cycle over the per-port capacity of the fabric.
pub fn normalized_throughput(flits_per_cycle: f64, shape: &NetworkShape) -> f64 {
    flits_per_cycle / shape.ports() as f64
}

/// Delivered packets per cycle over [`max_throughput`] with `N_max = N`.
pub fn normalized_throughput_ideal(packets_per_cycle: f64, shape: &NetworkShape, packet_len: u32) -> f64 {
    packets_per_cycle / max_throughput(shape.ports() as u64, shape.radix(), packet_len)
}

pub fn buffer_utilization(busy_lanes: usize, total_lanes: usize) -> f64 {
    if total_lanes == 0 {
        0.0
    } else {
        busy_lanes as f64 / total_lanes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub wait: u64,
    pub service: u64,
    pub traverse: u64,
    pub total: u64,
}

/// Splits a delivered packet's latency into waiting at the source, service at
/// the injecting channel and the `L-1` cycles to drain the remaining stages.
/// `None` for packets that have not been delivered.
pub fn delay_decomposition(packet: &Packet, shape: &NetworkShape) -> Option<DelayBreakdown> {
    let injected = packet.injected_cycle?;
    let delivered = packet.delivered_cycle?;
    let traverse = shape.stages() as u64 - 1;
    let wait = injected - packet.generated_cycle;
    let service = delivered - injected - traverse;
    Some(DelayBreakdown {
        wait,
        service,
        traverse,
        total: wait + service + traverse,
    })
}

/// Declares steady state once the last `windows_required` window values have
/// a sample standard deviation within `tolerance` of their mean.
#[derive(Debug, Clone)]
pub struct SteadyStateDetector {
    pub window_cycles: u64,
    pub windows_required: usize,
    pub tolerance: f64,
    windows: VecDeque<f64>,
}

impl SteadyStateDetector {
    pub fn new(window_cycles: u64, windows_required: usize, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::config("steady_tolerance", "must be positive"));
        }
        if windows_required < 2 {
            return Err(Error::config("steady_windows", "need at least two windows"));
        }
        if window_cycles == 0 {
            return Err(Error::config("steady_window", "must be positive"));
        }
        Ok(SteadyStateDetector {
            window_cycles,
            windows_required,
            tolerance,
            windows: VecDeque::with_capacity(windows_required),
        })
    }

    /// Records one completed window and reports convergence.
    pub fn update(&mut self, window_value: f64) -> bool {
        if self.windows.len() == self.windows_required {
            self.windows.pop_front();
        }
        self.windows.push_back(window_value);
        self.converged()
    }

    pub fn converged(&self) -> bool {
        if self.windows.len() < self.windows_required {
            return false;
        }
        let (mean, sd) = mean_sd(self.windows.iter().copied());
        if mean == 0.0 {
            return self.windows.iter().all(|&w| w == 0.0);
        }
        sd <= self.tolerance * mean.abs()
    }

    pub fn windows(&self) -> impl Iterator<Item = f64> + '_ {
        self.windows.iter().copied()
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Parameters that identify a configuration, everything but the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub radix: u32,
    pub n_ports: usize,
    pub n_lanes: u32,
    pub lane_capacity: u32,
    pub n_flits: u32,
    pub offered_load: f64,
    pub load_as: LoadInterpretation,
    pub normalization: Normalization,
    pub lane_selection: LaneSelection,
    pub crossbar_speedup: u32,
}

impl RunKey {
    pub fn of(config: &SimConfig) -> Self {
        RunKey {
            radix: config.radix,
            n_ports: 1usize << config.radix,
            n_lanes: config.n_lanes,
            lane_capacity: config.effective_lane_capacity(),
            n_flits: config.n_flits,
            offered_load: config.offered_load,
            load_as: config.load_as,
            normalization: config.normalization,
            lane_selection: config.lane_selection,
            crossbar_speedup: config.crossbar_speedup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub key: RunKey,
    pub seed: u64,
    pub cycles_measured: u64,
    pub termination_cycle: u64,
    pub steady_state_reached: bool,
    pub packets_delivered: u64,
    /// Flits of the packets completed while measuring.
    pub flits_delivered: u64,
    pub throughput_flits_per_cycle: f64,
    pub normalized_throughput: f64,
    pub mean_wait: f64,
    pub mean_service: f64,
    pub mean_total_delay: f64,
    pub buffer_utilization: f64,
    /// Packets still queued or in the fabric at termination.
    pub undelivered_packets: u64,
}

/// Accumulates per-cycle reports into a [`MetricsRecord`] and decides when
/// the run stops: at steady state or at the cycle limit, whichever is first.
///
/// Steady state requires both the per-window delivered throughput and the
/// per-window mean packet delay to settle; above saturation the throughput
/// flattens while the delay keeps growing with the source backlog.
#[derive(Debug, Clone)]
pub struct RunCollector {
    shape: NetworkShape,
    warmup: u64,
    max_cycles: u64,
    window: u64,
    throughput: SteadyStateDetector,
    delay: SteadyStateDetector,
    steady: bool,

    measured_cycles: u64,
    last_cycle: u64,
    flits: u64,
    packets: u64,
    wait_sum: u64,
    service_sum: u64,
    total_sum: u64,
    utilization_sum: f64,

    window_flits: u64,
    window_delay_sum: u64,
    window_packets: u64,
}

impl RunCollector {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let windows = config.steady_windows as usize;
        let make = || SteadyStateDetector::new(config.steady_window, windows, config.steady_tolerance);
        Ok(RunCollector {
            shape: config.shape()?,
            warmup: config.warmup_cycles,
            max_cycles: config.max_cycles,
            window: config.steady_window,
            throughput: make()?,
            delay: make()?,
            steady: false,
            measured_cycles: 0,
            last_cycle: 0,
            flits: 0,
            packets: 0,
            wait_sum: 0,
            service_sum: 0,
            total_sum: 0,
            utilization_sum: 0.0,
            window_flits: 0,
            window_delay_sum: 0,
            window_packets: 0,
        })
    }

    /// Feeds one cycle; returns true when the run should stop.
    pub fn observe(&mut self, report: &CycleReport<'_>) -> bool {
        self.last_cycle = report.cycle;
        let done = report.cycle + 1 >= self.max_cycles;
        if report.cycle < self.warmup {
            return done;
        }
        self.measured_cycles += 1;
        self.window_flits += report.flits_delivered as u64;
        self.utilization_sum += buffer_utilization(report.busy_lanes, report.total_lanes);
        for p in report.completed {
            let d = delay_decomposition(p, &self.shape).expect("completed packet has timestamps");
            self.packets += 1;
            self.flits += p.n_flits as u64;
            self.wait_sum += d.wait;
            self.service_sum += d.service;
            self.total_sum += d.total;
            self.window_delay_sum += d.total;
            self.window_packets += 1;
        }
        if self.measured_cycles % self.window == 0 {
            let thr = self.window_flits as f64 / self.window as f64;
            let delay = if self.window_packets == 0 {
                0.0
            } else {
                self.window_delay_sum as f64 / self.window_packets as f64
            };
            let a = self.throughput.update(thr);
            let b = self.delay.update(delay);
            self.window_flits = 0;
            self.window_delay_sum = 0;
            self.window_packets = 0;
            if a && b {
                self.steady = true;
                return true;
            }
        }
        done
    }

    pub fn steady_state_reached(&self) -> bool {
        self.steady
    }

    pub fn finish(&self, config: &SimConfig, seed: u64, undelivered: u64) -> MetricsRecord {
        let cycles = self.measured_cycles.max(1) as f64;
        let per = |sum: u64| {
            if self.packets == 0 {
                0.0
            } else {
                sum as f64 / self.packets as f64
            }
        };
        let throughput = self.flits as f64 / cycles;
        let normalized = match config.normalization {
            Normalization::PerPort => normalized_throughput(throughput, &self.shape),
            Normalization::IdealDelay => {
                normalized_throughput_ideal(self.packets as f64 / cycles, &self.shape, config.n_flits)
            }
        };
        MetricsRecord {
            key: RunKey::of(config),
            seed,
            cycles_measured: self.measured_cycles,
            termination_cycle: self.last_cycle + 1,
            steady_state_reached: self.steady,
            packets_delivered: self.packets,
            flits_delivered: self.flits,
            throughput_flits_per_cycle: throughput,
            normalized_throughput: normalized,
            mean_wait: per(self.wait_sum),
            mean_service: per(self.service_sum),
            mean_total_delay: per(self.total_sum),
            buffer_utilization: self.utilization_sum / cycles,
            undelivered_packets: undelivered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let (mean, sd) = mean_sd(values);
        Stat { mean, sd }
    }
}

/// Replication average of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub key: RunKey,
    pub replications: usize,
    /// True only if every replication reached steady state.
    pub steady_state_reached: bool,
    pub cycles_measured: Stat,
    pub packets_delivered: Stat,
    pub flits_delivered: Stat,
    pub throughput_flits_per_cycle: Stat,
    pub normalized_throughput: Stat,
    pub mean_wait: Stat,
    pub mean_service: Stat,
    pub mean_total_delay: Stat,
    pub buffer_utilization: Stat,
    pub undelivered_packets: Stat,
}

pub fn aggregate_replications(records: &[MetricsRecord]) -> Result<Summary> {
    let first = records
        .first()
        .ok_or_else(|| Error::config("replications", "nothing to aggregate"))?;
    if let Some(other) = records.iter().find(|r| r.key != first.key) {
        return Err(Error::config(
            "replications",
            format!("mixed configurations {:?} and {:?}", first.key, other.key),
        ));
    }
    let stat = |f: fn(&MetricsRecord) -> f64| Stat::of(records.iter().map(f));
    Ok(Summary {
        key: first.key,
        replications: records.len(),
        steady_state_reached: records.iter().all(|r| r.steady_state_reached),
        cycles_measured: stat(|r| r.cycles_measured as f64),
        packets_delivered: stat(|r| r.packets_delivered as f64),
        flits_delivered: stat(|r| r.flits_delivered as f64),
        throughput_flits_per_cycle: stat(|r| r.throughput_flits_per_cycle),
        normalized_throughput: stat(|r| r.normalized_throughput),
        mean_wait: stat(|r| r.mean_wait),
        mean_service: stat(|r| r.mean_service),
        mean_total_delay: stat(|r| r.mean_total_delay),
        buffer_utilization: stat(|r| r.buffer_utilization),
        undelivered_packets: stat(|r| r.undelivered_packets as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ideal_delay_values() {
        assert_eq!(ideal_delay(10, 12), 21);
        assert_eq!(ideal_delay(1, 1), 1);
        assert_eq!(ideal_delay(3, 4), 6);
    }

    #[test]
    fn max_throughput_values() {
        assert_relative_eq!(max_throughput(16, 4, 4), 16.0 / 7.0);
        assert_eq!(max_throughput(1, 1, 1), 1.0);
        assert_relative_eq!(max_throughput(1024, 10, 12), 1024.0 / 21.0);
    }

    #[test]
    fn per_port_normalization() {
        let s10 = NetworkShape::new(10).unwrap();
        let s3 = NetworkShape::new(3).unwrap();
        assert_eq!(normalized_throughput(8.0, &s3), 1.0);
        assert_eq!(normalized_throughput(0.0, &s3), 0.0);
        assert_relative_eq!(normalized_throughput(307.2, &s10), 0.30, epsilon = 1e-12);
    }

    #[test]
    fn utilization_samples() {
        assert_eq!(buffer_utilization(0, 64), 0.0);
        assert_eq!(buffer_utilization(3, 8), 0.375);
    }

    fn delivered(generated: u64, injected: u64, delivered: u64) -> Packet {
        let mut p = Packet::new(0, 0, 0, 4, generated);
        p.injected_cycle = Some(injected);
        p.delivered_cycle = Some(delivered);
        p
    }

    #[test]
    fn decomposition_contention_free() {
        let s = NetworkShape::new(3).unwrap();
        let d = delay_decomposition(&delivered(0, 0, 6), &s).unwrap();
        assert_eq!((d.wait, d.service, d.traverse, d.total), (0, 4, 2, 6));
        let d = delay_decomposition(&delivered(10, 15, 21), &s).unwrap();
        assert_eq!(d.total, 5 + ideal_delay(3, 4));
        assert_eq!(d.wait, 5);
        assert!(delay_decomposition(&Packet::new(0, 0, 0, 4, 0), &s).is_none());
    }

    #[test]
    fn steady_state_detector_cases() {
        let mut d = SteadyStateDetector::new(1000, 5, 0.04).unwrap();
        let r: Vec<bool> = [10.0; 5].iter().map(|&w| d.update(w)).collect();
        assert_eq!(r, vec![false, false, false, false, true]);

        let mut d = SteadyStateDetector::new(1000, 5, 0.04).unwrap();
        for w in [10.0, 20.0, 10.0, 20.0] {
            assert!(!d.update(w));
        }
        assert!(!d.update(10.0));

        let mut d = SteadyStateDetector::new(1000, 3, 0.04).unwrap();
        for _ in 0..3 {
            d.update(0.0);
        }
        assert!(d.converged());
        d.update(1.0);
        assert!(!d.converged());
        assert!(SteadyStateDetector::new(1000, 5, 0.0).is_err());
    }

    #[test]
    fn aggregate_means() {
        let c = SimConfig::default();
        let rec = |th: f64, seed| MetricsRecord {
            key: RunKey::of(&c),
            seed,
            cycles_measured: 100,
            termination_cycle: 1100,
            steady_state_reached: true,
            packets_delivered: 10,
            flits_delivered: 120,
            throughput_flits_per_cycle: th * 16.0,
            normalized_throughput: th,
            mean_wait: 1.0,
            mean_service: 2.0,
            mean_total_delay: 6.0,
            buffer_utilization: 0.1,
            undelivered_packets: 0,
        };
        let one = aggregate_replications(&[rec(0.3, 1)]).unwrap();
        assert_eq!(one.normalized_throughput, Stat { mean: 0.3, sd: 0.0 });
        let two = aggregate_replications(&[rec(0.3, 1), rec(0.4, 2)]).unwrap();
        assert_relative_eq!(two.normalized_throughput.mean, 0.35, epsilon = 1e-12);
        let mut odd = rec(0.4, 3);
        odd.key.n_lanes = 7;
        assert!(aggregate_replications(&[rec(0.3, 1), odd]).unwrap_err().is_config());
        assert!(aggregate_replications(&[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn detector_monotone_in_tolerance(ws in proptest::collection::vec(0.0f64..100.0, 5)) {
            let mut tight = SteadyStateDetector::new(10, 5, 0.02).unwrap();
            let mut loose = SteadyStateDetector::new(10, 5, 0.04).unwrap();
            for &w in &ws {
                tight.update(w);
                loose.update(w);
            }
            proptest::prop_assert!(!tight.converged() || loose.converged());
        }
    }
}
