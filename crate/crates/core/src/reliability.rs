//! Terminal reliability of a multi-lane Delta network.
//!
//! A lane is up with probability `r`. A buffer works while any of its lanes
//! works, and an input/output path crosses exactly one buffer per stage.

use std::io::Write;

use crate::error::{Error, Result};

fn check_probability(key: &'static str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::config(key, format!("{r} is not a probability")))
    }
}

/// Product of the element reliabilities. An empty chain is always up.
pub fn series_reliability(rs: &[f64]) -> f64 {
    rs.iter().product()
}

/// Probability that at least one element is up. An empty set is always down.
pub fn parallel_reliability(rs: &[f64]) -> f64 {
    1.0 - rs.iter().map(|r| 1.0 - r).product::<f64>()
}

/// A buffer made of parallel lanes.
pub fn buffer_reliability(lane_rs: &[f64]) -> f64 {
    parallel_reliability(lane_rs)
}

/// Path reliability from a per-stage, per-lane reliability matrix.
pub fn min_reliability(per_lane_r: &[Vec<f64>], n_lanes: usize, stages: usize) -> Result<f64> {
    if per_lane_r.len() != stages {
        return Err(Error::config(
            "per_lane_r",
            format!("{} stage rows given for {stages} stages", per_lane_r.len()),
        ));
    }
    let mut buffers = Vec::with_capacity(stages);
    for (stage, row) in per_lane_r.iter().enumerate() {
        if row.len() != n_lanes {
            return Err(Error::config(
                "per_lane_r",
                format!("stage {stage} has {} lanes, expected {n_lanes}", row.len()),
            ));
        }
        for &r in row {
            check_probability("per_lane_r", r)?;
        }
        buffers.push(buffer_reliability(row));
    }
    Ok(series_reliability(&buffers))
}

// `powi` may be folded differently at compile time, so results could depend on
// whether the arguments were constants.
fn ipow(mut base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

/// Closed form when every lane has the same reliability.
pub fn min_reliability_uniform(r_flit: f64, n_lanes: u32, stages: u32) -> f64 {
    ipow(1.0 - ipow(1.0 - r_flit, n_lanes), stages)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReliabilityRow {
    pub radix: u32,
    pub n_lanes: u32,
    pub r_flit: f64,
    #[serde(rename = "R_MIN")]
    pub r_min: f64,
}

/// Every combination of radix, lane count and lane reliability, radix outermost.
pub fn reliability_sweep(r_grid: &[f64], lanes: &[u32], radices: &[u32]) -> Result<Vec<ReliabilityRow>> {
    if r_grid.is_empty() || lanes.is_empty() || radices.is_empty() {
        return Err(Error::config("reliability_sweep", "every grid must be non-empty"));
    }
    for &r in r_grid {
        check_probability("r_flit", r)?;
    }
    if lanes.contains(&0) {
        return Err(Error::config("n_lanes", "must be at least 1"));
    }
    if radices.contains(&0) {
        return Err(Error::config("radix", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(r_grid.len() * lanes.len() * radices.len());
    for &radix in radices {
        for &n_lanes in lanes {
            for &r_flit in r_grid {
                rows.push(ReliabilityRow { radix, n_lanes, r_flit, r_min: min_reliability_uniform(r_flit, n_lanes, radix) });
            }
        }
    }
    Ok(rows)
}

/// `n + 1` evenly spaced points on [0, 1].
pub fn unit_grid(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

pub fn write_reliability_csv<W: Write>(rows: &[ReliabilityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["radix", "n_lanes", "r_flit", "R_MIN"])?;
    for row in rows {
        w.write_record([
            row.radix.to_string(),
            row.n_lanes.to_string(),
            format!("{:.6}", row.r_flit),
            format!("{:.6}", row.r_min),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn series_and_parallel_basics() {
        assert_eq!(series_reliability(&[]), 1.0);
        assert_eq!(parallel_reliability(&[]), 0.0);
        assert_eq!(series_reliability(&[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(series_reliability(&[0.5, 0.0]), 0.0);
        assert_abs_diff_eq!(series_reliability(&[0.9; 10]), 0.348_678_440_1, epsilon = 1e-10);
        assert_abs_diff_eq!(parallel_reliability(&[0.9, 0.9]), 0.99, epsilon = 1e-15);
        assert_eq!(parallel_reliability(&[1.0, 0.37]), 1.0);
        assert_eq!(parallel_reliability(&[0.5]), 0.5);
    }

    #[test]
    fn buffer_of_lanes() {
        assert_abs_diff_eq!(buffer_reliability(&[0.9; 4]), 0.9999, epsilon = 1e-12);
        assert_eq!(buffer_reliability(&[0.73]), 0.73);
        assert_eq!(buffer_reliability(&[0.9, 1.0]), 1.0);
    }

    #[test]
    fn uniform_spot_values() {
        assert_abs_diff_eq!(min_reliability_uniform(0.9, 1, 10), 0.34868, epsilon = 5e-6);
        assert_abs_diff_eq!(min_reliability_uniform(0.9, 2, 10), 0.90438, epsilon = 5e-6);
        assert_eq!(min_reliability_uniform(1.0, 3, 7), 1.0);
    }

    #[test]
    fn matrix_form_edge_cases() {
        assert_eq!(min_reliability(&vec![vec![1.0; 3]; 4], 3, 4).unwrap(), 1.0);
        let mut dead = vec![vec![0.8; 2]; 3];
        dead[1] = vec![0.0, 0.0];
        assert_eq!(min_reliability(&dead, 2, 3).unwrap(), 0.0);
        assert!(min_reliability(&vec![vec![0.9; 2]; 3], 2, 4).unwrap_err().is_config());
        assert!(min_reliability(&vec![vec![0.9; 3]; 4], 2, 4).unwrap_err().is_config());
        assert!(min_reliability(&[vec![1.2]], 1, 1).is_err());
    }

    #[test]
    fn many_lanes_approach_one() {
        for stages in 1..=10 {
            for r in [0.31, 0.5, 0.9, 1.0] {
                assert!((1.0 - min_reliability_uniform(r, 64, stages)).abs() < 1e-9);
            }
        }
        // at r = 0.3 and ten stages the gap is 10 * 0.7^64, just over 1e-9
        let gap = 1.0 - min_reliability_uniform(0.3, 64, 10);
        assert_abs_diff_eq!(gap, 1.2197609589e-9, epsilon = 1e-15);
        assert!((1.0 - min_reliability_uniform(0.3, 64, 8)).abs() < 1e-9);
    }

    #[test]
    fn sweep_layout_and_csv() {
        let rows = reliability_sweep(&[0.5, 0.9], &[1, 2], &[3, 4, 5]).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!((rows[0].radix, rows[0].n_lanes, rows[0].r_flit), (3, 1, 0.5));
        let one = reliability_sweep(&[0.9], &[2], &[10]).unwrap();
        assert_eq!(one[0].r_min, min_reliability_uniform(0.9, 2, 10));
        assert!(reliability_sweep(&[], &[1], &[3]).is_err());

        let mut buf = Vec::new();
        write_reliability_csv(&one, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "radix,n_lanes,r_flit,R_MIN\n10,2,0.900000,0.904382\n");
    }

    #[test]
    fn dual_lane_dominates_single_lane() {
        for row in reliability_sweep(&unit_grid(50), &[1], &(3..=10).collect::<Vec<_>>()).unwrap() {
            let dual = min_reliability_uniform(row.r_flit, 2, row.radix);
            if row.r_flit > 0.0 && row.r_flit < 1.0 {
                assert!(dual > row.r_min);
            }
        }
    }

    proptest! {
        #[test]
        fn uniform_is_monotone(r in 0.0f64..1.0, dr in 0.0f64..0.5, lanes in 1u32..16, stages in 1u32..12) {
            let base = min_reliability_uniform(r, lanes, stages);
            prop_assert!(min_reliability_uniform((r + dr).min(1.0), lanes, stages) >= base);
            prop_assert!(min_reliability_uniform(r, lanes + 1, stages) >= base);
            prop_assert!(min_reliability_uniform(r, lanes, stages + 1) <= base);
        }

        #[test]
        fn matrix_matches_closed_form(r in 0.0f64..=1.0, lanes in 1usize..8, stages in 1usize..12) {
            let m = vec![vec![r; lanes]; stages];
            let general = min_reliability(&m, lanes, stages).unwrap();
            prop_assert!((general - min_reliability_uniform(r, lanes as u32, stages as u32)).abs() < 1e-12);
        }
    }
}
