//! Hardware complexity of the multi-lane fabric and of the single-lane
//! fabrics it is usually compared with.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FabricKind {
    Proposed,
    Egn,
    Asen,
    Pars,
    TwoLayered,
    ThreeLayered,
}

impl FabricKind {
    pub const ALL: [FabricKind; 6] = [
        FabricKind::Proposed,
        FabricKind::Egn,
        FabricKind::Asen,
        FabricKind::Pars,
        FabricKind::TwoLayered,
        FabricKind::ThreeLayered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FabricKind::Proposed => "proposed",
            FabricKind::Egn => "egn",
            FabricKind::Asen => "asen",
            FabricKind::Pars => "pars",
            FabricKind::TwoLayered => "two-layered",
            FabricKind::ThreeLayered => "three-layered",
        }
    }
}

impl fmt::Display for FabricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FabricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FabricKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config("kind", format!("unknown fabric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Cost of one 2x2 switch with single-lane storage.
    pub se_cost_units: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { se_cost_units: 4 }
    }
}

fn log2_exact(n_ports: u64) -> Result<u64> {
    if n_ports < 2 || !n_ports.is_power_of_two() {
        return Err(Error::config("N", format!("{n_ports} is not a power of two >= 2")));
    }
    Ok(n_ports.trailing_zeros() as u64)
}

/// Switch-count complexity. Lanes only scale the proposed fabric; the others are single-lane designs.
pub fn complexity(kind: FabricKind, n_ports: u64, n_lanes: u32) -> Result<u64> {
    let l = log2_exact(n_ports)? as i64;
    if n_lanes == 0 {
        return Err(Error::config("n_lanes", "must be at least 1"));
    }
    let n = n_ports as i64;
    let value = match kind {
        FabricKind::Proposed => n / 2 * l * n_lanes as i64,
        FabricKind::Egn | FabricKind::Pars => 6 * n + 3 * n * (l - 1),
        // N is even, so 9N/2 is exact
        FabricKind::Asen => 6 * n + 9 * n / 2 * (l - 2),
        FabricKind::TwoLayered => n / 2 * (l - 1) + 2 * n,
        FabricKind::ThreeLayered => n / 2 * (l - 1) + 3 * n,
    };
    u64::try_from(value).map_err(|_| Error::config("N", format!("complexity of {kind} at N={n_ports} is negative")))
}

/// Cost in units: single-lane complexity times the unit cost, scaled by the lane count.
pub fn cost_units(kind: FabricKind, n_ports: u64, n_lanes: u32, cfg: &CostConfig) -> Result<u64> {
    if cfg.se_cost_units == 0 {
        return Err(Error::config("se_cost_units", "must be positive"));
    }
    Ok(complexity(kind, n_ports, 1)? * cfg.se_cost_units * n_lanes as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub kind: FabricKind,
    pub radix: u32,
    pub n_lanes: u32,
    pub complexity: u64,
    pub cost_units: u64,
}

/// Rows for each kind, radix and lane count. Single-lane kinds only get `n_lanes = 1`.
pub fn cost_sweep(radices: &[u32], lanes: &[u32], kinds: &[FabricKind], cfg: &CostConfig) -> Result<Vec<CostRow>> {
    if radices.is_empty() || lanes.is_empty() || kinds.is_empty() {
        return Err(Error::config("cost_sweep", "every list must be non-empty"));
    }
    let mut rows = Vec::new();
    for &kind in kinds {
        let lane_set: &[u32] = if kind == FabricKind::Proposed { lanes } else { &[1] };
        for &n_lanes in lane_set {
            for &radix in radices {
                if !(1..=62).contains(&radix) {
                    return Err(Error::config("radix", format!("{radix} is outside 1..=62")));
                }
                let n = 1u64 << radix;
                rows.push(CostRow {
                    kind,
                    radix,
                    n_lanes,
                    complexity: complexity(kind, n, n_lanes)?,
                    cost_units: cost_units(kind, n, n_lanes, cfg)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_cost_csv<W: Write>(rows: &[CostRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "radix", "n_lanes", "complexity", "cost_units"])?;
    for r in rows {
        w.write_record([
            r.kind.name().to_string(),
            r.radix.to_string(),
            r.n_lanes.to_string(),
            r.complexity.to_string(),
            r.cost_units.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_values() {
        assert_eq!(complexity(FabricKind::Egn, 256, 1).unwrap(), 1536 + 3 * 256 * 7);
        assert_eq!(complexity(FabricKind::Egn, 256, 1).unwrap(), 6912);
        assert_eq!(complexity(FabricKind::Proposed, 1024, 8).unwrap(), 40960);
        assert_eq!(complexity(FabricKind::Proposed, 2, 1).unwrap(), 1);
        assert_eq!(complexity(FabricKind::Asen, 16, 1).unwrap(), 96 + 72 * 2);
        assert_eq!(complexity(FabricKind::TwoLayered, 8, 1).unwrap(), 8 + 16);
        assert_eq!(complexity(FabricKind::ThreeLayered, 8, 1).unwrap(), 8 + 24);
        let four = CostConfig::default();
        assert_eq!(cost_units(FabricKind::Proposed, 8, 2, &four).unwrap(), 96);
        assert_eq!(cost_units(FabricKind::Proposed, 1024, 8, &CostConfig { se_cost_units: 1 }).unwrap(), 40960);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(complexity(FabricKind::Proposed, 12, 1).unwrap_err().is_config());
        assert!(complexity(FabricKind::Egn, 1, 1).is_err());
        assert!(cost_units(FabricKind::Egn, 8, 1, &CostConfig { se_cost_units: 0 }).is_err());
    }

    #[test]
    fn egn_equals_pars_and_lanes_scale_cost() {
        let cfg = CostConfig::default();
        for radix in 1..=20 {
            let n = 1u64 << radix;
            assert_eq!(complexity(FabricKind::Egn, n, 1).unwrap(), complexity(FabricKind::Pars, n, 1).unwrap());
            for kind in FabricKind::ALL {
                let one = cost_units(kind, n, 1, &cfg).unwrap();
                assert_eq!(cost_units(kind, n, 2, &cfg).unwrap(), 2 * one);
            }
            assert_eq!(cost_units(FabricKind::Proposed, n, 1, &cfg).unwrap(), 4 * complexity(FabricKind::Proposed, n, 1).unwrap());
        }
    }

    #[test]
    fn strictly_increasing_in_size() {
        for kind in FabricKind::ALL {
            for radix in 2..=15 {
                let a = complexity(kind, 1 << radix, 3).unwrap();
                let b = complexity(kind, 1 << (radix + 1), 3).unwrap();
                assert!(b > a, "{kind} radix {radix}");
            }
        }
    }

    #[test]
    fn sweep_shapes_and_csv() {
        let rows = cost_sweep(&[3, 4], &[1, 2, 4], &FabricKind::ALL, &CostConfig::default()).unwrap();
        assert_eq!(rows.len(), 3 * 2 + 5 * 2);
        let mut buf = Vec::new();
        write_cost_csv(&rows[..1], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "kind,radix,n_lanes,complexity,cost_units\nproposed,3,1,12,48\n");
        assert_eq!("Two-Layered".parse::<FabricKind>().unwrap(), FabricKind::TwoLayered);
        assert!("banyan".parse::<FabricKind>().is_err());
    }
}
