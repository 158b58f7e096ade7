use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{analyze_power_compiled, analyze_timing_compiled, flat, PowerConfig};
use crate::error::Result;
use crate::library::CellLibrary;
use crate::netlist::{Compiled, Netlist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaReport {
    /// µm²
    pub area: f64,
    pub cell_count: usize,
    pub cell_histogram: BTreeMap<String, usize>,
    /// mW
    pub leakage: f64,
    /// mW
    pub dynamic: f64,
    /// ps
    pub critical_path: f64,
    /// ps
    pub worst_slew: f64,
}

impl PpaReport {
    pub fn fingerprint(&self) -> PpaFingerprint {
        fingerprint(self)
    }

    pub fn ff_count(&self, lib: &CellLibrary) -> usize {
        self.cell_histogram
            .iter()
            .filter(|(c, _)| {
                lib.get(c)
                    .is_some_and(|s| s.kind == crate::library::CellKind::Ff)
            })
            .map(|(_, n)| n)
            .sum()
    }
}

/// Rounded PPA values used as the deduplication key. Values are stored as
/// integers in units of the rounding step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PpaFingerprint {
    /// 0.1 µm²
    pub area_r: i64,
    pub cells: usize,
    /// µW (0.001 mW)
    pub leak_r: i64,
    /// µW (0.001 mW)
    pub dyn_r: i64,
    /// ps
    pub cp_r: i64,
}

impl PpaFingerprint {
    pub fn area(&self) -> f64 {
        self.area_r as f64 / 10.0
    }

    pub fn leakage(&self) -> f64 {
        self.leak_r as f64 / 1000.0
    }

    pub fn dynamic(&self) -> f64 {
        self.dyn_r as f64 / 1000.0
    }
}

impl fmt::Display for PpaFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "area={:.1} cells={} leak={:.3} dyn={:.3} cp={}",
            self.area(),
            self.cells,
            self.leakage(),
            self.dynamic(),
            self.cp_r
        )
    }
}

fn round_to(v: f64, step: f64) -> i64 {
    // Bias so that sums landing a hair below a half step still round up.
    (v / step + 1e-9).round() as i64
}

pub fn fingerprint(r: &PpaReport) -> PpaFingerprint {
    PpaFingerprint {
        area_r: round_to(r.area, 0.1),
        cells: r.cell_count,
        leak_r: round_to(r.leakage, 0.001),
        dyn_r: round_to(r.dynamic, 0.001),
        cp_r: round_to(r.critical_path, 1.0),
    }
}

pub fn analyze_ppa(netlist: &Netlist, lib: &CellLibrary, power: &PowerConfig) -> Result<PpaReport> {
    let netlist = flat(netlist)?;
    let module = netlist.top_module();
    let c = Compiled::new(module, lib)?;
    let timing = analyze_timing_compiled(&c);
    let p = analyze_power_compiled(&c, power);
    let cell_histogram = module.cell_histogram();
    Ok(PpaReport {
        area: c.cells.iter().map(|x| x.spec.area).sum(),
        cell_count: cell_histogram.values().sum(),
        cell_histogram,
        leakage: p.leakage,
        dynamic: p.dynamic,
        critical_path: timing.critical_path,
        worst_slew: timing.worst_slew,
    })
}
