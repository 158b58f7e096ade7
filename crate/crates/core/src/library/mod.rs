//! Standard-cell library model.
//!
//! A library is loaded from a `.cl` document (TOML, one `[[cell]]` table per
//! cell). Cells carry a boolean function, area, leakage, per-pin input
//! capacitance and a linear drive model:
//!
//! * stage delay (ps) = `intrinsic_delay + drive_res * load_fF`
//! * output slew (ps) = `slew_factor * drive_res * load_fF`
//!
//! Sequential cells follow fixed pin conventions: flip-flops use `D`/`CK`
//! with outputs `Q` and optionally `QN`; clock gates use `CK`/`E` with output
//! `GCLK`.

mod expr;
mod subst;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use expr::{parse_expr, parse_function, Expr, ExprError, VAR_PATTERNS};
pub use subst::{
    functional_equivalents, functional_equivalents_for, Substitution, Template, TemplateSource,
};

/// Library shipped with the toolkit.
pub const BUNDLED_LIBRARY: &str = include_str!("../../data/synth24.cl");

pub fn bundled_library() -> CellLibrary {
    load_library(BUNDLED_LIBRARY).expect("bundled library is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Combinational,
    Ff,
    Icg,
    Buf,
    Inv,
}

impl CellKind {
    pub fn is_sequential(self) -> bool {
        matches!(self, CellKind::Ff | CellKind::Icg)
    }
}

/// On-disk shape of one cell record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    name: String,
    kind: CellKind,
    function: String,
    area: f64,
    leakage: f64,
    input_caps: BTreeMap<String, f64>,
    drive_res: f64,
    intrinsic_delay: f64,
    max_output_slew: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryRecord {
    name: String,
    slew_factor: f64,
    #[serde(default)]
    dont_use: Vec<String>,
    #[serde(rename = "cell", default)]
    cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub name: String,
    pub kind: CellKind,
    pub function: String,
    pub area: f64,
    pub leakage: f64,
    pub input_caps: BTreeMap<String, f64>,
    pub drive_res: f64,
    pub intrinsic_delay: f64,
    pub max_output_slew: f64,
    inputs: Vec<String>,
    outputs: Vec<(String, Expr)>,
}

impl CellSpec {
    /// Input pins in sorted order; expression variables index into this.
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[(String, Expr)] {
        &self.outputs
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_input(&self, pin: &str) -> bool {
        self.input_caps.contains_key(pin)
    }

    pub fn is_output(&self, pin: &str) -> bool {
        self.outputs.iter().any(|(n, _)| n == pin)
    }

    pub fn has_pin(&self, pin: &str) -> bool {
        self.is_input(pin) || self.is_output(pin)
    }

    pub fn input_index(&self, pin: &str) -> Option<usize> {
        self.inputs.iter().position(|p| p == pin)
    }

    pub fn cap(&self, pin: &str) -> f64 {
        self.input_caps.get(pin).copied().unwrap_or(0.0)
    }

    pub fn output_expr(&self, pin: &str) -> Option<&Expr> {
        self.outputs.iter().find(|(n, _)| n == pin).map(|(_, e)| e)
    }

    /// The single output of a combinational cell.
    pub fn output(&self) -> &str {
        &self.outputs[0].0
    }

    /// Truth table of the (first) output over the sorted input pins.
    pub fn truth_table(&self) -> u64 {
        self.outputs[0].1.truth_table(self.inputs.len())
    }

    pub fn is_combinational(&self) -> bool {
        !self.kind.is_sequential()
    }

    pub fn stage_delay(&self, load_ff: f64) -> f64 {
        self.intrinsic_delay + self.drive_res * load_ff
    }

    fn from_record(r: CellRecord) -> Result<Self> {
        let bad = |msg: String| Error::Library(format!("cell {}: {msg}", r.name));
        if r.name.is_empty() {
            return Err(Error::Library("cell with empty name".into()));
        }
        if !(r.area > 0.0) {
            return Err(bad(format!("area must be > 0, got {}", r.area)));
        }
        if !(r.leakage >= 0.0) {
            return Err(bad(format!("leakage must be >= 0, got {}", r.leakage)));
        }
        if !(r.drive_res > 0.0) {
            return Err(bad(format!("drive_res must be > 0, got {}", r.drive_res)));
        }
        if !(r.intrinsic_delay >= 0.0) || !(r.max_output_slew > 0.0) {
            return Err(bad("timing values must be non-negative".into()));
        }
        if let Some((p, c)) = r.input_caps.iter().find(|(_, c)| !(**c >= 0.0)) {
            return Err(bad(format!("capacitance of pin {p} must be >= 0, got {c}")));
        }
        let inputs: Vec<String> = r.input_caps.keys().cloned().collect();
        if inputs.len() > 6 {
            return Err(bad("at most 6 input pins are supported".into()));
        }
        let outputs = parse_function(&r.function, &inputs).map_err(|e| bad(e.to_string()))?;
        let require = |pins: &[&str]| -> Result<()> {
            for p in pins {
                if !r.input_caps.contains_key(*p) {
                    return Err(bad(format!("missing required input pin {p}")));
                }
            }
            Ok(())
        };
        match r.kind {
            CellKind::Combinational | CellKind::Buf | CellKind::Inv => {
                if outputs.len() != 1 {
                    return Err(bad("combinational cells have exactly one output".into()));
                }
                if r.kind != CellKind::Combinational {
                    let want = if r.kind == CellKind::Buf { 0b10 } else { 0b01 };
                    if inputs.len() != 1 || outputs[0].1.truth_table(1) != want {
                        return Err(bad(format!(
                            "{:?} cell must implement Y = {}A",
                            r.kind,
                            if want == 1 { "!" } else { "" }
                        )));
                    }
                }
            }
            CellKind::Ff => {
                require(&["D", "CK"])?;
                if inputs.len() != 2 {
                    return Err(bad("flip-flops have exactly the pins D and CK".into()));
                }
                let d = inputs.iter().position(|p| p == "D").unwrap();
                for (name, e) in &outputs {
                    let ok = match name.as_str() {
                        "Q" => *e == Expr::Var(d),
                        "QN" => *e == Expr::Not(Box::new(Expr::Var(d))),
                        _ => false,
                    };
                    if !ok {
                        return Err(bad(format!(
                            "flip-flop output {name} must be Q = D or QN = !D"
                        )));
                    }
                }
                if !outputs.iter().any(|(n, _)| n == "Q") {
                    return Err(bad("flip-flop lacks output Q".into()));
                }
            }
            CellKind::Icg => {
                require(&["CK", "E"])?;
                if outputs.len() != 1 || outputs[0].0 != "GCLK" || inputs.len() != 2 {
                    return Err(bad("clock gates have pins CK, E and output GCLK".into()));
                }
            }
        }
        Ok(Self {
            name: r.name,
            kind: r.kind,
            function: r.function,
            area: r.area,
            leakage: r.leakage,
            input_caps: r.input_caps,
            drive_res: r.drive_res,
            intrinsic_delay: r.intrinsic_delay,
            max_output_slew: r.max_output_slew,
            inputs,
            outputs,
        })
    }

    fn to_record(&self) -> CellRecord {
        CellRecord {
            name: self.name.clone(),
            kind: self.kind,
            function: self.function.clone(),
            area: self.area,
            leakage: self.leakage,
            input_caps: self.input_caps.clone(),
            drive_res: self.drive_res,
            intrinsic_delay: self.intrinsic_delay,
            max_output_slew: self.max_output_slew,
        }
    }
}

pub const TT_NAND2: u64 = 0b0111;
pub const TT_NOR2: u64 = 0b0001;
pub const TT_INV: u64 = 0b01;

#[derive(Debug, Clone, PartialEq)]
pub struct CellLibrary {
    pub name: String,
    cells: BTreeMap<String, CellSpec>,
    banned: BTreeSet<String>,
    pub slew_factor: f64,
}

impl CellLibrary {
    pub fn get(&self, name: &str) -> Option<&CellSpec> {
        self.cells.get(name)
    }

    /// All cells, banned or not, in name order.
    pub fn cells(&self) -> impl Iterator<Item = &CellSpec> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn banned(&self) -> &BTreeSet<String> {
        &self.banned
    }

    pub fn is_available(&self, name: &str) -> bool {
        self.cells.contains_key(name) && !self.banned.contains(name)
    }

    pub fn available(&self) -> impl Iterator<Item = &CellSpec> {
        self.cells
            .values()
            .filter(|c| !self.banned.contains(&c.name))
    }

    /// Cheapest available cell matching `pred`; ties broken by name.
    pub fn cheapest(&self, pred: impl Fn(&CellSpec) -> bool) -> Option<&CellSpec> {
        self.available()
            .filter(|c| pred(c))
            .min_by(|a, b| a.area.total_cmp(&b.area).then_with(|| a.name.cmp(&b.name)))
    }

    /// Available buffer with the lowest drive resistance.
    pub fn strongest_buffer(&self) -> Option<&CellSpec> {
        self.available()
            .filter(|c| c.kind == CellKind::Buf)
            .min_by(|a, b| {
                a.drive_res
                    .total_cmp(&b.drive_res)
                    .then_with(|| a.name.cmp(&b.name))
            })
    }

    pub fn inverter(&self) -> Option<&CellSpec> {
        self.cheapest(|c| c.kind == CellKind::Inv)
    }

    pub fn clock_gate(&self) -> Option<&CellSpec> {
        self.cheapest(|c| c.kind == CellKind::Icg)
    }

    /// Cheapest available flip-flop providing a QN output.
    pub fn qn_flop(&self) -> Option<&CellSpec> {
        self.cheapest(|c| c.kind == CellKind::Ff && c.is_output("QN"))
    }

    /// Checks the functional-completeness invariant on the available set.
    pub fn check_completeness(&self) -> std::result::Result<(), String> {
        let two_in = |tt: u64| {
            self.available().any(|c| {
                c.kind == CellKind::Combinational && c.inputs.len() == 2 && c.truth_table() == tt
            })
        };
        if !(two_in(TT_NAND2) || two_in(TT_NOR2)) {
            return Err("no NAND2 or NOR2 cell remains".into());
        }
        if !self
            .available()
            .any(|c| c.inputs.len() == 1 && c.is_combinational() && c.truth_table() == TT_INV)
        {
            return Err("no inverter remains".into());
        }
        if !self.available().any(|c| c.kind == CellKind::Ff) {
            return Err("no flip-flop remains".into());
        }
        if !self.available().any(|c| c.kind == CellKind::Buf) {
            return Err("no buffer remains".into());
        }
        Ok(())
    }
}

pub fn load_library(text: &str) -> Result<CellLibrary> {
    let rec: LibraryRecord =
        toml::from_str(text).map_err(|e| Error::Library(format!("schema: {e}")))?;
    if !(rec.slew_factor > 0.0) {
        return Err(Error::Library("slew_factor must be > 0".into()));
    }
    let mut cells = BTreeMap::new();
    for r in rec.cells {
        let name = r.name.clone();
        let spec = CellSpec::from_record(r)?;
        if cells.insert(name.clone(), spec).is_some() {
            return Err(Error::Library(format!("duplicate cell name {name}")));
        }
    }
    let mut lib = CellLibrary {
        name: rec.name,
        cells,
        banned: BTreeSet::new(),
        slew_factor: rec.slew_factor,
    };
    for c in rec.dont_use {
        lib = mask_dont_use(&lib, &c)?;
    }
    Ok(lib)
}

pub fn write_library(lib: &CellLibrary) -> String {
    let rec = LibraryRecord {
        name: lib.name.clone(),
        slew_factor: lib.slew_factor,
        dont_use: lib.banned.iter().cloned().collect(),
        cells: lib.cells.values().map(CellSpec::to_record).collect(),
    };
    toml::to_string(&rec).expect("library serializes")
}

/// Returns a copy of `lib` with `cell` excluded from use.
pub fn mask_dont_use(lib: &CellLibrary, cell: &str) -> Result<CellLibrary> {
    if !lib.cells.contains_key(cell) {
        return Err(Error::Library(format!("unknown cell {cell}")));
    }
    let mut out = lib.clone();
    out.banned.insert(cell.to_string());
    out.check_completeness()
        .map_err(|reason| Error::Incomplete {
            cell: cell.to_string(),
            reason,
        })?;
    Ok(out)
}
