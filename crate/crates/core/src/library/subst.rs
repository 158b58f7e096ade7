//! Functional substitutes for a cell, used when the cell is excluded.

use std::fmt;

use super::{CellKind, CellLibrary, CellSpec, VAR_PATTERNS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateSource {
    /// An input pin of the replaced cell.
    Input(String),
    /// The output of the template's inner cell.
    Inner,
}

/// A depth-two composition `outer(.., inner(..), ..)` over library cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub outer: String,
    pub outer_pins: Vec<(String, TemplateSource)>,
    /// Inner cell and the replaced-cell input driving each of its pins.
    pub inner: Option<(String, Vec<(String, String)>)>,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Substitution {
    /// Another cell with the same pins and truth table.
    SameFunction(String),
    Decomposition(Template),
    /// A flip-flop without QN plus an inverter rebuilding QN from Q.
    FlopWithInverter {
        flop: String,
        inverter: String,
    },
}

impl Substitution {
    fn rank(&self) -> u8 {
        match self {
            Substitution::SameFunction(_) => 0,
            _ => 1,
        }
    }

    fn area(&self, lib: &CellLibrary) -> f64 {
        match self {
            Substitution::SameFunction(c) => lib.get(c).map_or(f64::MAX, |c| c.area),
            Substitution::Decomposition(t) => t.area,
            Substitution::FlopWithInverter { flop, inverter } => {
                lib.get(flop).map_or(f64::MAX, |c| c.area)
                    + lib.get(inverter).map_or(f64::MAX, |c| c.area)
            }
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Substitution::SameFunction(c) => write!(f, "SameFunction({c})"),
            Substitution::Decomposition(t) => match &t.inner {
                Some((inner, _)) => write!(f, "Decomposition({inner} -> {})", t.outer),
                None => write!(f, "Decomposition({})", t.outer),
            },
            Substitution::FlopWithInverter { flop, inverter } => {
                write!(f, "FlopWithInverter({flop} + {inverter})")
            }
        }
    }
}

/// Substitutes for `cell` covering every output pin.
pub fn functional_equivalents(lib: &CellLibrary, cell: &str) -> Vec<Substitution> {
    let Some(spec) = lib.get(cell) else {
        return Vec::new();
    };
    let outs: Vec<&str> = spec.output_names().collect();
    functional_equivalents_for(lib, cell, &outs)
}

/// Substitutes for `cell` that only need to reproduce `used_outputs`.
///
/// The list is ordered by estimated area ascending, with same-function cells
/// ahead of multi-cell templates. Banned cells never appear.
pub fn functional_equivalents_for(
    lib: &CellLibrary,
    cell: &str,
    used_outputs: &[&str],
) -> Vec<Substitution> {
    let Some(spec) = lib.get(cell) else {
        return Vec::new();
    };
    let mut subs = match spec.kind {
        CellKind::Ff => flop_equivalents(lib, spec, used_outputs),
        CellKind::Icg => lib
            .available()
            .filter(|c| c.kind == CellKind::Icg && c.name != spec.name)
            .map(|c| Substitution::SameFunction(c.name.clone()))
            .collect(),
        _ => combinational_equivalents(lib, spec),
    };
    subs.sort_by(|a, b| {
        a.rank()
            .cmp(&b.rank())
            .then(a.area(lib).total_cmp(&b.area(lib)))
            .then_with(|| a.to_string().cmp(&b.to_string()))
    });
    subs
}

fn flop_equivalents(lib: &CellLibrary, spec: &CellSpec, used: &[&str]) -> Vec<Substitution> {
    let mut subs: Vec<Substitution> = lib
        .available()
        .filter(|c| c.kind == CellKind::Ff && c.name != spec.name)
        .filter(|c| used.iter().all(|p| c.is_output(p)))
        .map(|c| Substitution::SameFunction(c.name.clone()))
        .collect();
    if used.contains(&"QN") {
        let flop = lib.cheapest(|c| c.kind == CellKind::Ff && c.name != spec.name);
        if let (Some(flop), Some(inv)) = (flop, lib.inverter()) {
            subs.push(Substitution::FlopWithInverter {
                flop: flop.name.clone(),
                inverter: inv.name.clone(),
            });
        }
    }
    subs
}

fn pattern_mask(arity: usize) -> u64 {
    let rows = 1u32 << arity;
    if rows >= 64 {
        !0
    } else {
        (1u64 << rows) - 1
    }
}

/// Iterates every assignment of `slots` positions to values in `0..choices`.
fn assignments(slots: usize, choices: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = choices.checked_pow(slots as u32).unwrap_or(0);
    (0..total).map(move |mut n| {
        let mut v = Vec::with_capacity(slots);
        for _ in 0..slots {
            v.push(n % choices);
            n /= choices;
        }
        v
    })
}

fn combinational_equivalents(lib: &CellLibrary, spec: &CellSpec) -> Vec<Substitution> {
    let arity = spec.inputs().len();
    let mask = pattern_mask(arity);
    let target = spec.truth_table();
    let vars: Vec<u64> = (0..arity).map(|i| VAR_PATTERNS[i]).collect();
    let mut subs = Vec::new();
    let candidates: Vec<&CellSpec> = lib
        .available()
        .filter(|c| c.is_combinational() && c.name != spec.name)
        .collect();

    for c in &candidates {
        if c.inputs() == spec.inputs() && c.output() == spec.output() && c.truth_table() == target {
            subs.push(Substitution::SameFunction(c.name.clone()));
        }
    }
    let same: Vec<String> = subs
        .iter()
        .filter_map(|s| match s {
            Substitution::SameFunction(n) => Some(n.clone()),
            _ => None,
        })
        .collect();

    for outer in &candidates {
        let m = outer.inputs().len();
        // single cell with permuted or tied inputs
        if !same.contains(&outer.name) {
            for assign in assignments(m, arity) {
                let words: Vec<u64> = assign.iter().map(|&v| vars[v]).collect();
                if outer.outputs()[0].1.eval(&words) & mask == target {
                    subs.push(Substitution::Decomposition(Template {
                        outer: outer.name.clone(),
                        outer_pins: outer
                            .inputs()
                            .iter()
                            .zip(&assign)
                            .map(|(p, &v)| {
                                (p.clone(), TemplateSource::Input(spec.inputs()[v].clone()))
                            })
                            .collect(),
                        inner: None,
                        area: outer.area,
                    }));
                    break;
                }
            }
        }
        'inner: for inner in &candidates {
            let mi = inner.inputs().len();
            for iassign in assignments(mi, arity) {
                let iwords: Vec<u64> = iassign.iter().map(|&v| vars[v]).collect();
                let inner_word = inner.outputs()[0].1.eval(&iwords);
                for oassign in assignments(m, arity + 1) {
                    if !oassign.contains(&arity) {
                        continue;
                    }
                    let owords: Vec<u64> = oassign
                        .iter()
                        .map(|&v| if v == arity { inner_word } else { vars[v] })
                        .collect();
                    if outer.outputs()[0].1.eval(&owords) & mask == target {
                        subs.push(Substitution::Decomposition(Template {
                            outer: outer.name.clone(),
                            outer_pins: outer
                                .inputs()
                                .iter()
                                .zip(&oassign)
                                .map(|(p, &v)| {
                                    let src = if v == arity {
                                        TemplateSource::Inner
                                    } else {
                                        TemplateSource::Input(spec.inputs()[v].clone())
                                    };
                                    (p.clone(), src)
                                })
                                .collect(),
                            inner: Some((
                                inner.name.clone(),
                                inner
                                    .inputs()
                                    .iter()
                                    .zip(&iassign)
                                    .map(|(p, &v)| (p.clone(), spec.inputs()[v].clone()))
                                    .collect(),
                            )),
                            area: outer.area + inner.area,
                        }));
                        continue 'inner;
                    }
                }
            }
        }
    }
    subs
}

/// Truth table of a template over the replaced cell's sorted inputs.
#[cfg(test)]
pub(crate) fn template_truth_table(
    lib: &CellLibrary,
    spec: &CellSpec,
    t: &Template,
) -> Option<u64> {
    let arity = spec.inputs().len();
    let var = |name: &str| spec.input_index(name).map(|i| VAR_PATTERNS[i]);
    let inner_word = match &t.inner {
        Some((cell, pins)) => {
            let c = lib.get(cell)?;
            let mut words = vec![0u64; c.inputs().len()];
            for (p, src) in pins {
                words[c.input_index(p)?] = var(src)?;
            }
            Some(c.outputs()[0].1.eval(&words))
        }
        None => None,
    };
    let outer = lib.get(&t.outer)?;
    let mut words = vec![0u64; outer.inputs().len()];
    for (p, src) in &t.outer_pins {
        words[outer.input_index(p)?] = match src {
            TemplateSource::Input(n) => var(n)?,
            TemplateSource::Inner => inner_word?,
        };
    }
    Some(outer.outputs()[0].1.eval(&words) & pattern_mask(arity))
}
