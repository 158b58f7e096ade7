use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::edit::{add_cell, new_net, sweep_dead_logic, Index};
use super::{require_flat, PassResult};
use crate::error::{Error, Result};
use crate::library::{CellKind, CellLibrary, VAR_PATTERNS};
use crate::netlist::{ModuleDef, Netlist};

const PASS: &str = "clock-gating";
const MAX_LEAVES: usize = 6;
const MAX_DEPTH: usize = 3;

/// A recirculating register `D = en ? data : Q`.
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    ff: usize,
    clock: String,
    enable: String,
    active_high: bool,
    data: String,
    /// The data net carries the complement of the value to load.
    data_inverted: bool,
}

/// Replaces enable-mux feedback on groups of registers with an integrated
/// clock gate. Groups share clock, enable net and enable polarity; groups
/// smaller than `min_group` are left alone.
pub fn clock_gating(netlist: &Netlist, lib: &CellLibrary, min_group: usize) -> Result<PassResult> {
    require_flat(netlist, PASS)?;
    let icg = lib.clock_gate().ok_or_else(|| Error::Pass {
        pass: PASS,
        message: "no clock-gate cell available in library".into(),
    })?;
    let mut out = netlist.clone();
    let m = out.top_module_mut();
    let ix = Index::build(m, lib);
    let cands: Vec<Candidate> = (0..m.instances.len())
        .filter_map(|i| detect(m, lib, &ix, i))
        .collect();

    let mut groups: BTreeMap<(String, String, bool), Vec<Candidate>> = BTreeMap::new();
    for c in cands {
        groups
            .entry((c.clock.clone(), c.enable.clone(), c.active_high))
            .or_default()
            .push(c);
    }
    let mut ordered: Vec<Vec<Candidate>> = groups.into_values().collect();
    ordered.sort_by(|a, b| first_name(m, a).cmp(first_name(m, b)));

    let mut log = Vec::new();
    let mut gated = 0;
    let inv = lib.inverter().map(|c| c.name.clone());
    let icg_out = icg.output().to_string();
    for group in ordered {
        let c0 = &group[0];
        if group.len() < min_group.max(1) {
            log.push(format!(
                "skipped group of {} on enable {} (below minimum {min_group})",
                group.len(),
                c0.enable
            ));
            continue;
        }
        let needs_inv = !c0.active_high || group.iter().any(|c| c.data_inverted);
        if needs_inv && inv.is_none() {
            continue;
        }
        let en = if c0.active_high {
            c0.enable.clone()
        } else {
            let n = new_net(m, &format!("{}_n", c0.enable));
            add_cell(
                m,
                "cg_inv",
                inv.as_deref().unwrap(),
                &[("A", &c0.enable), ("Y", &n)],
            );
            n
        };
        let gclk = new_net(m, "cg_gclk");
        let name = add_cell(
            m,
            "cg",
            &icg.name,
            &[("CK", &c0.clock), ("E", &en), (icg_out.as_str(), &gclk)],
        );
        for c in &group {
            let data = if c.data_inverted {
                let n = new_net(m, &format!("{}_n", c.data));
                add_cell(
                    m,
                    "cg_inv",
                    inv.as_deref().unwrap(),
                    &[("A", &c.data), ("Y", &n)],
                );
                n
            } else {
                c.data.clone()
            };
            let ff = &mut m.instances[c.ff];
            ff.connections.insert("CK".into(), gclk.clone());
            ff.connections.insert("D".into(), data);
        }
        gated += group.len();
        log.push(format!(
            "{name}: gated {} flops on clock {} with enable {}{}",
            group.len(),
            c0.clock,
            if c0.active_high { "" } else { "!" },
            c0.enable
        ));
    }
    let swept = sweep_dead_logic(m, lib);
    let mut r = PassResult::new(out);
    for l in log {
        r.note(PASS, l);
    }
    r.note(PASS, format!("{gated} flops gated, {swept} cells removed"));
    Ok(r)
}

fn first_name<'a>(m: &'a ModuleDef, g: &[Candidate]) -> &'a str {
    g.iter()
        .map(|c| m.instances[c.ff].name.as_str())
        .min()
        .unwrap_or("")
}

fn pattern_mask(k: usize) -> u64 {
    if k >= 6 {
        !0
    } else {
        (1u64 << (1u32 << k)) - 1
    }
}

fn detect(m: &ModuleDef, lib: &CellLibrary, ix: &Index, ff: usize) -> Option<Candidate> {
    let inst = &m.instances[ff];
    let spec = lib.get(inst.cell_name()?)?;
    if spec.kind != CellKind::Ff {
        return None;
    }
    let clock = inst.pin("CK")?.to_string();
    let d = inst.pin("D")?;
    let q = inst.pin("Q");
    let qn = inst.pin("QN");
    for depth in 1..=MAX_DEPTH {
        let cone = collect_cone(m, lib, ix, d, depth, &[q, qn])?;
        let leaves = cone_leaves(m, lib, ix, &cone);
        if leaves.len() > MAX_LEAVES {
            return None;
        }
        let (qi, q_inv) = match (
            q.and_then(|q| leaves.iter().position(|l| l == q)),
            qn.and_then(|qn| leaves.iter().position(|l| l == qn)),
        ) {
            (Some(i), _) => (i, false),
            (None, Some(i)) => (i, true),
            _ => continue,
        };
        if let Some(c) = match_mux(m, lib, ix, &cone, &leaves, qi, q_inv, ff, &clock) {
            return Some(c);
        }
    }
    None
}

/// Combinational cells feeding `root` up to `depth` levels, where each
/// internal net is read only inside the cone.
fn collect_cone(
    m: &ModuleDef,
    lib: &CellLibrary,
    ix: &Index,
    root: &str,
    depth: usize,
    stop: &[Option<&str>],
) -> Option<BTreeSet<usize>> {
    let comb = |net: &str| -> Option<usize> {
        let (i, _) = ix.driver_of(net)?;
        let spec = lib.get(m.instances[i].cell_name()?)?;
        (!spec.kind.is_sequential()).then_some(i)
    };
    let mut cone = BTreeSet::from([comb(root)?]);
    let mut frontier: Vec<usize> = cone.iter().copied().collect();
    for _ in 1..depth {
        let mut next = Vec::new();
        for c in frontier {
            for (pin, net) in &m.instances[c].connections {
                let spec = lib.get(m.instances[c].cell_name()?)?;
                if !spec.is_input(pin) || stop.contains(&Some(net.as_str())) {
                    continue;
                }
                if ix.fanout(net) != 1 || ix.is_port(net) {
                    continue;
                }
                if let Some(d) = comb(net) {
                    if cone.insert(d) {
                        next.push(d);
                    }
                }
            }
        }
        frontier = next;
    }
    Some(cone)
}

fn cone_leaves(
    m: &ModuleDef,
    lib: &CellLibrary,
    ix: &Index,
    cone: &BTreeSet<usize>,
) -> Vec<String> {
    let mut leaves = BTreeSet::new();
    for &c in cone {
        let inst = &m.instances[c];
        let spec = lib.get(inst.cell_name().unwrap()).unwrap();
        for (pin, net) in &inst.connections {
            if spec.is_input(pin) && !ix.driver_of(net).is_some_and(|(d, _)| cone.contains(&d)) {
                leaves.insert(net.clone());
            }
        }
    }
    leaves.into_iter().collect()
}

/// Truth tables over the leaves for every net in the cone.
fn cone_words(
    m: &ModuleDef,
    lib: &CellLibrary,
    ix: &Index,
    cone: &BTreeSet<usize>,
    leaves: &[String],
) -> HashMap<String, u64> {
    fn eval(
        net: &str,
        m: &ModuleDef,
        lib: &CellLibrary,
        ix: &Index,
        words: &mut HashMap<String, u64>,
    ) -> u64 {
        if let Some(&w) = words.get(net) {
            return w;
        }
        let (c, pin) = ix.driver_of(net).expect("cone net is driven");
        let inst = &m.instances[c];
        let spec = lib.get(inst.cell_name().unwrap()).unwrap();
        let ins: Vec<u64> = spec
            .inputs()
            .iter()
            .map(|p| match inst.pin(p) {
                Some(n) => eval(n, m, lib, ix, words),
                None => 0,
            })
            .collect();
        let w = spec.output_expr(pin).map_or(0, |e| e.eval(&ins));
        words.insert(net.to_string(), w);
        w
    }
    let mut words: HashMap<String, u64> = leaves
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), VAR_PATTERNS[i]))
        .collect();
    for l in leaves {
        if let Some(v) = crate::netlist::const_value(l) {
            words.insert(l.clone(), if v { !0 } else { 0 });
        }
    }
    for &c in cone {
        let inst = &m.instances[c];
        let spec = lib.get(inst.cell_name().unwrap()).unwrap();
        for (pin, net) in &inst.connections {
            if spec.is_output(pin) {
                eval(net, m, lib, ix, &mut words);
            }
        }
    }
    words
}

#[allow(clippy::too_many_arguments)]
fn match_mux(
    m: &ModuleDef,
    lib: &CellLibrary,
    ix: &Index,
    cone: &BTreeSet<usize>,
    leaves: &[String],
    qi: usize,
    q_inv: bool,
    ff: usize,
    clock: &str,
) -> Option<Candidate> {
    let words = cone_words(m, lib, ix, cone, leaves);
    let inst = &m.instances[ff];
    let d = inst.pin("D")?;
    let dw = words[d];
    let k = leaves.len();
    let mask = pattern_mask(k);
    let qw = if q_inv {
        !VAR_PATTERNS[qi]
    } else {
        VAR_PATTERNS[qi]
    };
    let q_flip = |w: u64| -> u64 {
        // value of w with the q variable inverted, per row
        let v = VAR_PATTERNS[qi];
        let s = 1u32 << qi;
        ((w & v) >> s) | ((w & !v) << s)
    };
    let mut cands: Vec<&String> = leaves.iter().collect();
    let mut internal: Vec<&String> = words.keys().filter(|n| !leaves.contains(n)).collect();
    internal.sort();
    cands.extend(internal);

    for (ei, e) in leaves.iter().enumerate() {
        if ei == qi || crate::netlist::const_value(e).is_some() || Some(e.as_str()) == inst.pin("Q")
        {
            continue;
        }
        if e == clock {
            continue;
        }
        for active_high in [true, false] {
            let ev = VAR_PATTERNS[ei];
            let active = (if active_high { ev } else { !ev }) & mask;
            let inactive = !active & mask;
            if (dw ^ qw) & inactive != 0 {
                continue;
            }
            if (dw ^ q_flip(dw)) & active != 0 {
                continue;
            }
            // The loaded value must not be a constant hold of Q either.
            for (inverted, net) in cands
                .iter()
                .flat_map(|n| [(false, *n), (true, *n)])
                .filter(|(_, n)| *n != e)
            {
                let w = if inverted {
                    !words[net.as_str()]
                } else {
                    words[net.as_str()]
                };
                if (w ^ dw) & active == 0 {
                    if Some(net.as_str()) == inst.pin("Q") || Some(net.as_str()) == inst.pin("QN") {
                        return None;
                    }
                    return Some(Candidate {
                        ff,
                        clock: clock.to_string(),
                        enable: e.clone(),
                        active_high,
                        data: net.clone(),
                        data_inverted: inverted,
                    });
                }
            }
        }
    }
    None
}
