use std::collections::BTreeSet;

use super::edit::{add_cell, merge_net, new_net, prune_nets, remove_instances, Index};
use super::{require_flat, PassResult};
use crate::error::Result;
use crate::library::{CellKind, CellLibrary};
use crate::netlist::{InstanceKind, ModuleDef, Netlist};

const PASS: &str = "bubble-push";

/// Moves inverters across flip-flops.
///
/// A flop whose Q only feeds inverters takes the inversion into its QN
/// output (switching to a QN-capable cell if needed), or, failing that,
/// stores the inverted value. A flop whose D comes from an inverter with no
/// other readers absorbs it by flipping its init value and swapping Q/QN.
pub fn bubble_push(netlist: &Netlist, lib: &CellLibrary) -> Result<PassResult> {
    require_flat(netlist, PASS)?;
    let mut out = netlist.clone();
    let m = out.top_module_mut();
    let mut done: BTreeSet<(String, u8)> = BTreeSet::new();
    let mut log = Vec::new();
    loop {
        let ix = Index::build(m, lib);
        let mut ffs: Vec<usize> = (0..m.instances.len())
            .filter(|&i| kind_of(m, lib, i) == Some(CellKind::Ff))
            .collect();
        ffs.sort_by(|a, b| m.instances[*a].name.cmp(&m.instances[*b].name));
        let mut applied = None;
        for ff in ffs {
            let name = m.instances[ff].name.clone();
            if !done.contains(&(name.clone(), 1)) {
                if let Some(msg) = push_out(m, lib, &ix, ff) {
                    applied = Some(((name, 1), msg));
                    break;
                }
            }
            if !done.contains(&(name.clone(), 2)) {
                if let Some(msg) = absorb_in(m, lib, &ix, ff) {
                    applied = Some(((name, 2), msg));
                    break;
                }
            }
        }
        match applied {
            Some((key, msg)) => {
                done.insert(key);
                log.push(msg);
            }
            None => break,
        }
    }
    prune_nets(m);
    let mut r = PassResult::new(out);
    let n = log.len();
    for l in log {
        r.note(PASS, l);
    }
    r.note(PASS, format!("{n} inversions moved"));
    Ok(r)
}

fn kind_of(m: &ModuleDef, lib: &CellLibrary, i: usize) -> Option<CellKind> {
    Some(lib.get(m.instances[i].cell_name()?)?.kind)
}

/// Makes sure the flop at `ff` has a QN pin, switching cells if allowed.
fn ensure_qn(m: &mut ModuleDef, lib: &CellLibrary, ff: usize) -> bool {
    let cell = m.instances[ff].cell_name().unwrap();
    if lib.get(cell).is_some_and(|s| s.is_output("QN")) {
        return true;
    }
    match lib.qn_flop() {
        Some(q) => {
            m.instances[ff].kind = InstanceKind::Cell(q.name.clone());
            true
        }
        None => false,
    }
}

fn can_have_qn(m: &ModuleDef, lib: &CellLibrary, ff: usize) -> bool {
    let cell = m.instances[ff].cell_name().unwrap();
    lib.get(cell).is_some_and(|s| s.is_output("QN")) || lib.qn_flop().is_some()
}

/// Q drives only inverters.
fn push_out(m: &mut ModuleDef, lib: &CellLibrary, ix: &Index, ff: usize) -> Option<String> {
    let q = m.instances[ff].pin("Q")?.to_string();
    let loads = ix.loads(&q);
    if loads.is_empty() || ix.is_port(&q) || ix.fanout(&q) != loads.len() {
        return None;
    }
    let mut invs = Vec::new();
    let mut ys = Vec::new();
    for (i, _) in loads {
        if kind_of(m, lib, *i) != Some(CellKind::Inv) {
            return None;
        }
        invs.push(*i);
        ys.push(m.instances[*i].pin("Y")?.to_string());
    }
    let name = m.instances[ff].name.clone();
    let drop: BTreeSet<usize> = invs.iter().copied().collect();
    let msg;
    if let Some(qn) = m.instances[ff].pin("QN").map(str::to_string) {
        for y in &ys {
            merge_net(m, lib, y, &qn);
        }
        m.instances[ff].connections.remove("Q");
        msg = format!("{name}: {} inverters on Q replaced by QN", invs.len());
    } else if can_have_qn(m, lib, ff) {
        ensure_qn(m, lib, ff);
        for y in &ys[1..] {
            merge_net(m, lib, y, &ys[0]);
        }
        let inst = &mut m.instances[ff];
        inst.connections.remove("Q");
        inst.connections.insert("QN".into(), ys[0].clone());
        msg = format!("{name}: {} inverters on Q moved into QN", invs.len());
    } else {
        let inv = lib.inverter()?.name.clone();
        let d = m.instances[ff].pin("D")?.to_string();
        let dn = new_net(m, &format!("{d}_n"));
        add_cell(m, &format!("{name}_bp"), &inv, &[("A", &d), ("Y", &dn)]);
        for y in &ys[1..] {
            merge_net(m, lib, y, &ys[0]);
        }
        let inst = &mut m.instances[ff];
        inst.connections.insert("D".into(), dn);
        inst.connections.insert("Q".into(), ys[0].clone());
        inst.init = !inst.init;
        msg = format!(
            "{name}: stored value inverted, {} inverters removed",
            invs.len()
        );
    }
    remove_instances(m, &drop);
    Some(msg)
}

/// D is driven by an inverter read by nothing else.
fn absorb_in(m: &mut ModuleDef, lib: &CellLibrary, ix: &Index, ff: usize) -> Option<String> {
    let d = m.instances[ff].pin("D")?.to_string();
    if ix.fanout(&d) != 1 || ix.is_port(&d) {
        return None;
    }
    let (v, _) = ix.driver_of(&d)?;
    if kind_of(m, lib, v) != Some(CellKind::Inv) {
        return None;
    }
    let a = m.instances[v].pin("A")?.to_string();
    if !can_have_qn(m, lib, ff) {
        return None;
    }
    ensure_qn(m, lib, ff);
    let inst = &mut m.instances[ff];
    let q = inst.connections.remove("Q");
    let qn = inst.connections.remove("QN");
    if let Some(q) = q {
        inst.connections.insert("QN".into(), q);
    }
    if let Some(qn) = qn {
        inst.connections.insert("Q".into(), qn);
    }
    inst.connections.insert("D".into(), a);
    inst.init = !inst.init;
    let msg = format!("{}: input inverter absorbed, Q/QN swapped", inst.name);
    remove_instances(m, &BTreeSet::from([v]));
    Some(msg)
}
