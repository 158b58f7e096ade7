use std::collections::BTreeSet;

use super::edit::{new_net, prune_nets, remove_instances, Index};
use super::{require_flat, PassResult};
use crate::error::Result;
use crate::library::{CellKind, CellLibrary};
use crate::netlist::{const_value, Compiled, Instance, ModuleDef, Netlist};
use crate::sim::analyze_timing_compiled;

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetimeObjective {
    /// Lower the critical path, then the number of endpoints on it.
    Delay,
    /// Lower the flip-flop count without lengthening the critical path.
    Area,
}

#[derive(Debug, Clone)]
enum Move {
    /// Registers on every input of a gate move to its output.
    Forward { gate: usize },
    /// A register moves from the output of a buffer or inverter to its input.
    Backward { ff: usize, gate: usize },
}

#[derive(Debug, Clone, Copy)]
struct Score {
    cp: f64,
    near: usize,
    ffs: usize,
}

/// Moves registers across gates one step at a time, accepting the first
/// move (in instance-name order) that improves the objective. Moves never
/// change the cycle latency seen at the ports.
pub fn retime(
    netlist: &Netlist,
    lib: &CellLibrary,
    objective: RetimeObjective,
    max_moves: usize,
) -> Result<PassResult> {
    let pass = match objective {
        RetimeObjective::Delay => "retime-delay",
        RetimeObjective::Area => "retime-area",
    };
    require_flat(netlist, pass)?;
    let mut cur = netlist.top_module().clone();
    let start = score(&cur, lib)?;
    let mut best = start;
    let mut log = Vec::new();
    for _ in 0..max_moves {
        let moves = candidates(&cur, lib, objective)?;
        let mut accepted = None;
        for mv in moves {
            let mut trial = cur.clone();
            let desc = apply(&mut trial, lib, &mv);
            let s = score(&trial, lib)?;
            if better(objective, s, best) {
                accepted = Some((trial, s, desc));
                break;
            }
        }
        match accepted {
            Some((m, s, desc)) => {
                log.push(format!(
                    "{desc}: cp {:.1} -> {:.1} ps, {} -> {} flops",
                    best.cp, s.cp, best.ffs, s.ffs
                ));
                cur = m;
                best = s;
            }
            None => break,
        }
    }
    prune_nets(&mut cur);
    let mut out = netlist.clone();
    *out.top_module_mut() = cur;
    let mut r = PassResult::new(out);
    let n = log.len();
    for l in log {
        r.note(pass, l);
    }
    r.note(
        pass,
        format!(
            "{n} moves; cp {:.1} -> {:.1} ps; flops {} -> {}",
            start.cp, best.cp, start.ffs, best.ffs
        ),
    );
    Ok(r)
}

fn better(objective: RetimeObjective, s: Score, best: Score) -> bool {
    match objective {
        RetimeObjective::Delay => {
            s.cp < best.cp - EPS || (s.cp <= best.cp + EPS && s.near < best.near)
        }
        RetimeObjective::Area => s.ffs < best.ffs && s.cp <= best.cp + EPS,
    }
}

fn score(m: &ModuleDef, lib: &CellLibrary) -> Result<Score> {
    let c = Compiled::new(m, lib)?;
    let t = analyze_timing_compiled(&c);
    let mut ends = Vec::new();
    let mut ffs = 0;
    for cell in &c.cells {
        match cell.kind() {
            CellKind::Ff => {
                ffs += 1;
                ends.extend(cell.input("D").map(|d| t.arrival[d]));
            }
            CellKind::Icg => ends.extend(cell.input("E").map(|e| t.arrival[e])),
            _ => {}
        }
    }
    ends.extend(c.outputs.iter().map(|(_, n)| t.arrival[*n]));
    let cp = t.critical_path;
    Ok(Score {
        cp,
        near: ends.iter().filter(|a| **a >= cp - EPS).count(),
        ffs,
    })
}

/// Longest path through each net (arrival plus the longest delay from the
/// net onward), with the critical path length.
fn criticality(c: &Compiled<'_>) -> (Vec<f64>, f64) {
    let t = analyze_timing_compiled(c);
    let n = c.num_nets();
    let mut tail = vec![0.0f64; n];
    for &ci in c.order.iter().rev() {
        let cell = &c.cells[ci];
        let down = cell
            .outputs
            .iter()
            .flatten()
            .filter(|o| !c.is_clock[**o])
            .map(|&o| cell.spec.stage_delay(c.load_cap(o)) + tail[o])
            .fold(f64::NEG_INFINITY, f64::max);
        if down == f64::NEG_INFINITY {
            continue;
        }
        for &i in cell.inputs.iter().flatten() {
            tail[i] = tail[i].max(down);
        }
    }
    (
        (0..n).map(|i| t.arrival[i] + tail[i]).collect(),
        t.critical_path,
    )
}

fn spec_of<'l>(
    m: &ModuleDef,
    lib: &'l CellLibrary,
    i: usize,
) -> Option<&'l crate::library::CellSpec> {
    lib.get(m.instances[i].cell_name()?)
}

fn candidates(m: &ModuleDef, lib: &CellLibrary, objective: RetimeObjective) -> Result<Vec<Move>> {
    let ix = Index::build(m, lib);
    let c = Compiled::new(m, lib)?;
    let is_clock = |net: &str| c.net(net).is_some_and(|n| c.is_clock[n]);
    let (crit, cp) = criticality(&c);
    // Only moves touching a critical path can improve the delay objective.
    let critical = |net: &str| {
        objective == RetimeObjective::Area || c.net(net).is_some_and(|n| crit[n] >= cp - EPS)
    };
    let mut named: Vec<(String, Move)> = Vec::new();

    for (gi, inst) in m.instances.iter().enumerate() {
        let Some(spec) = spec_of(m, lib, gi) else {
            continue;
        };
        if spec.kind.is_sequential() || spec.outputs().len() != 1 {
            continue;
        }
        let Some(out) = inst.pin(spec.output()) else {
            continue;
        };
        if is_clock(out) || !critical(out) {
            continue;
        }
        // forward
        let mut srcs = Vec::new();
        let mut ok = true;
        for pin in spec.inputs() {
            let Some(net) = inst.pin(pin) else {
                ok = false;
                break;
            };
            if const_value(net).is_some() {
                continue;
            }
            match ix.driver_of(net) {
                Some((f, "Q")) if spec_of(m, lib, f).is_some_and(|s| s.kind == CellKind::Ff) => {
                    srcs.push(f)
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && !srcs.is_empty() {
            let f0 = &m.instances[srcs[0]];
            let same = srcs.iter().all(|&f| {
                let fi = &m.instances[f];
                fi.cell_name() == f0.cell_name()
                    && fi.pin("CK") == f0.pin("CK")
                    && fi.pin("D").is_some()
            });
            let distinct: BTreeSet<usize> = srcs.iter().copied().collect();
            let frees = distinct
                .iter()
                .filter(|&&f| {
                    let q = m.instances[f].pin("Q").unwrap();
                    m.instances[f].pin("QN").is_none()
                        && !ix.is_port(q)
                        && ix.loads(q).iter().all(|(l, _)| *l == gi)
                })
                .count();
            let useful = match objective {
                RetimeObjective::Delay => true,
                RetimeObjective::Area => frees > 1,
            };
            if same && useful {
                named.push((inst.name.clone(), Move::Forward { gate: gi }));
            }
        }
        // backward
        if objective == RetimeObjective::Delay && matches!(spec.kind, CellKind::Buf | CellKind::Inv)
        {
            let Some(a) = inst.pin(spec.inputs()[0].as_str()) else {
                continue;
            };
            if const_value(a).is_some() || is_clock(a) || ix.fanout(out) != 1 || ix.is_port(out) {
                continue;
            }
            let (f, pin) = &ix.loads(out)[0];
            let fi = &m.instances[*f];
            if pin == "D"
                && spec_of(m, lib, *f).is_some_and(|s| s.kind == CellKind::Ff)
                && fi.pin("QN").is_none()
                && fi.pin("Q").is_some()
            {
                named.push((fi.name.clone(), Move::Backward { ff: *f, gate: gi }));
            }
        }
    }
    named.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(named.into_iter().map(|(_, mv)| mv).collect())
}

fn apply(m: &mut ModuleDef, lib: &CellLibrary, mv: &Move) -> String {
    match *mv {
        Move::Forward { gate } => {
            let g = m.instances[gate].clone();
            let spec = spec_of(m, lib, gate).unwrap();
            let out_pin = spec.output().to_string();
            let out = g.pin(&out_pin).unwrap().to_string();
            let ix = Index::build(m, lib);
            let mut pins: Vec<(String, String)> = Vec::new();
            let mut init_vals = Vec::new();
            let mut srcs = BTreeSet::new();
            let mut ff_cell = String::new();
            let mut ck = String::new();
            for pin in spec.inputs() {
                let net = g.pin(pin).unwrap();
                if let Some(v) = const_value(net) {
                    pins.push((pin.clone(), net.to_string()));
                    init_vals.push(v);
                    continue;
                }
                let (f, _) = ix.driver_of(net).unwrap();
                let fi = &m.instances[f];
                pins.push((pin.clone(), fi.pin("D").unwrap().to_string()));
                init_vals.push(fi.init);
                ff_cell = fi.cell_name().unwrap().to_string();
                ck = fi.pin("CK").unwrap().to_string();
                srcs.insert(f);
            }
            let init = spec.outputs()[0].1.eval_bool(&init_vals);
            let dn = new_net(m, &format!("{out}_rt"));
            pins.push((out_pin, dn.clone()));
            let refs: Vec<(&str, &str)> =
                pins.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            m.instances[gate] = Instance::cell(g.name.clone(), g.cell_name().unwrap(), &refs);
            let reg = m.fresh_instance(&format!("{}_reg", g.name));
            let mut ff = Instance::cell(
                reg.clone(),
                ff_cell,
                &[("CK", &ck), ("D", &dn), ("Q", &out)],
            );
            ff.init = init;
            m.instances.push(ff);
            let ix = Index::build(m, lib);
            let dead: BTreeSet<usize> = srcs
                .into_iter()
                .filter(|&f| {
                    let fi = &m.instances[f];
                    fi.pin("QN").is_none() && fi.pin("Q").is_some_and(|q| ix.fanout(q) == 0)
                })
                .collect();
            let removed = dead.len();
            remove_instances(m, &dead);
            format!(
                "forward across {} ({removed} flops merged into {reg})",
                g.name
            )
        }
        Move::Backward { ff, gate } => {
            let spec = spec_of(m, lib, gate).unwrap();
            let inverting = spec.kind == CellKind::Inv;
            let in_pin = spec.inputs()[0].clone();
            let out_pin = spec.output().to_string();
            let a = m.instances[gate].pin(&in_pin).unwrap().to_string();
            let q = m.instances[ff].pin("Q").unwrap().to_string();
            let t = new_net(m, &format!("{q}_rt"));
            let f = &mut m.instances[ff];
            f.connections.insert("D".into(), a);
            f.connections.insert("Q".into(), t.clone());
            if inverting {
                f.init = !f.init;
            }
            let name = f.name.clone();
            let g = &mut m.instances[gate];
            g.connections.insert(in_pin, t);
            g.connections.insert(out_pin, q);
            format!("{name} backward across {}", g.name)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::bundled_library;
    use crate::sim::{analyze_timing, check_equivalence, EquivConfig};
    use crate::verilog::parse;

    fn run(src: &str, obj: RetimeObjective) -> (Netlist, PassResult) {
        let lib = bundled_library();
        let n = parse(src).unwrap();
        let r = retime(&n, &lib, obj, 16).unwrap();
        assert_eq!(r.latency, 0);
        let v = check_equivalence(&n, &r.netlist, &lib, &EquivConfig::default(), 0).unwrap();
        assert!(v.is_equivalent(), "{v}");
        (n, r)
    }

    fn ffs(n: &Netlist) -> usize {
        n.top_module().flip_flops(&bundled_library()).count()
    }

    #[test]
    fn exclusive_pair_merges_for_area() {
        // Two registers feed only an AND; a chain after it keeps the path long
        // enough that moving the register forward does not hurt.
        let src = "module t(input clk, input a, input b, output y);\n\
            wire qa, qb, n;\n\
            DFF_X1 ra(.CK(clk), .D(a), .Q(qa)); (* init = 1 *) DFF_X1 rb(.CK(clk), .D(b), .Q(qb));\n\
            AND2_X1 g(.A(qa), .B(qb), .Y(n)); INV_X1 i(.A(n), .Y(y)); endmodule";
        let (_, r) = run(src, RetimeObjective::Area);
        assert_eq!(ffs(&r.netlist), 1);
    }

    #[test]
    fn delay_move_shortens_the_path() {
        let lib = bundled_library();
        // Registered XOR feeding a long inverter chain to the output; the
        // input side is short.
        let mut src = String::from(
            "module t(input clk, input a, input b, output y);\nwire qa, qb, x0;\n\
             DFF_X1 ra(.CK(clk), .D(a), .Q(qa)); DFF_X1 rb(.CK(clk), .D(b), .Q(qb));\n\
             XOR2_X1 g(.A(qa), .B(qb), .Y(x0));\n",
        );
        for i in 0..4 {
            src += &format!("wire x{};\nINV_X1 i{i}(.A(x{i}), .Y(x{}));\n", i + 1, i + 1);
        }
        src += "DFF_X1 ro(.CK(clk), .D(x4), .Q(y));\nendmodule\n";
        let (n, r) = run(&src, RetimeObjective::Delay);
        let before = analyze_timing(&n, &lib).unwrap().critical_path;
        let after = analyze_timing(&r.netlist, &lib).unwrap().critical_path;
        assert!(after < before, "{after} vs {before}");
    }

    #[test]
    fn nothing_to_do_is_identity() {
        let src =
            "module t(input clk, input a, output y); DFF_X1 r(.CK(clk), .D(a), .Q(y)); endmodule";
        let (n, r) = run(src, RetimeObjective::Delay);
        assert_eq!(r.netlist, n);
    }
}
