use std::collections::BTreeSet;

use super::edit::{add_cell, new_net, Index};
use super::{require_flat, PassResult};
use crate::error::{Error, Result};
use crate::library::CellLibrary;
use crate::netlist::{Compiled, NetDriver, Netlist};
use crate::sim::analyze_timing_compiled;

const PASS: &str = "max-transition";
const MAX_ROUNDS: usize = 8;

/// Buffers nets whose slew exceeds `limit` (ps), or the driving cell's own
/// maximum output slew if that is tighter. Sinks of a violating net are
/// split across copies of the strongest available buffer; buffers feeding
/// buffers are added in later rounds when one level is not enough.
pub fn max_transition(netlist: &Netlist, lib: &CellLibrary, limit: f64) -> Result<PassResult> {
    require_flat(netlist, PASS)?;
    if !(limit > 0.0) {
        return Err(Error::Pass {
            pass: PASS,
            message: format!("slew limit must be positive, got {limit}"),
        });
    }
    let buf = lib.strongest_buffer().ok_or_else(|| Error::Pass {
        pass: PASS,
        message: "no buffer available".into(),
    })?;
    let sf = lib.slew_factor;
    let mut out = netlist.clone();
    let m = out.top_module_mut();
    let mut inserted = 0;
    let mut stuck: BTreeSet<String> = BTreeSet::new();
    for _ in 0..MAX_ROUNDS {
        let violations: Vec<(String, f64)> = {
            let c = Compiled::new(m, lib)?;
            let t = analyze_timing_compiled(&c);
            (0..c.num_nets())
                .filter_map(|n| match c.drivers[n] {
                    NetDriver::Cell(ci, _) => {
                        let lim = limit.min(c.cells[ci].spec.max_output_slew);
                        (t.slew[n] > lim + 1e-9).then(|| (c.net_name(n).to_string(), lim))
                    }
                    _ => None,
                })
                .filter(|(n, _)| !stuck.contains(n))
                .collect()
        };
        if violations.is_empty() {
            break;
        }
        let ix = Index::build(m, lib);
        // Load one buffer output may carry.
        let per_buf = |lim: f64| lim / (sf * buf.drive_res);
        let buf_in = buf.cap("A");
        for (net, lim) in violations {
            if ix.driver_of(&net).is_none() {
                continue;
            }
            let sinks: Vec<(usize, String, f64)> = ix
                .loads(&net)
                .iter()
                .map(|(i, p)| {
                    let cap = lib
                        .get(m.instances[*i].cell_name().unwrap())
                        .unwrap()
                        .cap(p);
                    (*i, p.clone(), cap)
                })
                .collect();
            let total: f64 = sinks.iter().map(|s| s.2).sum();
            let cap_max = per_buf(lim);
            let mut groups: Vec<Vec<(usize, String)>> = Vec::new();
            let mut load = f64::INFINITY;
            for (i, p, cap) in sinks {
                if load + cap > cap_max {
                    groups.push(Vec::new());
                    load = 0.0;
                }
                load += cap;
                groups.last_mut().unwrap().push((i, p));
            }
            // Buffering must lighten the driver's load to make progress.
            if groups.is_empty() || groups.len() as f64 * buf_in >= total {
                stuck.insert(net);
                continue;
            }
            for g in groups {
                let bn = new_net(m, &format!("{net}_buf"));
                add_cell(m, "mt_buf", &buf.name, &[("A", &net), ("Y", &bn)]);
                for (i, p) in g {
                    m.instances[i].connections.insert(p, bn.clone());
                }
                inserted += 1;
            }
        }
    }
    let mut r = PassResult::new(out);
    let c = Compiled::new(r.netlist.top_module(), lib)?;
    let t = analyze_timing_compiled(&c);
    let remaining: Vec<String> = (0..c.num_nets())
        .filter_map(|n| match c.drivers[n] {
            NetDriver::Cell(ci, _)
                if t.slew[n] > limit.min(c.cells[ci].spec.max_output_slew) + 1e-9 =>
            {
                Some(format!("{} ({:.1} ps)", c.net_name(n), t.slew[n]))
            }
            _ => None,
        })
        .collect();
    r.note(
        PASS,
        format!(
            "inserted {inserted} buffers; worst slew {:.2} ps",
            t.worst_slew
        ),
    );
    for v in remaining {
        r.warnings.push(format!("slew limit unreachable on {v}"));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::bundled_library;
    use crate::sim::{analyze_timing, check_equivalence, EquivConfig};
    use crate::verilog::parse;

    fn fanout(n: usize) -> String {
        let mut s = format!(
            "module t(input a, output [{}:0] y); wire n; INV_X1 d(.A(a), .Y(n));\n",
            n - 1
        );
        for i in 0..n {
            s += &format!("INV_X1 s{i}(.A(n), .Y(y[{i}]));\n");
        }
        s + "endmodule\n"
    }

    #[test]
    fn heavy_fanout_is_buffered() {
        let lib = bundled_library();
        let n = parse(&fanout(10)).unwrap();
        let r = max_transition(&n, &lib, 10.0).unwrap();
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        assert!(r.netlist.top_module().instances.len() > 11);
        assert!(analyze_timing(&r.netlist, &lib).unwrap().worst_slew <= 10.0);
        let v = check_equivalence(&n, &r.netlist, &lib, &EquivConfig::default(), 0).unwrap();
        assert!(v.is_equivalent());
    }

    #[test]
    fn met_limit_leaves_netlist_alone() {
        let lib = bundled_library();
        let n = parse(&fanout(2)).unwrap();
        // INV_X1 into two 1 fF pins: 1.5 * 2.0 * 2.0 = 6 ps.
        let r = max_transition(&n, &lib, 10.0).unwrap();
        assert_eq!(r.netlist, n);
    }

    #[test]
    fn impossible_limit_warns() {
        let lib = bundled_library();
        let n = parse(&fanout(4)).unwrap();
        let r = max_transition(&n, &lib, 0.5).unwrap();
        assert!(!r.warnings.is_empty());
    }
}
