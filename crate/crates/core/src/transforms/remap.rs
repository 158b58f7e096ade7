use super::PassResult;
use crate::error::{Error, Result};
use crate::library::{functional_equivalents_for, CellLibrary, Substitution, TemplateSource};
use crate::netlist::{Instance, ModuleDef, Netlist};

/// Replaces every instance of a banned cell with its top-ranked substitute.
/// Works on hierarchical netlists module by module.
pub fn remap(netlist: &Netlist, lib: &CellLibrary) -> Result<PassResult> {
    let mut out = netlist.clone();
    let mut log = Vec::new();
    for m in out.modules.values_mut() {
        remap_module(m, lib, &mut log)?;
    }
    let mut r = PassResult::new(out);
    if log.is_empty() {
        r.note("remap", "no banned cells in use");
    }
    for msg in log {
        r.note("remap", msg);
    }
    Ok(r)
}

fn remap_module(m: &mut ModuleDef, lib: &CellLibrary, log: &mut Vec<String>) -> Result<()> {
    let targets: Vec<usize> = m
        .instances
        .iter()
        .enumerate()
        .filter(|(_, i)| i.cell_name().is_some_and(|c| lib.banned().contains(c)))
        .map(|(i, _)| i)
        .collect();
    let mut added = Vec::new();
    for idx in targets {
        let inst = m.instances[idx].clone();
        let cell = inst.cell_name().expect("cell instance").to_string();
        let spec = lib.get(&cell).expect("known cell");
        let used: Vec<&str> = spec
            .output_names()
            .filter(|p| inst.connections.contains_key(*p))
            .collect();
        let sub = functional_equivalents_for(lib, &cell, &used)
            .into_iter()
            .next()
            .ok_or_else(|| Error::Pass {
                pass: "remap",
                message: format!("no available substitute for {cell} at {}", inst.name),
            })?;
        log.push(format!("{}: {cell} -> {sub}", inst.name));
        match &sub {
            Substitution::SameFunction(new) => {
                m.instances[idx].kind = crate::netlist::InstanceKind::Cell(new.clone());
                let new_spec = lib.get(new).expect("known cell");
                m.instances[idx]
                    .connections
                    .retain(|p, _| new_spec.has_pin(p));
            }
            Substitution::Decomposition(t) => {
                let out_net = inst.pin(spec.output()).map(str::to_string);
                let mut pins: Vec<(String, String)> = Vec::new();
                if let Some((inner, inner_pins)) = &t.inner {
                    let inner_spec = lib.get(inner).expect("known cell");
                    let mid = m.fresh_net(&format!("{}_n", inst.name));
                    m.nets.insert(mid.clone());
                    let mut ipins: Vec<(&str, &str)> = inner_pins
                        .iter()
                        .filter_map(|(p, src)| inst.pin(src).map(|n| (p.as_str(), n)))
                        .collect();
                    ipins.push((inner_spec.output(), mid.as_str()));
                    let iname = m.fresh_instance(&format!("{}_d", inst.name));
                    added.push(Instance::cell(iname, inner.clone(), &ipins));
                    for (p, src) in &t.outer_pins {
                        if let TemplateSource::Inner = src {
                            pins.push((p.clone(), mid.clone()));
                        }
                    }
                }
                for (p, src) in &t.outer_pins {
                    if let TemplateSource::Input(orig) = src {
                        if let Some(n) = inst.pin(orig) {
                            pins.push((p.clone(), n.to_string()));
                        }
                    }
                }
                let outer_spec = lib.get(&t.outer).expect("known cell");
                if let Some(o) = out_net {
                    pins.push((outer_spec.output().to_string(), o));
                }
                let refs: Vec<(&str, &str)> =
                    pins.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
                m.instances[idx] = Instance::cell(inst.name.clone(), t.outer.clone(), &refs);
            }
            Substitution::FlopWithInverter { flop, inverter } => {
                let q = match inst.pin("Q") {
                    Some(q) => q.to_string(),
                    None => {
                        let q = m.fresh_net(&format!("{}_q", inst.name));
                        m.nets.insert(q.clone());
                        q
                    }
                };
                let mut pins: Vec<(&str, &str)> = vec![("Q", q.as_str())];
                for p in ["D", "CK"] {
                    if let Some(n) = inst.pin(p) {
                        pins.push((p, n));
                    }
                }
                let mut new = Instance::cell(inst.name.clone(), flop.clone(), &pins);
                new.init = inst.init;
                if let Some(qn) = inst.pin("QN") {
                    let iname = m.fresh_instance(&format!("{}_qn", inst.name));
                    added.push(Instance::cell(
                        iname,
                        inverter.clone(),
                        &[("A", q.as_str()), ("Y", qn)],
                    ));
                }
                m.instances[idx] = new;
            }
        }
    }
    m.instances.extend(added);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{bundled_library, mask_dont_use};
    use crate::sim::{check_equivalence, EquivConfig};
    use crate::verilog::parse;

    fn check(src: &str, ban: &str) -> Netlist {
        let lib = mask_dont_use(&bundled_library(), ban).unwrap();
        let n = parse(src).unwrap();
        let r = remap(&n, &lib).unwrap();
        for inst in &r.netlist.top_module().instances {
            assert_ne!(inst.cell_name(), Some(ban));
        }
        let v = check_equivalence(&n, &r.netlist, &lib, &EquivConfig::default(), 0).unwrap();
        assert!(v.is_equivalent(), "{v}");
        r.netlist
    }

    #[test]
    fn same_function_swap() {
        let out = check(
            "module t(input a, input b, output y); NAND2_X1 g(.A(a), .B(b), .Y(y)); endmodule",
            "NAND2_X1",
        );
        assert_eq!(out.top_module().instances[0].cell_name(), Some("NAND2_X2"));
    }

    #[test]
    fn qn_flop_rebuilt_with_inverter() {
        let out = check(
            "module t(input clk, input d, output q, output qn); (* init = 1 *) DFFQN_X1 r(.CK(clk), .D(d), .Q(q), .QN(qn)); endmodule",
            "DFFQN_X1",
        );
        assert_eq!(out.top_module().instances.len(), 2);
    }

    #[test]
    fn qn_only_flop() {
        check(
            "module t(input clk, input d, output qn); DFFQN_X1 r(.CK(clk), .D(d), .QN(qn)); endmodule",
            "DFFQN_X1",
        );
    }

    #[test]
    fn aoi_after_both_sizes_banned() {
        let lib = mask_dont_use(
            &mask_dont_use(&bundled_library(), "AOI21_X1").unwrap(),
            "AOI21_X2",
        )
        .unwrap();
        let n = parse("module t(input a, input b, input c, output y); AOI21_X1 g(.A(a), .B(b), .C(c), .Y(y)); endmodule")
            .unwrap();
        let r = remap(&n, &lib).unwrap();
        assert_eq!(r.netlist.top_module().instances.len(), 2);
        let v = check_equivalence(&n, &r.netlist, &lib, &EquivConfig::default(), 0).unwrap();
        assert!(v.is_equivalent(), "{v}");
    }
}
