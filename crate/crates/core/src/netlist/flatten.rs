use std::collections::{BTreeSet, HashMap};

use super::validate::find_recursion;
use super::{const_value, Instance, InstanceKind, ModuleDef, NameUnion, Netlist};
use crate::error::{Error, Result};

/// Inlines every hierarchical instance into the top module.
///
/// Inlined nets and instances are named `<instpath>/<name>`. Nets tied together
/// through child port bindings are merged; the surviving name prefers
/// constants, then top-level port nets, then the lexicographically smallest.
pub fn flatten(netlist: &Netlist) -> Result<Netlist> {
    if let Some(cycle) = find_recursion(netlist) {
        return Err(Error::RecursiveHierarchy(cycle));
    }
    let top = netlist
        .modules
        .get(&netlist.top)
        .ok_or_else(|| Error::Invalid(format!("top module {} is not defined", netlist.top)))?;
    let mut b = Builder {
        netlist,
        uf: NameUnion::default(),
        nets: BTreeSet::new(),
        instances: Vec::new(),
    };
    b.inline(top, "", &HashMap::new())?;

    let port_rank: HashMap<&str, u8> = top
        .port_bits()
        .iter()
        .filter_map(|(bit, dir)| {
            top.port_net(bit).map(|n| {
                (
                    n,
                    if *dir == super::Direction::Input {
                        1
                    } else {
                        2
                    },
                )
            })
        })
        .collect();
    let reps = b.uf.representatives(|n| {
        let class = if const_value(n).is_some() {
            0
        } else {
            port_rank.get(n).copied().unwrap_or(3)
        };
        (class, n.to_string())
    });
    let rep = |n: &str| reps.get(n).cloned().unwrap_or_else(|| n.to_string());

    let mut flat = ModuleDef::new(top.name.clone());
    flat.ports = top.ports.clone();
    flat.port_nets = top
        .port_nets
        .iter()
        .map(|(b, n)| (b.clone(), rep(n)))
        .collect();
    for n in &b.nets {
        flat.add_net(rep(n));
    }
    flat.instances = b
        .instances
        .into_iter()
        .map(|mut i| {
            for net in i.connections.values_mut() {
                *net = rep(net);
            }
            i
        })
        .collect();
    Ok(Netlist {
        name: netlist.name.clone(),
        modules: [(flat.name.clone(), flat)].into_iter().collect(),
        top: netlist.top.clone(),
    })
}

struct Builder<'a> {
    netlist: &'a Netlist,
    uf: NameUnion,
    nets: BTreeSet<String>,
    instances: Vec<Instance>,
}

impl Builder<'_> {
    fn inline(
        &mut self,
        m: &ModuleDef,
        prefix: &str,
        bindings: &HashMap<String, String>,
    ) -> Result<()> {
        let flat_name = |net: &str| -> String {
            if const_value(net).is_some() {
                net.to_string()
            } else if let Some(b) = bindings.get(net) {
                b.clone()
            } else {
                format!("{prefix}{net}")
            }
        };
        for net in &m.nets {
            let f = flat_name(net);
            self.uf.id(&f);
            self.nets.insert(f);
        }
        for inst in &m.instances {
            match &inst.kind {
                InstanceKind::Cell(_) => {
                    let mut i = inst.clone();
                    i.name = format!("{prefix}{}", inst.name);
                    for net in i.connections.values_mut() {
                        *net = flat_name(net);
                    }
                    self.instances.push(i);
                }
                InstanceKind::Module(child) => {
                    let def = self
                        .netlist
                        .modules
                        .get(child)
                        .ok_or_else(|| Error::Invalid(format!("unknown module {child}")))?;
                    let child_prefix = format!("{prefix}{}/", inst.name);
                    let mut child_bind: HashMap<String, String> = HashMap::new();
                    for (bit, _) in def.port_bits() {
                        let (Some(cnet), Some(pnet)) =
                            (def.port_net(&bit), inst.connections.get(&bit))
                        else {
                            continue;
                        };
                        let pnet = flat_name(pnet);
                        if const_value(cnet).is_some() {
                            self.uf.union(cnet, &pnet);
                        } else if let Some(prev) = child_bind.get(cnet) {
                            self.uf.union(prev, &pnet);
                        } else {
                            child_bind.insert(cnet.to_string(), pnet);
                        }
                    }
                    self.inline(def, &child_prefix, &child_bind)?;
                }
            }
        }
        Ok(())
    }
}
