//! Connectivity index and small rewiring helpers for flat modules.

use std::collections::{BTreeSet, HashMap};

use crate::library::{CellKind, CellLibrary};
use crate::netlist::{const_value, Direction, Instance, ModuleDef};

/// Pin-level connectivity of a flat module, keyed by net name.
#[derive(Debug, Default)]
pub(crate) struct Index {
    /// Net to the (instance, output pin) driving it.
    pub driver: HashMap<String, (usize, String)>,
    /// Net to the (instance, input pin) pairs reading it.
    pub loads: HashMap<String, Vec<(usize, String)>>,
    /// Nets bound to output ports, with the number of bits bound.
    pub port_out: HashMap<String, usize>,
    pub port_in: BTreeSet<String>,
}

impl Index {
    pub fn build(m: &ModuleDef, lib: &CellLibrary) -> Self {
        let mut ix = Index::default();
        for (bit, dir) in m.port_bits() {
            if let Some(net) = m.port_net(&bit) {
                match dir {
                    Direction::Input => {
                        ix.port_in.insert(net.to_string());
                    }
                    Direction::Output => *ix.port_out.entry(net.to_string()).or_insert(0) += 1,
                }
            }
        }
        for (i, inst) in m.instances.iter().enumerate() {
            let Some(spec) = inst.cell_name().and_then(|c| lib.get(c)) else {
                continue;
            };
            for (pin, net) in &inst.connections {
                if spec.is_input(pin) {
                    ix.loads
                        .entry(net.clone())
                        .or_default()
                        .push((i, pin.clone()));
                } else {
                    ix.driver.insert(net.clone(), (i, pin.clone()));
                }
            }
        }
        for l in ix.loads.values_mut() {
            l.sort_by(|a, b| {
                m.instances[a.0]
                    .name
                    .cmp(&m.instances[b.0].name)
                    .then(a.1.cmp(&b.1))
            });
        }
        ix
    }

    pub fn loads(&self, net: &str) -> &[(usize, String)] {
        self.loads.get(net).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_port(&self, net: &str) -> bool {
        self.port_out.contains_key(net) || self.port_in.contains(net)
    }

    /// Number of readers: cell input pins plus bound output port bits.
    pub fn fanout(&self, net: &str) -> usize {
        self.loads(net).len() + self.port_out.get(net).copied().unwrap_or(0)
    }

    pub fn driver_of(&self, net: &str) -> Option<(usize, &str)> {
        self.driver.get(net).map(|(i, p)| (*i, p.as_str()))
    }
}

/// Redirects every reader of `from` (cell inputs and output port bits) to `to`.
pub(crate) fn merge_net(m: &mut ModuleDef, lib: &CellLibrary, from: &str, to: &str) {
    for inst in &mut m.instances {
        let Some(spec) = inst.cell_name().and_then(|c| lib.get(c)) else {
            continue;
        };
        for (pin, net) in inst.connections.iter_mut() {
            if net == from && spec.is_input(pin) {
                *net = to.to_string();
            }
        }
    }
    for net in m.port_nets.values_mut() {
        if net == from {
            *net = to.to_string();
        }
    }
    if const_value(to).is_none() {
        m.nets.insert(to.to_string());
    }
}

/// Removes instances by index.
pub(crate) fn remove_instances(m: &mut ModuleDef, dead: &BTreeSet<usize>) {
    if dead.is_empty() {
        return;
    }
    let mut i = 0;
    m.instances.retain(|_| {
        let keep = !dead.contains(&i);
        i += 1;
        keep
    });
}

/// Drops nets that no pin or port refers to.
pub(crate) fn prune_nets(m: &mut ModuleDef) {
    let mut used: BTreeSet<&str> = m.port_nets.values().map(String::as_str).collect();
    for inst in &m.instances {
        used.extend(inst.connections.values().map(String::as_str));
    }
    let keep: BTreeSet<String> = m
        .nets
        .iter()
        .filter(|n| used.contains(n.as_str()))
        .cloned()
        .collect();
    m.nets = keep;
}

/// Repeatedly removes non-flip-flop cells none of whose outputs is read.
/// Returns the number of removed instances.
pub(crate) fn sweep_dead_logic(m: &mut ModuleDef, lib: &CellLibrary) -> usize {
    let mut removed = 0;
    loop {
        let ix = Index::build(m, lib);
        let dead: BTreeSet<usize> = m
            .instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| {
                let Some(spec) = inst.cell_name().and_then(|c| lib.get(c)) else {
                    return false;
                };
                spec.kind != CellKind::Ff
                    && inst
                        .connections
                        .iter()
                        .filter(|(p, _)| spec.is_output(p))
                        .all(|(_, n)| ix.fanout(n) == 0)
            })
            .map(|(i, _)| i)
            .collect();
        if dead.is_empty() {
            break;
        }
        removed += dead.len();
        remove_instances(m, &dead);
    }
    prune_nets(m);
    removed
}

/// Adds a cell instance with a fresh name derived from `base`.
pub(crate) fn add_cell(m: &mut ModuleDef, base: &str, cell: &str, pins: &[(&str, &str)]) -> String {
    let name = m.fresh_instance(base);
    for (_, n) in pins {
        m.add_net(*n);
    }
    m.instances.push(Instance::cell(name.clone(), cell, pins));
    name
}

/// Creates and declares a fresh net.
pub(crate) fn new_net(m: &mut ModuleDef, base: &str) -> String {
    let n = m.fresh_net(base);
    m.nets.insert(n.clone());
    n
}
