//! Name-independent structural digests.
//!
//! Instances, nets and port bits form a bipartite graph whose edges carry pin
//! names. Node colours start from cell type and port position and are refined
//! for a fixed number of rounds from the sorted multiset of neighbour colours.
//! The digest is a commutative mix of the final colours, so it ignores both
//! identifiers and list order.

use std::collections::HashMap;

use super::{const_value, InstanceKind, ModuleDef, Netlist};

const ROUNDS: usize = 8;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn mix(a: u64, b: u64) -> u64 {
    splitmix(a ^ splitmix(b.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Structural digest of a single module; hierarchical instances are labelled
/// by their module name.
pub fn structural_hash(module: &ModuleDef) -> u64 {
    module_hash(module, &|m| fnv1a(format!("module:{m}").as_bytes()))
}

/// Digest of a whole netlist: each hierarchical instance is labelled by the
/// digest of the module it instantiates.
pub fn netlist_digest(netlist: &Netlist) -> u64 {
    let mut memo: HashMap<&str, u64> = HashMap::new();
    for m in netlist.modules_bottom_up() {
        let def = &netlist.modules[m];
        let h = module_hash(def, &|child| {
            memo.get(child)
                .copied()
                .unwrap_or_else(|| fnv1a(format!("module:{child}").as_bytes()))
        });
        memo.insert(m, h);
    }
    memo.get(netlist.top.as_str()).copied().unwrap_or(0)
}

struct Graph<'a> {
    colour: Vec<u64>,
    adj: Vec<Vec<(u64, usize)>>,
    nets: HashMap<&'a str, usize>,
}

impl<'a> Graph<'a> {
    fn node(&mut self, label: u64) -> usize {
        self.colour.push(label);
        self.adj.push(Vec::new());
        self.colour.len() - 1
    }

    fn net(&mut self, name: &'a str) -> usize {
        if let Some(&id) = self.nets.get(name) {
            return id;
        }
        let label = match const_value(name) {
            Some(v) => fnv1a(format!("const{}", u8::from(v)).as_bytes()),
            None => fnv1a(b"net"),
        };
        let id = self.node(label);
        self.nets.insert(name, id);
        id
    }

    fn connect(&mut self, a: usize, b: usize, label: u64) {
        self.adj[a].push((label, b));
        self.adj[b].push((label, a));
    }
}

fn module_hash(m: &ModuleDef, child_label: &dyn Fn(&str) -> u64) -> u64 {
    let mut g = Graph {
        colour: Vec::new(),
        adj: Vec::new(),
        nets: HashMap::new(),
    };
    for (pos, (bit, dir)) in m.port_bits().iter().enumerate() {
        let p = g.node(fnv1a(format!("port:{dir:?}:{pos}").as_bytes()));
        if let Some(net) = m.port_net(bit) {
            let n = g.net(net);
            g.connect(p, n, fnv1a(b"bind"));
        }
    }
    for inst in &m.instances {
        let label = match &inst.kind {
            InstanceKind::Cell(c) => fnv1a(format!("cell:{c}:{}", u8::from(inst.init)).as_bytes()),
            InstanceKind::Module(c) => mix(child_label(c), u64::from(inst.init)),
        };
        let i = g.node(label);
        for (pin, net) in &inst.connections {
            let n = g.net(net);
            g.connect(i, n, fnv1a(format!("pin:{pin}").as_bytes()));
        }
    }
    for net in &m.nets {
        g.net(net);
    }
    let Graph {
        mut colour, adj, ..
    } = g;

    let mut buf = Vec::new();
    for _ in 0..ROUNDS {
        let next: Vec<u64> = (0..colour.len())
            .map(|v| {
                buf.clear();
                buf.extend(adj[v].iter().map(|&(l, u)| mix(l, colour[u])));
                buf.sort_unstable();
                buf.iter().fold(colour[v], |h, &x| mix(h, x))
            })
            .collect();
        colour = next;
    }
    let sum = colour
        .iter()
        .fold(0u64, |acc, &c| acc.wrapping_add(splitmix(c)));
    mix(sum, colour.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Direction, Instance, Port};

    fn gate(cell: &str, suffix: &str) -> ModuleDef {
        let mut m = ModuleDef::new("t");
        m.add_port(Port::scalar("a", Direction::Input));
        m.add_port(Port::scalar("b", Direction::Input));
        m.add_port(Port::scalar("y", Direction::Output));
        let n = format!("n{suffix}");
        m.add_net(n.clone());
        m.instances.push(Instance::cell(
            format!("g{suffix}"),
            cell,
            &[("A", "a"), ("B", "b"), ("Y", &n)],
        ));
        m.instances.push(Instance::cell(
            format!("i{suffix}"),
            "INV_X1",
            &[("A", &n), ("Y", "y")],
        ));
        m
    }

    #[test]
    fn different_cells_differ() {
        assert_ne!(
            structural_hash(&gate("AND2_X1", "")),
            structural_hash(&gate("OR2_X1", ""))
        );
    }

    #[test]
    fn renaming_and_reordering_are_invisible() {
        let a = gate("AND2_X1", "");
        let mut b = gate("AND2_X1", "_x");
        b.instances.reverse();
        assert_eq!(structural_hash(&a), structural_hash(&b));
    }

    #[test]
    fn swapping_pins_changes_digest() {
        let a = gate("MUX2_X1", "");
        let mut m = ModuleDef::new("t");
        m.ports = a.ports.clone();
        m.port_nets = a.port_nets.clone();
        m.nets = a.nets.clone();
        m.instances = a.instances.clone();
        m.instances[0].connections.insert("S".into(), "a".into());
        let mut c = m.clone();
        c.instances[0].connections.insert("S".into(), "b".into());
        assert_ne!(structural_hash(&m), structural_hash(&c));
    }
}
