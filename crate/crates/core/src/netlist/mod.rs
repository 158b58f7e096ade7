//! In-memory gate-level netlists.
//!
//! Everything is bit-level: a vector port `a[3:0]` contributes the bits
//! `a[3]` .. `a[0]`, and each bit is bound to one net of its module. Several
//! port bits may share a net (an `assign` between two outputs, or an input fed
//! straight through). The reserved nets `const0` and `const1` exist in every
//! module and are driven implicitly.

mod compiled;
mod flatten;
mod hash;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

pub use compiled::{
    flip_flop_info, topo_order, Compiled, CompiledCell, FlipFlopInfo, NetDriver, NetId,
};
pub use flatten::flatten;
pub use hash::{netlist_digest, structural_hash};
pub use validate::{validate, Diagnostic, Severity};

use crate::library::{CellKind, CellLibrary};

pub const CONST0: &str = "const0";
pub const CONST1: &str = "const1";

/// Returns the value of a constant net name.
pub fn const_value(net: &str) -> Option<bool> {
    match net {
        CONST0 => Some(false),
        CONST1 => Some(true),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    /// `(msb, lsb)` for vector ports.
    pub range: Option<(i64, i64)>,
}

impl Port {
    pub fn scalar(name: impl Into<String>, direction: Direction) -> Self {
        Self {
            name: name.into(),
            direction,
            range: None,
        }
    }

    pub fn vector(name: impl Into<String>, direction: Direction, msb: i64, lsb: i64) -> Self {
        Self {
            name: name.into(),
            direction,
            range: Some((msb, lsb)),
        }
    }

    pub fn width(&self) -> usize {
        match self.range {
            None => 1,
            Some((m, l)) => (m - l).unsigned_abs() as usize + 1,
        }
    }

    /// Bit names, most significant first.
    pub fn bits(&self) -> Vec<String> {
        match self.range {
            None => vec![self.name.clone()],
            Some((m, l)) => range_indices(m, l)
                .map(|i| format!("{}[{i}]", self.name))
                .collect(),
        }
    }
}

/// Indices from `msb` to `lsb` inclusive, in declaration order.
pub fn range_indices(msb: i64, lsb: i64) -> Box<dyn Iterator<Item = i64>> {
    if msb >= lsb {
        Box::new((lsb..=msb).rev())
    } else {
        Box::new(msb..=lsb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstanceKind {
    Cell(String),
    Module(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub kind: InstanceKind,
    /// Pin name (or child port bit) to net.
    pub connections: BTreeMap<String, String>,
    /// Power-on value of a flip-flop.
    pub init: bool,
}

impl Instance {
    pub fn cell(name: impl Into<String>, cell: impl Into<String>, pins: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            kind: InstanceKind::Cell(cell.into()),
            connections: pins
                .iter()
                .map(|(p, n)| (p.to_string(), n.to_string()))
                .collect(),
            init: false,
        }
    }

    pub fn cell_name(&self) -> Option<&str> {
        match &self.kind {
            InstanceKind::Cell(c) => Some(c),
            InstanceKind::Module(_) => None,
        }
    }

    pub fn pin(&self, pin: &str) -> Option<&str> {
        self.connections.get(pin).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModuleDef {
    pub name: String,
    pub ports: Vec<Port>,
    /// Port bit to the net it is bound to.
    pub port_nets: BTreeMap<String, String>,
    pub nets: BTreeSet<String>,
    pub instances: Vec<Instance>,
}

impl ModuleDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Declares a port whose bits are bound to same-named nets.
    pub fn add_port(&mut self, port: Port) {
        for bit in port.bits() {
            self.nets.insert(bit.clone());
            self.port_nets.insert(bit.clone(), bit);
        }
        self.ports.push(port);
    }

    pub fn add_net(&mut self, net: impl Into<String>) {
        let net = net.into();
        if const_value(&net).is_none() {
            self.nets.insert(net);
        }
    }

    /// All port bits in declaration order.
    pub fn port_bits(&self) -> Vec<(String, Direction)> {
        self.ports
            .iter()
            .flat_map(|p| p.bits().into_iter().map(move |b| (b, p.direction)))
            .collect()
    }

    pub fn input_bits(&self) -> Vec<String> {
        self.bits_of(Direction::Input)
    }

    pub fn output_bits(&self) -> Vec<String> {
        self.bits_of(Direction::Output)
    }

    fn bits_of(&self, dir: Direction) -> Vec<String> {
        self.port_bits()
            .into_iter()
            .filter(|(_, d)| *d == dir)
            .map(|(b, _)| b)
            .collect()
    }

    pub fn port_net(&self, bit: &str) -> Option<&str> {
        self.port_nets.get(bit).map(String::as_str)
    }

    pub fn is_flat(&self) -> bool {
        self.instances
            .iter()
            .all(|i| matches!(i.kind, InstanceKind::Cell(_)))
    }

    pub fn instance(&self, name: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.name == name)
    }

    /// Sequential instances (flip-flops) according to `lib`.
    pub fn flip_flops<'a>(
        &'a self,
        lib: &'a CellLibrary,
    ) -> impl Iterator<Item = &'a Instance> + 'a {
        self.instances.iter().filter(move |i| {
            i.cell_name()
                .and_then(|c| lib.get(c))
                .is_some_and(|c| c.kind == CellKind::Ff)
        })
    }

    /// Number of instances per cell name.
    pub fn cell_histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for i in &self.instances {
            if let Some(c) = i.cell_name() {
                *h.entry(c.to_string()).or_insert(0) += 1;
            }
        }
        h
    }

    /// A net name not yet used in this module, derived from `base`.
    pub fn fresh_net(&self, base: &str) -> String {
        fresh_name(base, |n| {
            self.nets.contains(n) || self.port_nets.contains_key(n) || const_value(n).is_some()
        })
    }

    pub fn fresh_instance(&self, base: &str) -> String {
        let names: BTreeSet<&str> = self.instances.iter().map(|i| i.name.as_str()).collect();
        fresh_name(base, |n| names.contains(n))
    }
}

pub(crate) fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken(n))
        .expect("unbounded suffix search")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    pub modules: BTreeMap<String, ModuleDef>,
    pub top: String,
}

impl Netlist {
    pub fn from_module(module: ModuleDef) -> Self {
        let name = module.name.clone();
        Self {
            name: name.clone(),
            modules: BTreeMap::from([(name.clone(), module)]),
            top: name,
        }
    }

    pub fn top_module(&self) -> &ModuleDef {
        &self.modules[&self.top]
    }

    pub fn top_module_mut(&mut self) -> &mut ModuleDef {
        self.modules.get_mut(&self.top).expect("top module exists")
    }

    /// True when the netlist is a single module without hierarchical instances.
    pub fn is_flat(&self) -> bool {
        self.modules.len() == 1 && self.top_module().is_flat()
    }

    /// Modules in dependency order (children before parents), top last.
    pub fn modules_bottom_up(&self) -> Vec<&str> {
        fn visit<'a>(
            n: &'a Netlist,
            m: &'a str,
            seen: &mut BTreeSet<&'a str>,
            out: &mut Vec<&'a str>,
        ) {
            if !seen.insert(m) {
                return;
            }
            if let Some(def) = n.modules.get(m) {
                let mut children: Vec<&str> = def
                    .instances
                    .iter()
                    .filter_map(|i| match &i.kind {
                        InstanceKind::Module(c) => Some(c.as_str()),
                        _ => None,
                    })
                    .collect();
                children.sort();
                children.dedup();
                for c in children {
                    visit(n, c, seen, out);
                }
                out.push(m);
            }
        }
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        visit(self, &self.top, &mut seen, &mut out);
        out
    }
}

/// Union-find over names, used to resolve net aliases.
#[derive(Debug, Default)]
pub(crate) struct NameUnion {
    index: std::collections::HashMap<String, usize>,
    names: Vec<String>,
    parent: Vec<usize>,
}

impl NameUnion {
    pub fn id(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.index.insert(name.to_string(), i);
        self.names.push(name.to_string());
        self.parent.push(i);
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: &str, b: &str) {
        let (a, b) = (self.id(a), self.id(b));
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb] = ra;
        }
    }

    /// Maps every name to its class representative, chosen as the member with
    /// the smallest `rank(name)`.
    pub fn representatives<K: Ord>(
        &mut self,
        rank: impl Fn(&str) -> K,
    ) -> std::collections::HashMap<String, String> {
        let n = self.names.len();
        let mut best: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for i in 0..n {
            let r = self.find(i);
            let e = best.entry(r).or_insert(i);
            if rank(&self.names[i]) < rank(&self.names[*e]) {
                *e = i;
            }
        }
        (0..n)
            .map(|i| {
                let r = self.find(i);
                (self.names[i].clone(), self.names[best[&r]].clone())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_port_bits_msb_first() {
        let p = Port::vector("w", Direction::Input, 3, 0);
        assert_eq!(p.bits(), vec!["w[3]", "w[2]", "w[1]", "w[0]"]);
        let q = Port::vector("w", Direction::Input, 0, 2);
        assert_eq!(q.bits(), vec!["w[0]", "w[1]", "w[2]"]);
    }

    #[test]
    fn union_prefers_lowest_rank() {
        let mut u = NameUnion::default();
        u.union("x", "y");
        u.union("y", "const0");
        let reps = u.representatives(|n| (const_value(n).is_none(), n.to_string()));
        assert_eq!(reps["x"], "const0");
    }

    #[test]
    fn fresh_names_skip_taken() {
        let mut m = ModuleDef::new("m");
        m.add_net("n");
        m.add_net("n_1");
        assert_eq!(m.fresh_net("n"), "n_2");
    }
}
