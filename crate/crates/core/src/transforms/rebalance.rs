use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use super::edit::{new_net, Index};
use super::{require_flat, PassResult, RebalanceLevel};
use crate::error::Result;
use crate::library::{
    functional_equivalents, CellKind, CellLibrary, CellSpec, Substitution, TemplateSource,
};
use crate::netlist::{Compiled, Instance, ModuleDef, Netlist};
use crate::sim::analyze_timing_compiled;

const PASS: &str = "rebalance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    And,
    Or,
    Xor,
}

fn family(spec: &CellSpec) -> Option<Family> {
    if spec.kind != CellKind::Combinational || spec.inputs().len() != 2 || spec.outputs().len() != 1
    {
        return None;
    }
    match spec.truth_table() {
        0b1000 => Some(Family::And),
        0b1110 => Some(Family::Or),
        0b0110 => Some(Family::Xor),
        _ => None,
    }
}

/// A maximal fanout-free tree of one associative two-input gate family.
#[derive(Debug)]
struct Tree {
    root: usize,
    /// Gates in depth-first order, root first.
    gates: Vec<usize>,
    /// Nets between gates of the tree.
    internal: Vec<String>,
    /// Leaf nets, left to right.
    leaves: Vec<String>,
    depth: usize,
}

#[derive(Debug)]
enum Node {
    Leaf(usize),
    Gate(Box<Node>, Box<Node>),
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Gate(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// Restructures chains of AND, OR and XOR gates. `Basic` balances chains of
/// four or more leaves when that lowers depth. `Extreme` also splits
/// AOI/OAI cells into two-input gates and rebuilds every chain of three or
/// more leaves so that late-arriving inputs enter near the root.
pub fn rebalance(
    netlist: &Netlist,
    lib: &CellLibrary,
    level: RebalanceLevel,
) -> Result<PassResult> {
    require_flat(netlist, PASS)?;
    let mut out = netlist.clone();
    let mut log = Vec::new();
    let m = out.top_module_mut();
    if level == RebalanceLevel::Extreme {
        let n = decompose_complex(m, lib);
        if n > 0 {
            log.push(format!("decomposed {n} complex gates"));
        }
    }
    let arrival: HashMap<String, f64> = {
        let c = Compiled::new(m, lib)?;
        let t = analyze_timing_compiled(&c);
        (0..c.num_nets())
            .map(|i| (c.net_name(i).to_string(), t.arrival[i]))
            .collect()
    };
    let ix = Index::build(m, lib);
    let trees = find_trees(m, lib, &ix);
    let min_leaves = match level {
        RebalanceLevel::Basic => 4,
        RebalanceLevel::Extreme => 3,
    };
    let mut rebuilt = 0;
    for t in trees.iter().filter(|t| t.leaves.len() >= min_leaves) {
        let shape = match level {
            RebalanceLevel::Basic => {
                let s = balanced(t.leaves.len());
                if s.depth() >= t.depth {
                    continue;
                }
                s
            }
            RebalanceLevel::Extreme => {
                let spec = lib.get(m.instances[t.root].cell_name().unwrap()).unwrap();
                let step = spec.intrinsic_delay + spec.drive_res * 1.0;
                by_arrival(&t.leaves, &arrival, step)
            }
        };
        if rewire(m, lib, t, &shape) {
            rebuilt += 1;
            log.push(format!(
                "{}: {} leaves, depth {} -> {}",
                m.instances[t.root].name,
                t.leaves.len(),
                t.depth,
                shape.depth()
            ));
        }
    }
    let mut r = PassResult::new(out);
    for l in log {
        r.note(PASS, l);
    }
    r.note(
        PASS,
        format!("{rebuilt} of {} gate chains rebuilt", trees.len()),
    );
    Ok(r)
}

fn find_trees(m: &ModuleDef, lib: &CellLibrary, ix: &Index) -> Vec<Tree> {
    let fam = |i: usize| {
        m.instances[i]
            .cell_name()
            .and_then(|c| lib.get(c))
            .and_then(family)
    };
    let out_net = |i: usize| -> Option<&str> {
        let spec = lib.get(m.instances[i].cell_name()?)?;
        m.instances[i].pin(spec.output())
    };
    // A gate absorbed into its single reader of the same family.
    let absorbed = |i: usize| -> bool {
        let Some(f) = fam(i) else { return false };
        let Some(o) = out_net(i) else { return false };
        if ix.fanout(o) != 1 || ix.is_port(o) {
            return false;
        }
        fam(ix.loads(o)[0].0) == Some(f)
    };
    let mut trees = Vec::new();
    for root in 0..m.instances.len() {
        let Some(f) = fam(root) else { continue };
        if absorbed(root) || out_net(root).is_none() {
            continue;
        }
        let mut t = Tree {
            root,
            gates: Vec::new(),
            internal: Vec::new(),
            leaves: Vec::new(),
            depth: 0,
        };
        t.depth = walk(m, lib, ix, root, f, &absorbed, &mut t);
        trees.push(t);
    }
    trees.sort_by(|a, b| m.instances[a.root].name.cmp(&m.instances[b.root].name));
    trees
}

fn walk(
    m: &ModuleDef,
    lib: &CellLibrary,
    ix: &Index,
    g: usize,
    f: Family,
    absorbed: &dyn Fn(usize) -> bool,
    t: &mut Tree,
) -> usize {
    t.gates.push(g);
    let spec = lib.get(m.instances[g].cell_name().unwrap()).unwrap();
    let mut depth = 0;
    for pin in spec.inputs() {
        let Some(net) = m.instances[g].pin(pin) else {
            continue;
        };
        match ix.driver_of(net) {
            Some((h, _))
                if absorbed(h)
                    && lib
                        .get(m.instances[h].cell_name().unwrap())
                        .and_then(family)
                        == Some(f) =>
            {
                t.internal.push(net.to_string());
                depth = depth.max(walk(m, lib, ix, h, f, absorbed, t));
            }
            _ => t.leaves.push(net.to_string()),
        }
    }
    depth + 1
}

fn balanced(n: usize) -> Node {
    let mut level: Vec<Node> = (0..n).map(Node::Leaf).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(Node::Gate(Box::new(a), Box::new(b))),
                None => next.push(a),
            }
        }
        level = next;
    }
    level.pop().expect("non-empty")
}

/// Huffman-style merge of the two earliest-arriving operands.
fn by_arrival(leaves: &[String], arrival: &HashMap<String, f64>, step: f64) -> Node {
    let mut nodes: Vec<Option<Node>> = Vec::new();
    let mut heap = BinaryHeap::new();
    for (i, l) in leaves.iter().enumerate() {
        let a = arrival.get(l).copied().unwrap_or(0.0);
        // Keys are (arrival in fs, insertion order).
        heap.push(Reverse(((a * 1000.0).round() as i64, i)));
        nodes.push(Some(Node::Leaf(i)));
    }
    while heap.len() > 1 {
        let Reverse((a0, i0)) = heap.pop().unwrap();
        let Reverse((a1, i1)) = heap.pop().unwrap();
        let n = Node::Gate(
            Box::new(nodes[i0].take().unwrap()),
            Box::new(nodes[i1].take().unwrap()),
        );
        nodes.push(Some(n));
        heap.push(Reverse((
            a0.max(a1) + (step * 1000.0).round() as i64,
            nodes.len() - 1,
        )));
    }
    let Reverse((_, i)) = heap.pop().unwrap();
    nodes[i].take().unwrap()
}

/// Reconnects the tree's gates to realise `shape`. Returns whether any
/// connection changed.
fn rewire(m: &mut ModuleDef, lib: &CellLibrary, t: &Tree, shape: &Node) -> bool {
    struct Assign {
        gate: usize,
        out: Option<String>,
        ins: [String; 2],
    }
    fn go(
        node: &Node,
        gate: usize,
        out: Option<String>,
        t: &Tree,
        gates: &mut dyn Iterator<Item = usize>,
        nets: &mut dyn Iterator<Item = String>,
        assigned: &mut Vec<Assign>,
    ) {
        let Node::Gate(a, b) = node else {
            unreachable!("gates only")
        };
        let mut child = |n: &Node| -> String {
            match n {
                Node::Leaf(i) => t.leaves[*i].clone(),
                Node::Gate(..) => {
                    let g = gates.next().expect("gate count matches");
                    let net = nets.next().expect("net count matches");
                    go(n, g, Some(net.clone()), t, gates, nets, assigned);
                    net
                }
            }
        };
        let ins = [child(a), child(b)];
        assigned.push(Assign { gate, out, ins });
    }
    let mut gates = t.gates[1..].iter().copied();
    let mut nets = t.internal.iter().cloned();
    let mut assigned = Vec::new();
    go(shape, t.root, None, t, &mut gates, &mut nets, &mut assigned);

    let mut changed = false;
    for a in assigned {
        let spec = lib.get(m.instances[a.gate].cell_name().unwrap()).unwrap();
        let pins = spec.inputs().to_vec();
        let out_pin = spec.output().to_string();
        let inst = &mut m.instances[a.gate];
        if let Some(o) = a.out {
            changed |= inst.pin(&out_pin) != Some(o.as_str());
            inst.connections.insert(out_pin, o);
        }
        for (p, n) in pins.iter().zip(a.ins) {
            changed |= inst.pin(p) != Some(n.as_str());
            inst.connections.insert(p.clone(), n);
        }
    }
    changed
}

/// Splits three-input complex gates into two two-input gates where the
/// library offers such a template.
fn decompose_complex(m: &mut ModuleDef, lib: &CellLibrary) -> usize {
    let two_input = |c: &str| lib.get(c).is_some_and(|s| s.inputs().len() == 2);
    let mut templates = HashMap::new();
    let mut count = 0;
    let mut added = Vec::new();
    let names: BTreeSet<String> = m.instances.iter().map(|i| i.name.clone()).collect();
    for idx in 0..m.instances.len() {
        let Some(cell) = m.instances[idx].cell_name().map(str::to_string) else {
            continue;
        };
        let spec = lib.get(&cell).unwrap();
        if spec.kind != CellKind::Combinational || spec.inputs().len() < 3 {
            continue;
        }
        let t = templates
            .entry(cell.clone())
            .or_insert_with(|| {
                functional_equivalents(lib, &cell)
                    .into_iter()
                    .find_map(|s| match s {
                        Substitution::Decomposition(t)
                            if two_input(&t.outer)
                                && t.inner.as_ref().is_some_and(|(c, _)| two_input(c)) =>
                        {
                            Some(t)
                        }
                        _ => None,
                    })
            })
            .clone();
        let Some(t) = t else { continue };
        let inst = m.instances[idx].clone();
        let (inner, inner_pins) = t.inner.as_ref().unwrap();
        let mid = new_net(m, &format!("{}_n", inst.name));
        let inner_spec = lib.get(inner).unwrap();
        let mut ipins: Vec<(&str, &str)> = inner_pins
            .iter()
            .filter_map(|(p, src)| inst.pin(src).map(|n| (p.as_str(), n)))
            .collect();
        ipins.push((inner_spec.output(), mid.as_str()));
        let mut iname = format!("{}_d", inst.name);
        let mut k = 1;
        while names.contains(&iname) || m.instances.iter().any(|i| i.name == iname) {
            iname = format!("{}_d{k}", inst.name);
            k += 1;
        }
        added.push(Instance::cell(iname, inner.clone(), &ipins));
        let mut pins: Vec<(String, String)> = t
            .outer_pins
            .iter()
            .filter_map(|(p, src)| match src {
                TemplateSource::Inner => Some((p.clone(), mid.clone())),
                TemplateSource::Input(orig) => inst.pin(orig).map(|n| (p.clone(), n.to_string())),
            })
            .collect();
        if let Some(o) = inst.pin(spec.output()) {
            pins.push((
                lib.get(&t.outer).unwrap().output().to_string(),
                o.to_string(),
            ));
        }
        let refs: Vec<(&str, &str)> = pins.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        m.instances[idx] = Instance::cell(inst.name.clone(), t.outer.clone(), &refs);
        count += 1;
    }
    m.instances.extend(added);
    count
}
