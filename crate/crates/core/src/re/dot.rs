use std::fmt::Write;

use super::RegisterGrouping;

/// Graphviz view of a grouping: one node per register, node width grows
/// with the square root of its size, edge weight is the number of
/// flip-flop edges it stands for.
pub fn export_group_graph(g: &RegisterGrouping) -> String {
    let mut s = String::from("digraph registers {\n  node [shape=circle, fixedsize=true];\n");
    for (i, m) in g.groups.iter().enumerate() {
        let w = 0.5 * (m.len() as f64).sqrt();
        writeln!(s, "  r{i} [label=\"r{i}[{}]\", width={w:.3}];", m.len()).unwrap();
    }
    for (&(a, b), &n) in &g.group_edges {
        writeln!(s, "  r{a} -> r{b} [weight={n}];").unwrap();
    }
    s.push_str("}\n");
    s
}
