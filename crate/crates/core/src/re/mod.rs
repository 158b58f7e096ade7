//! Register-level reverse engineering: the flip-flop dataflow graph, register
//! grouping and diversity between groupings of equivalent designs.

mod diversity;
mod dot;
mod group;

use std::collections::{BTreeSet, VecDeque};

use crate::error::Result;
use crate::library::{CellKind, CellLibrary};
use crate::netlist::{flatten, Compiled, NetDriver, Netlist};

pub use diversity::{
    adjusted_rand_index, grouping_diversity, match_flops, size_histogram_distance, DiversityScore,
};
pub use dot::export_group_graph;
pub use group::{group_registers, GroupMode, RegisterGrouping, DEFAULT_TAU};

/// Flip-flops and the combinational dataflow between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FfGraph {
    /// Instance names, sorted.
    pub nodes: Vec<String>,
    /// `(a, b)`: a combinational path runs from a's Q or QN to b's D.
    pub edges: BTreeSet<(usize, usize)>,
    /// Primary output bits, in port order.
    pub outputs: Vec<String>,
    /// Per node: outputs reachable from Q or QN through combinational cells.
    pub direct_outputs: Vec<BTreeSet<usize>>,
}

impl FfGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); self.len()];
        for &(a, b) in &self.edges {
            p[b].push(a);
        }
        p
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut s = vec![Vec::new(); self.len()];
        for &(a, b) in &self.edges {
            s[a].push(b);
        }
        s
    }

    /// Per node: every output reachable through any number of flip-flops,
    /// and the fewest flip-flop hops needed to reach one (`None` if none).
    pub fn output_signatures(&self) -> Vec<(BTreeSet<usize>, Option<usize>)> {
        let succ = self.successors();
        (0..self.len())
            .map(|s| {
                let mut dist = vec![usize::MAX; self.len()];
                let mut q = VecDeque::from([s]);
                dist[s] = 0;
                let mut reach = BTreeSet::new();
                let mut best = None;
                while let Some(v) = q.pop_front() {
                    if !self.direct_outputs[v].is_empty() {
                        reach.extend(self.direct_outputs[v].iter().copied());
                        best = Some(best.map_or(dist[v], |b: usize| b.min(dist[v])));
                    }
                    for &w in &succ[v] {
                        if dist[w] == usize::MAX {
                            dist[w] = dist[v] + 1;
                            q.push_back(w);
                        }
                    }
                }
                (reach, best)
            })
            .collect()
    }
}

fn bit_or(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d |= s;
    }
}

fn bits(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &x)| {
        (0..64)
            .filter(move |b| x >> b & 1 == 1)
            .map(move |b| w * 64 + b)
    })
}

/// Builds the graph of a netlist, flattening it first if needed.
pub fn build_ff_graph(netlist: &Netlist, lib: &CellLibrary) -> Result<FfGraph> {
    let flat;
    let netlist = if netlist.is_flat() {
        netlist
    } else {
        flat = flatten(netlist)?;
        &flat
    };
    let c = Compiled::new(netlist.top_module(), lib)?;
    let mut ffs: Vec<usize> = c
        .flops()
        .filter(|&i| c.cells[i].kind() == CellKind::Ff)
        .collect();
    ffs.sort_by(|a, b| c.cells[*a].name.cmp(&c.cells[*b].name));
    let nodes: Vec<String> = ffs.iter().map(|&i| c.cells[i].name.clone()).collect();
    let words = ffs.len().div_ceil(64).max(1);
    let nets = c.num_nets();

    // Forward: which flip-flops feed each net.
    let mut src = vec![0u64; nets * words];
    for (k, &ci) in ffs.iter().enumerate() {
        for out in c.cells[ci].outputs.iter().flatten() {
            src[out * words + k / 64] |= 1 << (k % 64);
        }
    }
    let mut acc = vec![0u64; words];
    for &ci in &c.order {
        let cell = &c.cells[ci];
        acc.fill(0);
        for n in cell.inputs.iter().flatten() {
            bit_or(&mut acc, &src[n * words..(n + 1) * words]);
        }
        for out in cell.outputs.iter().flatten() {
            bit_or(&mut src[out * words..(out + 1) * words], &acc);
        }
    }
    let mut edges = BTreeSet::new();
    for (b, &ci) in ffs.iter().enumerate() {
        if let Some(d) = c.cells[ci].input("D") {
            edges.extend(bits(&src[d * words..(d + 1) * words]).map(|a| (a, b)));
        }
    }

    // Backward: which outputs each net reaches.
    let outputs: Vec<String> = c.outputs.iter().map(|(p, _)| p.clone()).collect();
    let ow = outputs.len().div_ceil(64).max(1);
    let mut reach = vec![0u64; nets * ow];
    for (k, (_, n)) in c.outputs.iter().enumerate() {
        reach[n * ow + k / 64] |= 1 << (k % 64);
    }
    let mut acc = vec![0u64; ow];
    for &ci in c.order.iter().rev() {
        let cell = &c.cells[ci];
        acc.fill(0);
        for out in cell.outputs.iter().flatten() {
            bit_or(&mut acc, &reach[out * ow..(out + 1) * ow]);
        }
        for n in cell.inputs.iter().flatten() {
            if matches!(c.drivers[*n], NetDriver::Const(_)) {
                continue;
            }
            bit_or(&mut reach[n * ow..(n + 1) * ow], &acc);
        }
    }
    let direct_outputs = ffs
        .iter()
        .map(|&ci| {
            let mut s = BTreeSet::new();
            for out in c.cells[ci].outputs.iter().flatten() {
                s.extend(bits(&reach[out * ow..(out + 1) * ow]));
            }
            s
        })
        .collect();
    Ok(FfGraph {
        nodes,
        edges,
        outputs,
        direct_outputs,
    })
}

/// Graph, grouping and output signatures of one netlist.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub graph: FfGraph,
    pub grouping: RegisterGrouping,
    pub signatures: Vec<(BTreeSet<usize>, Option<usize>)>,
}

pub fn analyze(
    netlist: &Netlist,
    lib: &CellLibrary,
    mode: GroupMode,
    tau: f64,
) -> Result<Analysis> {
    let graph = build_ff_graph(netlist, lib)?;
    let grouping = group_registers(&graph, mode, tau)?;
    let signatures = graph.output_signatures();
    Ok(Analysis {
        graph,
        grouping,
        signatures,
    })
}

impl Analysis {
    pub fn diversity(&self, other: &Analysis) -> DiversityScore {
        let m = match_flops(
            &self.graph,
            &self.signatures,
            &other.graph,
            &other.signatures,
        );
        grouping_diversity(&self.grouping, &other.grouping, &m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::bundled_library;
    use crate::verilog::parse;

    fn graph(src: &str) -> FfGraph {
        build_ff_graph(&parse(src).unwrap(), &bundled_library()).unwrap()
    }

    #[test]
    fn shift_register_has_one_edge() {
        let g = graph(
            "module t(input clk, input d, output q); wire a;\n\
             DFF_X1 f0(.CK(clk), .D(d), .Q(a)); DFF_X1 f1(.CK(clk), .D(a), .Q(q)); endmodule",
        );
        assert_eq!(g.nodes, ["f0", "f1"]);
        assert_eq!(g.edges, BTreeSet::from([(0, 1)]));
        assert_eq!(g.direct_outputs[1], BTreeSet::from([0]));
        assert!(g.direct_outputs[0].is_empty());
        let sig = g.output_signatures();
        assert_eq!(sig[0], (BTreeSet::from([0]), Some(1)));
    }

    #[test]
    fn recirculating_mux_is_a_self_loop() {
        let g = graph(
            "module t(input clk, input en, input d, output q); wire n;\n\
             MUX2_X1 m(.A(q), .B(d), .S(en), .Y(n)); DFF_X1 f(.CK(clk), .D(n), .Q(q)); endmodule",
        );
        assert_eq!(g.edges, BTreeSet::from([(0, 0)]));
    }

    #[test]
    fn qn_counts_like_q() {
        let g = graph(
            "module t(input clk, input d, output q); wire a, b;\n\
             DFFQN_X1 f0(.CK(clk), .D(d), .QN(a)); INV_X1 i(.A(a), .Y(b));\n\
             DFF_X1 f1(.CK(clk), .D(b), .Q(q)); endmodule",
        );
        assert_eq!(g.edges, BTreeSet::from([(0, 1)]));
    }

    #[test]
    fn enable_through_clock_gate_is_not_dataflow() {
        let g = graph(
            "module t(input clk, input d, output q); wire e, gc;\n\
             DFF_X1 f0(.CK(clk), .D(d), .Q(e)); ICG_X1 cg(.CK(clk), .E(e), .GCLK(gc));\n\
             DFF_X1 f1(.CK(gc), .D(d), .Q(q)); endmodule",
        );
        assert!(g.edges.is_empty());
    }
}
