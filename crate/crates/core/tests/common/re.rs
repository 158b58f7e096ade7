//! Random flip-flop graphs and a pair-counting ARI.

use std::collections::{BTreeMap, BTreeSet};

use netdiv::re::{FfGraph, RegisterGrouping};
use proptest::prelude::*;

pub fn graph_from(n: usize, edges: &[(usize, usize)]) -> FfGraph {
    FfGraph {
        nodes: (0..n).map(|i| format!("ff{i:03}")).collect(),
        edges: edges.iter().copied().collect(),
        outputs: Vec::new(),
        direct_outputs: vec![BTreeSet::new(); n],
    }
}

pub fn arb_graph() -> impl Strategy<Value = FfGraph> {
    (1usize..=100).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..=3 * n).prop_map(move |e| graph_from(n, &e))
    })
}

pub fn check_grouping(g: &FfGraph, r: &RegisterGrouping) -> Result<(), TestCaseError> {
    let mut seen = BTreeSet::new();
    for grp in &r.groups {
        prop_assert!(!grp.is_empty());
        for m in grp {
            prop_assert!(seen.insert(m.clone()), "{m} in two groups");
        }
    }
    let all: BTreeSet<String> = g.nodes.iter().cloned().collect();
    prop_assert_eq!(seen, all);
    // every flip-flop edge lands on exactly one group edge
    let at = r.assignment();
    let mut want: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(a, b) in &g.edges {
        *want
            .entry((at[g.nodes[a].as_str()], at[g.nodes[b].as_str()]))
            .or_default() += 1;
    }
    prop_assert_eq!(&r.group_edges, &want);
    prop_assert_eq!(r.group_edges.values().sum::<usize>(), g.edges.len());
    Ok(())
}

/// Hubert-Arabie ARI from pair counts over all item pairs.
pub fn brute_force_ari(a: &[usize], b: &[usize]) -> Option<f64> {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    (den != 0.0).then(|| 2.0 * (both * neither - only_a * only_b) / den)
}

pub fn arb_labels(max: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..=max).prop_flat_map(|n| {
        (
            proptest::collection::vec(0usize..5, n),
            proptest::collection::vec(0usize..5, n),
        )
    })
}
