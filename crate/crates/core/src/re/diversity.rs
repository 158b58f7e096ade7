use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{FfGraph, RegisterGrouping};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityScore {
    /// Adjusted Rand index over matched flip-flops; `None` when nothing
    /// could be matched.
    pub ari: Option<f64>,
    /// Half the L1 distance between the two flip-flop-weighted group-size
    /// distributions, in [0, 1].
    pub size_histogram_distance: f64,
    pub matched: usize,
}

impl DiversityScore {
    pub fn is_comparable(&self) -> bool {
        self.ari.is_some()
    }
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index of two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    if a.len() < 2 {
        return 1.0;
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sa * sb / pairs(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return if index == sa && index == sb { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

fn size_distribution(g: &RegisterGrouping) -> BTreeMap<usize, f64> {
    let total: usize = g.sizes().iter().sum();
    let mut d = BTreeMap::new();
    for s in g.sizes() {
        *d.entry(s).or_default() += s as f64 / total as f64;
    }
    d
}

pub fn size_histogram_distance(a: &RegisterGrouping, b: &RegisterGrouping) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let (da, db) = (size_distribution(a), size_distribution(b));
    let keys: BTreeSet<usize> = da.keys().chain(db.keys()).copied().collect();
    let l1: f64 = keys
        .iter()
        .map(|k| (da.get(k).copied().unwrap_or(0.0) - db.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    (l1 / 2.0).min(1.0)
}

type Signature<'a> = (BTreeSet<&'a str>, Option<usize>);

fn classes<'a>(
    g: &'a FfGraph,
    sig: &[(BTreeSet<usize>, Option<usize>)],
) -> BTreeMap<Signature<'a>, Vec<&'a str>> {
    let mut m: BTreeMap<Signature<'a>, Vec<&'a str>> = BTreeMap::new();
    for (v, (outs, dist)) in sig.iter().enumerate() {
        let names = outs.iter().map(|&o| g.outputs[o].as_str()).collect();
        m.entry((names, *dist))
            .or_default()
            .push(g.nodes[v].as_str());
    }
    m
}

/// Pairs flip-flops of two equivalent designs. Flip-flops correspond when
/// they reach the same primary outputs at the same minimum sequential
/// distance; within such a class, equal names pair first and the rest pair
/// in name order. Flip-flops left over on either side stay unmatched.
pub fn match_flops(
    a: &FfGraph,
    sig_a: &[(BTreeSet<usize>, Option<usize>)],
    b: &FfGraph,
    sig_b: &[(BTreeSet<usize>, Option<usize>)],
) -> Vec<(String, String)> {
    let ca = classes(a, sig_a);
    let cb = classes(b, sig_b);
    let mut out = Vec::new();
    for (key, xs) in &ca {
        let Some(ys) = cb.get(key) else { continue };
        let yset: BTreeSet<&str> = ys.iter().copied().collect();
        let same: BTreeSet<&str> = xs.iter().copied().filter(|x| yset.contains(x)).collect();
        out.extend(same.iter().map(|s| (s.to_string(), s.to_string())));
        let rest_a = xs.iter().filter(|x| !same.contains(*x));
        let rest_b = ys.iter().filter(|y| !same.contains(*y));
        out.extend(
            rest_a
                .zip(rest_b)
                .map(|(x, y)| (x.to_string(), y.to_string())),
        );
    }
    out.sort();
    out
}

pub fn grouping_diversity(
    a: &RegisterGrouping,
    b: &RegisterGrouping,
    matching: &[(String, String)],
) -> DiversityScore {
    let (ma, mb) = (a.assignment(), b.assignment());
    let (la, lb): (Vec<usize>, Vec<usize>) = matching
        .iter()
        .filter_map(|(x, y)| Some((*ma.get(x.as_str())?, *mb.get(y.as_str())?)))
        .unzip();
    DiversityScore {
        ari: (!la.is_empty()).then(|| adjusted_rand_index(&la, &lb)),
        size_histogram_distance: size_histogram_distance(a, b),
        matched: la.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grouping(groups: &[&[&str]]) -> RegisterGrouping {
        RegisterGrouping {
            groups: groups
                .iter()
                .map(|g| g.iter().map(|s| s.to_string()).collect())
                .collect(),
            group_edges: BTreeMap::new(),
        }
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 7, 7]), 1.0);
        let singletons: Vec<usize> = (0..8).collect();
        let one = vec![0; 8];
        assert!(adjusted_rand_index(&singletons, &one) <= 0.0);
        assert_eq!(adjusted_rand_index(&singletons, &singletons), 1.0);
        assert_eq!(adjusted_rand_index(&one, &one), 1.0);
    }

    #[test]
    fn self_comparison() {
        let g = grouping(&[&["a", "b"], &["c"]]);
        let m: Vec<(String, String)> = ["a", "b", "c"]
            .iter()
            .map(|s| (s.to_string(), s.to_string()))
            .collect();
        let d = grouping_diversity(&g, &g, &m);
        assert_eq!(d.ari, Some(1.0));
        assert_eq!(d.size_histogram_distance, 0.0);
        assert_eq!(d.matched, 3);
        assert!(!grouping_diversity(&g, &g, &[]).is_comparable());
    }

    #[test]
    fn histogram_distance_range() {
        let a = grouping(&[&["a", "b", "c", "d"]]);
        let b = grouping(&[&["a"], &["b"], &["c"], &["d"]]);
        assert_eq!(size_histogram_distance(&a, &b), 1.0);
        assert_eq!(size_histogram_distance(&a, &grouping(&[])), 1.0);
    }

    #[test]
    fn matching_prefers_names_then_order() {
        let g = |names: &[&str]| FfGraph {
            nodes: names.iter().map(|s| s.to_string()).collect(),
            edges: BTreeSet::new(),
            outputs: vec!["y".into()],
            direct_outputs: vec![BTreeSet::from([0]); names.len()],
        };
        let (a, b) = (g(&["p", "q", "r"]), g(&["q", "s"]));
        let m = match_flops(&a, &a.output_signatures(), &b, &b.output_signatures());
        assert_eq!(
            m,
            [
                ("p".to_string(), "s".to_string()),
                ("q".to_string(), "q".to_string())
            ]
        );
    }
}
