use std::collections::{BTreeMap, BTreeSet};

use super::FfGraph;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMode {
    Normal,
    /// Groups never exceed the target size; merges that reach it exactly
    /// are taken first.
    Steered(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterGrouping {
    /// Member names, each group sorted, groups ordered by first member.
    pub groups: Vec<Vec<String>>,
    /// `(from, to)` group pairs with the number of flip-flop edges behind them.
    pub group_edges: BTreeMap<(usize, usize), usize>,
}

impl RegisterGrouping {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Group id of every member.
    pub fn assignment(&self) -> BTreeMap<&str, usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, m)| m.iter().map(move |n| (n.as_str(), g)))
            .collect()
    }
}

const SELF: usize = usize::MAX;

/// Neighbour-group counts of one group, keyed by group id.
type Profile = BTreeMap<usize, u32>;

struct State {
    size: Vec<usize>,
    pred: Vec<Profile>,
    succ: Vec<Profile>,
    alive: Vec<bool>,
    members: Vec<Vec<usize>>,
}

/// Weighted Jaccard of two profiles of the pair `g`, `h`, each scaled to
/// unit mass. Both ids read as one self key, as if the pair were already
/// merged.
fn jaccard(a: &Profile, b: &Profile, g: usize, h: usize) -> f64 {
    let fold = |p: &Profile| {
        let total: u32 = p.values().sum();
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        for (&k, &c) in p {
            let k = if k == g || k == h { SELF } else { k };
            *out.entry(k).or_default() += f64::from(c) / f64::from(total);
        }
        out
    };
    let (a, b) = (fold(a), fold(b));
    let mut num = 0.0;
    let mut den = 0.0;
    let keys: BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    for k in keys {
        let (x, y) = (
            a.get(&k).copied().unwrap_or(0.0),
            b.get(&k).copied().unwrap_or(0.0),
        );
        num += x.min(y);
        den += x.max(y);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl State {
    fn similarity(&self, g: usize, h: usize) -> f64 {
        0.5 * (jaccard(&self.pred[g], &self.pred[h], g, h)
            + jaccard(&self.succ[g], &self.succ[h], g, h))
    }

    /// Moves `h` into `g` and renames `h` to `g` in every profile that
    /// mentions it. Returns the groups whose profiles changed.
    fn merge(&mut self, g: usize, h: usize) -> BTreeSet<usize> {
        self.alive[h] = false;
        self.size[g] += self.size[h];
        let moved = std::mem::take(&mut self.members[h]);
        self.members[g].extend(moved);
        for (src, dst) in [
            (std::mem::take(&mut self.pred[h]), 0),
            (std::mem::take(&mut self.succ[h]), 1),
        ] {
            let p = if dst == 0 {
                &mut self.pred[g]
            } else {
                &mut self.succ[g]
            };
            for (k, c) in src {
                *p.entry(k).or_default() += c;
            }
        }
        let touched: BTreeSet<usize> = self.pred[g]
            .keys()
            .chain(self.succ[g].keys())
            .copied()
            .filter(|&k| k != h)
            .collect();
        let mut changed = BTreeSet::from([g]);
        for &x in touched.iter().chain([g].iter()) {
            for p in [&mut self.pred[x], &mut self.succ[x]] {
                if let Some(c) = p.remove(&h) {
                    *p.entry(g).or_default() += c;
                    changed.insert(x);
                }
            }
        }
        changed.retain(|&x| self.alive[x]);
        changed
    }
}

/// Agglomerative grouping by predecessor/successor similarity.
///
/// Starting from singletons, the most similar pair of groups with
/// similarity at least `tau` is merged until none is left. Ties go to the
/// pair whose smallest member names sort first.
pub fn group_registers(graph: &FfGraph, mode: GroupMode, tau: f64) -> Result<RegisterGrouping> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau must be in (0, 1], got {tau}")));
    }
    if let GroupMode::Steered(0) = mode {
        return Err(Error::Config("steered target size must be positive".into()));
    }
    let n = graph.len();
    let mut st = State {
        size: vec![1; n],
        pred: vec![Profile::new(); n],
        succ: vec![Profile::new(); n],
        alive: vec![true; n],
        members: (0..n).map(|v| vec![v]).collect(),
    };
    for &(a, b) in &graph.edges {
        *st.succ[a].entry(b).or_default() += 1;
        *st.pred[b].entry(a).or_default() += 1;
    }
    // Node indices follow name order, so a group's id is its smallest
    // member and comparing ids compares smallest names.
    let mut sim = vec![0.0f64; n * n];
    for g in 0..n {
        for h in g + 1..n {
            sim[g * n + h] = st.similarity(g, h);
        }
    }
    let target = match mode {
        GroupMode::Normal => usize::MAX,
        GroupMode::Steered(t) => t,
    };
    loop {
        // (exact size, similarity); higher wins, earlier pair wins ties.
        let mut best: Option<(bool, f64, usize, usize)> = None;
        for g in (0..n).filter(|&g| st.alive[g]) {
            for h in (g + 1..n).filter(|&h| st.alive[h]) {
                let s = sim[g * n + h];
                let size = st.size[g] + st.size[h];
                if s < tau || size > target {
                    continue;
                }
                let exact = size == target;
                let better = match best {
                    None => true,
                    Some((be, bs, _, _)) => (exact, s) > (be, bs),
                };
                if better {
                    best = Some((exact, s, g, h));
                }
            }
        }
        let Some((_, _, g, h)) = best else { break };
        let changed = st.merge(g, h);
        for &x in &changed {
            for y in (0..n).filter(|&y| st.alive[y] && y != x) {
                let (a, b) = (x.min(y), x.max(y));
                sim[a * n + b] = st.similarity(a, b);
            }
        }
    }

    let mut parts: Vec<(Vec<String>, &Vec<usize>)> = (0..n)
        .filter(|&g| st.alive[g])
        .map(|g| {
            let mut names: Vec<String> = st.members[g]
                .iter()
                .map(|&v| graph.nodes[v].clone())
                .collect();
            names.sort();
            (names, &st.members[g])
        })
        .collect();
    parts.sort();
    let mut id = vec![0; n];
    for (k, (_, m)) in parts.iter().enumerate() {
        for &v in m.iter() {
            id[v] = k;
        }
    }
    let groups = parts.into_iter().map(|(names, _)| names).collect();
    let mut group_edges = BTreeMap::new();
    for &(a, b) in &graph.edges {
        *group_edges.entry((id[a], id[b])).or_default() += 1;
    }
    Ok(RegisterGrouping {
        groups,
        group_edges,
    })
}
