use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Equivalence, Role, VariantRecord};
use crate::sim::{PpaFingerprint, PpaReport};
use crate::transforms::Technique;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupKey {
    /// Rounded PPA plus structural digest.
    #[default]
    Full,
    /// Rounded PPA only.
    PpaOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechniqueCount {
    pub technique: Technique,
    /// Banned-cell rows of this technique.
    pub total: usize,
    pub unique: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepStats {
    /// Banned-cell technique rows (bannable cells × techniques).
    pub total: usize,
    /// Unique rows among `total`.
    pub unique: usize,
    pub rows: usize,
    pub failed: usize,
    pub mismatches: usize,
    /// Unique rows among the ban-only remaps.
    pub dont_use_unique: usize,
    pub per_technique: Vec<TechniqueCount>,
}

impl SweepStats {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.unique as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dedup {
    /// First record per key, in id order. Failed records are never unique.
    pub unique: Vec<VariantRecord>,
    /// Duplicate id -> id of the record it repeats.
    pub duplicate_of: BTreeMap<usize, usize>,
    pub stats: SweepStats,
}

impl Dedup {
    pub fn is_unique(&self, id: usize) -> bool {
        self.unique.binary_search_by_key(&id, |r| r.id).is_ok()
    }
}

fn key(r: &VariantRecord, mode: DedupKey) -> Option<(PpaFingerprint, u64)> {
    let fp = r.fingerprint?;
    match mode {
        DedupKey::Full => Some((fp, r.structural?)),
        DedupKey::PpaOnly => Some((fp, 0)),
    }
}

pub fn dedup(records: &[VariantRecord], mode: DedupKey) -> Dedup {
    let mut sorted: Vec<&VariantRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    let mut first: HashMap<(PpaFingerprint, u64), usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut duplicate_of = BTreeMap::new();
    for r in &sorted {
        let Some(k) = key(r, mode) else { continue };
        match first.get(&k) {
            Some(&orig) => {
                duplicate_of.insert(r.id, orig);
            }
            None => {
                first.insert(k, r.id);
                unique.push((*r).clone());
            }
        }
    }
    let is_unique = |r: &VariantRecord| r.succeeded() && !duplicate_of.contains_key(&r.id);
    let mut per_technique: Vec<TechniqueCount> = Vec::new();
    for r in sorted.iter().filter(|r| r.role == Role::Sweep) {
        let t = r.technique.expect("sweep rows carry a technique");
        let pos = match per_technique.iter().position(|c| c.technique == t) {
            Some(p) => p,
            None => {
                per_technique.push(TechniqueCount {
                    technique: t,
                    total: 0,
                    unique: 0,
                    failed: 0,
                });
                per_technique.len() - 1
            }
        };
        let c = &mut per_technique[pos];
        c.total += 1;
        c.unique += usize::from(is_unique(r));
        c.failed += usize::from(!r.succeeded());
    }
    let stats = SweepStats {
        total: per_technique.iter().map(|c| c.total).sum(),
        unique: per_technique.iter().map(|c| c.unique).sum(),
        rows: records.len(),
        failed: records.iter().filter(|r| !r.succeeded()).count(),
        mismatches: records
            .iter()
            .filter(|r| matches!(r.equivalence, Equivalence::Mismatch(_)))
            .count(),
        dont_use_unique: sorted
            .iter()
            .filter(|r| r.role == Role::DontUse && is_unique(r))
            .count(),
        per_technique,
    };
    Dedup {
        unique,
        duplicate_of,
        stats,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Area,
    Cells,
    Leakage,
    Dynamic,
    CriticalPath,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Area,
        Metric::Cells,
        Metric::Leakage,
        Metric::Dynamic,
        Metric::CriticalPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Area => "area",
            Metric::Cells => "cells",
            Metric::Leakage => "leakage",
            Metric::Dynamic => "dynamic",
            Metric::CriticalPath => "critical_path",
        }
    }

    pub fn value(self, p: &PpaReport) -> f64 {
        match self {
            Metric::Area => p.area,
            Metric::Cells => p.cell_count as f64,
            Metric::Leakage => p.leakage,
            Metric::Dynamic => p.dynamic,
            Metric::CriticalPath => p.critical_path,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    /// `baseline`, `dont-use` or a technique name.
    pub group: String,
    pub count: usize,
    /// Indexed like [`Metric::ALL`]; `None` when the group is empty.
    pub min: Vec<Option<f64>>,
    pub max: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub technique: Technique,
    /// Id of the unbanned run used as the representative.
    pub representative: Option<usize>,
    /// Percent change per metric, indexed like [`Metric::ALL`].
    pub delta: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn edges(&self, bin: usize) -> (f64, f64) {
        (
            self.lo + bin as f64 * self.width,
            self.lo + (bin + 1) as f64 * self.width,
        )
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

const MIN_BINS: usize = 10;
const MAX_BINS: usize = 1000;

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Freedman-Diaconis histogram with at least ten bins.
pub fn histogram(values: &[f64]) -> Histogram {
    if values.is_empty() {
        return Histogram {
            lo: 0.0,
            width: 1.0,
            counts: vec![0; MIN_BINS],
        };
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (min, max) = (v[0], v[v.len() - 1]);
    let range = max - min;
    if !(range > 0.0) {
        let width = if min == 0.0 { 0.1 } else { min.abs() * 0.01 };
        let lo = min - width * (MIN_BINS / 2) as f64;
        let mut counts = vec![0; MIN_BINS];
        counts[MIN_BINS / 2] = v.len();
        return Histogram { lo, width, counts };
    }
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let h = 2.0 * iqr / (v.len() as f64).cbrt();
    let bins = if h > 0.0 {
        ((range / h).ceil() as usize).clamp(MIN_BINS, MAX_BINS)
    } else {
        MIN_BINS
    };
    let width = range / bins as f64;
    let mut counts = vec![0; bins];
    for x in &v {
        let b = (((x - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram {
        lo: min,
        width,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpaTables {
    pub table1: Vec<Table1Row>,
    pub table2: Vec<Table2Row>,
    pub histograms: Vec<(Metric, Histogram)>,
}

fn group_of(r: &VariantRecord) -> String {
    match (r.role, r.technique) {
        (Role::Baseline, _) => "baseline".into(),
        (_, Some(t)) => t.name().into(),
        (_, None) => "dont-use".into(),
    }
}

/// Min/max per group over the unique records, percent change of each
/// technique's unbanned run against the baseline, and one histogram per
/// metric over all unique records.
pub fn compute_stats(
    unique: &[VariantRecord],
    records: &[VariantRecord],
    baseline: &PpaReport,
) -> PpaTables {
    let mut groups: Vec<String> = vec!["baseline".into(), "dont-use".into()];
    for r in records.iter().filter(|r| r.technique.is_some()) {
        let g = group_of(r);
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let table1 = groups
        .into_iter()
        .map(|g| {
            let members: Vec<&PpaReport> = unique
                .iter()
                .filter(|r| group_of(r) == g)
                .filter_map(|r| r.ppa.as_ref())
                .collect();
            let fold = |m: Metric, pick: fn(f64, f64) -> f64| {
                members.iter().map(|p| m.value(p)).reduce(pick)
            };
            Table1Row {
                count: members.len(),
                min: Metric::ALL.iter().map(|&m| fold(m, f64::min)).collect(),
                max: Metric::ALL.iter().map(|&m| fold(m, f64::max)).collect(),
                group: g,
            }
        })
        .collect();

    let mut table2: Vec<Table2Row> = Vec::new();
    for r in records.iter().filter(|r| r.role == Role::Reference) {
        let t = r.technique.expect("reference rows carry a technique");
        let delta = Metric::ALL
            .iter()
            .map(|&m| {
                let (b, v) = (m.value(baseline), m.value(r.ppa.as_ref()?));
                (b != 0.0).then(|| (v - b) / b * 100.0)
            })
            .collect();
        table2.push(Table2Row {
            technique: t,
            representative: r.succeeded().then_some(r.id),
            delta,
        });
    }

    let histograms = Metric::ALL
        .iter()
        .map(|&m| {
            let vals: Vec<f64> = unique
                .iter()
                .filter_map(|r| r.ppa.as_ref())
                .map(|p| m.value(p))
                .collect();
            (m, histogram(&vals))
        })
        .collect();
    PpaTables {
        table1,
        table2,
        histograms,
    }
}
