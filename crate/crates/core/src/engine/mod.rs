//! The variant sweep: one recipe per (banned cell, technique) pair, run in
//! parallel, checked against the baseline and deduplicated.

mod output;
mod stats;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::library::{mask_dont_use, CellLibrary};
use crate::netlist::{netlist_digest, Netlist};
use crate::sim::{
    analyze_ppa, check_equivalence, EquivConfig, PowerConfig, PpaFingerprint, PpaReport, Verdict,
};
use crate::transforms::{apply_recipe, Recipe, Technique, TechniqueParams};

pub use output::{
    fingerprint_key, histogram_csv, manifest_csv, read_manifest, table1_csv, table2_csv,
    write_stats, write_sweep, RunManifest, MANIFEST_COLUMNS,
};
pub use stats::{
    compute_stats, dedup, histogram, Dedup, DedupKey, Histogram, Metric, PpaTables, SweepStats,
    Table1Row, Table2Row, TechniqueCount,
};

/// Why a row is in the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// The unmodified input.
    Baseline,
    /// A single banned cell, remapped, no optimization pass.
    DontUse,
    /// A technique with nothing banned.
    Reference,
    /// A technique with one banned cell.
    Sweep,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Baseline => "baseline",
            Role::DontUse => "dont-use",
            Role::Reference => "reference",
            Role::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: usize,
    pub role: Role,
    pub technique: Option<Technique>,
    pub recipe: Recipe,
}

/// Cells that can be banned without breaking library completeness, plus a
/// log line per skipped cell.
pub fn bannable_cells(lib: &CellLibrary) -> (Vec<String>, Vec<String>) {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for c in lib.available() {
        match mask_dont_use(lib, &c.name) {
            Ok(_) => ok.push(c.name.clone()),
            Err(e) => skipped.push(format!("skipping {}: {e}", c.name)),
        }
    }
    (ok, skipped)
}

pub fn recipe_label(technique: Option<Technique>, banned: Option<&str>) -> String {
    let t = technique.map_or("dont-use", Technique::name);
    match (technique, banned) {
        (_, Some(c)) => format!("{t}.no_{c}"),
        (Some(_), None) => t.to_string(),
        (None, None) => "baseline".into(),
    }
}

pub fn technique_recipe(
    technique: Option<Technique>,
    banned: Option<&str>,
    params: &TechniqueParams,
) -> Recipe {
    Recipe {
        label: recipe_label(technique, banned),
        dont_use: banned.map(str::to_string),
        passes: technique.map(|t| t.passes(params)).unwrap_or_default(),
    }
}

/// Cartesian product of bannable cells and techniques, technique-major.
pub fn enumerate_recipes(
    lib: &CellLibrary,
    techniques: &[Technique],
    params: &TechniqueParams,
) -> Result<(Vec<Recipe>, Vec<String>)> {
    if techniques.is_empty() {
        return Err(Error::Config("no techniques selected".into()));
    }
    let (cells, skipped) = bannable_cells(lib);
    let recipes = techniques
        .iter()
        .flat_map(|&t| cells.iter().map(move |c| (t, c)))
        .map(|(t, c)| technique_recipe(Some(t), Some(c), params))
        .collect();
    Ok((recipes, skipped))
}

/// Full job list: the baseline (id 0), one ban-only row per bannable cell,
/// then per technique its unbanned reference followed by its banned rows.
/// Dedup keeps the lowest id, so a technique variant only counts as unique
/// when it differs from the baseline, from every plain remap and from
/// everything earlier in the list.
pub fn plan_sweep(
    lib: &CellLibrary,
    techniques: &[Technique],
    params: &TechniqueParams,
) -> Result<(Vec<Job>, Vec<String>)> {
    if techniques.is_empty() {
        return Err(Error::Config("no techniques selected".into()));
    }
    let (cells, skipped) = bannable_cells(lib);
    let mut jobs = Vec::new();
    let mut push = |role, technique, banned: Option<&str>| {
        jobs.push(Job {
            id: jobs.len(),
            role,
            technique,
            recipe: technique_recipe(technique, banned, params),
        })
    };
    push(Role::Baseline, None, None);
    for c in &cells {
        push(Role::DontUse, None, Some(c));
    }
    for &t in techniques {
        push(Role::Reference, Some(t), None);
        for c in &cells {
            push(Role::Sweep, Some(t), Some(c));
        }
    }
    Ok((jobs, skipped))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equivalence {
    Equivalent,
    Mismatch(String),
    /// No netlist to compare: the recipe failed.
    NotRun,
}

impl Equivalence {
    pub fn name(&self) -> &'static str {
        match self {
            Equivalence::Equivalent => "equivalent",
            Equivalence::Mismatch(_) => "mismatch",
            Equivalence::NotRun => "not-run",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRecord {
    pub id: usize,
    pub role: Role,
    pub technique: Option<Technique>,
    pub recipe_label: String,
    pub banned_cell: Option<String>,
    pub ppa: Option<PpaReport>,
    pub fingerprint: Option<PpaFingerprint>,
    pub structural: Option<u64>,
    pub ff_count: Option<usize>,
    pub netlist_path: Option<String>,
    pub equivalence: Equivalence,
    pub latency: usize,
    pub warnings: usize,
    /// Error message when the recipe failed.
    pub failure: Option<String>,
}

impl VariantRecord {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.gv", self.id, self.recipe_label)
    }
}

#[derive(Debug, Clone)]
pub struct Variant {
    pub record: VariantRecord,
    pub netlist: Option<Netlist>,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub techniques: Vec<Technique>,
    pub params: TechniqueParams,
    pub equivalence: EquivSettings,
    pub power: PowerConfig,
    /// 0 picks the number of cores.
    pub workers: usize,
    pub ppa_only: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            techniques: Technique::ALL.to_vec(),
            params: TechniqueParams::default(),
            equivalence: EquivSettings::default(),
            power: PowerConfig::default(),
            workers: 0,
            ppa_only: false,
        }
    }
}

/// Serializable mirror of [`EquivConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivSettings {
    pub vectors: usize,
    pub cycles: usize,
    pub seed: u64,
}

impl Default for EquivSettings {
    fn default() -> Self {
        let d = EquivConfig::default();
        Self {
            vectors: d.vectors,
            cycles: d.cycles,
            seed: d.seed,
        }
    }
}

impl From<EquivSettings> for EquivConfig {
    fn from(s: EquivSettings) -> Self {
        EquivConfig {
            vectors: s.vectors,
            cycles: s.cycles,
            seed: s.seed,
        }
    }
}

/// Runs one job against the baseline. Errors become a failed record.
pub fn run_job(baseline: &Netlist, lib: &CellLibrary, job: &Job, cfg: &SweepConfig) -> Variant {
    let mut record = VariantRecord {
        id: job.id,
        role: job.role,
        technique: job.technique,
        recipe_label: job.recipe.label.clone(),
        banned_cell: job.recipe.dont_use.clone(),
        ppa: None,
        fingerprint: None,
        structural: None,
        ff_count: None,
        netlist_path: None,
        equivalence: Equivalence::NotRun,
        latency: 0,
        warnings: 0,
        failure: None,
    };
    let result = apply_recipe(baseline, lib, &job.recipe).and_then(|r| {
        let ppa = analyze_ppa(&r.netlist, lib, &cfg.power)?;
        let verdict = check_equivalence(
            baseline,
            &r.netlist,
            lib,
            &cfg.equivalence.into(),
            r.latency,
        )?;
        Ok((r, ppa, verdict))
    });
    match result {
        Ok((r, ppa, verdict)) => {
            record.fingerprint = Some(ppa.fingerprint());
            record.ff_count = Some(ppa.ff_count(lib));
            record.ppa = Some(ppa);
            record.structural = Some(netlist_digest(&r.netlist));
            record.netlist_path = Some(format!("variants/{}", record.file_name()));
            record.equivalence = match verdict {
                Verdict::Equivalent => Equivalence::Equivalent,
                v @ Verdict::Mismatch(_) => Equivalence::Mismatch(v.to_string()),
            };
            record.latency = r.latency;
            record.warnings = r.warnings.len();
            let log = r
                .log
                .iter()
                .map(ToString::to_string)
                .chain(r.warnings.iter().map(|w| format!("warning: {w}")))
                .collect();
            Variant {
                record,
                netlist: Some(r.netlist),
                log,
            }
        }
        Err(e) => {
            record.failure = Some(e.to_string());
            Variant {
                record,
                netlist: None,
                log: vec![format!("failed: {e}")],
            }
        }
    }
}

/// Runs every job; results come back in job order whatever the worker count.
pub fn run_sweep(
    baseline: &Netlist,
    lib: &CellLibrary,
    jobs: &[Job],
    cfg: &SweepConfig,
) -> Vec<Variant> {
    par_map(jobs, cfg.workers, |j| run_job(baseline, lib, j, cfg))
}

/// Everything a full sweep produces.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub variants: Vec<Variant>,
    pub dedup: Dedup,
    pub tables: PpaTables,
    /// Cells left out of the sweep and why.
    pub skipped: Vec<String>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<VariantRecord> {
        self.variants.iter().map(|v| v.record.clone()).collect()
    }
}

/// Plans, runs, deduplicates and summarizes a sweep. Fails only if the
/// baseline itself cannot be analyzed; failing variants are recorded.
pub fn sweep(baseline: &Netlist, lib: &CellLibrary, cfg: &SweepConfig) -> Result<SweepOutcome> {
    let (jobs, skipped) = plan_sweep(lib, &cfg.techniques, &cfg.params)?;
    let variants = run_sweep(baseline, lib, &jobs, cfg);
    let base = variants[0].record.ppa.clone().ok_or_else(|| {
        Error::Invalid(format!(
            "baseline: {}",
            variants[0].record.failure.as_deref().unwrap_or("no report")
        ))
    })?;
    let records: Vec<VariantRecord> = variants.iter().map(|v| v.record.clone()).collect();
    let mode = if cfg.ppa_only {
        DedupKey::PpaOnly
    } else {
        DedupKey::Full
    };
    let dedup = dedup(&records, mode);
    let tables = compute_stats(&dedup.unique, &records, &base);
    Ok(SweepOutcome {
        variants,
        dedup,
        tables,
        skipped,
    })
}
