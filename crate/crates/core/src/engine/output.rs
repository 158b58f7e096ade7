use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{Dedup, Metric, PpaTables};
use super::{Equivalence, Role, SweepConfig, Variant, VariantRecord};
use crate::error::{Error, Result};
use crate::sim::{PpaFingerprint, PpaReport};
use crate::transforms::Technique;
use crate::verilog::write;

/// Everything needed to replay a sweep, written as `run.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub input: String,
    pub library: String,
    pub seed: u64,
    pub skipped_cells: Vec<String>,
    pub sweep: SweepConfig,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

pub const MANIFEST_COLUMNS: [&str; 20] = [
    "id",
    "role",
    "technique",
    "banned_cell",
    "label",
    "status",
    "equivalence",
    "unique",
    "duplicate_of",
    "area",
    "cells",
    "ffs",
    "leakage",
    "dynamic",
    "critical_path",
    "worst_slew",
    "fingerprint",
    "digest",
    "latency",
    "netlist_path",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per record, in id order. Floats are written in shortest
/// round-trip form so [`read_manifest`] restores them exactly.
pub fn manifest_csv(records: &[VariantRecord], dedup: &Dedup) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_COLUMNS).map_err(csv_err)?;
    let mut sorted: Vec<&VariantRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    for r in sorted {
        let p = r.ppa.as_ref();
        let row = [
            r.id.to_string(),
            r.role.to_string(),
            opt(r.technique),
            r.banned_cell.clone().unwrap_or_default(),
            r.recipe_label.clone(),
            if r.succeeded() {
                "ok".into()
            } else {
                "failed".into()
            },
            r.equivalence.name().into(),
            u8::from(dedup.is_unique(r.id)).to_string(),
            opt(dedup.duplicate_of.get(&r.id)),
            opt(p.map(|p| p.area)),
            opt(p.map(|p| p.cell_count)),
            opt(r.ff_count),
            opt(p.map(|p| p.leakage)),
            opt(p.map(|p| p.dynamic)),
            opt(p.map(|p| p.critical_path)),
            opt(p.map(|p| p.worst_slew)),
            opt(r.fingerprint.map(fingerprint_key)),
            opt(r.structural.map(|d| format!("{d:016x}"))),
            r.latency.to_string(),
            r.netlist_path.clone().unwrap_or_default(),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Compact `area/cells/leakage/dynamic/critical_path` form of a
/// fingerprint, in its integer units.
pub fn fingerprint_key(f: PpaFingerprint) -> String {
    format!(
        "{}/{}/{}/{}/{}",
        f.area_r, f.cells, f.leak_r, f.dyn_r, f.cp_r
    )
}

fn parse_fingerprint(s: &str) -> Option<PpaFingerprint> {
    let v: Vec<i64> = s
        .split('/')
        .map(|x| x.parse().ok())
        .collect::<Option<_>>()?;
    match v[..] {
        [area_r, cells, leak_r, dyn_r, cp_r] => Some(PpaFingerprint {
            area_r,
            cells: usize::try_from(cells).ok()?,
            leak_r,
            dyn_r,
            cp_r,
        }),
        _ => None,
    }
}

/// Reads records back from `manifest.csv`. The cell histogram, mismatch
/// details and failure messages are not restored.
pub fn read_manifest(text: &str) -> Result<Vec<VariantRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let head = rd.headers().map_err(csv_err)?.clone();
    if head.iter().ne(MANIFEST_COLUMNS) {
        return Err(Error::Config("manifest.csv has unexpected columns".into()));
    }
    let bad = |row: usize, col: &str| Error::Config(format!("manifest.csv row {row}: bad {col}"));
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let f = |c: &str| {
            rec.get(MANIFEST_COLUMNS.iter().position(|x| *x == c).unwrap())
                .unwrap_or("")
        };
        let num = |c: &str| -> Result<Option<f64>> {
            match f(c) {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(i + 1, c)),
            }
        };
        let role = match f("role") {
            "baseline" => Role::Baseline,
            "dont-use" => Role::DontUse,
            "reference" => Role::Reference,
            "sweep" => Role::Sweep,
            _ => return Err(bad(i + 1, "role")),
        };
        let technique = match f("technique") {
            "" => None,
            t => Some(
                t.parse::<Technique>()
                    .map_err(|_| bad(i + 1, "technique"))?,
            ),
        };
        let ok = f("status") == "ok";
        let ppa = match (
            num("area")?,
            num("cells")?,
            num("leakage")?,
            num("dynamic")?,
            num("critical_path")?,
        ) {
            (Some(area), Some(cells), Some(leakage), Some(dynamic), Some(cp)) => Some(PpaReport {
                area,
                cell_count: cells as usize,
                cell_histogram: Default::default(),
                leakage,
                dynamic,
                critical_path: cp,
                worst_slew: num("worst_slew")?.unwrap_or(0.0),
            }),
            _ => None,
        };
        let fingerprint = match f("fingerprint") {
            "" => None,
            s => Some(parse_fingerprint(s).ok_or_else(|| bad(i + 1, "fingerprint"))?),
        };
        let structural = match f("digest") {
            "" => None,
            s => Some(u64::from_str_radix(s, 16).map_err(|_| bad(i + 1, "digest"))?),
        };
        out.push(VariantRecord {
            id: f("id").parse().map_err(|_| bad(i + 1, "id"))?,
            role,
            technique,
            recipe_label: f("label").to_string(),
            banned_cell: Some(f("banned_cell").to_string()).filter(|s| !s.is_empty()),
            ppa,
            fingerprint,
            structural,
            ff_count: num("ffs")?.map(|v| v as usize),
            netlist_path: Some(f("netlist_path").to_string()).filter(|s| !s.is_empty()),
            equivalence: match f("equivalence") {
                "equivalent" => Equivalence::Equivalent,
                "mismatch" => Equivalence::Mismatch(String::new()),
                _ => Equivalence::NotRun,
            },
            latency: f("latency").parse().map_err(|_| bad(i + 1, "latency"))?,
            warnings: 0,
            failure: (!ok).then(|| "failed".to_string()),
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_default()
}

fn precision(m: Metric) -> usize {
    match m {
        Metric::Cells => 0,
        Metric::Leakage | Metric::Dynamic => 6,
        Metric::Area | Metric::CriticalPath => 3,
    }
}

pub fn table1_csv(tables: &PpaTables) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["group".to_string(), "count".to_string()];
    for m in Metric::ALL {
        head.push(format!("{}_min", m.name()));
        head.push(format!("{}_max", m.name()));
    }
    w.write_record(&head).map_err(csv_err)?;
    for r in &tables.table1 {
        let mut row = vec![r.group.clone(), r.count.to_string()];
        for (i, m) in Metric::ALL.iter().enumerate() {
            row.push(fmt_opt(r.min[i], precision(*m)));
            row.push(fmt_opt(r.max[i], precision(*m)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn table2_csv(tables: &PpaTables) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["technique".to_string(), "representative".to_string()];
    head.extend(Metric::ALL.iter().map(|m| format!("{}_pct", m.name())));
    w.write_record(&head).map_err(csv_err)?;
    for r in &tables.table2 {
        let mut row = vec![r.technique.to_string(), opt(r.representative)];
        row.extend(r.delta.iter().map(|d| fmt_opt(*d, 2)));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn histogram_csv(h: &super::Histogram) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin", "lo", "hi", "count"])
        .map_err(csv_err)?;
    for (i, c) in h.counts.iter().enumerate() {
        let (lo, hi) = h.edges(i);
        w.write_record([
            i.to_string(),
            format!("{lo:.6}"),
            format!("{hi:.6}"),
            c.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Writes the sweep layout under `dir`: `variants/`, `manifest.csv`,
/// `stats/`, `sweep.log` and `run.toml`.
pub fn write_sweep(
    dir: &Path,
    variants: &[Variant],
    dedup: &Dedup,
    tables: &PpaTables,
    run: &RunManifest,
) -> Result<()> {
    fs::create_dir_all(dir.join("variants"))?;
    let mut log = String::new();
    for v in variants {
        if let (Some(n), Some(path)) = (&v.netlist, &v.record.netlist_path) {
            fs::write(dir.join(path), write(n))?;
        }
        for l in &v.log {
            log += &format!("{} {}: {l}\n", v.record.id, v.record.recipe_label);
        }
    }
    let records: Vec<VariantRecord> = variants.iter().map(|v| v.record.clone()).collect();
    fs::write(dir.join("manifest.csv"), manifest_csv(&records, dedup)?)?;
    write_stats(&dir.join("stats"), tables)?;
    fs::write(dir.join("sweep.log"), log)?;
    fs::write(dir.join("run.toml"), run.to_toml())?;
    Ok(())
}

/// Writes `table1.csv`, `table2.csv` and one `<metric>_hist.csv` per metric.
pub fn write_stats(dir: &Path, tables: &PpaTables) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("table1.csv"), table1_csv(tables)?)?;
    fs::write(dir.join("table2.csv"), table2_csv(tables)?)?;
    for (m, h) in &tables.histograms {
        fs::write(
            dir.join(format!("{}_hist.csv", m.name())),
            histogram_csv(h)?,
        )?;
    }
    Ok(())
}
