//! `netdiv`: check, transform, sweep and reverse-engineer gate-level netlists.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use netdiv::engine::{
    self, compute_stats, dedup, read_manifest, run_job, technique_recipe, write_stats, write_sweep,
    DedupKey, Equivalence, Job, Role, RunManifest, SweepConfig,
};
use netdiv::exec::par_map;
use netdiv::library::{bundled_library, load_library, CellLibrary};
use netdiv::netlist::{validate, Netlist, Severity};
use netdiv::re::{analyze, export_group_graph, Analysis, GroupMode, DEFAULT_TAU};
use netdiv::sim::analyze_ppa;
use netdiv::transforms::{Recipe, Technique};
use netdiv::verilog::{parse_file, write};

#[derive(Parser)]
#[command(name = "netdiv", version, about = "Gate-level netlist diversification")]
struct Cli {
    /// Cell library file; the bundled library when omitted.
    #[arg(long, global = true)]
    lib: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed of the equivalence stimulus.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Budget {
    /// Random stimulus vectors per equivalence check.
    #[arg(long, default_value_t = 500)]
    vectors: usize,
    /// Clock cycles per vector.
    #[arg(long, default_value_t = 64)]
    cycles: usize,
    /// Slew limit of the max-transition technique, ps.
    #[arg(long)]
    slew_limit: Option<f64>,
    /// Retiming move budget.
    #[arg(long)]
    max_moves: Option<usize>,
    /// Smallest register bank that gets a clock gate.
    #[arg(long)]
    min_group: Option<usize>,
    /// Default switching activity of data nets.
    #[arg(long)]
    activity: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a netlist.
    Check { input: PathBuf },
    /// Apply one technique or recipe and check the result.
    Variant {
        input: PathBuf,
        /// Repeat to combine techniques.
        #[arg(
            long,
            short,
            conflicts_with = "recipe",
            required_unless_present = "recipe"
        )]
        technique: Vec<Technique>,
        /// Recipe file (TOML).
        #[arg(long)]
        recipe: Option<PathBuf>,
        #[arg(long)]
        dont_use: Option<String>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Run every technique with every bannable cell.
    Sweep {
        input: PathBuf,
        /// Restrict to these techniques; all of them by default.
        #[arg(long, short)]
        technique: Vec<Technique>,
        /// Deduplicate on the PPA fingerprint alone.
        #[arg(long)]
        ppa_only: bool,
        #[command(flatten)]
        budget: Budget,
    },
    /// Group flip-flops into registers; compare variants when given a directory.
    Analyze {
        path: PathBuf,
        #[arg(long, conflicts_with = "steered")]
        normal: bool,
        /// Steered mode with this register size.
        #[arg(long)]
        steered: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Reference netlist for diversity scores.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Recompute tables and histograms from a sweep directory.
    Stats {
        dir: PathBuf,
        #[arg(long)]
        ppa_only: bool,
    },
}

/// Exit status 1: the run finished but found a problem.
#[derive(Debug)]
struct Finding(String);

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Finding {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<Finding>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<netdiv::Error>() {
            return match e {
                netdiv::Error::Io(_) | netdiv::Error::Config(_) | netdiv::Error::Library(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let (lib, lib_name) = library(cli.lib.as_deref())?;
    match &cli.cmd {
        Cmd::Check { input } => check(&lib, input),
        Cmd::Variant {
            input,
            technique,
            recipe,
            dont_use,
            budget,
        } => variant(
            cli,
            &lib,
            input,
            technique,
            recipe.as_deref(),
            dont_use.as_deref(),
            budget,
        ),
        Cmd::Sweep {
            input,
            technique,
            ppa_only,
            budget,
        } => sweep(cli, &lib, &lib_name, input, technique, *ppa_only, budget),
        Cmd::Analyze {
            path,
            steered,
            tau,
            baseline,
            ..
        } => {
            let mode = steered.map_or(GroupMode::Normal, GroupMode::Steered);
            analyze_cmd(cli, &lib, path, mode, *tau, baseline.as_deref())
        }
        Cmd::Stats { dir, ppa_only } => stats(cli, dir, *ppa_only),
    }
}

fn library(path: Option<&Path>) -> anyhow::Result<(CellLibrary, String)> {
    match path {
        None => Ok((bundled_library(), "bundled".into())),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(netdiv::Error::from)
                .with_context(|| format!("reading {}", p.display()))?;
            let lib = load_library(&text).with_context(|| format!("loading {}", p.display()))?;
            Ok((lib, p.display().to_string()))
        }
    }
}

fn read_netlist(path: &Path, lib: &CellLibrary) -> anyhow::Result<Netlist> {
    parse_file(path, Some(lib)).with_context(|| format!("reading {}", path.display()))
}

fn check(lib: &CellLibrary, input: &Path) -> anyhow::Result<()> {
    let n = read_netlist(input, lib)?;
    let diags = validate(&n, lib);
    for d in &diags {
        eprintln!("{d}");
    }
    let errors = diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .count();
    if errors > 0 {
        return Err(Finding(format!("{errors} validation error(s)")).into());
    }
    println!(
        "ok: {} modules, {} diagnostics",
        n.modules.len(),
        diags.len()
    );
    Ok(())
}

fn sweep_config(cli: &Cli, techniques: &[Technique], ppa_only: bool, b: &Budget) -> SweepConfig {
    let mut cfg = SweepConfig {
        workers: cli.workers,
        ppa_only,
        ..SweepConfig::default()
    };
    if !techniques.is_empty() {
        cfg.techniques = techniques.to_vec();
    }
    cfg.equivalence.vectors = b.vectors;
    cfg.equivalence.cycles = b.cycles;
    cfg.equivalence.seed = cli.seed;
    if let Some(v) = b.slew_limit {
        cfg.params.slew_limit = v;
    }
    if let Some(v) = b.max_moves {
        cfg.params.max_moves = v;
    }
    if let Some(v) = b.min_group {
        cfg.params.min_group = v;
    }
    if let Some(v) = b.activity {
        cfg.power.data_activity = v;
    }
    cfg
}

#[derive(Serialize)]
struct VariantReport {
    label: String,
    equivalence: String,
    latency: usize,
    seed: u64,
    vectors: usize,
    cycles: usize,
    baseline: netdiv::sim::PpaReport,
    variant: netdiv::sim::PpaReport,
    recipe: Recipe,
}

fn variant(
    cli: &Cli,
    lib: &CellLibrary,
    input: &Path,
    techniques: &[Technique],
    recipe_path: Option<&Path>,
    dont_use: Option<&str>,
    budget: &Budget,
) -> anyhow::Result<()> {
    let cfg = sweep_config(cli, techniques, false, budget);
    let mut recipe = match recipe_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(netdiv::Error::from)
                .with_context(|| format!("reading {}", p.display()))?;
            let mut r = Recipe::from_toml(&text)?;
            if r.label.is_empty() {
                r.label = p
                    .file_stem()
                    .map_or("recipe".into(), |s| s.to_string_lossy().into_owned());
            }
            r
        }
        None => {
            let t = Technique::combine(techniques).ok_or_else(|| {
                let names: Vec<&str> = techniques.iter().map(|t| t.name()).collect();
                netdiv::Error::Config(format!("no technique combines {}", names.join(" + ")))
            })?;
            technique_recipe(Some(t), None, &cfg.params)
        }
    };
    if let Some(c) = dont_use {
        recipe.dont_use = Some(c.to_string());
        if recipe_path.is_none() {
            recipe.label = format!("{}.no_{c}", recipe.label);
        }
    }
    let baseline = read_netlist(input, lib)?;
    let base_ppa = analyze_ppa(&baseline, lib, &cfg.power)?;
    let job = Job {
        id: 0,
        role: if recipe.dont_use.is_some() {
            Role::Sweep
        } else {
            Role::Reference
        },
        technique: None,
        recipe: recipe.clone(),
    };
    let v = run_job(&baseline, lib, &job, &cfg);
    for l in &v.log {
        eprintln!("{l}");
    }
    let (Some(netlist), Some(ppa)) = (&v.netlist, &v.record.ppa) else {
        return Err(anyhow!(
            "{}: {}",
            recipe.label,
            v.record.failure.unwrap_or_default()
        ));
    };
    fs::create_dir_all(&cli.out).map_err(netdiv::Error::from)?;
    let gv = cli.out.join(format!("{}.gv", recipe.label));
    fs::write(&gv, write(netlist)).map_err(netdiv::Error::from)?;
    let report = VariantReport {
        label: recipe.label.clone(),
        equivalence: v.record.equivalence.name().into(),
        latency: v.record.latency,
        seed: cli.seed,
        vectors: cfg.equivalence.vectors,
        cycles: cfg.equivalence.cycles,
        baseline: base_ppa.clone(),
        variant: ppa.clone(),
        recipe,
    };
    let text = toml::to_string(&report).context("serializing report")?;
    fs::write(cli.out.join(format!("{}.report.toml", report.label)), text)
        .map_err(netdiv::Error::from)?;
    println!(
        "{}: area {:.3} -> {:.3}, cells {} -> {}, dynamic {:.6} -> {:.6}, critical path {:.3} -> {:.3}, {}",
        report.label,
        base_ppa.area,
        ppa.area,
        base_ppa.cell_count,
        ppa.cell_count,
        base_ppa.dynamic,
        ppa.dynamic,
        base_ppa.critical_path,
        ppa.critical_path,
        report.equivalence
    );
    if let Equivalence::Mismatch(m) = &v.record.equivalence {
        return Err(Finding(format!("{}: not equivalent: {m}", report.label)).into());
    }
    Ok(())
}

fn sweep(
    cli: &Cli,
    lib: &CellLibrary,
    lib_name: &str,
    input: &Path,
    techniques: &[Technique],
    ppa_only: bool,
    budget: &Budget,
) -> anyhow::Result<()> {
    let cfg = sweep_config(cli, techniques, ppa_only, budget);
    let baseline = read_netlist(input, lib)?;
    let out = engine::sweep(&baseline, lib, &cfg)?;
    let run = RunManifest {
        input: input.display().to_string(),
        library: lib_name.to_string(),
        seed: cli.seed,
        skipped_cells: out.skipped.clone(),
        sweep: cfg,
    };
    write_sweep(&cli.out, &out.variants, &out.dedup, &out.tables, &run)?;
    let s = &out.dedup.stats;
    for t in &s.per_technique {
        eprintln!(
            "{}: {} of {} unique, {} failed",
            t.technique, t.unique, t.total, t.failed
        );
    }
    println!("total={} unique={}", s.total, s.unique);
    if s.mismatches > 0 {
        return Err(Finding(format!(
            "{} variant(s) not equivalent to the baseline",
            s.mismatches
        ))
        .into());
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "netlist".into(), |s| s.to_string_lossy().into_owned())
}

fn groups_csv(a: &Analysis) -> String {
    let mut s = String::from("register,size,members\n");
    for (i, g) in a.grouping.groups.iter().enumerate() {
        writeln!(s, "r{i},{},{}", g.len(), g.join(" ")).unwrap();
    }
    s
}

/// Variant files of a sweep directory, keeping only unique rows when the
/// manifest next to it says which those are.
fn variant_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(netdiv::Error::from)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "gv"))
        .collect();
    let manifest = dir.join("..").join("manifest.csv");
    if let Ok(text) = fs::read_to_string(&manifest) {
        let records = read_manifest(&text)?;
        let d = dedup(&records, DedupKey::Full);
        let keep: std::collections::BTreeSet<String> = d
            .unique
            .iter()
            .filter(|r| r.role != Role::Baseline)
            .filter_map(|r| r.netlist_path.as_deref())
            .filter_map(|p| {
                Path::new(p)
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
            })
            .collect();
        files.retain(|p| {
            p.file_name()
                .is_some_and(|f| keep.contains(&*f.to_string_lossy()))
        });
    }
    // Sweep files start with their row id.
    files.sort_by_key(|p| {
        let name = p
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let id = name.split('_').next().and_then(|x| x.parse::<usize>().ok());
        (id, name)
    });
    Ok(files)
}

fn analyze_cmd(
    cli: &Cli,
    lib: &CellLibrary,
    path: &Path,
    mode: GroupMode,
    tau: f64,
    baseline: Option<&Path>,
) -> anyhow::Result<()> {
    let files = if path.is_dir() {
        variant_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let results = par_map(&files, cli.workers, |f| -> anyhow::Result<Analysis> {
        let n = read_netlist(f, lib)?;
        analyze(&n, lib, mode, tau).with_context(|| format!("analyzing {}", f.display()))
    });
    let results: Vec<Analysis> = results.into_iter().collect::<anyhow::Result<_>>()?;
    fs::create_dir_all(&cli.out).map_err(netdiv::Error::from)?;
    for (f, a) in files.iter().zip(&results) {
        let name = stem(f);
        fs::write(
            cli.out.join(format!("{name}.dot")),
            export_group_graph(&a.grouping),
        )
        .map_err(netdiv::Error::from)?;
        fs::write(cli.out.join(format!("{name}.groups.csv")), groups_csv(a))
            .map_err(netdiv::Error::from)?;
        println!(
            "{name}: {} flip-flops in {} registers",
            a.graph.len(),
            a.grouping.len()
        );
    }
    let base = match baseline {
        Some(b) => {
            let n = read_netlist(b, lib)?;
            let a = analyze(&n, lib, mode, tau)?;
            let name = stem(b);
            fs::write(
                cli.out.join(format!("{name}.dot")),
                export_group_graph(&a.grouping),
            )
            .map_err(netdiv::Error::from)?;
            fs::write(cli.out.join(format!("{name}.groups.csv")), groups_csv(&a))
                .map_err(netdiv::Error::from)?;
            Some(a)
        }
        None => None,
    };
    let fmt_ari = |a: Option<f64>| a.map(|x| format!("{x:.6}")).unwrap_or_default();
    if let Some(base) = &base {
        let mut s = String::from("variant,ari,size_histogram_distance,matched,registers\n");
        let mut low = 0;
        for (f, a) in files.iter().zip(&results) {
            let d = base.diversity(a);
            low += usize::from(d.ari.is_some_and(|x| x < 0.9));
            writeln!(
                s,
                "{},{},{:.6},{},{}",
                stem(f),
                fmt_ari(d.ari),
                d.size_histogram_distance,
                d.matched,
                a.grouping.len()
            )
            .unwrap();
        }
        fs::write(cli.out.join("diversity.csv"), s).map_err(netdiv::Error::from)?;
        println!("variants={} ari_below_0.9={low}", files.len());
    }
    if path.is_dir() {
        let names: Vec<String> = files.iter().map(|f| stem(f)).collect();
        let mut s = format!("variant,{}\n", names.join(","));
        for (i, a) in results.iter().enumerate() {
            let row: Vec<String> = results
                .iter()
                .map(|b| fmt_ari(a.diversity(b).ari))
                .collect();
            writeln!(s, "{},{}", names[i], row.join(",")).unwrap();
        }
        fs::write(cli.out.join("diversity_matrix.csv"), s).map_err(netdiv::Error::from)?;
    }
    Ok(())
}

fn stats(cli: &Cli, dir: &Path, ppa_only: bool) -> anyhow::Result<()> {
    let path = dir.join("manifest.csv");
    let text = fs::read_to_string(&path)
        .map_err(netdiv::Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    let records = read_manifest(&text)?;
    let Some(base) = records
        .iter()
        .find(|r| r.role == Role::Baseline)
        .and_then(|r| r.ppa.clone())
    else {
        bail!("{}: no baseline row", path.display());
    };
    let d = dedup(
        &records,
        if ppa_only {
            DedupKey::PpaOnly
        } else {
            DedupKey::Full
        },
    );
    let tables = compute_stats(&d.unique, &records, &base);
    write_stats(&cli.out.join("stats"), &tables)?;
    println!("total={} unique={}", d.stats.total, d.stats.unique);
    Ok(())
}
