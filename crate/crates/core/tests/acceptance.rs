//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use common::re::{arb_graph, arb_labels, brute_force_ari, check_grouping};
use netdiv::designs::{CORRELATOR, PIPELINE};
use netdiv::engine::{
    histogram, manifest_csv, sweep, Equivalence, Role, SweepConfig, SweepOutcome,
};
use netdiv::library::{bundled_library, CellLibrary};
use netdiv::netlist::{flatten, netlist_digest, Netlist};
use netdiv::re::{adjusted_rand_index, analyze, group_registers, GroupMode, DEFAULT_TAU};
use netdiv::sim::{analyze_ppa, PowerConfig};
use netdiv::transforms::{apply_pass, PassConfig, Technique};
use netdiv::verilog::{parse, write};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

/// Share of unique sweep variants whose normal-mode grouping must differ
/// from the baseline's (ARI below 0.9).
const DIVERSE_SHARE: f64 = 0.5;
const ARI_DIVERSE: f64 = 0.9;
const STEERED_SIZE: usize = 10;
/// Uniqueness reported for the published 603-recipe sweep.
const PUBLISHED_UNIQUE: (usize, usize) = (509, 603);
const SLEW_LIMIT: f64 = 10.0;
const EPS: f64 = 1e-9;

type Verdict = Result<String, String>;

struct Sweeps {
    pipeline: SweepOutcome,
    correlator: SweepOutcome,
    correlator_serial: SweepOutcome,
}

fn run_sweeps(lib: &CellLibrary) -> Sweeps {
    let cfg = |workers| SweepConfig {
        workers,
        ..SweepConfig::default()
    };
    let p = parse(PIPELINE).unwrap();
    let c = parse(CORRELATOR).unwrap();
    Sweeps {
        pipeline: sweep(&p, lib, &cfg(8)).unwrap(),
        correlator: sweep(&c, lib, &cfg(8)).unwrap(),
        correlator_serial: sweep(&c, lib, &cfg(1)).unwrap(),
    }
}

fn functional_safety(s: &Sweeps) -> Verdict {
    let mut notes = Vec::new();
    let mut bad = Vec::new();
    for (name, o) in [("pipeline", &s.pipeline), ("correlator", &s.correlator)] {
        let recs = o.records();
        let built = recs.iter().filter(|r| r.succeeded()).count();
        let unchecked = recs
            .iter()
            .filter(|r| r.succeeded() && r.equivalence != Equivalence::Equivalent)
            .count();
        notes.push(format!(
            "{name}: {built} variants, {} mismatches",
            o.dedup.stats.mismatches
        ));
        if o.dedup.stats.mismatches > 0 || unchecked > 0 {
            bad.push(name);
        }
    }
    let msg = notes.join("; ");
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sweep_scale(s: &Sweeps, lib: &CellLibrary) -> Verdict {
    let (cells, _) = netdiv::engine::bannable_cells(lib);
    let mut notes = Vec::new();
    let mut bad = Vec::new();
    for (name, o, flat) in [
        ("pipeline", &s.pipeline, false),
        ("correlator", &s.correlator, true),
    ] {
        let st = &o.dedup.stats;
        notes.push(format!(
            "{name}: {}/{} unique ({:.1}%)",
            st.unique,
            st.total,
            100.0 * st.unique as f64 / st.total as f64
        ));
        if st.total != cells.len() * Technique::ALL.len() {
            bad.push(format!("{name}: {} rows", st.total));
        }
        for t in &st.per_technique {
            let ok = if flat && t.technique == Technique::Ungroup {
                t.unique == 0
            } else {
                t.unique > 1
            };
            if !ok {
                bad.push(format!("{name} {}: {} unique", t.technique, t.unique));
            }
        }
    }
    notes.push(format!(
        "published {}/{} ({:.1}%)",
        PUBLISHED_UNIQUE.0,
        PUBLISHED_UNIQUE.1,
        100.0 * PUBLISHED_UNIQUE.0 as f64 / PUBLISHED_UNIQUE.1 as f64
    ));
    let msg = notes.join("; ");
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", bad.join(", ")))
    }
}

fn ffs(n: &Netlist, lib: &CellLibrary) -> usize {
    n.top_module().flip_flops(lib).count()
}

fn directions(lib: &CellLibrary) -> Verdict {
    let t0 = Instant::now();
    let power = PowerConfig::default();
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for (name, src) in [("pipeline", PIPELINE), ("correlator", CORRELATOR)] {
        let flat = flatten(&parse(src).unwrap()).unwrap();
        let base = analyze_ppa(&flat, lib, &power).unwrap();
        let run = |p: PassConfig| {
            let r = apply_pass(&flat, lib, &p).unwrap();
            let ppa = analyze_ppa(&r.netlist, lib, &power).unwrap();
            (ppa, ffs(&r.netlist, lib))
        };
        let (cg, _) = run(PassConfig::ClockGating { min_group: 3 });
        if cg.dynamic >= base.dynamic {
            bad.push(format!(
                "{name} clock-gating dynamic {} -> {}",
                base.dynamic, cg.dynamic
            ));
        }
        let (mt, _) = run(PassConfig::MaxTransition { limit: SLEW_LIMIT });
        if mt.area <= base.area
            || mt.cell_count <= base.cell_count
            || mt.worst_slew > SLEW_LIMIT + EPS
        {
            bad.push(format!(
                "{name} max-transition area {} cells {} slew {}",
                mt.area, mt.cell_count, mt.worst_slew
            ));
        }
        let (rd, _) = run(PassConfig::RetimeDelay { max_moves: 64 });
        if rd.critical_path > base.critical_path + EPS {
            bad.push(format!(
                "{name} retime-delay cp {} -> {}",
                base.critical_path, rd.critical_path
            ));
        }
        let (ra, ra_ffs) = run(PassConfig::RetimeArea { max_moves: 64 });
        if ra.critical_path > base.critical_path + EPS || ra_ffs > ffs(&flat, lib) {
            bad.push(format!(
                "{name} retime-area cp {} ffs {ra_ffs}",
                ra.critical_path
            ));
        }
        notes.push(format!(
            "{name}: dynamic {:+.1}%, max-transition area {:+.1}% cells {:+.1}%",
            pct(cg.dynamic, base.dynamic),
            pct(mt.area, base.area),
            pct(mt.cell_count as f64, base.cell_count as f64)
        ));
    }
    notes.push(format!("{:.1}s", t0.elapsed().as_secs_f64()));
    let msg = notes.join("; ");
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", bad.join(", ")))
    }
}

fn pct(v: f64, base: f64) -> f64 {
    100.0 * (v - base) / base
}

fn invariants() -> Verdict {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let mut check = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    });
    check(
        "grouping",
        runner
            .run(&(arb_graph(), 0.2f64..=1.0), |(g, tau)| {
                let r = group_registers(&g, GroupMode::Normal, tau).unwrap();
                check_grouping(&g, &r)?;
                prop_assert_eq!(&r, &group_registers(&g, GroupMode::Normal, tau).unwrap());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "ari",
        runner
            .run(&arb_labels(10), |(a, b)| {
                let got = adjusted_rand_index(&a, &b);
                if let Some(want) = brute_force_ari(&a, &b) {
                    prop_assert!((got - want).abs() < EPS);
                }
                prop_assert!((got - adjusted_rand_index(&b, &a)).abs() < EPS);
                prop_assert_eq!(adjusted_rand_index(&a, &a), 1.0);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "histogram",
        runner
            .run(&proptest::collection::vec(-1e6f64..1e6, 1..500), |v| {
                let h = histogram(&v);
                prop_assert_eq!(h.total(), v.len());
                prop_assert!((10..=1000).contains(&h.counts.len()));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    let mut corpus = 0;
    for (name, n) in common::corpus() {
        corpus += 1;
        let f = flatten(&n).unwrap();
        let ff = flatten(&f).unwrap();
        if netlist_digest(&f) != netlist_digest(&ff) || write(&f) != write(&ff) {
            failures.push(format!("{name}: flatten not idempotent"));
        }
        if netlist_digest(&parse(&write(&n)).unwrap()) != netlist_digest(&n) {
            failures.push(format!("{name}: round trip changes the digest"));
        }
    }
    let msg = format!(
        "3x200 property cases, {corpus} corpus designs, {:.1}s",
        t0.elapsed().as_secs_f64()
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", failures.join(", ")))
    }
}

fn diversity(s: &Sweeps, lib: &CellLibrary) -> Verdict {
    let base = parse(CORRELATOR).unwrap();
    let variants: BTreeMap<usize, &Netlist> = s
        .correlator
        .variants
        .iter()
        .filter_map(|v| v.netlist.as_ref().map(|n| (v.record.id, n)))
        .collect();
    let unique: Vec<usize> = s
        .correlator
        .dedup
        .unique
        .iter()
        .filter(|r| r.role == Role::Sweep)
        .map(|r| r.id)
        .collect();
    let normal = analyze(&base, lib, GroupMode::Normal, DEFAULT_TAU).unwrap();
    let low = unique
        .iter()
        .filter(|id| {
            let a = analyze(variants[id], lib, GroupMode::Normal, DEFAULT_TAU).unwrap();
            normal.diversity(&a).ari.is_some_and(|x| x < ARI_DIVERSE)
        })
        .count();
    let share = low as f64 / unique.len() as f64;

    let cg_rd = s
        .correlator
        .variants
        .iter()
        .find(|v| {
            v.record.role == Role::Reference
                && v.record.technique == Some(Technique::ClockGatingRetimeDelay)
        })
        .and_then(|v| v.netlist.as_ref())
        .expect("clock-gating+retime-delay reference variant");
    let steered = GroupMode::Steered(STEERED_SIZE);
    let a = analyze(&base, lib, steered, DEFAULT_TAU).unwrap();
    let b = analyze(cg_rd, lib, steered, DEFAULT_TAU).unwrap();
    let ari = a.diversity(&b).ari;
    let msg = format!(
        "{low}/{} unique variants below ARI {ARI_DIVERSE} ({:.1}%, need {:.0}%); steered({STEERED_SIZE}) clock-gating+retime-delay ARI {}",
        unique.len(),
        100.0 * share,
        100.0 * DIVERSE_SHARE,
        ari.map_or("n/a".into(), |x| format!("{x:.4}"))
    );
    if share >= DIVERSE_SHARE && ari.is_some_and(|x| x < 1.0) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism(s: &Sweeps, lib: &CellLibrary) -> Verdict {
    let csv = |o: &SweepOutcome| manifest_csv(&o.records(), &o.dedup).unwrap();
    let (a, b) = (csv(&s.correlator), csv(&s.correlator_serial));
    let texts = |o: &SweepOutcome| -> Vec<String> {
        o.variants
            .iter()
            .filter_map(|v| v.netlist.as_ref().map(write))
            .collect()
    };
    let same_netlists = texts(&s.correlator) == texts(&s.correlator_serial);
    let base = parse(CORRELATOR).unwrap();
    let dot = || {
        let a = analyze(&base, lib, GroupMode::Steered(STEERED_SIZE), DEFAULT_TAU).unwrap();
        netdiv::re::export_group_graph(&a.grouping)
    };
    let same_dot = dot() == dot();
    let msg = format!(
        "manifest {} bytes, workers 8 vs 1 {}; netlists {}; grouping rerun {}",
        a.len(),
        if a == b { "identical" } else { "differ" },
        if same_netlists { "identical" } else { "differ" },
        if same_dot { "identical" } else { "differs" }
    );
    if a == b && same_netlists && same_dot {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let lib = bundled_library();
    let t0 = Instant::now();
    let sweeps = run_sweeps(&lib);
    println!("sweeps finished in {:.1}s", t0.elapsed().as_secs_f64());
    let results = [
        ("1 functional safety", functional_safety(&sweeps)),
        ("2 sweep scale and dedup", sweep_scale(&sweeps, &lib)),
        ("3 directional ppa", directions(&lib)),
        ("4 invariant suites", invariants()),
        ("5 diversity signal", diversity(&sweeps, &lib)),
        ("6 determinism", determinism(&sweeps, &lib)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(m) => println!("PASS criterion {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {name}: {m}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
