mod common;

use netdiv::engine::bannable_cells;
use netdiv::library::{bundled_library, mask_dont_use, CellLibrary};
use netdiv::netlist::{flatten, netlist_digest, Netlist};
use netdiv::sim::{analyze_ppa, check_equivalence, EquivConfig, PowerConfig};
use netdiv::transforms::{apply_pass, apply_recipe, remap, PassConfig, RebalanceLevel, Recipe};
use netdiv::verilog::{parse, write};
use proptest::prelude::*;

fn passes() -> Vec<PassConfig> {
    vec![
        PassConfig::ClockGating { min_group: 3 },
        PassConfig::Ungroup,
        PassConfig::Rebalance {
            level: RebalanceLevel::Basic,
        },
        PassConfig::Rebalance {
            level: RebalanceLevel::Extreme,
        },
        PassConfig::BubblePush,
        PassConfig::MaxTransition { limit: 10.0 },
        PassConfig::RetimeDelay { max_moves: 64 },
        PassConfig::RetimeArea { max_moves: 64 },
    ]
}

fn ff_count(n: &Netlist, lib: &CellLibrary) -> usize {
    flatten(n).unwrap().top_module().flip_flops(lib).count()
}

/// Output rows of `b` shifted by its latency must equal those of `a`.
fn same_as_reference(a: &Netlist, b: &Netlist, latency: usize, seed: u64) -> bool {
    let stim = common::random_stimulus(a, 64 + latency, seed);
    let ra = common::reference_trace(a, &stim);
    let rb = common::reference_trace(b, &stim);
    ra[..64] == rb[latency..latency + 64]
}

#[test]
fn every_pass_keeps_behaviour_on_corpus() {
    let lib = bundled_library();
    let cfg = EquivConfig::default();
    for (name, n) in common::corpus() {
        let flat = flatten(&n).unwrap();
        for p in passes() {
            let r =
                apply_pass(&flat, &lib, &p).unwrap_or_else(|e| panic!("{name} {}: {e}", p.name()));
            let v = check_equivalence(&flat, &r.netlist, &lib, &cfg, r.latency).unwrap();
            assert!(v.is_equivalent(), "{name} {}: {v}", p.name());
            assert!(
                same_as_reference(&flat, &r.netlist, r.latency, 3),
                "{name} {}",
                p.name()
            );
        }
    }
}

#[test]
fn pass_properties_on_corpus() {
    let lib = bundled_library();
    let power = PowerConfig::default();
    for (name, n) in common::corpus() {
        let flat = flatten(&n).unwrap();
        let before = analyze_ppa(&flat, &lib, &power).unwrap();
        let ffs = ff_count(&flat, &lib);

        let r = apply_pass(&flat, &lib, &PassConfig::RetimeDelay { max_moves: 64 }).unwrap();
        let after = analyze_ppa(&r.netlist, &lib, &power).unwrap();
        assert!(
            after.critical_path <= before.critical_path + 1e-9,
            "{name} retime-delay"
        );

        let r = apply_pass(&flat, &lib, &PassConfig::RetimeArea { max_moves: 64 }).unwrap();
        let after = analyze_ppa(&r.netlist, &lib, &power).unwrap();
        assert!(
            after.critical_path <= before.critical_path + 1e-9,
            "{name} retime-area cp"
        );
        assert!(ff_count(&r.netlist, &lib) <= ffs, "{name} retime-area ffs");

        let r = apply_pass(&flat, &lib, &PassConfig::MaxTransition { limit: 10.0 }).unwrap();
        let after = analyze_ppa(&r.netlist, &lib, &power).unwrap();
        assert!(after.area >= before.area, "{name} max-transition area");
        if r.warnings.is_empty() {
            assert!(
                after.worst_slew <= 10.0 + 1e-9,
                "{name} slew {}",
                after.worst_slew
            );
        }

        let r = apply_pass(&flat, &lib, &PassConfig::ClockGating { min_group: 3 }).unwrap();
        for activity in [0.0, 0.05, 0.1, 0.5, 1.0] {
            let p = PowerConfig {
                data_activity: activity,
                ..PowerConfig::default()
            };
            let a = analyze_ppa(&flat, &lib, &p).unwrap().dynamic;
            let b = analyze_ppa(&r.netlist, &lib, &p).unwrap().dynamic;
            assert!(
                b <= a + 1e-12,
                "{name} clock-gating at activity {activity}: {a} -> {b}"
            );
        }
    }
}

#[test]
fn tight_slew_limit_grows_the_design() {
    let lib = bundled_library();
    let power = PowerConfig::default();
    for src in [netdiv::designs::PIPELINE, netdiv::designs::CORRELATOR] {
        let flat = flatten(&parse(src).unwrap()).unwrap();
        let before = analyze_ppa(&flat, &lib, &power).unwrap();
        let r = apply_pass(&flat, &lib, &PassConfig::MaxTransition { limit: 10.0 }).unwrap();
        let after = analyze_ppa(&r.netlist, &lib, &power).unwrap();
        assert!(after.area > before.area && after.cell_count > before.cell_count);
        assert!(after.worst_slew <= 10.0 + 1e-9);
    }
}

#[test]
fn remap_removes_every_banned_cell() {
    let lib = bundled_library();
    let (cells, _) = bannable_cells(&lib);
    let cfg = EquivConfig {
        vectors: 128,
        cycles: 32,
        seed: 4,
    };
    for (name, n) in common::corpus() {
        for cell in &cells {
            let masked = mask_dont_use(&lib, cell).unwrap();
            let r = remap(&n, &masked).unwrap_or_else(|e| panic!("{name} without {cell}: {e}"));
            let out = flatten(&r.netlist).unwrap();
            let left = out
                .top_module()
                .instances
                .iter()
                .filter(|i| i.cell_name() == Some(cell.as_str()))
                .count();
            assert_eq!(left, 0, "{name}: {cell} still used");
            assert!(
                check_equivalence(&n, &r.netlist, &lib, &cfg, 0)
                    .unwrap()
                    .is_equivalent(),
                "{name} without {cell}"
            );
        }
    }
}

#[test]
fn passes_are_deterministic() {
    let lib = bundled_library();
    let flat = flatten(&parse(netdiv::designs::CORRELATOR).unwrap()).unwrap();
    for p in passes() {
        let a = apply_pass(&flat, &lib, &p).unwrap();
        let b = apply_pass(&flat, &lib, &p).unwrap();
        assert_eq!(write(&a.netlist), write(&b.netlist), "{}", p.name());
        assert_eq!(a.latency, b.latency);
    }
}

#[test]
fn ungroup_on_flat_input_changes_nothing() {
    let lib = bundled_library();
    let flat = parse(netdiv::designs::CORRELATOR).unwrap();
    assert!(flat.is_flat());
    let r = apply_pass(&flat, &lib, &PassConfig::Ungroup).unwrap();
    assert_eq!(netlist_digest(&r.netlist), netlist_digest(&flat));
}

#[test]
fn recipes_chain_and_flatten_implicitly() {
    let lib = bundled_library();
    let n = parse(netdiv::designs::PIPELINE).unwrap();
    let recipe = Recipe::from_toml(
        "label = \"chain\"\ndont_use = \"NAND2_X1\"\n[[pass]]\nkind = \"clock-gating\"\n[[pass]]\nkind = \"retime-delay\"\n",
    )
    .unwrap();
    let r = apply_recipe(&n, &lib, &recipe).unwrap();
    assert!(r.netlist.is_flat());
    assert!(r
        .netlist
        .top_module()
        .instances
        .iter()
        .all(|i| i.cell_name() != Some("NAND2_X1")));
    assert!(
        check_equivalence(&n, &r.netlist, &lib, &EquivConfig::default(), r.latency)
            .unwrap()
            .is_equivalent()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn passes_keep_random_designs_equivalent(seed in any::<u64>(), gates in 4usize..60, ffs in 2usize..12) {
        let lib = bundled_library();
        let n = parse(&common::random_flat(seed, gates, ffs)).unwrap();
        for p in passes() {
            let r = apply_pass(&n, &lib, &p).unwrap();
            prop_assert!(same_as_reference(&n, &r.netlist, r.latency, seed), "{}", p.name());
        }
    }
}
