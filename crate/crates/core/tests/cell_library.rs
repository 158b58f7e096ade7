mod common;

use std::collections::BTreeMap;

use common::oracle::gate;
use netdiv::library::{
    bundled_library, functional_equivalents, load_library, mask_dont_use, write_library, CellKind,
    CellLibrary, Substitution, TemplateSource,
};
use proptest::prelude::*;

fn eval_sub(sub: &Substitution, v: &BTreeMap<String, bool>) -> bool {
    let get = |p: &str| v[p];
    match sub {
        Substitution::SameFunction(c) => gate(c, "Y", &get),
        Substitution::Decomposition(t) => {
            let inner = t.inner.as_ref().map(|(cell, pins)| {
                let m: BTreeMap<&str, bool> =
                    pins.iter().map(|(p, src)| (p.as_str(), v[src])).collect();
                gate(cell, "Y", &|p: &str| m[p])
            });
            let m: BTreeMap<&str, bool> = t
                .outer_pins
                .iter()
                .map(|(p, src)| {
                    let x = match src {
                        TemplateSource::Input(i) => v[i],
                        TemplateSource::Inner => {
                            inner.expect("inner output used without inner cell")
                        }
                    };
                    (p.as_str(), x)
                })
                .collect();
            gate(&t.outer, "Y", &|p: &str| m[p])
        }
        Substitution::FlopWithInverter { .. } => {
            unreachable!("only combinational cells are enumerated")
        }
    }
}

fn check_all_substitutions(lib: &CellLibrary) -> usize {
    let mut checked = 0;
    for spec in lib.cells().filter(|c| c.is_combinational()) {
        let pins = spec.inputs().to_vec();
        for sub in functional_equivalents(lib, &spec.name) {
            for bits in 0u32..(1 << pins.len()) {
                let v: BTreeMap<String, bool> = pins
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.clone(), bits >> i & 1 == 1))
                    .collect();
                let want = gate(&spec.name, "Y", &|p: &str| v[p]);
                assert_eq!(
                    eval_sub(&sub, &v),
                    want,
                    "{} via {sub} at {bits:b}",
                    spec.name
                );
            }
            match &sub {
                Substitution::SameFunction(c) => assert!(lib.is_available(c)),
                Substitution::Decomposition(t) => {
                    assert!(lib.is_available(&t.outer));
                    if let Some((inner, _)) = &t.inner {
                        assert!(lib.is_available(inner));
                    }
                }
                Substitution::FlopWithInverter { .. } => {}
            }
            checked += 1;
        }
    }
    checked
}

#[test]
fn substitutions_match_truth_tables() {
    let lib = bundled_library();
    assert!(check_all_substitutions(&lib) > 0);
    // Banning every X2 variant forces decompositions for the X1 cells.
    let mut narrow = lib.clone();
    for c in lib
        .cells()
        .filter(|c| c.name.ends_with("_X2"))
        .map(|c| c.name.clone())
        .collect::<Vec<_>>()
    {
        narrow = mask_dont_use(&narrow, &c).unwrap();
    }
    assert!(check_all_substitutions(&narrow) > 0);
}

#[test]
fn every_single_ban_still_has_substitutes() {
    let lib = bundled_library();
    for c in lib.cells() {
        let Ok(masked) = mask_dont_use(&lib, &c.name) else {
            continue;
        };
        if c.kind == CellKind::Icg {
            continue;
        }
        assert!(
            !functional_equivalents(&masked, &c.name).is_empty(),
            "{} has no substitute",
            c.name
        );
    }
}

#[test]
fn library_round_trip() {
    let lib = mask_dont_use(&bundled_library(), "XOR2_X2").unwrap();
    let back = load_library(&write_library(&lib)).unwrap();
    assert_eq!(write_library(&back), write_library(&lib));
    assert!(!back.is_available("XOR2_X2"));
    assert_eq!(back.len(), 24);
}

#[test]
fn malformed_libraries_are_rejected() {
    assert!(load_library("name = 3").is_err());
    let text = write_library(&bundled_library());
    assert!(load_library(&text.replace("slew_factor = 1.5", "slew_factor = 0.0")).is_err());
    assert!(load_library(&text.replacen("Y = !A", "Y = !Q", 1)).is_err());
}

#[test]
fn unknown_ban_is_an_error() {
    assert!(mask_dont_use(&bundled_library(), "NOPE_X9").is_err());
}

fn complete_by_name(lib: &CellLibrary) -> bool {
    let any = |prefix: &str| lib.available().any(|c| c.name.starts_with(prefix));
    (any("NAND2_") || any("NOR2_")) && any("INV_") && any("DFF") && any("BUF_")
}

proptest! {
    #[test]
    fn masking_never_breaks_completeness(order in proptest::sample::subsequence((0..24usize).collect::<Vec<_>>(), 0..24).prop_shuffle()) {
        let names: Vec<String> = bundled_library().cells().map(|c| c.name.clone()).collect();
        let mut lib = bundled_library();
        for i in order {
            if let Ok(next) = mask_dont_use(&lib, &names[i]) {
                prop_assert!(complete_by_name(&next));
                lib = next;
            }
        }
        prop_assert!(complete_by_name(&lib));
    }
}
