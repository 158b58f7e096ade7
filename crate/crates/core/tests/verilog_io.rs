mod common;

use netdiv::error::ParseErrorKind;
use netdiv::library::bundled_library;
use netdiv::netlist::{netlist_digest, validate, Severity};
use netdiv::sim::simulate;
use netdiv::verilog::{
    parse, parse_file, parse_with_library, read_trace_csv, write, write_trace_csv,
};
use proptest::prelude::*;

#[test]
fn round_trip_keeps_digest_on_corpus() {
    for (name, n) in common::corpus() {
        let text = write(&n);
        let back = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(netlist_digest(&n), netlist_digest(&back), "{name}");
        assert_eq!(write(&back), text, "{name}: second write differs");
    }
}

#[test]
fn writer_is_deterministic() {
    for (name, n) in common::corpus() {
        assert_eq!(write(&n), write(&n.clone()), "{name}");
    }
}

#[test]
fn round_trip_keeps_behaviour() {
    let lib = bundled_library();
    for (name, n) in common::corpus()
        .into_iter()
        .filter(|(k, _)| k.starts_with("hier") || k.starts_with("flat"))
    {
        let back = parse(&write(&n)).unwrap();
        let stim = common::random_stimulus(&n, 50, 11);
        let a = simulate(&n, &lib, &stim, 50).unwrap();
        let b = simulate(&back, &lib, &stim, 50).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn file_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.gv");
    std::fs::write(
        &p,
        "module m(input a, output y);\n  INV_X1 i (.A(a) .Y(y));\nendmodule\n",
    )
    .unwrap();
    let e = parse_file(&p, None).unwrap_err().to_string();
    assert!(e.contains("bad.gv:2:"), "{e}");
    assert!(parse_file(&dir.path().join("missing.gv"), None).is_err());
}

#[test]
fn syntax_errors_are_located() {
    let e = parse("module m(input a, output y);\nwire w\nendmodule\n").unwrap_err();
    assert_eq!(e.span.line, 3);
    assert!(matches!(e.kind, ParseErrorKind::Syntax { .. }));
}

#[test]
fn invalid_netlists_always_get_a_diagnostic() {
    let lib = bundled_library();
    let cases = [
        // two drivers on y
        "module m(input a, input b, output y); INV_X1 i0(.A(a), .Y(y)); INV_X1 i1(.A(b), .Y(y)); endmodule",
        // combinational loop
        "module m(input a, output y); wire n; NAND2_X1 g0(.A(a), .B(y), .Y(n)); INV_X1 g1(.A(n), .Y(y)); endmodule",
        // floating gate input
        "module m(input a, output y); wire f; AND2_X1 g(.A(a), .B(f), .Y(y)); endmodule",
    ];
    for src in cases {
        match parse_with_library(src, &lib) {
            Err(_) => {}
            Ok(n) => assert!(
                validate(&n, &lib)
                    .iter()
                    .any(|d| d.severity == Severity::Error),
                "accepted without diagnostics: {src}"
            ),
        }
    }
}

#[test]
fn unknown_cells_are_rejected_with_library() {
    let lib = bundled_library();
    let src = "module m(input a, output y); FOO_X1 g(.A(a), .Y(y)); endmodule";
    assert!(
        parse_with_library(src, &lib).is_err() || !validate(&parse(src).unwrap(), &lib).is_empty()
    );
}

#[test]
fn init_attribute_survives_round_trip() {
    let src = "module m(input clk, input d, output q);\n(* init = 1 *) DFF_X1 r(.CK(clk), .D(d), .Q(q));\nendmodule\n";
    let n = parse(src).unwrap();
    assert!(n.top_module().instances[0].init);
    let back = parse(&write(&n)).unwrap();
    assert!(back.top_module().instances[0].init);
}

#[test]
fn trace_csv_round_trip() {
    let n = parse(&common::random_flat(1, 20, 3)).unwrap();
    let stim = common::random_stimulus(&n, 17, 2);
    assert_eq!(read_trace_csv(&write_trace_csv(&stim)).unwrap(), stim);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_designs_round_trip(seed in any::<u64>(), gates in 1usize..60, ffs in 1usize..10, hier in any::<bool>()) {
        let src = if hier { common::random_hierarchical(seed, gates, ffs) } else { common::random_flat(seed, gates, ffs) };
        let n = parse(&src).unwrap();
        let back = parse(&write(&n)).unwrap();
        prop_assert_eq!(netlist_digest(&n), netlist_digest(&back));
    }
}
