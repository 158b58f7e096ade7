//! Random netlist corpus shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;
pub mod ppa;
pub mod re;

use std::fmt::Write;

use netdiv::designs::{CORRELATOR, PIPELINE};
use netdiv::netlist::Netlist;
use netdiv::verilog::parse;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GATES: [(&str, &[&str]); 9] = [
    ("INV_X1", &["A"]),
    ("BUF_X1", &["A"]),
    ("NAND2_X1", &["A", "B"]),
    ("NOR2_X2", &["A", "B"]),
    ("AND2_X1", &["A", "B"]),
    ("OR2_X1", &["A", "B"]),
    ("XOR2_X1", &["A", "B"]),
    ("MUX2_X1", &["A", "B", "S"]),
    ("AOI21_X1", &["A", "B", "C"]),
];

/// Body of a random sequential module `name` with inputs `clk`, `en`,
/// `x[inputs]` and outputs `y[outputs]`. Combinational gates only read
/// earlier nets, so the module is acyclic by construction. Some flip-flops
/// hold their value unless `en` is high.
pub fn random_module(
    name: &str,
    seed: u64,
    inputs: usize,
    gates: usize,
    ffs: usize,
    outputs: usize,
) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = format!(
        "module {name} (input clk, input en, input [{}:0] x, output [{}:0] y);\n",
        inputs - 1,
        outputs - 1
    );
    let mut pool: Vec<String> = (0..inputs).map(|i| format!("x[{i}]")).collect();
    pool.extend((0..ffs).map(|k| format!("q{k}")));
    for k in 0..ffs {
        writeln!(s, "  wire q{k}, d{k};").unwrap();
    }
    for g in 0..gates {
        let (cell, pins) = GATES[rng.random_range(0..GATES.len())];
        let conns: Vec<String> = pins
            .iter()
            .map(|p| format!(".{p}({})", pool[rng.random_range(0..pool.len())]))
            .collect();
        writeln!(
            s,
            "  wire n{g};\n  {cell} g{g} ({}, .Y(n{g}));",
            conns.join(", ")
        )
        .unwrap();
        pool.push(format!("n{g}"));
    }
    for k in 0..ffs {
        let src = pool[rng.random_range(inputs..pool.len())].clone();
        let cell = if rng.random_bool(0.2) {
            "DFF_X2"
        } else {
            "DFF_X1"
        };
        if rng.random_bool(0.4) {
            writeln!(s, "  MUX2_X1 h{k} (.A(q{k}), .B({src}), .S(en), .Y(d{k}));").unwrap();
        } else {
            writeln!(s, "  BUF_X1 h{k} (.A({src}), .Y(d{k}));").unwrap();
        }
        writeln!(s, "  {cell} f{k} (.CK(clk), .D(d{k}), .Q(q{k}));").unwrap();
    }
    for j in 0..outputs {
        let src = &pool[rng.random_range(inputs..pool.len())];
        writeln!(s, "  BUF_X1 o{j} (.A({src}), .Y(y[{j}]));").unwrap();
    }
    s.push_str("endmodule\n");
    s
}

/// Two instances of one random module under a top that combines their outputs.
pub fn random_hierarchical(seed: u64, gates: usize, ffs: usize) -> String {
    let mut s = random_module("leaf", seed, 4, gates, ffs, 3);
    s.push_str(
        "module top (input clk, input en, input [3:0] x, output [2:0] y, output [2:0] z);\n\
         \x20 wire [2:0] a;\n\
         \x20 wire [2:0] b;\n\
         \x20 leaf u0 (.clk(clk), .en(en), .x(x), .y(a));\n\
         \x20 leaf u1 (.clk(clk), .en(en), .x({a[0], a[1], a[2], x[3]}), .y(b));\n\
         \x20 XOR2_X1 m0 (.A(a[0]), .B(b[0]), .Y(y[0]));\n\
         \x20 XOR2_X1 m1 (.A(a[1]), .B(b[1]), .Y(y[1]));\n\
         \x20 XOR2_X1 m2 (.A(a[2]), .B(b[2]), .Y(y[2]));\n\
         \x20 BUF_X1 c0 (.A(b[0]), .Y(z[0]));\n\
         \x20 BUF_X1 c1 (.A(b[1]), .Y(z[1]));\n\
         \x20 BUF_X1 c2 (.A(b[2]), .Y(z[2]));\n\
         endmodule\n",
    );
    s
}

pub fn random_flat(seed: u64, gates: usize, ffs: usize) -> String {
    random_module("rnd", seed, 6, gates, ffs, 4)
}

/// The bundled designs plus a few random ones, as (name, source).
pub fn corpus_sources() -> Vec<(String, String)> {
    let mut v = vec![
        ("pipeline".to_string(), PIPELINE.to_string()),
        ("correlator".to_string(), CORRELATOR.to_string()),
    ];
    for seed in 0..4 {
        v.push((
            format!("flat{seed}"),
            random_flat(seed, 40 + 10 * seed as usize, 8),
        ));
        v.push((
            format!("hier{seed}"),
            random_hierarchical(100 + seed, 25, 6),
        ));
    }
    v
}

pub fn corpus() -> Vec<(String, Netlist)> {
    corpus_sources()
        .into_iter()
        .map(|(n, s)| {
            let net = parse(&s).unwrap_or_else(|e| panic!("{n}: {e}"));
            (n, net)
        })
        .collect()
}

/// Random values for every non-clock input bit of the top module.
pub fn random_stimulus(n: &Netlist, cycles: usize, seed: u64) -> netdiv::sim::Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ports: Vec<String> = n
        .top_module()
        .input_bits()
        .into_iter()
        .filter(|b| b != "clk")
        .collect();
    let rows = (0..cycles)
        .map(|_| ports.iter().map(|_| rng.random_bool(0.5)).collect())
        .collect();
    netdiv::sim::Trace { ports, rows }
}

/// Runs the reference simulator on a stimulus; one row per cycle in the
/// top module's output order.
pub fn reference_trace(n: &Netlist, stim: &netdiv::sim::Trace) -> Vec<Vec<bool>> {
    let mut sim = oracle::RefSim::new(n);
    let outs = n.top_module().output_bits();
    stim.rows
        .iter()
        .map(|row| {
            let inputs = stim
                .ports
                .iter()
                .cloned()
                .zip(row.iter().copied())
                .collect();
            let o = sim.step(&inputs);
            outs.iter().map(|b| o[b]).collect()
        })
        .collect()
}
