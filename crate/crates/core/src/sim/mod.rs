//! Cycle simulation, random-vector equivalence checking and static PPA analysis.

mod equiv;
mod power;
mod report;
mod timing;

use crate::error::{Error, Result};
use crate::library::CellKind;
use crate::netlist::{flatten, Compiled, NetDriver, NetId, Netlist};

pub use equiv::{check_equivalence, EquivConfig, Mismatch, Verdict};
pub use power::{analyze_power, analyze_power_compiled, PowerConfig, PowerReport};
pub use report::{analyze_ppa, fingerprint, PpaFingerprint, PpaReport};
pub use timing::{analyze_timing, analyze_timing_compiled, TimingReport};

/// Port names and one row of values per cycle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub ports: Vec<String>,
    pub rows: Vec<Vec<bool>>,
}

impl Trace {
    pub fn column(&self, port: &str) -> Option<Vec<bool>> {
        let i = self.ports.iter().position(|p| p == port)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Evaluates a compiled module on 64 independent lanes per word.
///
/// Each cycle: inputs are applied, combinational cells are evaluated in
/// topological order, outputs are sampled, then every flip-flop whose clock
/// gates are all enabled loads its D value.
pub struct Simulator<'c, 'l> {
    c: &'c Compiled<'l>,
    values: Vec<u64>,
    state: Vec<u64>,
    flops: Vec<usize>,
    data_inputs: Vec<usize>,
    scratch: Vec<u64>,
}

impl<'c, 'l> Simulator<'c, 'l> {
    pub fn new(c: &'c Compiled<'l>) -> Result<Self> {
        for net in 0..c.num_nets() {
            let used = !c.loads[net].is_empty() || c.output_refs(net) > 0;
            if used && c.drivers[net] == NetDriver::None {
                return Err(Error::Simulation(format!(
                    "net {} is undriven",
                    c.net_name(net)
                )));
            }
        }
        let flops: Vec<usize> = c.flops().collect();
        let mut state = vec![0u64; c.cells.len()];
        for &f in &flops {
            state[f] = if c.cells[f].init { !0 } else { 0 };
        }
        let data_inputs = (0..c.inputs.len())
            .filter(|&i| !c.is_clock[c.inputs[i].1])
            .collect();
        Ok(Self {
            c,
            values: vec![0; c.num_nets()],
            state,
            flops,
            data_inputs,
            scratch: Vec::new(),
        })
    }

    /// Indices into [`Compiled::inputs`] of non-clock inputs.
    pub fn data_inputs(&self) -> &[usize] {
        &self.data_inputs
    }

    /// Runs one cycle. `inputs[k]` is the word for data input `k`; returns
    /// one word per primary output.
    pub fn step(&mut self, inputs: &[u64]) -> Vec<u64> {
        let c = self.c;
        self.values[0] = 0;
        self.values[1] = !0;
        for (k, &i) in self.data_inputs.iter().enumerate() {
            self.values[c.inputs[i].1] = inputs[k];
        }
        for (ci, cell) in c.cells.iter().enumerate() {
            match cell.kind() {
                CellKind::Ff => {
                    let q = self.state[ci];
                    for (k, (name, _)) in cell.spec.outputs().iter().enumerate() {
                        if let Some(net) = cell.outputs[k] {
                            self.values[net] = if name == "QN" { !q } else { q };
                        }
                    }
                }
                CellKind::Icg => {
                    for net in cell.outputs.iter().flatten() {
                        self.values[*net] = 0;
                    }
                }
                _ => {}
            }
        }
        for &ci in &c.order {
            let cell = &c.cells[ci];
            self.scratch.clear();
            self.scratch.extend(
                cell.inputs
                    .iter()
                    .map(|n| self.values[n.expect("inputs are connected")]),
            );
            for (k, (_, expr)) in cell.spec.outputs().iter().enumerate() {
                if let Some(net) = cell.outputs[k] {
                    self.values[net] = expr.eval(&self.scratch);
                }
            }
        }
        let outs = c.outputs.iter().map(|&(_, n)| self.values[n]).collect();
        for &f in &self.flops {
            let cell = &c.cells[f];
            let d = self.values[cell.input("D").expect("flip-flop has D")];
            let en = c.clock_gates[f]
                .iter()
                .fold(!0u64, |acc, &e| acc & self.values[e]);
            self.state[f] = (en & d) | (!en & self.state[f]);
        }
        outs
    }

    pub fn net_value(&self, net: NetId) -> u64 {
        self.values[net]
    }
}

fn flat(netlist: &Netlist) -> Result<std::borrow::Cow<'_, Netlist>> {
    if netlist.is_flat() {
        Ok(std::borrow::Cow::Borrowed(netlist))
    } else {
        Ok(std::borrow::Cow::Owned(flatten(netlist)?))
    }
}

/// Simulates `cycles` cycles of a single stimulus sequence. The stimulus must
/// name every non-clock input bit; extra columns are ignored.
pub fn simulate(
    netlist: &Netlist,
    lib: &crate::library::CellLibrary,
    stimulus: &Trace,
    cycles: usize,
) -> Result<Trace> {
    let netlist = flat(netlist)?;
    let c = Compiled::new(netlist.top_module(), lib)?;
    let mut sim = Simulator::new(&c)?;
    let mut cols = Vec::new();
    for &i in sim.data_inputs() {
        let name = &c.inputs[i].0;
        let col = stimulus
            .ports
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::Simulation(format!("stimulus has no column for input {name}")))?;
        cols.push(col);
    }
    if stimulus.rows.len() < cycles {
        return Err(Error::Simulation(format!(
            "stimulus has {} rows, {cycles} cycles requested",
            stimulus.rows.len()
        )));
    }
    let mut rows = Vec::with_capacity(cycles);
    let mut words = vec![0u64; cols.len()];
    for row in stimulus.rows.iter().take(cycles) {
        for (w, &col) in words.iter_mut().zip(&cols) {
            *w = if row[col] { !0 } else { 0 };
        }
        rows.push(sim.step(&words).into_iter().map(|w| w & 1 == 1).collect());
    }
    Ok(Trace {
        ports: c.outputs.iter().map(|(p, _)| p.clone()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::bundled_library;
    use crate::verilog::parse;

    fn run(src: &str, stim: Trace, cycles: usize) -> Trace {
        simulate(&parse(src).unwrap(), &bundled_library(), &stim, cycles).unwrap()
    }

    #[test]
    fn flop_with_constant_input() {
        let src = "module t(input clk, output q); DFF_X1 r(.CK(clk), .D(1'b1), .Q(q)); endmodule";
        let stim = Trace {
            ports: vec![],
            rows: vec![vec![]; 3],
        };
        let t = run(src, stim, 3);
        assert_eq!(t.column("q").unwrap(), vec![false, true, true]);
    }

    #[test]
    fn inverter_pair_is_combinational() {
        let src = "module t(input a, output y); wire n; INV_X1 i0(.A(a), .Y(n)); INV_X1 i1(.A(n), .Y(y)); endmodule";
        let stim = Trace {
            ports: vec!["a".into()],
            rows: vec![vec![true]],
        };
        assert_eq!(run(src, stim, 1).rows, vec![vec![true]]);
    }

    #[test]
    fn disabled_clock_gate_holds_state() {
        let src = "module t(input clk, input d, output q); wire g;\n\
                   ICG_X1 cg(.CK(clk), .E(1'b0), .GCLK(g));\n\
                   (* init = 1 *) DFF_X1 r(.CK(g), .D(d), .Q(q)); endmodule";
        let stim = Trace {
            ports: vec!["d".into()],
            rows: (0..6).map(|i| vec![i % 2 == 0]).collect(),
        };
        assert_eq!(run(src, stim, 6).column("q").unwrap(), vec![true; 6]);
    }

    #[test]
    fn undriven_net_is_an_error() {
        let src = "module t(input a, output y); wire n; AND2_X1 g(.A(a), .B(n), .Y(y)); endmodule";
        let n = parse(src).unwrap();
        let stim = Trace {
            ports: vec!["a".into()],
            rows: vec![vec![true]],
        };
        assert!(matches!(
            simulate(&n, &bundled_library(), &stim, 1),
            Err(Error::Simulation(_))
        ));
    }
}
