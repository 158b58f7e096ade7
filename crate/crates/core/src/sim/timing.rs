use std::collections::BTreeMap;

use super::flat;
use crate::error::Result;
use crate::library::{CellKind, CellLibrary};
use crate::netlist::{Compiled, NetDriver, Netlist};

/// Static timing under the linear model: a stage adds
/// `intrinsic + drive_res * load` and produces slew `slew_factor * drive_res * load`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub critical_path: f64,
    pub worst_slew: f64,
    /// Arrival time per net (ps), indexed like [`Compiled::net_names`].
    pub arrival: Vec<f64>,
    /// Output slew per net (ps); zero for undriven, constant and input nets.
    pub slew: Vec<f64>,
    /// Net names with their slews, for reporting.
    pub slew_by_net: BTreeMap<String, f64>,
}

pub fn analyze_timing(netlist: &Netlist, lib: &CellLibrary) -> Result<TimingReport> {
    let netlist = flat(netlist)?;
    let c = Compiled::new(netlist.top_module(), lib)?;
    Ok(analyze_timing_compiled(&c))
}

/// Timing endpoints are flip-flop D pins, clock-gate enables and primary
/// outputs; start points are primary inputs (arrival 0) and flip-flop outputs.
pub fn analyze_timing_compiled(c: &Compiled<'_>) -> TimingReport {
    let n = c.num_nets();
    let mut arrival = vec![0.0f64; n];
    let mut slew = vec![0.0f64; n];
    let sf = c.lib.slew_factor;
    let load: Vec<f64> = (0..n).map(|net| c.load_cap(net)).collect();

    for cell in &c.cells {
        if cell.kind().is_sequential() {
            for net in cell.outputs.iter().flatten() {
                slew[*net] = sf * cell.spec.drive_res * load[*net];
                if cell.kind() == CellKind::Ff {
                    arrival[*net] = cell.spec.stage_delay(load[*net]);
                }
            }
        }
    }
    for &ci in &c.order {
        let cell = &c.cells[ci];
        let at_in = cell
            .inputs
            .iter()
            .flatten()
            .filter(|net| !c.is_clock[**net])
            .map(|net| arrival[*net])
            .fold(0.0, f64::max);
        for net in cell.outputs.iter().flatten() {
            slew[*net] = sf * cell.spec.drive_res * load[*net];
            arrival[*net] = if c.is_clock[*net] {
                0.0
            } else {
                at_in + cell.spec.stage_delay(load[*net])
            };
        }
    }

    let mut cp = 0.0f64;
    for cell in &c.cells {
        match cell.kind() {
            CellKind::Ff => {
                if let Some(d) = cell.input("D") {
                    cp = cp.max(arrival[d]);
                }
            }
            CellKind::Icg => {
                if let Some(e) = cell.input("E") {
                    cp = cp.max(arrival[e]);
                }
            }
            _ => {}
        }
    }
    for &(_, net) in &c.outputs {
        cp = cp.max(arrival[net]);
    }
    let worst_slew = slew.iter().copied().fold(0.0, f64::max);
    let slew_by_net = (0..n)
        .filter(|&net| matches!(c.drivers[net], NetDriver::Cell(..)))
        .map(|net| (c.net_name(net).to_string(), slew[net]))
        .collect();
    TimingReport {
        critical_path: cp,
        worst_slew,
        arrival,
        slew,
        slew_by_net,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::bundled_library;
    use crate::verilog::parse;

    #[test]
    fn inverter_stage_delay_and_slew() {
        // INV_X1 driving one NAND2_X1 A pin (1.1 fF) and one MUX2_X1 S pin (1.8 fF): 2.9 fF.
        let lib = bundled_library();
        let n = parse(
            "module t(input a, input b, output y, output z); wire n;\n\
             INV_X1 i(.A(a), .Y(n));\n\
             NAND2_X1 g(.A(n), .B(b), .Y(y));\n\
             MUX2_X1 m(.A(b), .B(b), .S(n), .Y(z)); endmodule",
        )
        .unwrap();
        let c = Compiled::new(n.top_module(), &lib).unwrap();
        let t = analyze_timing_compiled(&c);
        let net = c.net("n").unwrap();
        let inv = lib.get("INV_X1").unwrap();
        let load = 1.1 + 1.8;
        assert!((t.arrival[net] - (inv.intrinsic_delay + inv.drive_res * load)).abs() < 1e-9);
        assert!((t.slew[net] - lib.slew_factor * inv.drive_res * load).abs() < 1e-9);
    }

    #[test]
    fn longest_of_parallel_paths() {
        let lib = bundled_library();
        let n = parse(
            "module t(input a, output y, output z); wire p, q, r;\n\
             INV_X1 a1(.A(a), .Y(p)); INV_X1 a2(.A(p), .Y(y));\n\
             INV_X1 b1(.A(a), .Y(q)); INV_X1 b2(.A(q), .Y(r)); INV_X1 b3(.A(r), .Y(z)); endmodule",
        )
        .unwrap();
        let t = analyze_timing(&n, &lib).unwrap();
        let inv = lib.get("INV_X1").unwrap();
        let stage = inv.stage_delay(inv.cap("A"));
        // The last stage of each path drives no cell inputs.
        let three = 2.0 * stage + inv.intrinsic_delay;
        assert!(
            (t.critical_path - three).abs() < 1e-9,
            "{}",
            t.critical_path
        );
    }
}
