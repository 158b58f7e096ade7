use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::flat;
use crate::error::Result;
use crate::library::{CellKind, CellLibrary};
use crate::netlist::{Compiled, NetDriver, NetId, Netlist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub voltage: f64,
    pub frequency_mhz: f64,
    pub data_activity: f64,
    pub clock_activity: f64,
    /// Per-net activity overrides.
    pub activity: BTreeMap<String, f64>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            voltage: 0.8,
            frequency_mhz: 500.0,
            data_activity: 0.1,
            clock_activity: 1.0,
            activity: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReport {
    /// mW
    pub leakage: f64,
    /// mW
    pub dynamic: f64,
}

pub fn analyze_power(
    netlist: &Netlist,
    lib: &CellLibrary,
    cfg: &PowerConfig,
) -> Result<PowerReport> {
    let netlist = flat(netlist)?;
    let c = Compiled::new(netlist.top_module(), lib)?;
    Ok(analyze_power_compiled(&c, cfg))
}

/// Dynamic power per net is `0.5 * activity * C * V^2 * f` with `C` the sum of
/// sink pin caps. Clock nets run at the clock activity, scaled by the enable
/// activity of every clock gate upstream of them.
pub fn analyze_power_compiled(c: &Compiled<'_>, cfg: &PowerConfig) -> PowerReport {
    let leakage = c.cells.iter().map(|cell| cell.spec.leakage).sum();
    let n = c.num_nets();
    let mut memo: Vec<Option<f64>> = vec![None; n];
    let mut dynamic = 0.0;
    // fF * V^2 * MHz = 1e-9 W = 1e-6 mW
    let scale = 0.5 * cfg.voltage * cfg.voltage * cfg.frequency_mhz * 1e-6;
    for net in 0..n {
        if matches!(c.drivers[net], NetDriver::Const(_)) {
            continue;
        }
        let cap = c.load_cap(net);
        if cap == 0.0 {
            continue;
        }
        dynamic += scale * activity(c, cfg, net, &mut memo) * cap;
    }
    PowerReport { leakage, dynamic }
}

fn data_activity(c: &Compiled<'_>, cfg: &PowerConfig, net: NetId) -> f64 {
    cfg.activity
        .get(c.net_name(net))
        .copied()
        .unwrap_or(cfg.data_activity)
}

fn activity(c: &Compiled<'_>, cfg: &PowerConfig, net: NetId, memo: &mut Vec<Option<f64>>) -> f64 {
    if let Some(a) = memo[net] {
        return a;
    }
    let a = if !c.is_clock[net] {
        data_activity(c, cfg, net)
    } else if let Some(&a) = cfg.activity.get(c.net_name(net)) {
        a
    } else {
        match c.drivers[net] {
            NetDriver::Cell(d, _) => {
                let cell = &c.cells[d];
                match cell.kind() {
                    CellKind::Buf => activity(c, cfg, cell.inputs[0].expect("connected"), memo),
                    CellKind::Icg => {
                        let ck = activity(c, cfg, cell.input("CK").expect("connected"), memo);
                        let en = cell.input("E").map_or(1.0, |e| activity(c, cfg, e, memo));
                        ck * en
                    }
                    _ => cfg.clock_activity,
                }
            }
            _ => cfg.clock_activity,
        }
    };
    memo[net] = Some(a);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::bundled_library;
    use crate::verilog::parse;

    #[test]
    fn leakage_is_a_sum() {
        let lib = bundled_library();
        let n = parse("module t(input a, output y); wire n; INV_X1 i(.A(a), .Y(n)); BUF_X1 b(.A(n), .Y(y)); endmodule")
            .unwrap();
        let p = analyze_power(&n, &lib, &PowerConfig::default()).unwrap();
        let expected = lib.get("INV_X1").unwrap().leakage + lib.get("BUF_X1").unwrap().leakage;
        assert!((p.leakage - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_data_activity_leaves_clock_term() {
        let lib = bundled_library();
        let n = parse(
            "module t(input clk, input d, output q); wire m; DFF_X1 r0(.CK(clk), .D(d), .Q(m)); DFF_X1 r1(.CK(clk), .D(m), .Q(q)); endmodule",
        )
        .unwrap();
        let cfg = PowerConfig {
            data_activity: 0.0,
            ..Default::default()
        };
        let p = analyze_power(&n, &lib, &cfg).unwrap();
        let ck = 2.0 * lib.get("DFF_X1").unwrap().cap("CK");
        let expected = 0.5 * 1.0 * ck * 0.8 * 0.8 * 500.0 * 1e-6;
        assert!(
            (p.dynamic - expected).abs() < 1e-12,
            "{} vs {expected}",
            p.dynamic
        );
    }
}
