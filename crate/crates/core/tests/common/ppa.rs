//! Reference PPA numbers for flat netlists, computed straight from the
//! instance list and the library's per-cell figures.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use netdiv::library::{CellKind, CellLibrary, CellSpec};
use netdiv::netlist::{const_value, ModuleDef};

pub struct Reference {
    pub area: f64,
    pub leakage: f64,
    pub dynamic: f64,
    pub critical_path: f64,
    pub worst_slew: f64,
}

struct View<'a> {
    lib: &'a CellLibrary,
    /// net -> (instance index, output pin)
    driver: HashMap<&'a str, (usize, &'a str)>,
    load: HashMap<&'a str, f64>,
    clock: BTreeSet<&'a str>,
    m: &'a ModuleDef,
}

impl<'a> View<'a> {
    fn spec(&self, i: usize) -> &'a CellSpec {
        self.lib
            .get(self.m.instances[i].cell_name().expect("flat netlist"))
            .expect("known cell")
    }

    fn load(&self, net: &str) -> f64 {
        self.load.get(net).copied().unwrap_or(0.0)
    }
}

fn view<'a>(m: &'a ModuleDef, lib: &'a CellLibrary) -> View<'a> {
    let mut driver = HashMap::new();
    let mut load: HashMap<&str, f64> = HashMap::new();
    let mut ck_pins = Vec::new();
    for (i, inst) in m.instances.iter().enumerate() {
        let spec = lib.get(inst.cell_name().unwrap()).unwrap();
        for (pin, net) in &inst.connections {
            if spec.is_output(pin) {
                driver.insert(net.as_str(), (i, pin.as_str()));
            } else {
                *load.entry(net.as_str()).or_default() += spec.input_caps[pin];
                if pin == "CK" {
                    ck_pins.push(net.as_str());
                }
            }
        }
    }
    let mut v = View {
        lib,
        driver,
        load,
        clock: BTreeSet::new(),
        m,
    };
    let mut stack = ck_pins;
    while let Some(net) = stack.pop() {
        if !v.clock.insert(net) {
            continue;
        }
        if let Some(&(i, _)) = v.driver.get(net) {
            let inst = &m.instances[i];
            match v.spec(i).kind {
                CellKind::Buf => stack.push(inst.pin("A").unwrap()),
                CellKind::Icg => stack.push(inst.pin("CK").unwrap()),
                _ => {}
            }
        }
    }
    v
}

fn arrival<'a>(v: &View<'a>, net: &'a str, memo: &mut HashMap<&'a str, f64>) -> f64 {
    if let Some(&a) = memo.get(net) {
        return a;
    }
    let a = if v.clock.contains(net) || const_value(net).is_some() {
        0.0
    } else {
        match v.driver.get(net) {
            None => 0.0,
            Some(&(i, _)) => {
                let spec = v.spec(i);
                let stage = spec.intrinsic_delay + spec.drive_res * v.load(net);
                if spec.kind == CellKind::Ff {
                    stage
                } else {
                    let inst = &v.m.instances[i];
                    let mut worst = 0.0f64;
                    for (pin, n) in &inst.connections {
                        if spec.is_input(pin) {
                            worst = worst.max(arrival(v, n, memo));
                        }
                    }
                    worst + stage
                }
            }
        }
    };
    memo.insert(net, a);
    a
}

fn clock_activity(v: &View<'_>, net: &str, data: f64) -> f64 {
    match v.driver.get(net) {
        Some(&(i, _)) => {
            let inst = &v.m.instances[i];
            match v.spec(i).kind {
                CellKind::Buf => clock_activity(v, inst.pin("A").unwrap(), data),
                CellKind::Icg => clock_activity(v, inst.pin("CK").unwrap(), data) * data,
                _ => 1.0,
            }
        }
        None => 1.0,
    }
}

/// Default power settings: 0.8 V, 500 MHz, data activity 0.1, clock 1.0.
pub fn reference(m: &ModuleDef, lib: &CellLibrary) -> Reference {
    let v = view(m, lib);
    let specs: Vec<&CellSpec> = (0..m.instances.len()).map(|i| v.spec(i)).collect();
    let area = specs.iter().map(|s| s.area).sum();
    let leakage = specs.iter().map(|s| s.leakage).sum();
    let nets: BTreeMap<&str, f64> = v.load.iter().map(|(n, c)| (*n, *c)).collect();
    let mut dynamic = 0.0;
    for (net, cap) in &nets {
        if const_value(net).is_some() {
            continue;
        }
        let a = if v.clock.contains(net) {
            clock_activity(&v, net, 0.1)
        } else {
            0.1
        };
        // 0.5 a C V^2 f with C in fF, f in MHz, result in mW
        dynamic += 0.5 * a * cap * 1e-15 * 0.8 * 0.8 * 500e6 * 1e3;
    }
    let mut memo = HashMap::new();
    let mut cp = 0.0f64;
    for inst in &m.instances {
        let spec = lib.get(inst.cell_name().unwrap()).unwrap();
        let end = match spec.kind {
            CellKind::Ff => inst.pin("D"),
            CellKind::Icg => inst.pin("E"),
            _ => None,
        };
        if let Some(n) = end {
            cp = cp.max(arrival(&v, n, &mut memo));
        }
    }
    for bit in m.output_bits() {
        if let Some(net) = m.port_net(&bit) {
            cp = cp.max(arrival(&v, net, &mut memo));
        }
    }
    let worst_slew = v
        .driver
        .iter()
        .map(|(net, &(i, _))| lib.slew_factor * v.spec(i).drive_res * v.load(net))
        .fold(0.0, f64::max);
    Reference {
        area,
        leakage,
        dynamic,
        critical_path: cp,
        worst_slew,
    }
}
