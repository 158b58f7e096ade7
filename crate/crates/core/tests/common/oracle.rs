//! Reference simulator for the bundled library: walks the hierarchy
//! directly, evaluates gates from hard-coded truth functions and settles
//! combinational logic by iterating to a fixed point. Clock inputs are
//! ports named `clk`; a flip-flop loads when its clock net evaluates high.

use std::collections::{BTreeMap, HashMap};

use netdiv::netlist::{const_value, InstanceKind, ModuleDef, Netlist};

pub fn gate(cell: &str, pin: &str, v: &dyn Fn(&str) -> bool) -> bool {
    let base = cell.rsplit_once('_').map_or(cell, |(b, _)| b);
    match (base, pin) {
        ("INV", "Y") => !v("A"),
        ("BUF", "Y") => v("A"),
        ("NAND2", "Y") => !(v("A") && v("B")),
        ("NOR2", "Y") => !(v("A") || v("B")),
        ("AND2", "Y") => v("A") && v("B"),
        ("OR2", "Y") => v("A") || v("B"),
        ("XOR2", "Y") => v("A") != v("B"),
        ("MUX2", "Y") => {
            if v("S") {
                v("B")
            } else {
                v("A")
            }
        }
        ("AOI21", "Y") => !((v("A") && v("B")) || v("C")),
        ("OAI21", "Y") => !((v("A") || v("B")) && v("C")),
        ("ICG", "GCLK") => v("CK") && v("E"),
        _ => panic!("oracle does not know {cell}.{pin}"),
    }
}

fn is_flop(cell: &str) -> bool {
    cell.starts_with("DFF")
}

fn output_pins(cell: &str) -> &'static [&'static str] {
    match cell {
        "DFFQN_X1" => &["Q", "QN"],
        c if is_flop(c) => &["Q"],
        c if c.starts_with("ICG") => &["GCLK"],
        _ => &["Y"],
    }
}

pub struct RefSim<'n> {
    n: &'n Netlist,
    /// Flip-flop state by hierarchical instance path.
    state: HashMap<String, bool>,
}

impl<'n> RefSim<'n> {
    pub fn new(n: &'n Netlist) -> Self {
        let mut state = HashMap::new();
        init(n, n.top_module(), "", &mut state);
        Self { n, state }
    }

    /// One clock cycle: settle, sample outputs, then clock the flip-flops.
    pub fn step(&mut self, inputs: &BTreeMap<String, bool>) -> BTreeMap<String, bool> {
        let mut loads = Vec::new();
        let outs = self.eval(self.n.top_module(), "", inputs, &mut loads);
        for (path, d) in loads {
            self.state.insert(path, d);
        }
        outs
    }

    fn eval(
        &self,
        m: &ModuleDef,
        path: &str,
        inputs: &BTreeMap<String, bool>,
        loads: &mut Vec<(String, bool)>,
    ) -> BTreeMap<String, bool> {
        let mut nets: HashMap<String, bool> = HashMap::new();
        for bit in m.input_bits() {
            let v = bit == "clk" || inputs.get(&bit).copied().unwrap_or(false);
            nets.insert(m.port_net(&bit).unwrap_or(&bit).to_string(), v);
        }
        let read = |nets: &HashMap<String, bool>, net: &str| {
            const_value(net).unwrap_or_else(|| nets.get(net).copied().unwrap_or(false))
        };
        let mut child_loads: Vec<Vec<(String, bool)>> = vec![Vec::new(); m.instances.len()];
        for _round in 0..=m.instances.len() + 1 {
            let mut changed = false;
            for (k, inst) in m.instances.iter().enumerate() {
                let p = format!("{path}{}", inst.name);
                let outs: Vec<(&str, bool)> = match &inst.kind {
                    InstanceKind::Cell(cell) => {
                        let v = |pin: &str| inst.pin(pin).is_some_and(|n| read(&nets, n));
                        output_pins(cell)
                            .iter()
                            .filter_map(|pin| {
                                let net = inst.pin(pin)?;
                                let val = if is_flop(cell) {
                                    let q = self.state[&p];
                                    if *pin == "QN" {
                                        !q
                                    } else {
                                        q
                                    }
                                } else {
                                    gate(cell, pin, &v)
                                };
                                Some((net, val))
                            })
                            .collect()
                    }
                    InstanceKind::Module(name) => {
                        let child = &self.n.modules[name];
                        let cin: BTreeMap<String, bool> = child
                            .input_bits()
                            .into_iter()
                            .map(|b| {
                                let v = inst.pin(&b).is_some_and(|n| read(&nets, n));
                                (b, v)
                            })
                            .collect();
                        child_loads[k].clear();
                        let co = self.eval(child, &format!("{p}/"), &cin, &mut child_loads[k]);
                        co.into_iter()
                            .filter_map(|(b, v)| Some((inst.pin(&b)?, v)))
                            .collect()
                    }
                };
                for (net, val) in outs {
                    if nets.insert(net.to_string(), val) != Some(val) {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for (k, inst) in m.instances.iter().enumerate() {
            match &inst.kind {
                InstanceKind::Cell(cell) if is_flop(cell) => {
                    let ck = inst.pin("CK").is_some_and(|n| read(&nets, n));
                    if ck {
                        let d = inst.pin("D").is_some_and(|n| read(&nets, n));
                        loads.push((format!("{path}{}", inst.name), d));
                    }
                }
                InstanceKind::Module(_) => loads.append(&mut child_loads[k]),
                _ => {}
            }
        }
        m.output_bits()
            .into_iter()
            .map(|b| {
                let net = m.port_net(&b).unwrap_or(&b).to_string();
                let v = read(&nets, &net);
                (b, v)
            })
            .collect()
    }
}

fn init(n: &Netlist, m: &ModuleDef, path: &str, state: &mut HashMap<String, bool>) {
    for inst in &m.instances {
        match &inst.kind {
            InstanceKind::Cell(c) if is_flop(c) => {
                state.insert(format!("{path}{}", inst.name), inst.init);
            }
            InstanceKind::Module(name) => {
                init(n, &n.modules[name], &format!("{path}{}/", inst.name), state)
            }
            _ => {}
        }
    }
}
