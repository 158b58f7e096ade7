use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{const_value, flatten, Compiled, Direction, InstanceKind, ModuleDef, Netlist};
use crate::error::Error;
use crate::library::{CellKind, CellLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// `module` or `module/instance` or `module:net`.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

/// Checks the structural invariants of a netlist. Output pins may be left
/// unconnected; floating nets are reported as warnings.
pub fn validate(netlist: &Netlist, lib: &CellLibrary) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !netlist.modules.contains_key(&netlist.top) {
        out.push(Diagnostic::error(
            &netlist.name,
            format!("top module {} is not defined", netlist.top),
        ));
        return out;
    }
    if let Some(cycle) = find_recursion(netlist) {
        out.push(Diagnostic::error(
            &netlist.top,
            format!("recursive hierarchy: {}", cycle.join(" -> ")),
        ));
        return out;
    }
    for module in netlist.modules.values() {
        check_module(netlist, module, lib, &mut out);
    }
    if out.iter().any(Diagnostic::is_error) {
        return out;
    }
    match flatten(netlist).and_then(|flat| Compiled::new(flat.top_module(), lib).map(|_| ())) {
        Ok(()) => {}
        Err(Error::CombinationalCycle(nets)) => out.push(Diagnostic::error(
            &netlist.top,
            format!("combinational cycle through nets {}", nets.join(", ")),
        )),
        Err(e) => out.push(Diagnostic::error(&netlist.top, e.to_string())),
    }
    out
}

/// Returns a module instantiation cycle, if any.
pub(crate) fn find_recursion(netlist: &Netlist) -> Option<Vec<String>> {
    fn dfs(
        n: &Netlist,
        m: &str,
        stack: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Option<Vec<String>> {
        if let Some(pos) = stack.iter().position(|s| s == m) {
            let mut cycle = stack[pos..].to_vec();
            cycle.push(m.to_string());
            return Some(cycle);
        }
        if done.contains(m) {
            return None;
        }
        stack.push(m.to_string());
        if let Some(def) = n.modules.get(m) {
            for inst in &def.instances {
                if let InstanceKind::Module(child) = &inst.kind {
                    if let Some(c) = dfs(n, child, stack, done) {
                        return Some(c);
                    }
                }
            }
        }
        stack.pop();
        done.insert(m.to_string());
        None
    }
    let mut done = BTreeSet::new();
    for m in netlist.modules.keys() {
        if let Some(c) = dfs(netlist, m, &mut Vec::new(), &mut done) {
            return Some(c);
        }
    }
    None
}

fn check_module(netlist: &Netlist, m: &ModuleDef, lib: &CellLibrary, out: &mut Vec<Diagnostic>) {
    let declared = |net: &str| m.nets.contains(net) || const_value(net).is_some();
    let mut drivers: BTreeMap<&str, usize> = BTreeMap::new();
    let mut loaded: BTreeSet<&str> = BTreeSet::new();

    for (bit, dir) in m.port_bits() {
        match m.port_net(&bit) {
            None => out.push(Diagnostic::error(
                &m.name,
                format!("port bit {bit} is not bound to a net"),
            )),
            Some(net) if !declared(net) => out.push(Diagnostic::error(
                &m.name,
                format!("port bit {bit} bound to undeclared net {net}"),
            )),
            Some(net) => match dir {
                Direction::Input => *drivers.entry(net).or_insert(0) += 1,
                Direction::Output => {
                    loaded.insert(net);
                }
            },
        }
    }
    for c in ["const0", "const1"] {
        *drivers.entry(c).or_insert(0) += 1;
    }

    let mut names = BTreeSet::new();
    for inst in &m.instances {
        let loc = format!("{}/{}", m.name, inst.name);
        if !names.insert(inst.name.as_str()) {
            out.push(Diagnostic::error(
                &loc,
                format!("duplicate instance name {}", inst.name),
            ));
        }
        for net in inst.connections.values() {
            if !declared(net) {
                out.push(Diagnostic::error(
                    &loc,
                    format!("pin connects to undeclared net {net}"),
                ));
            }
        }
        match &inst.kind {
            InstanceKind::Cell(cell) => {
                let Some(spec) = lib.get(cell) else {
                    out.push(Diagnostic::error(&loc, format!("unknown cell {cell}")));
                    continue;
                };
                for (pin, net) in &inst.connections {
                    if spec.is_input(pin) {
                        loaded.insert(net);
                    } else if spec.is_output(pin) {
                        *drivers.entry(net).or_insert(0) += 1;
                    } else {
                        out.push(Diagnostic::error(
                            &loc,
                            format!("unknown pin {pin} on cell {cell}"),
                        ));
                    }
                }
                for pin in spec.inputs() {
                    if !inst.connections.contains_key(pin) {
                        out.push(Diagnostic::error(
                            &loc,
                            format!("unconnected input pin {pin}"),
                        ));
                    }
                }
                if inst.init && spec.kind != CellKind::Ff {
                    out.push(Diagnostic::error(
                        &loc,
                        "init value on a non-sequential cell",
                    ));
                }
            }
            InstanceKind::Module(child) => {
                let Some(def) = netlist.modules.get(child) else {
                    out.push(Diagnostic::error(&loc, format!("unknown module {child}")));
                    continue;
                };
                let bits: BTreeMap<String, Direction> = def.port_bits().into_iter().collect();
                for (pin, net) in &inst.connections {
                    match bits.get(pin) {
                        Some(Direction::Input) => {
                            loaded.insert(net);
                        }
                        Some(Direction::Output) => *drivers.entry(net).or_insert(0) += 1,
                        None => out.push(Diagnostic::error(
                            &loc,
                            format!("unknown pin {pin} on module {child}"),
                        )),
                    }
                }
                for (bit, dir) in &bits {
                    if *dir == Direction::Input && !inst.connections.contains_key(bit) {
                        out.push(Diagnostic::error(
                            &loc,
                            format!("unconnected input pin {bit}"),
                        ));
                    }
                }
            }
        }
    }

    for net in m
        .nets
        .iter()
        .map(String::as_str)
        .chain(["const0", "const1"])
    {
        let d = drivers.get(net).copied().unwrap_or(0);
        let loc = format!("{}:{net}", m.name);
        if d > 1 {
            out.push(Diagnostic::error(
                &loc,
                format!("multiple drivers on net {net}"),
            ));
        } else if d == 0 && loaded.contains(net) {
            out.push(Diagnostic::error(&loc, format!("undriven net {net}")));
        } else if d == 0 {
            out.push(Diagnostic::warning(&loc, format!("floating net {net}")));
        }
    }
}
