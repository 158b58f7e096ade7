//! Index-based view of a flat module used by simulation, timing and analysis.

use std::collections::{HashMap, VecDeque};

use super::{const_value, Direction, InstanceKind, ModuleDef};
use crate::error::{Error, Result};
use crate::library::{CellKind, CellLibrary, CellSpec};

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetDriver {
    None,
    Const(bool),
    /// Index into [`Compiled::inputs`].
    Input(usize),
    /// Cell index and output index (into the cell's output list).
    Cell(usize, usize),
}

#[derive(Debug, Clone)]
pub struct CompiledCell<'l> {
    pub name: String,
    pub spec: &'l CellSpec,
    /// One entry per library input pin, in the cell's sorted pin order.
    pub inputs: Vec<Option<NetId>>,
    /// One entry per library output pin.
    pub outputs: Vec<Option<NetId>>,
    pub init: bool,
}

impl CompiledCell<'_> {
    pub fn kind(&self) -> CellKind {
        self.spec.kind
    }

    pub fn input(&self, pin: &str) -> Option<NetId> {
        self.spec.input_index(pin).and_then(|i| self.inputs[i])
    }

    pub fn output(&self, pin: &str) -> Option<NetId> {
        let i = self.spec.outputs().iter().position(|(n, _)| n == pin)?;
        self.outputs[i]
    }
}

/// A flat module with nets and cells numbered, drivers and loads resolved,
/// and combinational cells in topological order.
#[derive(Debug, Clone)]
pub struct Compiled<'l> {
    pub lib: &'l CellLibrary,
    pub net_names: Vec<String>,
    pub net_index: HashMap<String, NetId>,
    pub cells: Vec<CompiledCell<'l>>,
    pub drivers: Vec<NetDriver>,
    /// Per net: (cell, input index) pairs reading it.
    pub loads: Vec<Vec<(usize, usize)>>,
    /// Input port bits and their nets, in declaration order.
    pub inputs: Vec<(String, NetId)>,
    pub outputs: Vec<(String, NetId)>,
    /// Combinational cells, drivers before readers.
    pub order: Vec<usize>,
    /// Nets that carry a clock (reach a CK pin through buffers and gates).
    pub is_clock: Vec<bool>,
    /// Per cell: enable nets of the clock gates between the clock root and its
    /// CK pin, outermost first. Empty for ungated or non-sequential cells.
    pub clock_gates: Vec<Vec<NetId>>,
    /// Per cell: the net at the root of its clock tree.
    pub clock_root: Vec<Option<NetId>>,
}

impl<'l> Compiled<'l> {
    pub fn new(module: &ModuleDef, lib: &'l CellLibrary) -> Result<Self> {
        let mut net_names: Vec<String> = vec!["const0".into(), "const1".into()];
        net_names.extend(
            module
                .nets
                .iter()
                .filter(|n| const_value(n).is_none())
                .cloned(),
        );
        let net_index: HashMap<String, NetId> = net_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let lookup = |net: &str| -> Result<NetId> {
            net_index
                .get(net)
                .copied()
                .ok_or_else(|| Error::Invalid(format!("undeclared net {net}")))
        };
        let n = net_names.len();
        let mut drivers = vec![NetDriver::None; n];
        drivers[0] = NetDriver::Const(false);
        drivers[1] = NetDriver::Const(true);
        let mut loads = vec![Vec::new(); n];

        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (bit, dir) in module.port_bits() {
            let net = module
                .port_net(&bit)
                .ok_or_else(|| Error::Invalid(format!("port bit {bit} is unbound")))?;
            let id = lookup(net)?;
            match dir {
                Direction::Input => {
                    if drivers[id] != NetDriver::None {
                        return Err(Error::Invalid(format!("multiple drivers on net {net}")));
                    }
                    drivers[id] = NetDriver::Input(inputs.len());
                    inputs.push((bit, id));
                }
                Direction::Output => outputs.push((bit, id)),
            }
        }

        let mut cells = Vec::with_capacity(module.instances.len());
        for inst in &module.instances {
            let cell_name = match &inst.kind {
                InstanceKind::Cell(c) => c,
                InstanceKind::Module(m) => {
                    return Err(Error::Invalid(format!(
                        "instance {} of module {m}: netlist is not flat",
                        inst.name
                    )))
                }
            };
            let spec = lib.get(cell_name).ok_or_else(|| {
                Error::Invalid(format!("instance {}: unknown cell {cell_name}", inst.name))
            })?;
            let ci = cells.len();
            let mut cin = vec![None; spec.inputs().len()];
            let mut cout = vec![None; spec.outputs().len()];
            for (pin, net) in &inst.connections {
                let id = lookup(net)?;
                if let Some(k) = spec.input_index(pin) {
                    cin[k] = Some(id);
                    loads[id].push((ci, k));
                } else if let Some(k) = spec.outputs().iter().position(|(o, _)| o == pin) {
                    if drivers[id] != NetDriver::None {
                        return Err(Error::Invalid(format!("multiple drivers on net {net}")));
                    }
                    drivers[id] = NetDriver::Cell(ci, k);
                    cout[k] = Some(id);
                } else {
                    return Err(Error::Invalid(format!(
                        "instance {}: unknown pin {pin} on cell {cell_name}",
                        inst.name
                    )));
                }
            }
            if let Some(k) = cin.iter().position(Option::is_none) {
                return Err(Error::Invalid(format!(
                    "instance {}: unconnected input pin {}",
                    inst.name,
                    spec.inputs()[k]
                )));
            }
            cells.push(CompiledCell {
                name: inst.name.clone(),
                spec,
                inputs: cin,
                outputs: cout,
                init: inst.init,
            });
        }

        let order = topo_cells(&cells, &drivers, &loads, &net_names)?;
        let mut c = Compiled {
            lib,
            net_names,
            net_index,
            cells,
            drivers,
            loads,
            inputs,
            outputs,
            order,
            is_clock: vec![false; n],
            clock_gates: Vec::new(),
            clock_root: Vec::new(),
        };
        c.trace_clocks();
        Ok(c)
    }

    pub fn net(&self, name: &str) -> Option<NetId> {
        self.net_index.get(name).copied()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id]
    }

    pub fn num_nets(&self) -> usize {
        self.net_names.len()
    }

    /// Cell indices of flip-flops.
    pub fn flops(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&i| self.cells[i].kind() == CellKind::Ff)
    }

    /// Capacitive load of a net: sum of the input caps of its sinks.
    pub fn load_cap(&self, net: NetId) -> f64 {
        self.loads[net]
            .iter()
            .map(|&(c, k)| {
                let spec = self.cells[c].spec;
                spec.cap(&spec.inputs()[k])
            })
            .sum()
    }

    /// Number of primary outputs bound to a net.
    pub fn output_refs(&self, net: NetId) -> usize {
        self.outputs.iter().filter(|(_, n)| *n == net).count()
    }

    /// Follows the clock pins backwards through buffers and clock gates.
    fn trace_clocks(&mut self) {
        let n_cells = self.cells.len();
        self.clock_gates = vec![Vec::new(); n_cells];
        self.clock_root = vec![None; n_cells];
        for ci in 0..n_cells {
            if !self.cells[ci].kind().is_sequential() {
                continue;
            }
            let Some(mut net) = self.cells[ci].input("CK") else {
                continue;
            };
            let mut gates = Vec::new();
            let mut guard = 0;
            loop {
                self.is_clock[net] = true;
                guard += 1;
                if guard > n_cells + 1 {
                    break;
                }
                match self.drivers[net] {
                    NetDriver::Cell(d, _) => {
                        let dc = &self.cells[d];
                        match dc.kind() {
                            CellKind::Buf => net = dc.inputs[0].expect("connected"),
                            CellKind::Icg => {
                                if let Some(e) = dc.input("E") {
                                    gates.push(e);
                                }
                                net = dc.input("CK").expect("connected");
                            }
                            _ => break,
                        }
                    }
                    _ => break,
                }
            }
            gates.reverse();
            self.clock_root[ci] = Some(net);
            self.clock_gates[ci] = gates;
        }
    }
}

/// Per-flip-flop connectivity summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipFlopInfo {
    pub instance: String,
    pub clock_net: String,
    pub data_net: String,
    pub q_net: Option<String>,
    pub qn_net: Option<String>,
    /// Enable of the clock gate closest to the flip-flop, if gated.
    pub enable_net: Option<String>,
    pub init_value: bool,
}

/// Flip-flops of a flat module in instance order.
pub fn flip_flop_info(module: &ModuleDef, lib: &CellLibrary) -> Result<Vec<FlipFlopInfo>> {
    let c = Compiled::new(module, lib)?;
    let name = |n: Option<NetId>| n.map(|id| c.net_name(id).to_string());
    Ok(c.flops()
        .map(|i| {
            let cell = &c.cells[i];
            FlipFlopInfo {
                instance: cell.name.clone(),
                clock_net: name(cell.input("CK")).unwrap_or_default(),
                data_net: name(cell.input("D")).unwrap_or_default(),
                q_net: name(cell.output("Q")),
                qn_net: name(cell.output("QN")),
                enable_net: name(c.clock_gates[i].last().copied()),
                init_value: cell.init,
            }
        })
        .collect())
}

/// Kahn's algorithm over combinational cells; sequential cells are cut.
fn topo_cells(
    cells: &[CompiledCell<'_>],
    drivers: &[NetDriver],
    loads: &[Vec<(usize, usize)>],
    net_names: &[String],
) -> Result<Vec<usize>> {
    let comb = |c: usize| cells[c].spec.is_combinational();
    let mut indeg = vec![0usize; cells.len()];
    for (ci, cell) in cells.iter().enumerate() {
        if !comb(ci) {
            continue;
        }
        for net in cell.inputs.iter().flatten() {
            if let NetDriver::Cell(d, _) = drivers[*net] {
                if comb(d) {
                    indeg[ci] += 1;
                }
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..cells.len())
        .filter(|&c| comb(c) && indeg[c] == 0)
        .collect();
    let mut order = Vec::new();
    while let Some(c) = queue.pop_front() {
        order.push(c);
        for net in cells[c].outputs.iter().flatten() {
            for &(s, _) in &loads[*net] {
                if comb(s) {
                    indeg[s] -= 1;
                    if indeg[s] == 0 {
                        queue.push_back(s);
                    }
                }
            }
        }
    }
    let total = (0..cells.len()).filter(|&c| comb(c)).count();
    if order.len() == total {
        return Ok(order);
    }
    // Walk backwards from a stuck cell through stuck drivers until a cell repeats.
    let stuck = |c: usize| comb(c) && indeg[c] > 0;
    let start = (0..cells.len())
        .find(|&c| stuck(c))
        .expect("some cell is stuck");
    let mut seen = vec![usize::MAX; cells.len()];
    let mut path: Vec<(usize, usize)> = Vec::new();
    let mut cur = start;
    loop {
        if seen[cur] != usize::MAX {
            let nets: Vec<String> = path[seen[cur]..]
                .iter()
                .map(|&(_, net)| net_names[net].clone())
                .collect();
            let mut nets = nets;
            nets.reverse();
            return Err(Error::CombinationalCycle(nets));
        }
        seen[cur] = path.len();
        let (pred, net) = cells[cur]
            .inputs
            .iter()
            .flatten()
            .find_map(|&net| match drivers[net] {
                NetDriver::Cell(d, _) if stuck(d) => Some((d, net)),
                _ => None,
            })
            .expect("stuck cell has a stuck driver");
        path.push((cur, net));
        cur = pred;
    }
}

/// Instance names of `module` with every combinational instance after all
/// instances driving its inputs. Sequential instances come first.
pub fn topo_order(module: &ModuleDef, lib: &CellLibrary) -> Result<Vec<String>> {
    let c = Compiled::new(module, lib)?;
    let mut out: Vec<String> = c
        .cells
        .iter()
        .filter(|cell| !cell.spec.is_combinational())
        .map(|cell| cell.name.clone())
        .collect();
    out.extend(c.order.iter().map(|&i| c.cells[i].name.clone()));
    Ok(out)
}
