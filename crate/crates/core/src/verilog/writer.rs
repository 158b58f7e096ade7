use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::parser::is_simple_identifier;
use crate::netlist::{const_value, Direction, InstanceKind, ModuleDef, Netlist};

/// Serializes a netlist. Child modules precede their parents; instances are
/// sorted by name, so output is deterministic.
pub fn write(netlist: &Netlist) -> String {
    let mut out = String::new();
    let order = netlist.modules_bottom_up();
    for (i, name) in order.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_module(&mut out, netlist, &netlist.modules[*name]);
    }
    out
}

/// Identifier as it must appear in source text.
fn ident(name: &str) -> String {
    if is_simple_identifier(name) {
        name.to_string()
    } else {
        format!("\\{name} ")
    }
}

struct Names<'a> {
    /// Port bit name to its printed form (`a` or `w[3]`).
    port_refs: BTreeMap<String, String>,
    module: &'a ModuleDef,
}

impl Names<'_> {
    fn net(&self, net: &str) -> String {
        if let Some(v) = const_value(net) {
            return if v { "1'b1" } else { "1'b0" }.to_string();
        }
        if self.module.port_net(net) == Some(net) {
            if let Some(r) = self.port_refs.get(net) {
                return r.clone();
            }
        }
        ident(net)
    }

    fn is_port_net(&self, net: &str) -> bool {
        self.module.port_net(net) == Some(net)
    }
}

fn write_module(out: &mut String, netlist: &Netlist, m: &ModuleDef) {
    let mut port_refs = BTreeMap::new();
    for p in &m.ports {
        match p.range {
            None => {
                port_refs.insert(p.name.clone(), ident(&p.name));
            }
            Some(_) => {
                for b in p.bits() {
                    let idx = &b[p.name.len() + 1..b.len() - 1];
                    port_refs.insert(b.clone(), format!("{}[{idx}]", ident(&p.name)));
                }
            }
        }
    }
    let names = Names {
        port_refs,
        module: m,
    };

    let _ = write!(out, "module {}", ident(&m.name));
    if m.ports.is_empty() {
        out.push_str("();\n");
    } else {
        out.push_str(" (\n");
        for (i, p) in m.ports.iter().enumerate() {
            let dir = match p.direction {
                Direction::Input => "input",
                Direction::Output => "output",
            };
            let range = p
                .range
                .map(|(a, b)| format!(" [{a}:{b}]"))
                .unwrap_or_default();
            let sep = if i + 1 == m.ports.len() { "" } else { "," };
            let _ = writeln!(out, "  {dir}{range} {}{sep}", ident(&p.name));
        }
        out.push_str(");\n");
    }

    for net in &m.nets {
        if !names.is_port_net(net) {
            let _ = writeln!(out, "  wire {};", ident(net));
        }
    }

    for (bit, dir) in m.port_bits() {
        let net = m.port_net(&bit).unwrap_or(&bit);
        if net == bit {
            continue;
        }
        let bit_ref = names
            .port_refs
            .get(&bit)
            .cloned()
            .unwrap_or_else(|| ident(&bit));
        match dir {
            Direction::Output => {
                let _ = writeln!(out, "  assign {bit_ref} = {};", names.net(net));
            }
            Direction::Input => {
                let _ = writeln!(out, "  assign {} = {bit_ref};", names.net(net));
            }
        }
    }

    let mut insts: Vec<_> = m.instances.iter().collect();
    insts.sort_by(|a, b| a.name.cmp(&b.name));
    for inst in insts {
        if inst.init {
            out.push_str("  (* init = 1 *)\n");
        }
        let (type_name, conns) = match &inst.kind {
            InstanceKind::Cell(c) => {
                let conns: Vec<String> = inst
                    .connections
                    .iter()
                    .map(|(pin, net)| format!(".{}({})", ident(pin), names.net(net)))
                    .collect();
                (c.clone(), conns)
            }
            InstanceKind::Module(child) => {
                let mut conns = Vec::new();
                if let Some(def) = netlist.modules.get(child) {
                    for p in &def.ports {
                        let bits = p.bits();
                        let nets: Vec<Option<&String>> =
                            bits.iter().map(|b| inst.connections.get(b)).collect();
                        let arg = if nets.iter().all(Option::is_none) {
                            String::new()
                        } else if nets.len() == 1 {
                            names.net(nets[0].expect("connected"))
                        } else {
                            let parts: Vec<String> = nets
                                .iter()
                                .zip(&bits)
                                .map(|(n, b)| match n {
                                    Some(n) => names.net(n),
                                    None => ident(&format!("{}.{b}.nc", inst.name)),
                                })
                                .collect();
                            format!("{{{}}}", parts.join(", "))
                        };
                        conns.push(format!(".{}({arg})", ident(&p.name)));
                    }
                }
                (child.clone(), conns)
            }
        };
        let _ = writeln!(
            out,
            "  {} {} ({});",
            ident(&type_name),
            ident(&inst.name),
            conns.join(", ")
        );
    }
    out.push_str("endmodule\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::structural_hash;
    use crate::verilog::parse;

    #[test]
    fn init_attribute_round_trips() {
        let src = "module t(input clk, input d, output q);\n (* init = 1 *) DFF_X1 r(.CK(clk), .D(d), .Q(q));\nendmodule";
        let n = parse(src).unwrap();
        let text = write(&n);
        assert!(text.contains("(* init = 1 *)"));
        let back = parse(&text).unwrap();
        assert!(back.top_module().instances[0].init);
    }

    #[test]
    fn empty_module_reparses() {
        let n = parse("module e(input a, output y); endmodule").unwrap();
        let text = write(&n);
        let back = parse(&text).unwrap();
        assert_eq!(back.top_module().ports.len(), 2);
    }

    #[test]
    fn aliases_survive_round_trip() {
        let src = "module t(input a, output y, output z, output [1:0] k);\n wire n;\n INV_X1 g(.A(a), .Y(n));\n assign y = n;\n assign z = n;\n assign k = {a, 1'b0};\nendmodule";
        let n = parse(src).unwrap();
        let text = write(&n);
        let back = parse(&text).unwrap();
        assert_eq!(
            structural_hash(n.top_module()),
            structural_hash(back.top_module())
        );
        assert_eq!(write(&back), text);
    }

    #[test]
    fn escaped_names_round_trip() {
        let src = "module t(input a, output y); wire \\u0/n[3] ; INV_X1 \\u0/g (.A(a), .Y(\\u0/n[3] )); INV_X1 h(.A(\\u0/n[3] ), .Y(y)); endmodule";
        let n = parse(src).unwrap();
        let text = write(&n);
        let back = parse(&text).unwrap();
        assert_eq!(back.top_module().nets, n.top_module().nets);
        assert_eq!(write(&back), text);
    }
}
