//! Regenerates the bundled example designs in `data/`.
//!
//! `pipeline.gv`: six instances of a 16-bit accumulate stage behind a small
//! control module (hierarchical).
//! `correlator.gv`: four code-correlation channels, already flattened, with
//! instance names of the form `ch<k>/...`.
//!
//! Run with `cargo run --example gen_designs`.

use std::path::Path;

use netdiv::library::bundled_library;
use netdiv::netlist::{
    validate, Direction, Instance, InstanceKind, ModuleDef, Netlist, Port, Severity, CONST0, CONST1,
};
use netdiv::verilog;

struct Builder {
    m: ModuleDef,
    prefix: String,
}

impl Builder {
    fn new(name: &str) -> Self {
        Self {
            m: ModuleDef::new(name),
            prefix: String::new(),
        }
    }

    fn input(&mut self, name: &str, width: usize) {
        self.port(name, width, Direction::Input);
    }

    fn output(&mut self, name: &str, width: usize) {
        self.port(name, width, Direction::Output);
    }

    fn port(&mut self, name: &str, width: usize, dir: Direction) {
        let p = if width == 1 {
            Port::scalar(name, dir)
        } else {
            Port::vector(name, dir, width as i64 - 1, 0)
        };
        self.m.add_port(p);
    }

    /// Net name in the current scope.
    fn n(&self, local: &str) -> String {
        format!("{}{local}", self.prefix)
    }

    fn cell(&mut self, name: &str, cell: &str, pins: &[(&str, &str)]) {
        for (_, net) in pins {
            self.m.add_net(*net);
        }
        let name = self.n(name);
        self.m.instances.push(Instance::cell(name, cell, pins));
    }

    fn gate(&mut self, name: &str, cell: &str, ins: &[&str], out: &str) {
        let pins = ["A", "B", "C"];
        let mut v: Vec<(&str, &str)> = ins.iter().enumerate().map(|(i, n)| (pins[i], *n)).collect();
        v.push(("Y", out));
        self.cell(name, cell, &v);
    }

    fn mux(&mut self, name: &str, a: &str, b: &str, s: &str, y: &str) {
        self.cell(name, "MUX2_X1", &[("A", a), ("B", b), ("S", s), ("Y", y)]);
    }

    fn ff(&mut self, name: &str, cell: &str, d: &str, q: &str, init: bool) {
        self.cell(name, cell, &[("CK", "clk"), ("D", d), ("Q", q)]);
        self.m.instances.last_mut().unwrap().init = init;
    }

    /// Hold register `q = en ? d : q` in one of three encodings.
    fn hold_reg(&mut self, name: &str, style: usize, en: &str, d: &str, q: &str, init: bool) {
        let dn = self.n(&format!("{name}_d"));
        match style {
            0 => self.mux(&format!("{name}_m"), q, d, en, &dn),
            1 => {
                let ne = self.n(&format!("{name}_ne"));
                let a = self.n(&format!("{name}_a"));
                let b = self.n(&format!("{name}_b"));
                self.gate(&format!("{name}_i"), "INV_X1", &[en], &ne);
                self.gate(&format!("{name}_na"), "NAND2_X1", &[en, d], &a);
                self.gate(&format!("{name}_nb"), "NAND2_X1", &[&ne, q], &b);
                self.gate(&format!("{name}_nc"), "NAND2_X1", &[&a, &b], &dn);
            }
            _ => {
                let ne = self.n(&format!("{name}_ne"));
                let h = self.n(&format!("{name}_h"));
                let y = self.n(&format!("{name}_y"));
                self.gate(&format!("{name}_i"), "INV_X1", &[en], &ne);
                self.gate(&format!("{name}_g"), "AND2_X1", &[&ne, q], &h);
                self.gate(&format!("{name}_o"), "AOI21_X1", &[en, d, &h], &y);
                self.gate(&format!("{name}_v"), "INV_X1", &[&y], &dn);
            }
        }
        self.ff(name, "DFF_X1", &dn, q, init);
    }

    /// Ripple-carry adder `s = a + b` over equal-width operands, no carry in.
    fn adder(&mut self, name: &str, a: &[String], b: &[String], s: &[String]) {
        let mut carry: Option<String> = None;
        for i in 0..a.len() {
            let (ai, bi) = (a[i].as_str(), b[i].as_str());
            let last = i + 1 == a.len();
            match carry.take() {
                None => {
                    self.gate(&format!("{name}_x{i}"), "XOR2_X1", &[ai, bi], &s[i]);
                    if !last {
                        let c = self.n(&format!("{name}_c{}", i + 1));
                        self.gate(&format!("{name}_g{i}"), "AND2_X1", &[ai, bi], &c);
                        carry = Some(c);
                    }
                }
                Some(c) => {
                    let p = self.n(&format!("{name}_p{i}"));
                    self.gate(&format!("{name}_x{i}"), "XOR2_X1", &[ai, bi], &p);
                    self.gate(&format!("{name}_s{i}"), "XOR2_X1", &[&p, &c], &s[i]);
                    if !last {
                        let co = self.n(&format!("{name}_c{}", i + 1));
                        if i % 2 == 0 {
                            let g = self.n(&format!("{name}_gg{i}"));
                            let t = self.n(&format!("{name}_t{i}"));
                            self.gate(&format!("{name}_g{i}"), "AND2_X1", &[ai, bi], &g);
                            self.gate(&format!("{name}_t{i}"), "AND2_X1", &[&p, &c], &t);
                            self.gate(&format!("{name}_o{i}"), "OR2_X1", &[&g, &t], &co);
                        } else {
                            let g = self.n(&format!("{name}_gn{i}"));
                            let t = self.n(&format!("{name}_tn{i}"));
                            self.gate(&format!("{name}_g{i}"), "NAND2_X1", &[ai, bi], &g);
                            self.gate(&format!("{name}_t{i}"), "NAND2_X1", &[&p, &c], &t);
                            self.gate(&format!("{name}_o{i}"), "NAND2_X1", &[&g, &t], &co);
                        }
                        carry = Some(co);
                    }
                }
            }
        }
    }

    /// Linear chain of two-input gates over `ins`.
    fn chain(&mut self, name: &str, cell: &str, ins: &[String], out: &str) {
        let mut prev = ins[0].clone();
        for (i, x) in ins.iter().enumerate().skip(1) {
            let o = if i + 1 == ins.len() {
                out.to_string()
            } else {
                self.n(&format!("{name}_{i}"))
            };
            self.gate(&format!("{name}{i}"), cell, &[&prev, x], &o);
            prev = o;
        }
    }
}

fn bus(name: &str, w: usize) -> Vec<String> {
    (0..w).map(|i| format!("{name}[{i}]")).collect()
}

const W: usize = 16;
const STAGES: usize = 6;

fn stage() -> ModuleDef {
    let mut b = Builder::new("stage");
    b.input("clk", 1);
    b.input("en", 1);
    b.input("en2", 1);
    b.input("din", W);
    b.input("k", W);
    b.output("dout", W);
    b.output("par", 1);
    let din = bus("din", W);
    let k = bus("k", W);
    let rin = bus("rin_q", W);
    let rd = bus("rd_q", W);
    let rk = bus("rk_q", W);
    let x = bus("x", W);
    let acc = bus("acc_q", W);
    let sum = bus("sum", W);
    let ro = bus("ro_q", W);
    for i in 0..W {
        b.hold_reg(&format!("rin{i}"), 0, "en", &din[i], &rin[i], false);
        b.ff(&format!("rd{i}"), "DFF_X1", &rin[i], &rd[i], false);
        if i % 2 == 0 {
            let kn = format!("kn[{i}]");
            b.gate(&format!("kinv{i}"), "INV_X1", &[&k[i]], &kn);
            b.ff(&format!("rk{i}"), "DFF_X1", &kn, &rk[i], true);
        } else {
            b.ff(&format!("rk{i}"), "DFF_X1", &k[i], &rk[i], false);
        }
        b.gate(&format!("mix{i}"), "XOR2_X1", &[&rd[i], &rk[i]], &x[i]);
    }
    b.adder("add", &acc, &x, &sum);
    for i in 0..W {
        let style = if i < 6 {
            0
        } else if i < 11 {
            1
        } else {
            2
        };
        b.hold_reg(&format!("acc{i}"), style, "en2", &sum[i], &acc[i], false);
        b.ff(&format!("ro{i}"), "DFF_X1", &acc[i], &ro[i], false);
        b.gate(
            &format!("oinv{i}"),
            "INV_X1",
            &[&ro[i]],
            &format!("dout[{i}]"),
        );
    }
    b.chain("parx", "XOR2_X1", &acc, "par_d");
    b.ff("pr", "DFF_X1", "par_d", "par", false);
    b.m
}

fn ctrl() -> ModuleDef {
    let mut b = Builder::new("ctrl");
    b.input("clk", 1);
    b.input("start", 1);
    b.output("en", STAGES);
    b.output("en2", STAGES);
    b.output("busy", 1);
    let en = bus("en", STAGES);
    let en2 = bus("en2", STAGES);
    for i in 0..STAGES {
        let d = if i == 0 {
            "start".to_string()
        } else {
            en[i - 1].clone()
        };
        b.ff(&format!("sh{i}"), "DFF_X2", &d, &en[i], false);
        b.ff(&format!("sd{i}"), "DFF_X1", &en[i], &en2[i], false);
    }
    b.chain("any", "OR2_X1", &en2, "busy_d");
    b.ff("busy_r", "DFF_X1", "busy_d", "busy", false);
    b.m
}

fn connect(inst: &mut Instance, child: &ModuleDef, port: &str, nets: &[String]) {
    let p = child
        .ports
        .iter()
        .find(|p| p.name == port)
        .expect("port exists");
    // bits() is msb first; nets are given lsb first.
    for (bit, net) in p.bits().into_iter().zip(nets.iter().rev()) {
        inst.connections.insert(bit, net.clone());
    }
}

fn pipeline() -> Netlist {
    let st = stage();
    let ct = ctrl();
    let mut b = Builder::new("pipeline");
    b.input("clk", 1);
    b.input("start", 1);
    b.input("din", W);
    b.input("k", W);
    b.output("dout", W);
    b.output("par", STAGES);
    b.output("busy", 1);
    b.gate("start_buf", "BUF_X1", &["start"], "start_b");
    let en = bus("en", STAGES);
    let en2 = bus("en2", STAGES);
    let mut c = Instance {
        name: "u_ctrl".into(),
        kind: InstanceKind::Module("ctrl".into()),
        connections: Default::default(),
        init: false,
    };
    connect(&mut c, &ct, "clk", &["clk".into()]);
    connect(&mut c, &ct, "start", &["start_b".into()]);
    connect(&mut c, &ct, "en", &en);
    connect(&mut c, &ct, "en2", &en2);
    connect(&mut c, &ct, "busy", &["busy".into()]);
    b.m.instances.push(c);
    let mut prev = bus("din", W);
    for s in 0..STAGES {
        let out = if s + 1 == STAGES {
            bus("dout", W)
        } else {
            bus(&format!("d{s}"), W)
        };
        let mut i = Instance {
            name: format!("u_stage{s}"),
            kind: InstanceKind::Module("stage".into()),
            connections: Default::default(),
            init: false,
        };
        connect(&mut i, &st, "clk", &["clk".into()]);
        connect(&mut i, &st, "en", &[en[s].clone()]);
        connect(&mut i, &st, "en2", &[en2[s].clone()]);
        connect(&mut i, &st, "din", &prev);
        connect(&mut i, &st, "k", &bus("k", W));
        connect(&mut i, &st, "dout", &out);
        connect(&mut i, &st, "par", &[format!("par[{s}]")]);
        for n in i.connections.values() {
            b.m.add_net(n.clone());
        }
        b.m.instances.push(i);
        prev = out;
    }
    for n in en.iter().chain(&en2) {
        b.m.add_net(n.clone());
    }
    let mut n = Netlist::from_module(b.m);
    n.name = "pipeline".into();
    n.modules.insert("stage".into(), st);
    n.modules.insert("ctrl".into(), ct);
    n
}

const CHANNELS: usize = 4;
const LFSR: usize = 10;
const ACC: usize = 8;
const CNT: usize = 6;

fn channel(b: &mut Builder, ch: usize) {
    b.prefix = format!("ch{ch}/");
    let p = |s: &str| format!("ch{ch}/{s}");
    let lf: Vec<String> = (0..LFSR).map(|i| p(&format!("lf_q[{i}]"))).collect();
    // Code generator: a shift register with XOR feedback, advanced on `en`.
    let taps = [(9, 6), (9, 2), (9, 5), (9, 3)][ch % 4];
    let fb = p("fb");
    b.gate("fbx", "XOR2_X1", &[&lf[taps.0], &lf[taps.1]], &fb);
    for i in 0..LFSR {
        let d = if i == 0 {
            fb.clone()
        } else {
            lf[i - 1].clone()
        };
        let init = (ch + i).is_multiple_of(3);
        b.hold_reg(&format!("lf{i}"), 0, "en", &d, &lf[i], init);
    }
    // Input samples and per-bit copies of the code chip.
    let prod: Vec<String> = (0..4).map(|i| p(&format!("prod[{i}]"))).collect();
    for (i, pr) in prod.iter().enumerate() {
        let sr = p(&format!("sr_q[{i}]"));
        let cd = p(&format!("cd_q[{i}]"));
        b.ff(
            &format!("sr{i}"),
            "DFF_X1",
            &format!("sample[{i}]"),
            &sr,
            false,
        );
        b.ff(&format!("cd{i}"), "DFF_X1", &lf[LFSR - 1], &cd, false);
        b.gate(&format!("px{i}"), "XOR2_X1", &[&sr, &cd], pr);
    }
    // Early/late strobe.
    let ea = p("ea_q");
    let eb = p("eb_q");
    b.ff("ea", "DFF_X1", "sample[0]", &ea, false);
    b.ff("eb", "DFF_X1", &lf[LFSR - 2], &eb, false);
    b.gate("el", "AND2_X1", &[&ea, &eb], &p("el_d"));
    b.ff("elr", "DFF_X1", &p("el_d"), &format!("strobe[{ch}]"), false);
    // Accumulator of the 4-bit product, zero-extended.
    let acc: Vec<String> = (0..ACC).map(|i| p(&format!("acc_q[{i}]"))).collect();
    let sum: Vec<String> = (0..ACC).map(|i| p(&format!("sum[{i}]"))).collect();
    let ext: Vec<String> = (0..ACC)
        .map(|i| {
            if i < 4 {
                prod[i].clone()
            } else {
                CONST0.into()
            }
        })
        .collect();
    b.adder("add", &acc, &ext, &sum);
    for i in 0..ACC {
        b.hold_reg(
            &format!("acc{i}"),
            [0, 1, 2][i % 3],
            "en",
            &sum[i],
            &acc[i],
            false,
        );
    }
    // Epoch counter with terminal count.
    let cnt: Vec<String> = (0..CNT).map(|i| p(&format!("cnt_q[{i}]"))).collect();
    let one: Vec<String> = (0..CNT)
        .map(|i| if i == 0 { CONST1 } else { CONST0 }.to_string())
        .collect();
    let inc: Vec<String> = (0..CNT).map(|i| p(&format!("inc[{i}]"))).collect();
    b.adder("cadd", &cnt, &one, &inc);
    for i in 0..CNT {
        b.hold_reg(&format!("cnt{i}"), 0, "en", &inc[i], &cnt[i], false);
    }
    let tc = p("tc");
    b.chain("tca", "AND2_X1", &cnt, &tc);
    // Dump register loaded at the end of each epoch.
    let dump: Vec<String> = (0..ACC).map(|i| p(&format!("dump_q[{i}]"))).collect();
    for i in 0..ACC {
        b.hold_reg(&format!("dump{i}"), 0, &tc, &acc[i], &dump[i], false);
        let o = format!("corr[{}]", ch * ACC + i);
        if i % 2 == 0 {
            b.gate(&format!("oinv{i}"), "INV_X1", &[&dump[i]], &o);
        } else {
            b.gate(&format!("obuf{i}"), "BUF_X1", &[&dump[i]], &o);
        }
    }
    b.chain("parx", "XOR2_X1", &dump, &p("par_d"));
    b.ff("pr", "DFF_X1", &p("par_d"), &format!("par[{ch}]"), false);
    b.prefix.clear();
}

fn correlator() -> Netlist {
    let mut b = Builder::new("correlator");
    b.input("clk", 1);
    b.input("en", 1);
    b.input("sample", 4);
    b.output("corr", CHANNELS * ACC);
    b.output("par", CHANNELS);
    b.output("strobe", CHANNELS);
    for ch in 0..CHANNELS {
        channel(&mut b, ch);
    }
    Netlist::from_module(b.m)
}

fn main() {
    let lib = bundled_library();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for (file, n) in [("pipeline.gv", pipeline()), ("correlator.gv", correlator())] {
        let text = verilog::write(&n);
        let back = verilog::parse(&text).expect("generated text parses");
        let errors: Vec<_> = validate(&back, &lib)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        assert!(errors.is_empty(), "{file}: {errors:?}");
        let flat = netdiv::netlist::flatten(&back).expect("flattens");
        let m = flat.top_module();
        println!(
            "{file}: {} modules, {} cells, {} flip-flops",
            back.modules.len(),
            m.instances.len(),
            m.flip_flops(&lib).count()
        );
        std::fs::write(dir.join(file), text).expect("write design");
    }
}
