use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::lexer::{tokenize, Tok, Token};
use crate::error::{ParseError, ParseErrorKind, SourceSpan};
use crate::library::CellLibrary;
use crate::netlist::{
    const_value, range_indices, Direction, Instance, InstanceKind, ModuleDef, NameUnion, Netlist,
    Port, CONST0, CONST1,
};

/// Parses a structural netlist. Instantiated names that are not modules of the
/// file are taken to be library cells.
pub fn parse(text: &str) -> Result<Netlist, ParseError> {
    parse_inner(text, None, None)
}

/// Like [`parse`], but rejects instances of cells missing from `lib`.
pub fn parse_with_library(text: &str, lib: &CellLibrary) -> Result<Netlist, ParseError> {
    parse_inner(text, Some(lib), None)
}

/// Reads and parses a file; spans in errors carry the path.
pub fn parse_file(path: &Path, lib: Option<&CellLibrary>) -> crate::Result<Netlist> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_inner(&text, lib, Some(path))?)
}

fn parse_inner(
    text: &str,
    lib: Option<&CellLibrary>,
    path: Option<&Path>,
) -> Result<Netlist, ParseError> {
    let with_file = |mut e: ParseError| {
        e.span.file = path.map(Path::to_path_buf);
        e
    };
    let toks = tokenize(text).map_err(with_file)?;
    let mut p = Parser { toks, pos: 0 };
    let mut raws = Vec::new();
    while p.peek() != &Tok::Eof {
        raws.push(p.module().map_err(with_file)?);
    }
    build(raws, lib).map_err(with_file)
}

type Range = Option<(i64, i64)>;

#[derive(Debug, Clone)]
enum VExpr {
    Ident(String),
    Bit(String, i64, SourceSpan),
    Part(String, i64, i64, SourceSpan),
    Const(Vec<bool>),
    Concat(Vec<VExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeclKind {
    Input,
    Output,
    Wire,
}

#[derive(Debug)]
struct RawInst {
    type_name: String,
    name: String,
    span: SourceSpan,
    init: bool,
    conns: Vec<(String, Option<VExpr>, SourceSpan)>,
}

#[derive(Debug)]
struct RawModule {
    name: String,
    span: SourceSpan,
    header: Vec<(String, SourceSpan)>,
    decls: Vec<(String, DeclKind, Range, SourceSpan)>,
    assigns: Vec<(VExpr, VExpr, SourceSpan)>,
    insts: Vec<RawInst>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn syntax(span: SourceSpan, message: impl Into<String>, expected: &[&str]) -> ParseError {
    ParseError {
        span,
        kind: ParseErrorKind::Syntax {
            expected: expected.iter().map(|s| s.to_string()).collect(),
        },
        message: message.into(),
    }
}

fn semantic(span: SourceSpan, message: impl Into<String>) -> ParseError {
    ParseError {
        span,
        kind: ParseErrorKind::Semantic,
        message: message.into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        syntax(
            self.span(),
            format!("unexpected {}", self.peek().describe()),
            expected,
        )
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == &Tok::Punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("'{c}'")]))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, SourceSpan), ParseError> {
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                let span = self.span();
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn number(&mut self) -> Result<i64, ParseError> {
        match self.peek() {
            Tok::Number(n) => {
                let n = *n as i64;
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn attributes(&mut self) -> Result<BTreeMap<String, i64>, ParseError> {
        let mut attrs = BTreeMap::new();
        while self.peek() == &Tok::AttrOpen {
            self.bump();
            loop {
                let (name, _) = self.ident()?;
                let value = if self.eat_punct('=') {
                    match self.peek().clone() {
                        Tok::Number(n) => {
                            self.bump();
                            n as i64
                        }
                        Tok::Based(bits) => {
                            self.bump();
                            bits.iter().fold(0i64, |acc, &b| (acc << 1) | i64::from(b))
                        }
                        _ => return Err(self.unexpected(&["attribute value"])),
                    }
                } else {
                    1
                };
                attrs.insert(name, value);
                if !self.eat_punct(',') {
                    break;
                }
            }
            if self.peek() != &Tok::AttrClose {
                return Err(self.unexpected(&["'*)'"]));
            }
            self.bump();
        }
        Ok(attrs)
    }

    fn range(&mut self) -> Result<Range, ParseError> {
        if !self.eat_punct('[') {
            return Ok(None);
        }
        let msb = self.number()?;
        self.expect_punct(':')?;
        let lsb = self.number()?;
        self.expect_punct(']')?;
        Ok(Some((msb, lsb)))
    }

    fn direction(&mut self) -> Option<DeclKind> {
        if self.eat_keyword("input") {
            Some(DeclKind::Input)
        } else if self.eat_keyword("output") {
            Some(DeclKind::Output)
        } else {
            None
        }
    }

    fn module(&mut self) -> Result<RawModule, ParseError> {
        self.attributes()?;
        if !self.eat_keyword("module") {
            return Err(self.unexpected(&["'module'"]));
        }
        let (name, span) = self.ident()?;
        let mut m = RawModule {
            name,
            span,
            header: Vec::new(),
            decls: Vec::new(),
            assigns: Vec::new(),
            insts: Vec::new(),
        };
        if self.eat_punct('(') && !self.eat_punct(')') {
            let mut current: Option<(DeclKind, Range)> = None;
            loop {
                if self.is_keyword("inout") {
                    return Err(semantic(self.span(), "inout ports are not supported"));
                }
                if let Some(dir) = self.direction() {
                    self.eat_keyword("wire");
                    current = Some((dir, self.range()?));
                }
                let (pname, pspan) = self.ident()?;
                if let Some((dir, range)) = current {
                    m.decls.push((pname.clone(), dir, range, pspan.clone()));
                }
                m.header.push((pname, pspan));
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        self.expect_punct(';')?;
        loop {
            if self.eat_keyword("endmodule") {
                return Ok(m);
            }
            if self.peek() == &Tok::Eof {
                return Err(self.unexpected(&["'endmodule'"]));
            }
            self.item(&mut m)?;
        }
    }

    fn item(&mut self, m: &mut RawModule) -> Result<(), ParseError> {
        if self.is_keyword("inout") {
            return Err(semantic(self.span(), "inout ports are not supported"));
        }
        if let Some(dir) = self.direction() {
            self.eat_keyword("wire");
            let range = self.range()?;
            loop {
                let (n, span) = self.ident()?;
                m.decls.push((n, dir, range, span));
                if !self.eat_punct(',') {
                    break;
                }
            }
            return self.expect_punct(';');
        }
        if self.eat_keyword("wire") {
            let range = self.range()?;
            loop {
                let (n, span) = self.ident()?;
                m.decls.push((n, DeclKind::Wire, range, span));
                if !self.eat_punct(',') {
                    break;
                }
            }
            return self.expect_punct(';');
        }
        if self.is_keyword("assign") {
            self.bump();
            loop {
                let span = self.span();
                let lhs = self.expr()?;
                self.expect_punct('=')?;
                let rhs = self.expr()?;
                m.assigns.push((lhs, rhs, span));
                if !self.eat_punct(',') {
                    break;
                }
            }
            return self.expect_punct(';');
        }
        let attrs = self.attributes()?;
        let span = self.span();
        let (type_name, _) = match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => self.ident()?,
            _ => {
                return Err(self.unexpected(&[
                    "'input'",
                    "'output'",
                    "'wire'",
                    "'assign'",
                    "instance",
                    "'endmodule'",
                ]))
            }
        };
        if self.eat_punct('#') {
            return Err(semantic(
                self.span(),
                "parameterized instances are not supported",
            ));
        }
        let (name, _) = self.ident()?;
        self.expect_punct('(')?;
        let mut conns = Vec::new();
        if !self.eat_punct(')') {
            loop {
                let cspan = self.span();
                if !self.eat_punct('.') {
                    return Err(syntax(
                        cspan,
                        "positional connections are not supported",
                        &["'.'"],
                    ));
                }
                let (pin, _) = self.ident()?;
                self.expect_punct('(')?;
                let e = if self.peek() == &Tok::Punct(')') {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(')')?;
                conns.push((pin, e, cspan));
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        self.expect_punct(';')?;
        let init = match attrs.get("init") {
            None | Some(0) => false,
            Some(1) => true,
            Some(v) => {
                return Err(semantic(
                    span,
                    format!("init attribute must be 0 or 1, got {v}"),
                ))
            }
        };
        m.insts.push(RawInst {
            type_name,
            name,
            span,
            init,
            conns,
        });
        Ok(())
    }

    fn expr(&mut self) -> Result<VExpr, ParseError> {
        match self.peek().clone() {
            Tok::Punct('{') => {
                self.bump();
                let mut parts = vec![self.expr()?];
                while self.eat_punct(',') {
                    parts.push(self.expr()?);
                }
                self.expect_punct('}')?;
                Ok(VExpr::Concat(parts))
            }
            Tok::Based(bits) => {
                self.bump();
                Ok(VExpr::Const(bits))
            }
            Tok::Number(n) => {
                self.bump();
                Ok(VExpr::Const(
                    (0..32).rev().map(|i| (n >> i) & 1 == 1).collect(),
                ))
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident()?;
                if !self.eat_punct('[') {
                    return Ok(VExpr::Ident(name));
                }
                let a = self.number()?;
                if self.eat_punct(':') {
                    let b = self.number()?;
                    self.expect_punct(']')?;
                    Ok(VExpr::Part(name, a, b, span))
                } else {
                    self.expect_punct(']')?;
                    Ok(VExpr::Bit(name, a, span))
                }
            }
            _ => Err(self.unexpected(&["identifier", "constant", "'{'"])),
        }
    }
}

const RESERVED: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "inout",
    "wire",
    "assign",
];

fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s)
}

pub(crate) fn is_simple_identifier(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty()
        && (b[0].is_ascii_alphabetic() || b[0] == b'_')
        && b.iter()
            .all(|&c| c.is_ascii_alphanumeric() || c == b'_' || c == b'$')
        && !is_reserved(s)
}

struct Scope {
    decls: HashMap<String, (DeclKind, Range)>,
    implicit: BTreeSet<String>,
}

impl Scope {
    fn bits(&mut self, e: &VExpr) -> Result<Vec<String>, ParseError> {
        match e {
            VExpr::Const(bits) => Ok(bits
                .iter()
                .map(|&b| if b { CONST1 } else { CONST0 }.to_string())
                .collect()),
            VExpr::Concat(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(self.bits(p)?);
                }
                Ok(out)
            }
            VExpr::Ident(n) => match self.decls.get(n) {
                Some((_, Some((m, l)))) => {
                    Ok(range_indices(*m, *l).map(|i| format!("{n}[{i}]")).collect())
                }
                Some((_, None)) => Ok(vec![n.clone()]),
                None => {
                    self.implicit.insert(n.clone());
                    Ok(vec![n.clone()])
                }
            },
            VExpr::Bit(n, i, span) => {
                let (m, l) = self.vector(n, span)?;
                if !in_range(*i, m, l) {
                    return Err(semantic(
                        span.clone(),
                        format!("index {i} out of range for {n}[{m}:{l}]"),
                    ));
                }
                Ok(vec![format!("{n}[{i}]")])
            }
            VExpr::Part(n, a, b, span) => {
                let (m, l) = self.vector(n, span)?;
                if !in_range(*a, m, l) || !in_range(*b, m, l) {
                    return Err(semantic(
                        span.clone(),
                        format!("range [{a}:{b}] out of range for {n}[{m}:{l}]"),
                    ));
                }
                Ok(range_indices(*a, *b).map(|i| format!("{n}[{i}]")).collect())
            }
        }
    }

    fn vector(&self, n: &str, span: &SourceSpan) -> Result<(i64, i64), ParseError> {
        match self.decls.get(n) {
            Some((_, Some(r))) => Ok(*r),
            Some((_, None)) => Err(semantic(span.clone(), format!("bit-select of scalar {n}"))),
            None => Err(semantic(
                span.clone(),
                format!("bit-select of undeclared {n}"),
            )),
        }
    }
}

fn in_range(i: i64, m: i64, l: i64) -> bool {
    i >= m.min(l) && i <= m.max(l)
}

fn build(raws: Vec<RawModule>, lib: Option<&CellLibrary>) -> Result<Netlist, ParseError> {
    let Some(last) = raws.last() else {
        return Err(syntax(
            SourceSpan::new(1, 1),
            "no module found",
            &["'module'"],
        ));
    };
    let last_name = last.name.clone();
    let mut seen = BTreeSet::new();
    for r in &raws {
        if !seen.insert(r.name.clone()) {
            return Err(semantic(
                r.span.clone(),
                format!("module {} defined twice", r.name),
            ));
        }
    }
    // Port lists first, so instances may refer to modules defined later.
    let mut interfaces: BTreeMap<String, Vec<Port>> = BTreeMap::new();
    for r in &raws {
        interfaces.insert(r.name.clone(), ports_of(r)?);
    }
    let mut modules = BTreeMap::new();
    let mut instantiated = BTreeSet::new();
    for r in raws {
        let m = build_module(r, &interfaces, lib, &mut instantiated)?;
        modules.insert(m.name.clone(), m);
    }
    let roots: Vec<&String> = modules
        .keys()
        .filter(|m| !instantiated.contains(*m))
        .collect();
    let top = if roots.contains(&&last_name) || roots.is_empty() {
        last_name
    } else {
        roots.last().map(|s| s.to_string()).expect("non-empty")
    };
    Ok(Netlist {
        name: top.clone(),
        modules,
        top,
    })
}

fn ports_of(r: &RawModule) -> Result<Vec<Port>, ParseError> {
    let mut ports = Vec::new();
    for (name, span) in &r.header {
        let decl = r
            .decls
            .iter()
            .find(|(n, k, _, _)| n == name && *k != DeclKind::Wire)
            .ok_or_else(|| semantic(span.clone(), format!("port {name} has no direction")))?;
        let direction = if decl.1 == DeclKind::Input {
            Direction::Input
        } else {
            Direction::Output
        };
        ports.push(Port {
            name: name.clone(),
            direction,
            range: decl.2,
        });
    }
    for (n, k, _, span) in &r.decls {
        if *k != DeclKind::Wire && !r.header.iter().any(|(h, _)| h == n) {
            return Err(semantic(
                span.clone(),
                format!("{n} is declared as a port but not listed in the header"),
            ));
        }
    }
    Ok(ports)
}

fn build_module(
    r: RawModule,
    interfaces: &BTreeMap<String, Vec<Port>>,
    lib: Option<&CellLibrary>,
    instantiated: &mut BTreeSet<String>,
) -> Result<ModuleDef, ParseError> {
    let ports = interfaces[&r.name].clone();
    let mut scope = Scope {
        decls: HashMap::new(),
        implicit: BTreeSet::new(),
    };
    for (n, k, range, span) in &r.decls {
        if let Some((pk, pr)) = scope.decls.get(n) {
            // `output y; wire y;` is legal; conflicting ranges are not.
            if *pr != *range || (*pk != DeclKind::Wire && *k != DeclKind::Wire && pk != k) {
                return Err(semantic(
                    span.clone(),
                    format!("conflicting declarations of {n}"),
                ));
            }
            continue;
        }
        if const_value(n).is_some() {
            return Err(semantic(
                span.clone(),
                format!("{n} is a reserved net name"),
            ));
        }
        scope.decls.insert(n.clone(), (*k, *range));
    }

    let mut uf = NameUnion::default();
    for (lhs, rhs, span) in &r.assigns {
        let l = scope.bits(lhs)?;
        let rr = scope.bits(rhs)?;
        if l.len() != rr.len() {
            return Err(semantic(
                span.clone(),
                format!("width mismatch in assign: {} vs {}", l.len(), rr.len()),
            ));
        }
        for (a, b) in l.iter().zip(&rr) {
            if const_value(a).is_some() {
                return Err(semantic(span.clone(), "constant on the left of assign"));
            }
            uf.union(a, b);
        }
    }

    let mut instances = Vec::new();
    let mut names = BTreeSet::new();
    for inst in &r.insts {
        if !names.insert(inst.name.clone()) {
            return Err(semantic(
                inst.span.clone(),
                format!("duplicate instance name {}", inst.name),
            ));
        }
        let mut connections = BTreeMap::new();
        let kind = if let Some(child_ports) = interfaces.get(&inst.type_name) {
            instantiated.insert(inst.type_name.clone());
            for (pin, e, span) in &inst.conns {
                let port = child_ports.iter().find(|p| p.name == *pin).ok_or_else(|| {
                    semantic(
                        span.clone(),
                        format!("module {} has no port {pin}", inst.type_name),
                    )
                })?;
                let Some(e) = e else { continue };
                let bits = scope.bits(e)?;
                if bits.len() != port.width() {
                    return Err(semantic(
                        span.clone(),
                        format!(
                            "width mismatch on {}.{pin}: port has {} bits, got {}",
                            inst.name,
                            port.width(),
                            bits.len()
                        ),
                    ));
                }
                for (pb, net) in port.bits().into_iter().zip(bits) {
                    connections.insert(pb, net);
                }
            }
            InstanceKind::Module(inst.type_name.clone())
        } else {
            if let Some(lib) = lib {
                if lib.get(&inst.type_name).is_none() {
                    return Err(semantic(
                        inst.span.clone(),
                        format!("unknown cell {}", inst.type_name),
                    ));
                }
            }
            for (pin, e, span) in &inst.conns {
                let Some(e) = e else { continue };
                let bits = scope.bits(e)?;
                if bits.len() != 1 {
                    return Err(semantic(
                        span.clone(),
                        format!(
                            "width mismatch on {}.{pin}: cell pins are 1 bit, got {}",
                            inst.name,
                            bits.len()
                        ),
                    ));
                }
                if connections.insert(pin.clone(), bits[0].clone()).is_some() {
                    return Err(semantic(span.clone(), format!("pin {pin} connected twice")));
                }
            }
            InstanceKind::Cell(inst.type_name.clone())
        };
        instances.push(Instance {
            name: inst.name.clone(),
            kind,
            connections,
            init: inst.init,
        });
    }

    // All declared bits become nets, then aliases collapse onto one name.
    let mut all_nets: BTreeSet<String> = BTreeSet::new();
    for (n, (_, range)) in &scope.decls {
        match range {
            None => {
                all_nets.insert(n.clone());
            }
            Some((m, l)) => all_nets.extend(range_indices(*m, *l).map(|i| format!("{n}[{i}]"))),
        }
    }
    all_nets.extend(scope.implicit.iter().cloned());
    let mut rank: HashMap<String, (u8, usize)> = HashMap::new();
    let mut pos = 0;
    for p in &ports {
        for b in p.bits() {
            let class = if p.direction == Direction::Input {
                1
            } else {
                2
            };
            rank.insert(b, (class, pos));
            pos += 1;
        }
    }
    for n in &all_nets {
        uf.id(n);
    }
    let reps = uf.representatives(|n| {
        let (class, pos) = if const_value(n).is_some() {
            (0, 0)
        } else {
            rank.get(n).copied().unwrap_or((3, 0))
        };
        (class, pos, n.to_string())
    });
    let rep = |n: &str| reps.get(n).cloned().unwrap_or_else(|| n.to_string());

    let mut m = ModuleDef::new(r.name.clone());
    for p in &ports {
        for b in p.bits() {
            let net = rep(&b);
            m.add_net(net.clone());
            m.port_nets.insert(b, net);
        }
    }
    m.ports = ports;
    for n in &all_nets {
        m.add_net(rep(n));
    }
    for mut inst in instances {
        for net in inst.connections.values_mut() {
            *net = rep(net);
        }
        m.instances.push(inst);
    }
    Ok(m)
}
