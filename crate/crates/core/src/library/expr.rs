//! Boolean cell functions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr   := or ('?' expr ':' expr)?
//! or     := xor ('|' xor)*
//! xor    := and ('^' and)*
//! and    := unary ('&' unary)*
//! unary  := '!' unary | '(' expr ')' | PIN | '0' | '1'
//! ```
//!
//! `S ? B : A` is a two-input multiplexer selecting `B` when `S` is 1.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(bool),
    Var(usize),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Mux {
        sel: Box<Expr>,
        when1: Box<Expr>,
        when0: Box<Expr>,
    },
}

impl Expr {
    /// Evaluates the expression on 64 lanes at once.
    pub fn eval(&self, vars: &[u64]) -> u64 {
        match self {
            Expr::Const(false) => 0,
            Expr::Const(true) => !0,
            Expr::Var(i) => vars[*i],
            Expr::Not(e) => !e.eval(vars),
            Expr::And(a, b) => a.eval(vars) & b.eval(vars),
            Expr::Or(a, b) => a.eval(vars) | b.eval(vars),
            Expr::Xor(a, b) => a.eval(vars) ^ b.eval(vars),
            Expr::Mux { sel, when1, when0 } => {
                let s = sel.eval(vars);
                (s & when1.eval(vars)) | (!s & when0.eval(vars))
            }
        }
    }

    pub fn eval_bool(&self, vars: &[bool]) -> bool {
        let words: Vec<u64> = vars.iter().map(|&b| if b { 1 } else { 0 }).collect();
        self.eval(&words) & 1 == 1
    }

    /// Truth table over `arity` variables; bit `i` holds the value for the
    /// assignment where variable `j` equals `(i >> j) & 1`.
    pub fn truth_table(&self, arity: usize) -> u64 {
        assert!(arity <= 6, "truth tables are limited to 6 variables");
        let vars: Vec<u64> = (0..arity).map(|j| VAR_PATTERNS[j]).collect();
        let rows = 1u32 << arity;
        let mask = if rows == 64 { !0 } else { (1u64 << rows) - 1 };
        self.eval(&vars) & mask
    }

    pub fn vars(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                if !out.contains(i) {
                    out.push(*i)
                }
            }
            Expr::Not(e) => e.vars(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Expr::Mux { sel, when1, when0 } => {
                sel.vars(out);
                when1.vars(out);
                when0.vars(out);
            }
        }
    }
}

/// Standard bit patterns for enumerating all assignments of 6 variables.
pub const VAR_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError(pub String);

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Const(bool),
    Not,
    And,
    Or,
    Xor,
    Question,
    Colon,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<Tok>, ExprError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '!' | '~' => {
                chars.next();
                out.push(Tok::Not)
            }
            '&' | '*' => {
                chars.next();
                out.push(Tok::And)
            }
            '|' | '+' => {
                chars.next();
                out.push(Tok::Or)
            }
            '^' => {
                chars.next();
                out.push(Tok::Xor)
            }
            '?' => {
                chars.next();
                out.push(Tok::Question)
            }
            ':' => {
                chars.next();
                out.push(Tok::Colon)
            }
            '(' => {
                chars.next();
                out.push(Tok::LParen)
            }
            ')' => {
                chars.next();
                out.push(Tok::RParen)
            }
            '0' | '1' => {
                chars.next();
                out.push(Tok::Const(c == '1'))
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Ident(s));
            }
            other => return Err(ExprError(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    pins: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let cond = self.or()?;
        if self.peek() == Some(&Tok::Question) {
            self.bump();
            let when1 = self.expr()?;
            if self.bump() != Some(Tok::Colon) {
                return Err(ExprError("expected ':' in multiplexer".into()));
            }
            let when0 = self.expr()?;
            return Ok(Expr::Mux {
                sel: Box::new(cond),
                when1: Box::new(when1),
                when0: Box::new(when0),
            });
        }
        Ok(cond)
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.xor()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            lhs = Expr::Or(Box::new(lhs), Box::new(self.xor()?));
        }
        Ok(lhs)
    }

    fn xor(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Xor) {
            self.bump();
            lhs = Expr::Xor(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            lhs = Expr::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.bump() {
            Some(Tok::Not) => Ok(Expr::Not(Box::new(self.unary()?))),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                if self.bump() != Some(Tok::RParen) {
                    return Err(ExprError("expected ')'".into()));
                }
                Ok(e)
            }
            Some(Tok::Const(b)) => Ok(Expr::Const(b)),
            Some(Tok::Ident(name)) => match self.pins.iter().position(|p| *p == name) {
                Some(i) => Ok(Expr::Var(i)),
                None => Err(ExprError(format!(
                    "function references undeclared pin '{name}'"
                ))),
            },
            Some(t) => Err(ExprError(format!("unexpected token {t:?}"))),
            None => Err(ExprError("unexpected end of expression".into())),
        }
    }
}

/// Parses an expression whose identifiers must be among `pins`.
pub fn parse_expr(src: &str, pins: &[String]) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, pins };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ExprError(format!("trailing input in '{src}'")));
    }
    Ok(e)
}

/// Parses `OUT = expr; OUT2 = expr` into a list of (output pin, expression).
pub fn parse_function(src: &str, pins: &[String]) -> Result<Vec<(String, Expr)>, ExprError> {
    let mut outs = Vec::new();
    for part in src.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (lhs, rhs) = part
            .split_once('=')
            .ok_or_else(|| ExprError(format!("missing '=' in '{part}'")))?;
        let lhs = lhs.trim();
        if lhs.is_empty() || !lhs.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ExprError(format!("bad output pin name '{lhs}'")));
        }
        if pins.iter().any(|p| p == lhs) {
            return Err(ExprError(format!("output pin '{lhs}' is also an input")));
        }
        if outs.iter().any(|(o, _)| o == lhs) {
            return Err(ExprError(format!("output pin '{lhs}' defined twice")));
        }
        outs.push((lhs.to_string(), parse_expr(rhs, pins)?));
    }
    if outs.is_empty() {
        return Err(ExprError("function defines no outputs".into()));
    }
    Ok(outs)
}
