//! Scalar expression language: parsing, printing, and jet evaluation.
//!
//! The grammar is deliberately small — arithmetic, `ln`, `exp`, and powers
//! with *constant* exponents — which is exactly enough to write fundamental
//! equations like `N*R*ln(K1*U^c*V/N^(c+1))` while keeping every expression
//! smooth (C^3) on its domain. Operator precedence, tightest first:
//! `^`, unary `-`, `*` `/`, `+` `-`. `^` is right-associative and its
//! right-hand side is parsed at unary level, so `x^-2` and `2^3^2` both work.
//!
//! Exponents must fold to constants at evaluation time; a variable in an
//! exponent is rejected rather than differentiated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::diffcalc::Jet;
use crate::error::{Error, Result};

/// One node of a parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Num(f64),
    Var(String),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    /// Base, exponent, and the byte offset of the `^` (for error reporting).
    Pow(Box<Ast>, Box<Ast>, usize),
    Call(Func, Box<Ast>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
}

/// A parsed, immutable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Ast,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Exponent part only counts when digits actually follow,
                // so `2exp(x)` lexes as `2` `exp` (and fails in the parser)
                // rather than eating the `e`.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    expected: "a numeric literal".into(),
                    found: format!("`{text}`"),
                })?;
                toks.push((Tok::Num(value), start));
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    expected: "a number, identifier, or operator".into(),
                    found: format!("`{}`", &src[i..i + utf8_len(b)]),
                });
            }
        }
    }
    Ok(toks)
}

fn utf8_len(lead: u8) -> usize {
    match lead {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

// ---------------------------------------------------------------------------
// Parser (recursive descent, one token of lookahead)
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(self.src_len)
    }

    fn found(&self) -> String {
        match self.toks.get(self.pos) {
            Some((t, _)) => t.describe(),
            None => "end of input".into(),
        }
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<()> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.offset(),
                expected: expected.into(),
                found: self.found(),
            })
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // `^` binds tighter than unary minus: `-x^2` is `-(x^2)`.
    fn unary(&mut self) -> Result<Ast> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            Ok(Ast::Neg(Box::new(inner)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            let caret_at = self.offset();
            self.pos += 1;
            // Right-hand side at unary level: allows `x^-2` and keeps
            // `2^3^2` right-associative.
            let exponent = self.unary()?;
            Ok(Ast::Pow(Box::new(base), Box::new(exponent), caret_at))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Ast> {
        let offset = self.offset();
        let found = self.found();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Ast::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    let func = match name.as_str() {
                        "ln" => Func::Ln,
                        "exp" => Func::Exp,
                        _ => return Err(Error::UnknownFunction { name, offset }),
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(Ast::Call(func, Box::new(arg)))
                } else {
                    Ok(Ast::Var(name))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(Error::Syntax {
                offset,
                expected: "a number, identifier, `(`, or `-`".into(),
                found,
            }),
        }
    }
}

impl Expression {
    /// Parse a source string into an expression tree.
    pub fn parse(src: &str) -> Result<Self> {
        let toks = lex(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            src_len: src.len(),
        };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Syntax {
                offset: p.offset(),
                expected: "an operator or end of input".into(),
                found: p.found(),
            });
        }
        Ok(Expression { root })
    }

    pub fn root(&self) -> &Ast {
        &self.root
    }

    /// Every identifier appearing in the tree, exponents included.
    pub fn free_idents(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_idents(&self.root, &mut out);
        out
    }

    /// Evaluate to a jet of the requested order under a binding.
    pub fn eval(&self, binding: &Binding, order: usize) -> Result<Jet> {
        let n = binding.names.len();
        let inputs: Vec<Jet> = binding
            .values
            .iter()
            .enumerate()
            .map(|(slot, &v)| Jet::variable(n, order, slot, v))
            .collect();
        let slots: BTreeMap<String, usize> = binding
            .names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        eval_ast(&self.root, &slots, &binding.consts, &inputs, n, order)
    }
}

fn collect_idents(ast: &Ast, out: &mut BTreeSet<String>) {
    match ast {
        Ast::Num(_) => {}
        Ast::Var(name) => {
            out.insert(name.clone());
        }
        Ast::Neg(x) | Ast::Call(_, x) => collect_idents(x, out),
        Ast::Bin(_, a, b) => {
            collect_idents(a, out);
            collect_idents(b, out);
        }
        Ast::Pow(a, b, _) => {
            collect_idents(a, out);
            collect_idents(b, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn prec(ast: &Ast) -> u8 {
    match ast {
        Ast::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Ast::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Ast::Neg(_) => 3,
        // Negative literals print with a leading minus, so treat them
        // like a unary minus for parenthesization.
        Ast::Num(v) if *v < 0.0 => 3,
        Ast::Pow(..) => 4,
        _ => 5,
    }
}

fn fmt_ast(ast: &Ast, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let mine = prec(ast);
    if mine < min_prec {
        write!(f, "(")?;
        fmt_ast(ast, f, 0)?;
        return write!(f, ")");
    }
    match ast {
        Ast::Num(v) => write!(f, "{v}"),
        Ast::Var(name) => write!(f, "{name}"),
        Ast::Neg(x) => {
            write!(f, "-")?;
            fmt_ast(x, f, 3)
        }
        Ast::Bin(op, a, b) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => (" + ", 1, 1),
                // Right operand of a non-associative op needs strictly
                // higher precedence: `a - (b - c)`.
                BinOp::Sub => (" - ", 1, 2),
                BinOp::Mul => ("*", 2, 2),
                BinOp::Div => ("/", 2, 3),
            };
            fmt_ast(a, f, lp)?;
            write!(f, "{sym}")?;
            fmt_ast(b, f, rp)
        }
        Ast::Pow(base, exponent, _) => {
            // Base must be atom-shaped; exponent reparses at unary level.
            fmt_ast(base, f, 5)?;
            write!(f, "^")?;
            fmt_ast(exponent, f, 3)
        }
        Ast::Call(func, arg) => {
            let name = match func {
                Func::Ln => "ln",
                Func::Exp => "exp",
            };
            write!(f, "{name}(")?;
            fmt_ast(arg, f, 0)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_ast(&self.root, f, 0)
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Variable values plus named constants for one evaluation.
///
/// Variable order fixes the jet slot layout: the i-th pair seeds
/// coordinate slot i.
#[derive(Debug, Clone, Default)]
pub struct Binding {
    names: Vec<String>,
    values: Vec<f64>,
    consts: BTreeMap<String, f64>,
}

impl Binding {
    pub fn new(vars: &[(&str, f64)]) -> Self {
        Binding {
            names: vars.iter().map(|(n, _)| n.to_string()).collect(),
            values: vars.iter().map(|(_, v)| *v).collect(),
            consts: BTreeMap::new(),
        }
    }

    pub fn constant(mut self, name: &str, value: f64) -> Self {
        self.consts.insert(name.to_string(), value);
        self
    }
}

/// Core jet evaluator shared by [`Expression::eval`] and expression-backed
/// scalar fields. `inputs[slot]` supplies the jet for each bound variable;
/// all inputs must agree in dimension `n` and `order`.
pub(crate) fn eval_ast(
    ast: &Ast,
    slots: &BTreeMap<String, usize>,
    consts: &BTreeMap<String, f64>,
    inputs: &[Jet],
    n: usize,
    order: usize,
) -> Result<Jet> {
    match ast {
        Ast::Num(v) => Ok(Jet::constant(n, order, *v)),
        Ast::Var(name) => {
            if let Some(&slot) = slots.get(name) {
                Ok(inputs[slot].clone())
            } else if let Some(&v) = consts.get(name) {
                Ok(Jet::constant(n, order, v))
            } else {
                Err(Error::Unbound(name.clone()))
            }
        }
        Ast::Neg(x) => Ok(eval_ast(x, slots, consts, inputs, n, order)?.neg()),
        Ast::Bin(op, a, b) => {
            let ja = eval_ast(a, slots, consts, inputs, n, order)?;
            let jb = eval_ast(b, slots, consts, inputs, n, order)?;
            match op {
                BinOp::Add => ja.add(&jb),
                BinOp::Sub => ja.sub(&jb),
                BinOp::Mul => ja.mul(&jb),
                BinOp::Div => ja.div(&jb),
            }
        }
        Ast::Pow(base, exponent, caret_at) => {
            let c = const_eval(exponent, slots, consts, *caret_at)?;
            let jb = eval_ast(base, slots, consts, inputs, n, order)?;
            jb.powc(c)
        }
        Ast::Call(func, arg) => {
            let ja = eval_ast(arg, slots, consts, inputs, n, order)?;
            match func {
                Func::Ln => ja.ln(),
                Func::Exp => Ok(ja.exp()),
            }
        }
    }
}

/// Fold an exponent subtree to a plain number. Bound variables are
/// rejected — differentiating `x^y` in `y` is outside this language.
fn const_eval(
    ast: &Ast,
    slots: &BTreeMap<String, usize>,
    consts: &BTreeMap<String, f64>,
    caret_at: usize,
) -> Result<f64> {
    match ast {
        Ast::Num(v) => Ok(*v),
        Ast::Var(name) => {
            if let Some(&v) = consts.get(name) {
                Ok(v)
            } else if slots.contains_key(name) {
                Err(Error::NonConstantExponent {
                    name: name.clone(),
                    offset: caret_at,
                })
            } else {
                Err(Error::Unbound(name.clone()))
            }
        }
        Ast::Neg(x) => Ok(-const_eval(x, slots, consts, caret_at)?),
        Ast::Bin(op, a, b) => {
            let va = const_eval(a, slots, consts, caret_at)?;
            let vb = const_eval(b, slots, consts, caret_at)?;
            match op {
                BinOp::Add => Ok(va + vb),
                BinOp::Sub => Ok(va - vb),
                BinOp::Mul => Ok(va * vb),
                BinOp::Div => {
                    if vb == 0.0 {
                        Err(Error::Domain("division by zero in constant exponent".into()))
                    } else {
                        Ok(va / vb)
                    }
                }
            }
        }
        Ast::Pow(a, b, at) => {
            let va = const_eval(a, slots, consts, *at)?;
            let vb = const_eval(b, slots, consts, *at)?;
            let r = va.powf(vb);
            if r.is_finite() {
                Ok(r)
            } else {
                Err(Error::Domain(format!(
                    "constant exponent folded to a non-finite value ({va}^{vb})"
                )))
            }
        }
        Ast::Call(func, arg) => {
            let v = const_eval(arg, slots, consts, caret_at)?;
            match func {
                Func::Ln => {
                    if v > 0.0 {
                        Ok(v.ln())
                    } else {
                        Err(Error::Domain(format!("ln of non-positive constant {v}")))
                    }
                }
                Func::Exp => Ok(v.exp()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Expression {
        Expression::parse(src).unwrap()
    }

    #[test]
    fn evaluates_rational_expression() {
        let e = parse("c*U/V");
        let b = Binding::new(&[("U", 2.0), ("V", 3.0)]).constant("c", 1.5);
        let jet = e.eval(&b, 0).unwrap();
        assert_eq!(jet.value(), 1.0);
    }

    #[test]
    fn gradient_of_log_product() {
        let e = parse("ln(x*y)");
        let b = Binding::new(&[("x", 1.0), ("y", 1.0)]);
        let jet = e.eval(&b, 1).unwrap();
        assert_eq!(jet.value(), 0.0);
        assert_eq!(jet.gradient(), &[1.0, 1.0]);
    }

    #[test]
    fn caret_binds_tighter_than_unary_minus() {
        let e = parse("-x^2");
        let b = Binding::new(&[("x", 3.0)]);
        assert_eq!(e.eval(&b, 0).unwrap().value(), -9.0);
        // and the parenthesized form flips the sign back
        let e2 = parse("(-x)^2");
        assert_eq!(e2.eval(&b, 0).unwrap().value(), 9.0);
    }

    #[test]
    fn power_accepts_negative_and_compound_constant_exponents() {
        let b = Binding::new(&[("x", 2.0)]).constant("c", 1.5);
        assert_eq!(parse("x^-2").eval(&b, 0).unwrap().value(), 0.25);
        let v = parse("x^(c+1)").eval(&b, 0).unwrap().value();
        assert!((v - 2.0_f64.powf(2.5)).abs() < 1e-14);
    }

    #[test]
    fn variable_exponent_is_rejected() {
        let e = parse("x^y");
        let b = Binding::new(&[("x", 2.0), ("y", 3.0)]);
        match e.eval(&b, 0) {
            Err(Error::NonConstantExponent { name, .. }) => assert_eq!(name, "y"),
            other => panic!("expected NonConstantExponent, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_byte_offset() {
        match Expression::parse("1 + * 2") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_is_reported_with_offset() {
        match Expression::parse("log(x)") {
            Err(Error::UnknownFunction { name, offset }) => {
                assert_eq!(name, "log");
                assert_eq!(offset, 0);
            }
            other => panic!("expected UnknownFunction, got {other:?}"),
        }
    }

    #[test]
    fn unbound_identifier_is_reported_at_eval() {
        let e = parse("K*x");
        let b = Binding::new(&[("x", 1.0)]);
        match e.eval(&b, 0) {
            Err(Error::Unbound(name)) => assert_eq!(name, "K"),
            other => panic!("expected Unbound, got {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_is_a_syntax_error() {
        assert!(Expression::parse("x y").is_err());
        assert!(Expression::parse("(x").is_err());
        assert!(Expression::parse("").is_err());
    }

    #[test]
    fn printing_is_a_parse_fixed_point() {
        for src in [
            "c*U/V",
            "-x^2",
            "(-x)^2",
            "x^-2",
            "a - (b - c)",
            "a - b - c",
            "N*R*ln(K1*U^c*V/N^(c+1))",
            "1 + 2*x/(y + 3)",
            "exp(x)*exp(-x)",
            "x^(c+1)",
            "2^3^2",
        ] {
            let once = parse(src).to_string();
            let twice = parse(&once).to_string();
            assert_eq!(once, twice, "printing `{src}` is not stable");
        }
    }

    #[test]
    fn free_idents_include_exponents_and_constants() {
        let e = parse("K1*x^(c+1)");
        let ids: Vec<String> = e.free_idents().into_iter().collect();
        assert_eq!(ids, ["K1", "c", "x"]);
    }
}
