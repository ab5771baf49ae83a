//! Small arithmetic expressions over node coordinates.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ident  := x1 | x2 | x3 | s | pi | sin | cos | exp | abs
//! ```
//!
//! `s` is the solution value and is only meaningful for nonlinearity
//! expressions; exponent expressions may only use coordinates.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::fmath;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Coord(usize),
    S,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
    max_coord: usize,
    uses_s: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Expression(format!("bad number literal '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(src[start..i].to_string()));
        } else {
            match c {
                '+' | '-' | '*' | '/' | '^' => out.push(Tok::Op(c)),
                '(' => out.push(Tok::LParen),
                ')' => out.push(Tok::RParen),
                _ => return Err(Error::Expression(format!("unexpected character '{c}'"))),
            }
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    max_coord: usize,
    uses_s: bool,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(Error::Expression("missing ')'".into())),
                }
            }
            Some(Tok::Ident(name)) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(func) = func {
                    if self.bump() != Some(Tok::LParen) {
                        return Err(Error::Expression(format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    if self.bump() != Some(Tok::RParen) {
                        return Err(Error::Expression(format!("missing ')' in {name}(...)")));
                    }
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(core::f64::consts::PI)),
                    "s" => {
                        self.uses_s = true;
                        Ok(Node::S)
                    }
                    _ => {
                        let axis = name
                            .strip_prefix('x')
                            .and_then(|d| d.parse::<usize>().ok())
                            .filter(|&k| (1..=3).contains(&k))
                            .ok_or_else(|| Error::Expression(format!("unknown identifier '{name}'")))?;
                        self.max_coord = self.max_coord.max(axis);
                        Ok(Node::Coord(axis - 1))
                    }
                }
            }
            Some(t) => Err(Error::Expression(format!("unexpected token {t:?}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

fn eval_node(n: &Node, x: &[f64], s: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Coord(k) => x.get(*k).copied().unwrap_or(f64::NAN),
        Node::S => s,
        Node::Neg(a) => -eval_node(a, x, s),
        Node::Add(a, b) => eval_node(a, x, s) + eval_node(b, x, s),
        Node::Sub(a, b) => eval_node(a, x, s) - eval_node(b, x, s),
        Node::Mul(a, b) => eval_node(a, x, s) * eval_node(b, x, s),
        Node::Div(a, b) => eval_node(a, x, s) / eval_node(b, x, s),
        Node::Pow(a, b) => fmath::powf(eval_node(a, x, s), eval_node(b, x, s)),
        Node::Call(f, a) => {
            let v = eval_node(a, x, s);
            match f {
                Func::Sin => fmath::sin(v),
                Func::Cos => fmath::cos(v),
                Func::Exp => fmath::exp(v),
                Func::Abs => v.abs(),
            }
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0, max_coord: 0, uses_s: false };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expression(format!("trailing input in '{src}'")));
        }
        Ok(Expr { root, source: src.to_string(), max_coord: p.max_coord, uses_s: p.uses_s })
    }

    /// Evaluates at coordinates `x` (length ≥ highest referenced axis) and value `s`.
    pub fn eval(&self, x: &[f64], s: f64) -> f64 {
        eval_node(&self.root, x, s)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest coordinate index referenced (1-based), 0 if none.
    pub fn max_coord(&self) -> usize {
        self.max_coord
    }

    pub fn uses_s(&self) -> bool {
        self.uses_s
    }

    pub fn uses_coords(&self) -> bool {
        self.max_coord > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("(1 + 2) * 3 - 4 / 2", &[]), 7.0);
        assert_eq!(ev("2 ^ -1", &[]), 0.5);
        assert_eq!(ev("1.5e1", &[]), 15.0);
    }

    #[test]
    fn coordinates_and_functions() {
        assert!((ev("1.5 + 0.3 * x1", &[0.5, 0.0]) - 1.65).abs() < 1e-15);
        assert!((ev("sin(pi * x2) + cos(0) + exp(0)", &[0.0, 0.5]) - 3.0).abs() < 1e-15);
        assert_eq!(ev("abs(x1 - x2)", &[0.25, 1.0]), 0.75);
        let e = Expr::parse("s^3 / (1 + abs(s)^2.8)").unwrap();
        assert!(e.uses_s() && !e.uses_coords());
        assert_eq!(e.eval(&[], 1.0), 0.5);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("x4").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("2 # 3").is_err());
    }
}
