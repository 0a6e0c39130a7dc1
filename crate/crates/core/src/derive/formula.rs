use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }
}

/// Parsed arithmetic expression over metric identifiers.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Ident(String),
    Binary(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Parses `expr := term (('+'|'-') term)*`, `term := factor (('*'|'/') factor)*`,
    /// `factor := number | ident | '(' expr ')'`. Error positions are
    /// 0-based character offsets.
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            chars: text.chars().collect(),
            pos: 0,
        };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error(format!("unexpected `{}`", p.chars[p.pos])));
        }
        Ok(expr)
    }

    pub fn identifiers(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Number(_) => {}
            Expr::Ident(name) => {
                out.insert(name);
            }
            Expr::Binary(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    /// Evaluates with `lookup` resolving identifiers. Missing operands,
    /// division by zero and non-finite results yield `None`.
    pub fn eval(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Option<f64> {
        let v = match self {
            Expr::Number(v) => *v,
            Expr::Ident(name) => lookup(name)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(lookup)?, b.eval(lookup)?);
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div if b == 0.0 => return None,
                    Op::Div => a / b,
                }
            }
        };
        v.is_finite().then_some(v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Formula {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek_op(&mut self, ops: &[(char, Op)]) -> Option<Op> {
        self.skip_ws();
        let c = *self.chars.get(self.pos)?;
        let op = ops.iter().find(|(s, _)| *s == c)?.1;
        self.pos += 1;
        Some(op)
    }

    fn expr(&mut self) -> Result<Expr> {
        const OPS: [(char, Op); 3] = [('+', Op::Add), ('-', Op::Sub), ('−', Op::Sub)];
        let mut lhs = self.term()?;
        while let Some(op) = self.peek_op(&OPS) {
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        const OPS: [(char, Op); 4] = [
            ('*', Op::Mul),
            ('×', Op::Mul),
            ('/', Op::Div),
            ('÷', Op::Div),
        ];
        let mut lhs = self.factor()?;
        while let Some(op) = self.peek_op(&OPS) {
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        self.skip_ws();
        let Some(&c) = self.chars.get(self.pos) else {
            return Err(self.error("unexpected end of formula"));
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            self.skip_ws();
            if self.chars.get(self.pos) != Some(&')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            Ok(inner)
        } else if c.is_ascii_digit() || c == '.' {
            self.number()
        } else if c.is_alphabetic() || c == '_' {
            let start = self.pos;
            while self
                .chars
                .get(self.pos)
                .is_some_and(|c| c.is_alphanumeric() || *c == '_' || *c == '.')
            {
                self.pos += 1;
            }
            Ok(Expr::Ident(self.chars[start..self.pos].iter().collect()))
        } else {
            Err(self.error(format!(
                "expected a number, metric name or `(`, found `{c}`"
            )))
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.chars.get(p.pos).is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos > s
        };
        let mut any = digits(self);
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.chars.get(self.pos), Some('e' | 'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+' | '-')) {
                self.pos += 1;
            }
            if !digits(self) {
                self.pos = mark;
                return Err(self.error("malformed exponent"));
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map(Expr::Number).map_err(|_| Error::Formula {
            position: start,
            message: format!("malformed number `{text}`"),
        })
    }
}
