//! Coefficient expressions: a minimal grammar with numbers, the variable `x`,
//! `+ - * / ^`, unary minus, `cos`, `sin`, `exp`, `log`, and parentheses.
//! `^` binds tightest and associates right; unary minus binds looser, so
//! `-x^2` is `-(x^2)`.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Fun(Fun, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fun {
    Cos,
    Sin,
    Exp,
    Log,
}

impl Expr {
    /// Evaluate at `x`. The message names the failing operation; callers add
    /// location context (which node, which coefficient).
    pub fn eval(&self, x: f64) -> std::result::Result<f64, String> {
        let v = match self {
            Expr::Num(c) => *c,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(x)?;
                let b = b.eval(x)?;
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => {
                        if b == 0.0 {
                            return Err(format!("division by zero ({a} / 0)"));
                        }
                        a / b
                    }
                    Op::Pow => {
                        let p = a.powf(b);
                        if !p.is_finite() {
                            return Err(format!("non-finite power {a}^{b}"));
                        }
                        p
                    }
                }
            }
            Expr::Fun(f, e) => {
                let a = e.eval(x)?;
                match f {
                    Fun::Cos => a.cos(),
                    Fun::Sin => a.sin(),
                    Fun::Exp => {
                        let v = a.exp();
                        if !v.is_finite() {
                            return Err(format!("exp overflow at argument {a}"));
                        }
                        v
                    }
                    Fun::Log => {
                        if a <= 0.0 {
                            return Err(format!("log of non-positive value {a}"));
                        }
                        a.ln()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err("non-finite value".to_string())
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Config(format!(
            "expression parse error at byte {} of {:?}: {}",
            self.pos, self.src, msg
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Bin(Op::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Bin(Op::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Bin(Op::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Bin(Op::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            let e = self.factor()?;
            return Ok(Expr::Neg(Box::new(e)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.factor()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected closing parenthesis"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_lowercase() => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected character {:?}", c as char))),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.bytes.len() && (self.bytes[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len()
                && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark; // not an exponent; leave for the caller
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err(&format!("invalid number {text:?}")))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_lowercase() {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if name == "x" {
            return Ok(Expr::Var);
        }
        let f = match name {
            "cos" => Fun::Cos,
            "sin" => Fun::Sin,
            "exp" => Fun::Exp,
            "log" => Fun::Log,
            _ => return Err(self.err(&format!("unknown identifier {name:?}"))),
        };
        if !self.eat(b'(') {
            return Err(self.err(&format!("expected '(' after {name}")));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.err("expected closing parenthesis"));
        }
        Ok(Expr::Fun(f, Box::new(arg)))
    }
}
