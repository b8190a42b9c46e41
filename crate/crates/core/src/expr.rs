//! Pointwise expression grammar for apply operations.
//!
//! An apply expression assigns to the first operand:
//!
//! ```text
//! x = <expr>
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | primary
//! primary:= number | x | y | z | s | func '(' expr (',' expr)? ')' | '(' expr ')'
//! func   := abs | exp | log | sqrt | tanh | max | min
//! ```
//!
//! The same AST is interpreted by the reference backend and printed as OpenCL
//! C by the code generator, so both paths evaluate identical operations in
//! identical order.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Operand {
    X,
    Y,
    Z,
}

impl Operand {
    pub const ALL: [Operand; 3] = [Operand::X, Operand::Y, Operand::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z"][self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Abs,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryFn {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Operand(Operand),
    Scalar,
    Const(f32),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call1(UnaryFn, Box<Expr>),
    Call2(BinaryFn, Box<Expr>, Box<Expr>),
}

impl Expr {
    #[inline]
    pub fn eval(&self, operands: &[f32; 3], scalar: f32) -> f32 {
        match self {
            Expr::Operand(op) => operands[op.index()],
            Expr::Scalar => scalar,
            Expr::Const(c) => *c,
            Expr::Neg(e) => -e.eval(operands, scalar),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(operands, scalar), b.eval(operands, scalar));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call1(f, e) => {
                let v = e.eval(operands, scalar);
                match f {
                    UnaryFn::Abs => libm::fabsf(v),
                    UnaryFn::Exp => libm::expf(v),
                    UnaryFn::Log => libm::logf(v),
                    UnaryFn::Sqrt => libm::sqrtf(v),
                    UnaryFn::Tanh => libm::tanhf(v),
                }
            }
            Expr::Call2(f, a, b) => {
                let (a, b) = (a.eval(operands, scalar), b.eval(operands, scalar));
                match f {
                    BinaryFn::Max => libm::fmaxf(a, b),
                    BinaryFn::Min => libm::fminf(a, b),
                }
            }
        }
    }

    /// Highest operand referenced, if any.
    pub fn max_operand(&self) -> Option<Operand> {
        match self {
            Expr::Operand(op) => Some(*op),
            Expr::Scalar | Expr::Const(_) => None,
            Expr::Neg(e) | Expr::Call1(_, e) => e.max_operand(),
            Expr::Binary(_, a, b) | Expr::Call2(_, a, b) => a.max_operand().max(b.max_operand()),
        }
    }

    pub fn references(&self, operand: Operand) -> bool {
        match self {
            Expr::Operand(op) => *op == operand,
            Expr::Scalar | Expr::Const(_) => false,
            Expr::Neg(e) | Expr::Call1(_, e) => e.references(operand),
            Expr::Binary(_, a, b) | Expr::Call2(_, a, b) => a.references(operand) || b.references(operand),
        }
    }

    /// OpenCL C rendering; operands print as `x`, `y`, `z` and the scalar as `s`.
    pub fn to_c(&self) -> String {
        let mut out = String::new();
        self.write_c(&mut out);
        out
    }

    fn write_c(&self, out: &mut String) {
        match self {
            Expr::Operand(op) => out.push_str(op.name()),
            Expr::Scalar => out.push('s'),
            Expr::Const(c) => {
                let _ = write!(out, "{c:?}f");
            }
            Expr::Neg(e) => {
                out.push_str("(-");
                e.write_c(out);
                out.push(')');
            }
            Expr::Binary(op, a, b) => {
                out.push('(');
                a.write_c(out);
                out.push_str(match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                });
                b.write_c(out);
                out.push(')');
            }
            Expr::Call1(f, e) => {
                out.push_str(match f {
                    UnaryFn::Abs => "fabs(",
                    UnaryFn::Exp => "exp(",
                    UnaryFn::Log => "log(",
                    UnaryFn::Sqrt => "sqrt(",
                    UnaryFn::Tanh => "tanh(",
                });
                e.write_c(out);
                out.push(')');
            }
            Expr::Call2(f, a, b) => {
                out.push_str(match f {
                    BinaryFn::Max => "fmax(",
                    BinaryFn::Min => "fmin(",
                });
                a.write_c(out);
                out.push_str(", ");
                b.write_c(out);
                out.push(')');
            }
        }
    }
}

/// `x = <expr>` over `arity` operands.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f32),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let v: f32 = text
                .parse()
                .map_err(|_| Error::Expr(format!("bad number `{text}`")))?;
            if !v.is_finite() {
                return Err(Error::Expr(format!("number `{text}` is not finite")));
            }
            toks.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Tok::Ident(src[start..i].to_string()));
        } else if "+-*/(),=".contains(c) {
            toks.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}`")));
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    arity: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, sym: char) -> bool {
        if self.peek() == Some(&Tok::Sym(sym)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: char) -> Result<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(Error::Expr(format!("expected `{sym}` at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    return self.call(&name);
                }
                match name.as_str() {
                    "s" => Ok(Expr::Scalar),
                    "x" | "y" | "z" => {
                        let op = Operand::ALL[(name.as_bytes()[0] - b'x') as usize];
                        if op.index() >= self.arity {
                            return Err(Error::Expr(format!(
                                "operand `{name}` is not declared for arity {}",
                                self.arity
                            )));
                        }
                        Ok(Expr::Operand(op))
                    }
                    _ => Err(Error::Expr(format!("undeclared name `{name}`"))),
                }
            }
            Some(tok) => Err(Error::Expr(format!("unexpected token {tok:?}"))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let unary = match name {
            "abs" => Some(UnaryFn::Abs),
            "exp" => Some(UnaryFn::Exp),
            "log" => Some(UnaryFn::Log),
            "sqrt" => Some(UnaryFn::Sqrt),
            "tanh" => Some(UnaryFn::Tanh),
            _ => None,
        };
        if let Some(f) = unary {
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::Call1(f, Box::new(arg)));
        }
        let binary = match name {
            "max" => BinaryFn::Max,
            "min" => BinaryFn::Min,
            _ => return Err(Error::Expr(format!("unknown function `{name}`"))),
        };
        let a = self.expr()?;
        self.expect(',')?;
        let b = self.expr()?;
        self.expect(')')?;
        Ok(Expr::Call2(binary, Box::new(a), Box::new(b)))
    }
}

/// Parses `x = <expr>` where the expression may use the first `arity` operands.
pub fn parse_assignment(src: &str, arity: usize) -> Result<Assignment> {
    if !(1..=3).contains(&arity) {
        return Err(Error::Expr(format!("arity {arity} outside 1..=3")));
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, arity };
    match p.toks.first() {
        Some(Tok::Ident(name)) if name == "x" => p.pos = 1,
        _ => return Err(Error::Expr("expression must assign to `x`".into())),
    }
    p.expect('=')?;
    let value = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Expr(format!("trailing input at token {}", p.pos)));
    }
    Ok(Assignment { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: f32, y: f32, s: f32) -> f32 {
        parse_assignment(src, 2).unwrap().value.eval(&[x, y, 0.0], s)
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(eval("x = x + y * 2", 1.0, 3.0, 0.0), 7.0);
        assert_eq!(eval("x = (x + y) * 2", 1.0, 3.0, 0.0), 8.0);
        assert_eq!(eval("x = -x - -y", 1.0, 3.0, 0.0), 2.0);
        assert_eq!(eval("x = x / y / 2", 12.0, 3.0, 0.0), 2.0);
        assert_eq!(eval("x = s", 1.0, 3.0, 0.5), 0.5);
        assert_eq!(eval("x = 1.5e1", 0.0, 0.0, 0.0), 15.0);
    }

    #[test]
    fn functions() {
        assert_eq!(eval("x = abs(x)", -2.0, 0.0, 0.0), 2.0);
        assert_eq!(eval("x = max(x, y)", -2.0, 1.0, 0.0), 1.0);
        assert_eq!(eval("x = min(x, 0)", 5.0, 0.0, 0.0), 0.0);
        assert_eq!(eval("x = sqrt(x)", 16.0, 0.0, 0.0), 4.0);
        assert!((eval("x = exp(log(x))", 3.0, 0.0, 0.0) - 3.0).abs() < 1e-6);
        assert!((eval("x = tanh(x)", 0.5, 0.0, 0.0) - 0.462_117_16).abs() < 1e-6);
    }

    #[test]
    fn rejects_undeclared_and_malformed() {
        let e = parse_assignment("x = q + 1", 1).unwrap_err();
        assert!(e.to_string().contains("`q`"), "{e}");
        let e = parse_assignment("x = x + y", 1).unwrap_err();
        assert!(e.to_string().contains("`y`"), "{e}");
        assert!(parse_assignment("y = x", 2).is_err());
        assert!(parse_assignment("x = (x", 1).is_err());
        assert!(parse_assignment("x = x x", 1).is_err());
        assert!(parse_assignment("x = foo(x)", 1).is_err());
        assert!(parse_assignment("x = max(x)", 1).is_err());
        assert!(parse_assignment("x = x $ 1", 1).is_err());
        assert!(parse_assignment("x = x", 4).is_err());
    }

    #[test]
    fn c_rendering_is_fully_parenthesized() {
        let a = parse_assignment("x = -x * 2 + max(y, s) / abs(z)", 3).unwrap();
        assert_eq!(a.value.to_c(), "(((-x) * 2.0f) + (fmax(y, s) / fabs(z)))");
        assert_eq!(a.value.max_operand(), Some(Operand::Z));
        assert!(a.value.references(Operand::X));
        assert!(!parse_assignment("x = s", 1).unwrap().value.references(Operand::X));
    }
}
