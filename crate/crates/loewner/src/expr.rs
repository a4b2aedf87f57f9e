//! A small expression language for holomorphic functions of `z` and
//! optionally `t`.
//!
//! Grammar (no implicit multiplication, `^` binds tighter than a unary minus
//! applied to its base, and is right-associative through its `unary` operand):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := number | "i" | "z" | "t" | ident "(" expr ")" | "(" expr ")"
//! ident  := "exp" | "log" | "sqrt" | "sin" | "cos"
//! ```
//!
//! Evaluation is plain complex arithmetic with principal branches; it never
//! stores a NaN. An operation that would produce one (division by zero, a
//! hit branch point, overflow) reports an error instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    I,
    Z,
    T,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl Expr {
    pub fn pow(self, rhs: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(rhs))
    }
    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call(func, Box::new(arg))
    }

    /// A literal complex constant, spelled re + im*i with the obvious
    /// simplifications so the rendering stays readable.
    pub fn complex_const(c: Complex64) -> Expr {
        let re_part = |re: f64| {
            if re < 0.0 {
                -Expr::Num(-re)
            } else {
                Expr::Num(re)
            }
        };
        let im_part = |im: f64| {
            if im == 1.0 {
                Expr::I
            } else {
                Expr::Num(im) * Expr::I
            }
        };
        if c.im == 0.0 {
            re_part(c.re)
        } else if c.re == 0.0 {
            if c.im < 0.0 {
                -im_part(-c.im)
            } else {
                im_part(c.im)
            }
        } else if c.im < 0.0 {
            re_part(c.re) - im_part(-c.im)
        } else {
            re_part(c.re) + im_part(c.im)
        }
    }

    pub fn uses_t(&self) -> bool {
        match self {
            Expr::T => true,
            Expr::Num(_) | Expr::I | Expr::Z => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_t(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses_t() || b.uses_t()
            }
        }
    }

    pub fn uses_z(&self) -> bool {
        match self {
            Expr::Z => true,
            Expr::Num(_) | Expr::I | Expr::T => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_z(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses_z() || b.uses_z()
            }
        }
    }

    fn fmt_prec(&self, f: &mut std::fmt::Formatter<'_>, min_prec: u8) -> std::fmt::Result {
        let prec = match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        };
        if prec < min_prec {
            write!(f, "(")?;
            self.fmt_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(x) => write!(f, "{:?}", x),
            Expr::I => write!(f, "i"),
            Expr::Z => write!(f, "z"),
            Expr::T => write!(f, "t"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, "+")?;
                b.fmt_prec(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, "-")?;
                b.fmt_prec(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)
            }
            // The base of "^" must re-parse as an atom, so anything compound
            // gets parentheses; the exponent slot accepts a unary.
            Expr::Pow(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^")?;
                b.fmt_prec(f, 3)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Whether a function depends on `z` alone or on `(z, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    One,
    Two,
}

impl Arity {
    fn as_u8(self) -> u8 {
        match self {
            Arity::One => 1,
            Arity::Two => 2,
        }
    }
}

/// A parsed holomorphic function. The syntax tree is public so callers can
/// build derived functions (quotients, negations, substituted constants)
/// without round-tripping through text.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloFunction {
    ast: Expr,
    arity: Arity,
    source: String,
}

impl HoloFunction {
    pub fn from_ast(ast: Expr, arity: Arity) -> Result<Self> {
        if arity == Arity::One && ast.uses_t() {
            return Err(Error::ArityViolation);
        }
        let source = ast.to_string();
        Ok(HoloFunction { ast, arity, source })
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate at `z`, with `t` supplied exactly when the arity is two.
    pub fn eval(&self, z: Complex64, t: Option<f64>) -> Result<Complex64> {
        match (self.arity, t) {
            (Arity::One, None) => eval_node(&self.ast, z, 0.0),
            (Arity::Two, Some(t)) => eval_node(&self.ast, z, t),
            (arity, given) => {
                Err(Error::TimeArgumentMismatch { supplied: given.is_some(), arity: arity.as_u8() })
            }
        }
    }

    /// Shorthand for arity-one evaluation.
    pub fn eval1(&self, z: Complex64) -> Result<Complex64> {
        self.eval(z, None)
    }

    /// Shorthand for arity-two evaluation.
    pub fn eval2(&self, z: Complex64, t: f64) -> Result<Complex64> {
        self.eval(z, Some(t))
    }
}

impl std::fmt::Display for HoloFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for HoloFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for HoloFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        // Serialized functions may legitimately depend on t; re-parse at the
        // wider arity and narrow if t is absent.
        let f = parse_expr(&text, Arity::Two).map_err(serde::de::Error::custom)?;
        if f.ast.uses_t() {
            Ok(f)
        } else {
            HoloFunction::from_ast(f.ast, Arity::One).map_err(serde::de::Error::custom)
        }
    }
}

/// Parse `text` as a function of the declared arity.
pub fn parse_expr(text: &str, arity: Arity) -> Result<HoloFunction> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.len() };
    let ast = parser.expr()?;
    if let Some((tok, pos)) = parser.peek_raw() {
        return Err(Error::Syntax {
            pos,
            msg: format!("unexpected `{}` after a complete expression", tok.describe()),
        });
    }
    if arity == Arity::One && ast.uses_t() {
        return Err(Error::ArityViolation);
    }
    Ok(HoloFunction { ast, arity, source: text.to_string() })
}

const MAX_INT_POW: f64 = 64.0;

fn eval_node(e: &Expr, z: Complex64, t: f64) -> Result<Complex64> {
    let v = match e {
        Expr::Num(x) => Complex64::new(*x, 0.0),
        Expr::I => Complex64::new(0.0, 1.0),
        Expr::Z => z,
        Expr::T => Complex64::new(t, 0.0),
        Expr::Neg(a) => -eval_node(a, z, t)?,
        Expr::Add(a, b) => eval_node(a, z, t)? + eval_node(b, z, t)?,
        Expr::Sub(a, b) => eval_node(a, z, t)? - eval_node(b, z, t)?,
        Expr::Mul(a, b) => eval_node(a, z, t)? * eval_node(b, z, t)?,
        Expr::Div(a, b) => {
            let den = eval_node(b, z, t)?;
            if den == Complex64::new(0.0, 0.0) {
                return Err(Error::DivisionByZero { z });
            }
            eval_node(a, z, t)? / den
        }
        Expr::Pow(a, b) => {
            let base = eval_node(a, z, t)?;
            let exp = eval_node(b, z, t)?;
            pow_value(base, exp, z)?
        }
        Expr::Call(func, a) => {
            let arg = eval_node(a, z, t)?;
            match func {
                Func::Exp => arg.exp(),
                Func::Log => {
                    if arg == Complex64::new(0.0, 0.0) {
                        return Err(Error::BranchPoint { func: "log", z });
                    }
                    arg.ln()
                }
                Func::Sqrt => {
                    if arg == Complex64::new(0.0, 0.0) {
                        return Err(Error::BranchPoint { func: "sqrt", z });
                    }
                    arg.sqrt()
                }
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
            }
        }
    };
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { z })
    }
}

/// Integer exponents use repeated multiplication (exact at 0, no branch
/// wobble); everything else goes through exp(w log base).
fn pow_value(base: Complex64, exp: Complex64, z: Complex64) -> Result<Complex64> {
    if exp.im == 0.0 && exp.re.fract() == 0.0 && exp.re.abs() <= MAX_INT_POW {
        let n = exp.re as i64;
        if n == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if base == Complex64::new(0.0, 0.0) {
            return if n > 0 { Ok(Complex64::new(0.0, 0.0)) } else { Err(Error::DivisionByZero { z }) };
        }
        let mut acc = Complex64::new(1.0, 0.0);
        let mut b = if n > 0 { base } else { base.inv() };
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc *= b;
            }
            b *= b;
            k >>= 1;
        }
        return Ok(acc);
    }
    if base == Complex64::new(0.0, 0.0) {
        return Err(Error::BranchPoint { func: "log", z });
    }
    Ok((exp * base.ln()).exp())
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(x) => format!("{:?}", x),
            Token::Ident(s) => s.clone(),
            Token::Plus => "+".into(),
            Token::Minus => "-".into(),
            Token::Star => "*".into(),
            Token::Slash => "/".into(),
            Token::Caret => "^".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(Error::Syntax {
                            pos: i.min(bytes.len()),
                            msg: "expected digits after decimal point".into(),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
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
                let value: f64 = text[start..i].parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: format!("invalid number `{}`", &text[start..i]),
                })?;
                out.push((Token::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek_raw(&self) -> Option<(Token, usize)> {
        self.tokens.get(self.pos).cloned()
    }

    fn bump(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Token, what: &str) -> Result<()> {
        match self.bump() {
            Some((tok, _)) if tok == *want => Ok(()),
            Some((tok, pos)) => {
                Err(Error::Syntax { pos, msg: format!("expected {what}, found `{}`", tok.describe()) })
            }
            None => Err(Error::Syntax { pos: self.end, msg: format!("expected {what}, found end of input") }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek_raw() {
                Some((Token::Plus, _)) => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some((Token::Minus, _)) => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek_raw() {
                Some((Token::Star, _)) => {
                    self.pos += 1;
                    acc = acc * self.unary()?;
                }
                Some((Token::Slash, _)) => {
                    self.pos += 1;
                    acc = acc / self.unary()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some((Token::Minus, _)) = self.peek_raw() {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some((Token::Caret, _)) = self.peek_raw() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some((Token::Num(x), _)) => Ok(Expr::Num(x)),
            Some((Token::LParen, _)) => {
                let inner = self.expr()?;
                self.eat(&Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some((Token::Ident(name), pos)) => match name.as_str() {
                "i" => Ok(Expr::I),
                "z" => Ok(Expr::Z),
                "t" => Ok(Expr::T),
                "exp" | "log" | "sqrt" | "sin" | "cos" => {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "sin" => Func::Sin,
                        _ => Func::Cos,
                    };
                    self.eat(&Token::LParen, "`(` after a function name")?;
                    let arg = self.expr()?;
                    self.eat(&Token::RParen, "`)`")?;
                    Ok(Expr::call(func, arg))
                }
                _ => Err(Error::UnknownIdentifier { pos, name }),
            },
            Some((tok, pos)) => {
                Err(Error::Syntax { pos, msg: format!("expected a value, found `{}`", tok.describe()) })
            }
            None => Err(Error::Syntax { pos: self.end, msg: "expected a value, found end of input".into() }),
        }
    }
}
