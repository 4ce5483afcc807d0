//! Parser for the small expression language used in problem files.
//!
//! Symbols: `x` (base coordinate), `h` or `ℏ` (Planck parameter), `i`
//! (imaginary unit), `T` (so that `T^c` stands for `e^{-c/ℏ}`), decimal or
//! fractional numbers, `+ - * / ^`, parentheses and implicit multiplication
//! (`2x`, `3(x+1)`).

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::poly::{Poly, RatFunc};
use crate::scalar::{c_one, cplx, rational_to_real, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { pos, msg: msg.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(BigRational),
    I,
    X,
    H,
    T,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut k = 0;
    while k < chars.len() {
        let (pos, ch) = chars[k];
        if ch.is_whitespace() {
            k += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = k;
            while k < chars.len() && (chars[k].1.is_ascii_digit() || chars[k].1 == '.') {
                k += 1;
            }
            // scientific exponent, only when followed by digits
            if k < chars.len() && (chars[k].1 == 'e' || chars[k].1 == 'E') {
                let mut j = k + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    k = j;
                    while k < chars.len() && chars[k].1.is_ascii_digit() {
                        k += 1;
                    }
                }
            }
            let end = if k < chars.len() { chars[k].0 } else { s.len() };
            let lit = &s[chars[start].0..end];
            match crate::scalar::parse_rational(lit) {
                Some(v) => out.push((pos, Tok::Num(v))),
                None => return err(pos, format!("bad number '{lit}'")),
            }
        } else if ch.is_alphabetic() || ch == 'ℏ' {
            let start = k;
            while k < chars.len() && (chars[k].1.is_alphanumeric() || chars[k].1 == '_' || chars[k].1 == 'ℏ') {
                k += 1;
            }
            let end = if k < chars.len() { chars[k].0 } else { s.len() };
            out.push((pos, Tok::Ident(s[chars[start].0..end].to_string())));
        } else if "+-*/^()".contains(ch) {
            out.push((pos, Tok::Op(ch)));
            k += 1;
        } else {
            return err(pos, format!("unexpected character '{ch}'"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    k: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.k).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.k).map_or(self.len, |(p, _)| *p)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.k += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Tok::Op(c @ ('*' | '/'))) => {
                    self.k += 1;
                    let rhs = self.unary()?;
                    lhs = if c == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
                }
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')) => {
                    let rhs = self.power()?;
                    lhs = Expr::Mul(lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.k += 1;
                Ok(Expr::Neg(self.unary()?.into()))
            }
            Some(Tok::Op('+')) => {
                self.k += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.k += 1;
            let e = self.unary()?;
            return Ok(Expr::Pow(base.into(), e.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let Some(tok) = self.peek().cloned() else {
            return err(pos, "unexpected end of input");
        };
        self.k += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "h" | "hbar" | "ℏ" => Ok(Expr::H),
                "i" | "I" => Ok(Expr::I),
                "T" => Ok(Expr::T),
                _ => err(pos, format!("unknown symbol '{name}'")),
            },
            Tok::Op('(') => {
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::Op(')')) => {
                        self.k += 1;
                        Ok(e)
                    }
                    _ => err(self.pos(), "expected ')'"),
                }
            }
            Tok::Op(c) => err(pos, format!("unexpected '{c}'")),
        }
    }
}

/// Parses an expression string.
pub fn parse_expr(s: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(s)?;
    if toks.is_empty() {
        return err(0, "empty expression");
    }
    let mut p = Parser { toks, k: 0, len: s.len() };
    let e = p.expr()?;
    if p.k != p.toks.len() {
        return err(p.pos(), "trailing input");
    }
    Ok(e)
}

impl Expr {
    pub fn mentions_x(&self) -> bool {
        self.any(&|e| matches!(e, Expr::X))
    }

    pub fn mentions_h_or_t(&self) -> bool {
        self.any(&|e| matches!(e, Expr::H | Expr::T))
    }

    fn any(&self, f: &impl Fn(&Expr) -> bool) -> bool {
        if f(self) {
            return true;
        }
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => a.any(f) || b.any(f),
            Expr::Neg(a) => a.any(f),
            _ => false,
        }
    }

    /// Value of a constant expression (no `x`, `h`, `T`).
    pub fn constant<R: Real>(&self) -> Result<C<R>, ParseError> {
        let q = |v: &BigRational| rational_to_real::<R>(v);
        Ok(match self {
            Expr::Num(v) => cplx(q(v), R::zero()),
            Expr::I => cplx(R::zero(), R::one()),
            Expr::X | Expr::H | Expr::T => return err(0, "expected a constant"),
            Expr::Add(a, b) => a.constant::<R>()? + b.constant::<R>()?,
            Expr::Sub(a, b) => a.constant::<R>()? - b.constant::<R>()?,
            Expr::Mul(a, b) => a.constant::<R>()? * b.constant::<R>()?,
            Expr::Div(a, b) => {
                let d = b.constant::<R>()?;
                match crate::scalar::c_inv(&d) {
                    Some(inv) => a.constant::<R>()? * inv,
                    None => return err(0, "division by zero"),
                }
            }
            Expr::Neg(a) => -a.constant::<R>()?,
            Expr::Pow(a, e) => {
                let k = e.integer_exponent()?;
                let base = a.constant::<R>()?;
                let b = if k < 0 {
                    match crate::scalar::c_inv(&base) {
                        Some(v) => v,
                        None => return err(0, "zero to a negative power"),
                    }
                } else {
                    base
                };
                (0..k.unsigned_abs()).fold(c_one::<R>(), |acc, _| acc * b.clone())
            }
        })
    }

    /// Integer value of an exponent expression.
    pub fn integer_exponent(&self) -> Result<i32, ParseError> {
        let v = self.constant::<BigRational>()?;
        if !v.im.is_zero() || !v.re.is_integer() || v.re.abs() > BigRational::from_integer(1000.into()) {
            return err(0, "exponent must be a small integer");
        }
        Ok(v.re.to_integer().to_i32().unwrap())
    }

    /// Rational function in `x`; `h` and `T` are rejected.
    pub fn to_ratfunc<R: Real>(&self) -> Result<RatFunc<R>, ParseError> {
        Ok(match self {
            Expr::Num(_) | Expr::I => RatFunc::constant(self.constant::<R>()?),
            Expr::X => RatFunc::from_poly(Poly::x()),
            Expr::H | Expr::T => return err(0, "ℏ and T are not allowed in a rational function"),
            Expr::Add(a, b) => a.to_ratfunc::<R>()?.add(&b.to_ratfunc::<R>()?),
            Expr::Sub(a, b) => a.to_ratfunc::<R>()?.sub(&b.to_ratfunc::<R>()?),
            Expr::Mul(a, b) => a.to_ratfunc::<R>()?.mul(&b.to_ratfunc::<R>()?),
            Expr::Div(a, b) => match a.to_ratfunc::<R>()?.div(&b.to_ratfunc::<R>()?) {
                Some(v) => v,
                None => return err(0, "division by zero"),
            },
            Expr::Neg(a) => a.to_ratfunc::<R>()?.neg(),
            Expr::Pow(a, e) => match a.to_ratfunc::<R>()?.pow(e.integer_exponent()?) {
                Some(v) => v,
                None => return err(0, "zero to a negative power"),
            },
        })
    }
}

/// Parses a rational function of `x`.
pub fn parse_ratfunc<R: Real>(s: &str) -> Result<RatFunc<R>, ParseError> {
    parse_expr(s)?.to_ratfunc().map_err(|e| ParseError { pos: e.pos, msg: format!("{} in '{s}'", e.msg) })
}

/// Parses a complex constant.
pub fn parse_constant<R: Real>(s: &str) -> Result<C<R>, ParseError> {
    parse_expr(s)?.constant().map_err(|e| ParseError { pos: e.pos, msg: format!("{} in '{s}'", e.msg) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c_int;

    type Q = BigRational;

    #[test]
    fn parses_polynomials() {
        let f = parse_ratfunc::<Q>("x^2 - 1").unwrap();
        assert_eq!(f.to_string(), "x^2 - 1");
        let g = parse_ratfunc::<Q>("2x(x+1) - 3/x").unwrap();
        assert_eq!(g.eval(&c_int(1)).unwrap(), c_int(1));
        let h = parse_ratfunc::<Q>("1/2*x^2").unwrap();
        assert_eq!(h.derivative(), parse_ratfunc::<Q>("x").unwrap());
    }

    #[test]
    fn complex_constants() {
        let z = parse_constant::<Q>("(1+2i)*(1-2i)").unwrap();
        assert_eq!(z, c_int(5));
        let w = parse_constant::<f64>("1.5e-1").unwrap();
        assert!((w.re - 0.15).abs() < 1e-15);
    }

    #[test]
    fn errors_are_reported() {
        assert!(parse_expr("x +").is_err());
        assert!(parse_expr("x $ 2").is_err());
        assert!(parse_expr("foo").is_err());
        assert!(parse_ratfunc::<Q>("h*x").is_err());
        assert!(parse_ratfunc::<Q>("1/(x-x)").is_err());
        assert!(parse_expr("(x").is_err());
    }
}
