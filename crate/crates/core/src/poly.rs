//! Univariate polynomials and rational functions in `x` with complex
//! coefficients over a [`Real`] field.
//!
//! In exact mode rational functions are kept in lowest terms with a monic
//! denominator. Floating modes skip the gcd reduction (it is numerically
//! meaningless) and only cancel constant denominators.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::jet::Jet;
use crate::novikov::ScalarRepr;
use crate::numeric::poly_roots;
use crate::ring::RingElem;
use crate::scalar::{c_inv, c_is_zero, c_one, c_real, c_to_f64, c_zero, Real, C};

/// Dense polynomial, coefficients from low to high degree, no trailing zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<R: Real> {
    c: Vec<C<R>>,
}

impl<R: Real> Poly<R> {
    pub fn from_coeffs(mut c: Vec<C<R>>) -> Self {
        while c.last().is_some_and(c_is_zero) {
            c.pop();
        }
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: vec![] }
    }

    pub fn one() -> Self {
        Self::constant(c_one())
    }

    pub fn constant(v: C<R>) -> Self {
        Self::from_coeffs(vec![v])
    }

    /// The variable `x`.
    pub fn x() -> Self {
        Self::monomial(c_one(), 1)
    }

    pub fn monomial(v: C<R>, k: usize) -> Self {
        let mut c = vec![c_zero(); k];
        c.push(v);
        Self::from_coeffs(c)
    }

    pub fn coeffs(&self) -> &[C<R>] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> C<R> {
        self.c.get(k).cloned().unwrap_or_else(c_zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.c.len() <= 1
    }

    pub fn leading(&self) -> C<R> {
        self.c.last().cloned().unwrap_or_else(c_zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.c.len().max(o.c.len());
        Self::from_coeffs((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        Self { c: self.c.iter().map(|a| -a.clone()).collect() }
    }

    pub fn scale(&self, s: &C<R>) -> Self {
        Self::from_coeffs(self.c.iter().map(|a| a.clone() * s.clone()).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![c_zero::<R>(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if c_is_zero(a) {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::from_coeffs(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| acc.mul(self))
    }

    pub fn derivative(&self) -> Self {
        Self::from_coeffs(
            self.c.iter().enumerate().skip(1).map(|(k, a)| a.clone() * c_real(R::from_usize(k).unwrap())).collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Self {
        let mut c = vec![c_zero()];
        c.extend(self.c.iter().enumerate().map(|(k, a)| a.clone() * c_real(R::one() / R::from_usize(k + 1).unwrap())));
        Self::from_coeffs(c)
    }

    pub fn eval(&self, x: &C<R>) -> C<R> {
        self.c.iter().rev().fold(c_zero(), |acc, a| acc * x.clone() + a.clone())
    }

    pub fn eval_f64(&self, x: Complex64) -> Complex64 {
        self.c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * x + c_to_f64(a))
    }

    /// Coefficients of `p(x0 + t)` in `t`.
    pub fn taylor_shift(&self, x0: &C<R>) -> Self {
        // repeated synthetic division
        let mut c = self.c.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let v = c[j].clone() + x0.clone() * c[j + 1].clone();
                c[j] = v;
            }
        }
        Self::from_coeffs(c)
    }

    /// Euclidean division `self = q·d + r`.
    pub fn divrem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let dl_inv = c_inv(&d.leading()).expect("nonzero leading coefficient");
        let dd = d.c.len() - 1;
        let mut r = self.c.clone();
        if r.len() <= dd {
            return (Self::zero(), self.clone());
        }
        let mut q = vec![c_zero::<R>(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let f = r[k + dd].clone() * dl_inv.clone();
            if c_is_zero(&f) {
                continue;
            }
            for (j, dc) in d.c.iter().enumerate() {
                r[k + j] = r[k + j].clone() - f.clone() * dc.clone();
            }
            // the leading slot is exactly zero in exact mode; force it in float
            r[k + dd] = c_zero();
            q[k] = f;
        }
        (Self::from_coeffs(q), Self::from_coeffs(r))
    }

    pub fn monic(&self) -> Self {
        match c_inv(&self.leading()) {
            Some(inv) => self.scale(&inv),
            None => Self::zero(),
        }
    }

    /// Monic gcd (exact mode); floating modes return 1.
    pub fn gcd(&self, o: &Self) -> Self {
        if !R::EXACT {
            return Self::one();
        }
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.divrem(&b).1;
            a = b;
            b = r;
        }
        if a.is_zero() {
            Self::one()
        } else {
            a.monic()
        }
    }

    /// Numerical roots, sorted by (re, im).
    pub fn roots_f64(&self) -> Vec<Complex64> {
        poly_roots(&self.c.iter().map(c_to_f64).collect::<Vec<_>>())
    }

    pub fn convert<S: Real>(&self) -> Poly<S> {
        Poly::from_coeffs(self.c.iter().map(convert_c).collect())
    }

    pub fn record(&self) -> Vec<[ScalarRepr; 2]> {
        self.c.iter().map(|z| [ScalarRepr::of(&z.re), ScalarRepr::of(&z.im)]).collect()
    }

    pub fn from_record(rec: &[[ScalarRepr; 2]]) -> Option<Self> {
        let mut c = Vec::new();
        for [re, im] in rec {
            c.push(C::new(re.value()?, im.value()?));
        }
        Some(Self::from_coeffs(c))
    }
}

/// Exact-to-exact conversion keeps rationals; anything else goes through f64.
pub fn convert_c<R: Real, S: Real>(z: &C<R>) -> C<S> {
    if R::EXACT && S::EXACT {
        C::new(crate::scalar::parse_real(&z.re.to_string()).unwrap(), crate::scalar::parse_real(&z.im.to_string()).unwrap())
    } else {
        crate::scalar::c_from_f64(c_to_f64(z))
    }
}

/// Formats a complex coefficient compactly (`3`, `-1/2`, `2i`, `(1+2i)`).
pub fn fmt_complex<R: Real>(z: &C<R>) -> String {
    let re_zero = z.re.is_zero();
    let im_zero = z.im.is_zero();
    match (re_zero, im_zero) {
        (_, true) => format!("{}", z.re),
        (true, false) => {
            if z.im == R::one() {
                "i".to_string()
            } else if z.im == -R::one() {
                "-i".to_string()
            } else {
                format!("{}i", z.im)
            }
        }
        (false, false) => {
            if z.im < R::zero() {
                format!("({}-{}i)", z.re, -z.im.clone())
            } else {
                format!("({}+{}i)", z.re, z.im)
            }
        }
    }
}

impl<R: Real> fmt::Display for Poly<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, a) in self.c.iter().enumerate().rev() {
            if c_is_zero(a) {
                continue;
            }
            let mut s = fmt_complex(a);
            let neg = s.starts_with('-');
            if neg {
                s.remove(0);
            }
            if !first {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            } else if neg {
                write!(f, "-")?;
            }
            first = false;
            let var = match k {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{k}"),
            };
            if k == 0 {
                write!(f, "{s}")?;
            } else if s == "1" {
                write!(f, "{var}")?;
            } else {
                write!(f, "{s}*{var}")?;
            }
        }
        Ok(())
    }
}

/// Rational function `num/den` with monic denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct RatFunc<R: Real> {
    num: Poly<R>,
    den: Poly<R>,
}

impl<R: Real> RatFunc<R> {
    /// `None` when the denominator is zero.
    pub fn new(num: Poly<R>, den: Poly<R>) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        if num.is_zero() {
            return Some(Self::zero());
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = if g.is_constant() { (num, den) } else { (num.divrem(&g).0, den.divrem(&g).0) };
        let lead_inv = c_inv(&d.leading()).unwrap();
        n = n.scale(&lead_inv);
        d = d.scale(&lead_inv);
        if d.is_constant() {
            d = Poly::one();
        }
        Some(Self { num: n, den: d })
    }

    pub fn from_poly(p: Poly<R>) -> Self {
        Self { num: p, den: Poly::one() }
    }

    pub fn zero() -> Self {
        Self::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        Self::from_poly(Poly::one())
    }

    pub fn constant(v: C<R>) -> Self {
        Self::from_poly(Poly::constant(v))
    }

    pub fn x() -> Self {
        Self::from_poly(Poly::x())
    }

    pub fn num(&self) -> &Poly<R> {
        &self.num
    }

    pub fn den(&self) -> &Poly<R> {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn as_constant(&self) -> Option<C<R>> {
        if self.num.is_constant() && self.den.is_constant() {
            Some(self.num.coeff(0) * c_inv(&self.den.coeff(0)).unwrap())
        } else {
            None
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.den == o.den {
            return Self::new(self.num.add(&o.num), self.den.clone()).unwrap();
        }
        Self::new(self.num.mul(&o.den).add(&o.num.mul(&self.den)), self.den.mul(&o.den)).unwrap()
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        Self { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn scale(&self, s: &C<R>) -> Self {
        if c_is_zero(s) {
            return Self::zero();
        }
        Self { num: self.num.scale(s), den: self.den.clone() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        Self::new(self.num.mul(&o.num), self.den.mul(&o.den)).unwrap()
    }

    /// `None` when dividing by zero.
    pub fn div(&self, o: &Self) -> Option<Self> {
        if o.is_zero() {
            return None;
        }
        Self::new(self.num.mul(&o.den), self.den.mul(&o.num))
    }

    pub fn pow(&self, k: i32) -> Option<Self> {
        let base = if k < 0 { Self::one().div(self)? } else { self.clone() };
        Some((0..k.unsigned_abs()).fold(Self::one(), |acc, _| acc.mul(&base)))
    }

    pub fn derivative(&self) -> Self {
        let n = self.num.derivative().mul(&self.den).sub(&self.num.mul(&self.den.derivative()));
        Self::new(n, self.den.mul(&self.den)).unwrap()
    }

    /// `None` at a pole.
    pub fn eval(&self, x: &C<R>) -> Option<C<R>> {
        let d = self.den.eval(x);
        Some(self.num.eval(x) * c_inv(&d)?)
    }

    pub fn eval_f64(&self, x: Complex64) -> Complex64 {
        self.num.eval_f64(x) / self.den.eval_f64(x)
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots_f64()
    }

    /// Taylor jet at `x0` with `prec` coefficients; `None` at a pole.
    pub fn to_jet(&self, x0: &C<R>, prec: usize) -> Option<Jet<R>> {
        let n = Jet::from_poly(&self.num.taylor_shift(x0), prec);
        let d = Jet::from_poly(&self.den.taylor_shift(x0), prec);
        Some(n.mul(&d.inv()?))
    }

    pub fn convert<S: Real>(&self) -> RatFunc<S> {
        RatFunc::new(self.num.convert(), self.den.convert()).unwrap()
    }

    pub fn record(&self) -> RatFuncRecord {
        RatFuncRecord { num: self.num.record(), den: self.den.record() }
    }

    pub fn from_record(rec: &RatFuncRecord) -> Option<Self> {
        Self::new(Poly::from_record(&rec.num)?, Poly::from_record(&rec.den)?)
    }
}

/// Numerator/denominator coefficient lists, each entry `[re, im]`, low degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatFuncRecord {
    pub num: Vec<[ScalarRepr; 2]>,
    pub den: Vec<[ScalarRepr; 2]>,
}

impl<R: Real> fmt::Display for RatFunc<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_constant() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

impl<R: Real> RingElem for RatFunc<R> {
    fn zero_like(&self) -> Self {
        Self::zero()
    }
    fn one_like(&self) -> Self {
        Self::one()
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
    fn radd(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn rsub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn rmul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn rneg(&self) -> Self {
        self.neg()
    }
    fn try_inv(&self) -> Option<Self> {
        Self::one().div(self)
    }
    fn unit_weight(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }
}
