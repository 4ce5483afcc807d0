//! Truncated Taylor series `Σ_{k<prec} a_k t^k` in a local coordinate
//! `t = x − x₀`, with precision tracking: differentiation loses one known
//! coefficient, integration gains one, products keep the smaller precision.

use std::fmt;

use num_complex::Complex64;

use crate::poly::{fmt_complex, Poly};
use crate::ring::RingElem;
use crate::scalar::{c_inv, c_is_zero, c_one, c_real, c_to_f64, c_zero, inv_factorial, Real, C};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet<R: Real> {
    c: Vec<C<R>>,
}

impl<R: Real> Jet<R> {
    /// Jet with exactly `c.len()` known coefficients.
    pub fn from_coeffs(c: Vec<C<R>>) -> Self {
        Self { c }
    }

    pub fn zero(prec: usize) -> Self {
        Self { c: vec![c_zero(); prec] }
    }

    pub fn constant(v: C<R>, prec: usize) -> Self {
        let mut j = Self::zero(prec);
        if prec > 0 {
            j.c[0] = v;
        }
        j
    }

    /// The coordinate `t` itself.
    pub fn t(prec: usize) -> Self {
        let mut j = Self::zero(prec);
        if prec > 1 {
            j.c[1] = c_one();
        }
        j
    }

    /// Jet of a polynomial already expressed in `t`.
    pub fn from_poly(p: &Poly<R>, prec: usize) -> Self {
        Self { c: (0..prec).map(|k| p.coeff(k)).collect() }
    }

    pub fn prec(&self) -> usize {
        self.c.len()
    }

    pub fn coeffs(&self) -> &[C<R>] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> C<R> {
        self.c.get(k).cloned().unwrap_or_else(c_zero)
    }

    /// Value at `t = 0`.
    pub fn value(&self) -> C<R> {
        self.coeff(0)
    }

    pub fn truncate(&self, prec: usize) -> Self {
        Self { c: self.c.iter().take(prec).cloned().collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(c_is_zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { c: self.c.iter().zip(&o.c).map(|(a, b)| a.clone() + b.clone()).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { c: self.c.iter().zip(&o.c).map(|(a, b)| a.clone() - b.clone()).collect() }
    }

    pub fn neg(&self) -> Self {
        Self { c: self.c.iter().map(|a| -a.clone()).collect() }
    }

    pub fn scale(&self, s: &C<R>) -> Self {
        Self { c: self.c.iter().map(|a| a.clone() * s.clone()).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.prec().min(o.prec());
        let mut c = vec![c_zero::<R>(); n];
        for (i, a) in self.c.iter().take(n).enumerate() {
            if c_is_zero(a) {
                continue;
            }
            for (j, b) in o.c.iter().take(n - i).enumerate() {
                if !c_is_zero(b) {
                    c[i + j] = c[i + j].clone() + a.clone() * b.clone();
                }
            }
        }
        Self { c }
    }

    pub fn derivative(&self) -> Self {
        Self {
            c: self.c.iter().enumerate().skip(1).map(|(k, a)| a.clone() * c_real(R::from_usize(k).unwrap())).collect(),
        }
    }

    /// Antiderivative with value `v0` at `t = 0`.
    pub fn integral(&self, v0: C<R>) -> Self {
        let mut c = vec![v0];
        c.extend(self.c.iter().enumerate().map(|(k, a)| a.clone() * c_real(R::one() / R::from_usize(k + 1).unwrap())));
        Self { c }
    }

    /// Multiplicative inverse; `None` when the constant term vanishes.
    pub fn inv(&self) -> Option<Self> {
        let n = self.prec();
        if n == 0 {
            return Some(self.clone());
        }
        let a0_inv = c_inv(&self.c[0])?;
        let mut b = vec![c_zero::<R>(); n];
        b[0] = a0_inv.clone();
        for k in 1..n {
            let mut s = c_zero::<R>();
            for j in 1..=k {
                if !c_is_zero(&self.c[j]) {
                    s = s + self.c[j].clone() * b[k - j].clone();
                }
            }
            b[k] = -(s * a0_inv.clone());
        }
        Some(Self { c: b })
    }

    /// `exp` of the jet. The constant term must vanish in exact mode.
    pub fn exp(&self) -> Option<Self> {
        let n = self.prec();
        if n == 0 {
            return Some(self.clone());
        }
        let a0 = self.c[0].clone();
        let factor = if c_is_zero(&a0) {
            c_one()
        } else if R::EXACT {
            return None;
        } else {
            crate::scalar::c_from_f64(c_to_f64(&a0).exp())
        };
        let mut m = self.clone();
        m.c[0] = c_zero();
        // Σ m^k / k!, terminating because m has zero constant term
        let mut sum = Self::constant(c_one(), n);
        let mut power = Self::constant(c_one(), n);
        for k in 1..n {
            power = power.mul(&m);
            if power.is_zero() {
                break;
            }
            sum = sum.add(&power.scale(&inv_factorial(k)));
        }
        Some(sum.scale(&factor))
    }

    /// Linear ODE `y' = a·y + r` with `y(0) = y0`, solved by Taylor recursion.
    /// The result has precision `min(prec a, prec r) + 1`.
    pub fn solve_linear_ode(a: &Self, r: &Self, y0: C<R>) -> Self {
        let n = a.prec().min(r.prec());
        let mut y = Vec::with_capacity(n + 1);
        y.push(y0);
        for k in 0..n {
            let mut s = r.c[k].clone();
            for j in 0..=k {
                if !c_is_zero(&a.c[j]) {
                    s = s + a.c[j].clone() * y[k - j].clone();
                }
            }
            y.push(s * c_real(R::one() / R::from_usize(k + 1).unwrap()));
        }
        Self { c: y }
    }

    pub fn eval_f64(&self, t: Complex64) -> Complex64 {
        self.c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * t + c_to_f64(a))
    }

    pub fn to_f64(&self) -> Jet<f64> {
        Jet { c: self.c.iter().map(c_to_f64).collect() }
    }
}

impl<R: Real> fmt::Display for Jet<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (k, a) in self.c.iter().enumerate() {
            if c_is_zero(a) {
                continue;
            }
            parts.push(match k {
                0 => fmt_complex(a),
                1 => format!("{}*t", fmt_complex(a)),
                _ => format!("{}*t^{k}", fmt_complex(a)),
            });
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        write!(f, "{} + O(t^{})", parts.join(" + "), self.prec())
    }
}

impl<R: Real> RingElem for Jet<R> {
    fn zero_like(&self) -> Self {
        Self::zero(self.prec())
    }
    fn one_like(&self) -> Self {
        Self::constant(c_one(), self.prec())
    }
    fn is_zero(&self) -> bool {
        Jet::is_zero(self)
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
        self.inv()
    }
    fn unit_weight(&self) -> f64 {
        let a0 = self.value();
        if c_is_zero(&a0) {
            0.0
        } else if R::EXACT {
            1.0
        } else {
            c_to_f64(&a0).norm()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c_int;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> C<Q> {
        c_real(Q::new(n.into(), d.into()))
    }

    #[test]
    fn precision_tracking() {
        let a = Jet::<Q>::t(5);
        assert_eq!(a.derivative().prec(), 4);
        assert_eq!(a.integral(c_zero()).prec(), 6);
        assert_eq!(a.mul(&Jet::t(3)).prec(), 3);
    }

    #[test]
    fn exp_and_inverse() {
        let e = Jet::<Q>::t(5).exp().unwrap();
        assert_eq!(e.coeffs(), &[q(1, 1), q(1, 1), q(1, 2), q(1, 6), q(1, 24)]);
        let inv = e.inv().unwrap();
        assert_eq!(inv, Jet::<Q>::t(5).neg().exp().unwrap());
        assert!(Jet::constant(c_int::<Q>(1), 3).exp().is_none());
    }

    #[test]
    fn linear_ode_recursion() {
        // y' = -y, y(0) = 1
        let a = Jet::constant(c_int::<Q>(-1), 5);
        let y = Jet::solve_linear_ode(&a, &Jet::zero(5), c_int(1));
        assert_eq!(y.truncate(5), Jet::<Q>::t(5).neg().exp().unwrap());
        assert_eq!(y.prec(), 6);
    }
}
