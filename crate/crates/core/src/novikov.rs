//! Cutoff-truncated Novikov ring elements `Σ a_c T^c`.
//!
//! An element is a class modulo `T^{≥E}`: exponents `c` live in an exponent
//! cone (the polar dual of the sector cone) and are kept only while the
//! directional value `Re(c · conj(direction))` stays below the cutoff `E`.
//! Cone and cutoff are part of the value, and binary operations insist that
//! they match.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeRecord, ConicRegion, ANGLE_TOL_RAD};
use crate::ring::RingElem;
use crate::scalar::{c_inv, c_is_zero, c_near, c_one, c_real, c_to_f64, c_zero, parse_real, Real, C};

/// Exponent collision tolerance in floating modes.
pub const EXPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NovikovError {
    #[error("operands live over different exponent cones")]
    ConeMismatch,
    #[error("operands use different cutoffs")]
    CutoffMismatch,
    #[error("exponent cone is not closed under addition")]
    NonConvexCone,
    #[error("element is not a unit (valuation {0})")]
    NotAUnit(String),
    #[error("target exponent cone does not contain the source cone")]
    ConeNotContained,
    #[error("exponent {0} lies outside the exponent cone")]
    ExponentOutsideCone(String),
    #[error("cutoff must be positive")]
    InvalidCutoff,
    #[error("logarithm needs constant term 1")]
    NotUnipotent,
    #[error("malformed record: {0}")]
    Record(String),
}

/// `+∞` for the zero element, otherwise the least directional exponent value.
#[derive(Debug, Clone, PartialEq)]
pub enum Valuation<R> {
    Finite(R),
    Infinite,
}

impl<R: Real> Valuation<R> {
    pub fn finite(&self) -> Option<&R> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Valuation::Finite(v) => v.to_f64_lossy(),
            Valuation::Infinite => f64::INFINITY,
        }
    }
}

impl<R: Real> PartialOrd for Valuation<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Valuation::Infinite, Valuation::Infinite) => Some(Ordering::Equal),
            (Valuation::Infinite, _) => Some(Ordering::Greater),
            (_, Valuation::Infinite) => Some(Ordering::Less),
            (Valuation::Finite(a), Valuation::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl<R: Real> fmt::Display for Valuation<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "+inf"),
        }
    }
}

/// Sort key `(directional value, transverse value)` of an exponent.
pub(crate) fn exponent_key<R: Real>(cone: &ConicRegion<R>, c: &C<R>) -> (R, R) {
    (cone.directional_value(c), cone.transverse_value(c))
}

pub(crate) fn exponents_equal<R: Real>(a: &C<R>, b: &C<R>) -> bool {
    if R::EXACT {
        a == b
    } else {
        c_near(a, b, EXPONENT_TOL)
    }
}

/// Whether a directional value has reached the cutoff (tolerant in float mode).
pub(crate) fn at_or_above_cutoff<R: Real>(value: &R, cutoff: &R) -> bool {
    if R::EXACT {
        value >= cutoff
    } else {
        value.to_f64_lossy() >= cutoff.to_f64_lossy() - EXPONENT_TOL
    }
}

/// Sorts by exponent key, merges equal exponents, drops zeros and
/// everything at or above the cutoff.
pub(crate) fn normalize_terms<R: Real, V: Clone>(
    mut terms: Vec<(C<R>, V)>,
    cone: &ConicRegion<R>,
    cutoff: &R,
    add: impl Fn(&V, &V) -> V,
    is_zero: impl Fn(&V) -> bool,
) -> Vec<(C<R>, V)> {
    terms.retain(|(c, v)| !is_zero(v) && !at_or_above_cutoff(&cone.directional_value(c), cutoff));
    terms.sort_by(|(a, _), (b, _)| {
        let (ka, kb) = (exponent_key(cone, a), exponent_key(cone, b));
        ka.partial_cmp(&kb).unwrap_or(Ordering::Equal)
    });
    let mut out: Vec<(C<R>, V)> = Vec::with_capacity(terms.len());
    for (c, v) in terms {
        // in float mode a near-equal exponent can sit behind others with the
        // same directional value but a different transverse one
        let value = cone.directional_value(&c).to_f64_lossy();
        let window = if R::EXACT { 1 } else { out.len() };
        let same = out
            .iter()
            .rev()
            .take(window)
            .take_while(|(lc, _)| {
                (cone.directional_value(lc).to_f64_lossy() - value).abs() <= 1e3 * EXPONENT_TOL * (1.0 + value.abs())
            })
            .position(|(lc, _)| exponents_equal(lc, &c));
        match same {
            Some(k) => {
                let i = out.len() - 1 - k;
                out[i].1 = add(&out[i].1, &v);
            }
            None => out.push((c, v)),
        }
    }
    out.retain(|(_, v)| !is_zero(v));
    out
}

/// Truncated element of the Novikov ring over an exponent cone.
#[derive(Debug, Clone, PartialEq)]
pub struct NovikovElement<R: Real> {
    terms: Vec<(C<R>, C<R>)>,
    cone: ConicRegion<R>,
    cutoff: R,
}

impl<R: Real> NovikovElement<R> {
    pub fn zero(cone: ConicRegion<R>, cutoff: R) -> Result<Self, NovikovError> {
        if cutoff <= R::zero() {
            return Err(NovikovError::InvalidCutoff);
        }
        Ok(Self { terms: vec![], cone, cutoff })
    }

    pub fn constant(value: C<R>, cone: ConicRegion<R>, cutoff: R) -> Result<Self, NovikovError> {
        Self::monomial(value, c_zero(), cone, cutoff)
    }

    /// `coefficient · T^exponent`.
    pub fn monomial(coefficient: C<R>, exponent: C<R>, cone: ConicRegion<R>, cutoff: R) -> Result<Self, NovikovError> {
        Self::from_terms(vec![(exponent, coefficient)], cone, cutoff)
    }

    /// Builds from `(exponent, coefficient)` pairs, merging repeats.
    pub fn from_terms(terms: Vec<(C<R>, C<R>)>, cone: ConicRegion<R>, cutoff: R) -> Result<Self, NovikovError> {
        if cutoff <= R::zero() {
            return Err(NovikovError::InvalidCutoff);
        }
        if let Some((c, _)) = terms.iter().find(|(c, _)| !cone.contains(c)) {
            return Err(NovikovError::ExponentOutsideCone(format!("{c}")));
        }
        let terms = normalize_terms(terms, &cone, &cutoff, |a, b| a.clone() + b.clone(), c_is_zero);
        Ok(Self { terms, cone, cutoff })
    }

    fn with_terms(&self, terms: Vec<(C<R>, C<R>)>) -> Self {
        let terms = normalize_terms(terms, &self.cone, &self.cutoff, |a, b| a.clone() + b.clone(), c_is_zero);
        Self { terms, cone: self.cone.clone(), cutoff: self.cutoff.clone() }
    }

    pub fn terms(&self) -> &[(C<R>, C<R>)] {
        &self.terms
    }

    pub fn cone(&self) -> &ConicRegion<R> {
        &self.cone
    }

    pub fn cutoff(&self) -> &R {
        &self.cutoff
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `T^exponent` (zero when absent).
    pub fn coefficient(&self, exponent: &C<R>) -> C<R> {
        self.terms.iter().find(|(c, _)| exponents_equal(c, exponent)).map_or_else(c_zero, |(_, a)| a.clone())
    }

    /// Coefficient of `T^0`.
    pub fn constant_term(&self) -> C<R> {
        self.coefficient(&c_zero())
    }

    fn check_compatible(&self, other: &Self) -> Result<(), NovikovError> {
        if !self.cone.same_region(&other.cone) || !c_near(self.cone.direction(), other.cone.direction(), ANGLE_TOL_RAD) {
            return Err(NovikovError::ConeMismatch);
        }
        if !self.cutoff.near(&other.cutoff, EXPONENT_TOL) {
            return Err(NovikovError::CutoffMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, NovikovError> {
        self.check_compatible(other)?;
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().cloned());
        Ok(self.with_terms(t))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, NovikovError> {
        self.try_add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(c, a)| (c.clone(), -a.clone())).collect(), ..self.clone() }
    }

    pub fn scale(&self, k: &C<R>) -> Self {
        self.with_terms(self.terms.iter().map(|(c, a)| (c.clone(), a.clone() * k.clone())).collect())
    }

    /// Multiplies by `T^shift` (shift must stay in the cone).
    pub fn shift(&self, shift: &C<R>) -> Self {
        self.with_terms(self.terms.iter().map(|(c, a)| (c.clone() + shift.clone(), a.clone())).collect())
    }

    /// Convolution product, truncated at the cutoff.
    pub fn try_mul(&self, other: &Self) -> Result<Self, NovikovError> {
        self.check_compatible(other)?;
        if !self.cone.hull().same_region(&self.cone) {
            return Err(NovikovError::NonConvexCone);
        }
        let mut t = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ca, a) in &self.terms {
            for (cb, b) in &other.terms {
                let c = ca.clone() + cb.clone();
                if at_or_above_cutoff(&self.cone.directional_value(&c), &self.cutoff) {
                    continue;
                }
                t.push((c, a.clone() * b.clone()));
            }
        }
        Ok(self.with_terms(t))
    }

    pub fn valuation(&self) -> Valuation<R> {
        self.terms
            .iter()
            .map(|(c, _)| self.cone.directional_value(c))
            .fold(Valuation::Infinite, |acc, v| match acc {
                Valuation::Infinite => Valuation::Finite(v),
                Valuation::Finite(a) => Valuation::Finite(R::min_of(a, v)),
            })
    }

    /// Geometric-series inverse `a₀⁻¹ Σ (−m)^k` for `a = a₀(1 + m)`.
    pub fn invert(&self) -> Result<Self, NovikovError> {
        let a0 = self.constant_term();
        let Some(a0_inv) = c_inv(&a0) else {
            return Err(NovikovError::NotAUnit(self.valuation().to_string()));
        };
        let zero = c_zero::<R>();
        if self.terms.iter().any(|(c, _)| !exponents_equal(c, &zero) && self.cone.directional_value(c) <= R::zero()) {
            // T^c with c on the boundary of the properness half-plane never dies out
            return Err(NovikovError::NotAUnit("boundary exponent in leading part".into()));
        }
        let m = self.scale(&a0_inv).try_sub(&self.one())?;
        let neg_m = m.neg();
        let mut power = self.one();
        let mut sum = self.one();
        loop {
            power = power.try_mul(&neg_m)?;
            if power.is_zero() {
                break;
            }
            sum = sum.try_add(&power)?;
        }
        Ok(sum.scale(&a0_inv))
    }

    /// `log(1 + m) = Σ (−1)^{k+1} m^k / k` for elements with constant term 1.
    pub fn log_unipotent(&self) -> Result<Self, NovikovError> {
        if self.constant_term() != c_one() {
            return Err(NovikovError::NotUnipotent);
        }
        let m = self.try_sub(&self.one())?;
        let mut power = self.one();
        let mut sum = self.zero_elem();
        let mut k = 1i64;
        loop {
            power = power.try_mul(&m)?;
            if power.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { R::one() } else { -R::one() };
            sum = sum.try_add(&power.scale(&c_real(sign / R::from_i64(k).unwrap())))?;
            k += 1;
        }
        Ok(sum)
    }

    /// Restriction along an inclusion of sectoroids: the same terms over the
    /// larger exponent cone `polar_dual(smaller_cone)`. Direction and cutoff
    /// are kept, so truncation commutes with the map.
    pub fn restrict(&self, smaller_cone: &ConicRegion<R>) -> Result<Self, NovikovError> {
        let target = smaller_cone.polar_dual();
        if !self.cone.is_subcone_of(&target) {
            return Err(NovikovError::ConeNotContained);
        }
        Ok(Self { terms: self.terms.clone(), cone: target.with_direction(self.cone.direction().clone()), cutoff: self.cutoff.clone() })
    }

    pub fn one(&self) -> Self {
        self.with_terms(vec![(c_zero(), c_one())])
    }

    pub fn zero_elem(&self) -> Self {
        Self { terms: vec![], cone: self.cone.clone(), cutoff: self.cutoff.clone() }
    }

    /// Numerical value at `T = e^{-1/ℏ}`, i.e. `Σ a_c e^{-c/ℏ}`.
    pub fn eval_at_hbar(&self, hbar: Complex<f64>) -> Complex<f64> {
        self.terms.iter().map(|(c, a)| c_to_f64(a) * (-c_to_f64(c) / hbar).exp()).sum()
    }

    /// Same terms over another scalar field.
    pub fn convert<S: Real>(&self) -> NovikovElement<S> {
        let cone = self.cone.convert::<S>();
        let cv = |z: &C<R>| -> C<S> {
            if S::EXACT && R::EXACT {
                Complex::new(parse_real(&z.re.to_string()).unwrap(), parse_real(&z.im.to_string()).unwrap())
            } else {
                crate::scalar::c_from_f64(c_to_f64(z))
            }
        };
        let cutoff = if S::EXACT && R::EXACT { parse_real(&self.cutoff.to_string()).unwrap() } else { S::from_f64_lossy(self.cutoff.to_f64_lossy()) };
        let terms = normalize_terms(self.terms.iter().map(|(c, a)| (cv(c), cv(a))).collect(), &cone, &cutoff, |a, b| a.clone() + b.clone(), c_is_zero);
        NovikovElement { terms, cone, cutoff }
    }

    pub fn to_float(&self) -> NovikovElement<f64> {
        self.convert::<f64>()
    }

    pub fn record(&self) -> NovikovRecord {
        NovikovRecord {
            mode: R::MODE.to_string(),
            cutoff: ScalarRepr::of(&self.cutoff),
            cone: self.cone.record(),
            terms: self
                .terms
                .iter()
                .map(|(c, a)| TermRecord {
                    re_exp: ScalarRepr::of(&c.re),
                    im_exp: ScalarRepr::of(&c.im),
                    re_coef: ScalarRepr::of(&a.re),
                    im_coef: ScalarRepr::of(&a.im),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &NovikovRecord) -> Result<Self, NovikovError> {
        let bad = |what: &str| NovikovError::Record(what.to_string());
        let cone = rec.cone.to_region::<R>().ok_or_else(|| bad("cone"))?;
        let cutoff = rec.cutoff.value::<R>().ok_or_else(|| bad("cutoff"))?;
        let mut terms = Vec::new();
        for t in &rec.terms {
            let e = Complex::new(t.re_exp.value().ok_or_else(|| bad("exponent"))?, t.im_exp.value().ok_or_else(|| bad("exponent"))?);
            let a = Complex::new(t.re_coef.value().ok_or_else(|| bad("coefficient"))?, t.im_coef.value().ok_or_else(|| bad("coefficient"))?);
            terms.push((e, a));
        }
        Self::from_terms(terms, cone, cutoff)
    }
}

impl<R: Real> fmt::Display for NovikovElement<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, a)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({a})·T^({c})")?;
        }
        Ok(())
    }
}

impl<R: Real> RingElem for NovikovElement<R> {
    fn zero_like(&self) -> Self {
        self.zero_elem()
    }
    fn one_like(&self) -> Self {
        self.one()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn radd(&self, o: &Self) -> Self {
        self.try_add(o).expect("compatible Novikov operands")
    }
    fn rsub(&self, o: &Self) -> Self {
        self.try_sub(o).expect("compatible Novikov operands")
    }
    fn rmul(&self, o: &Self) -> Self {
        self.try_mul(o).expect("compatible Novikov operands")
    }
    fn rneg(&self) -> Self {
        self.neg()
    }
    fn try_inv(&self) -> Option<Self> {
        self.invert().ok()
    }
    fn unit_weight(&self) -> f64 {
        let a0 = self.constant_term();
        if c_is_zero(&a0) {
            0.0
        } else {
            c_to_f64(&a0).norm()
        }
    }
}

/// Scalar in a JSON record: a float, or an exact rational written as `"p/q"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarRepr {
    Float(f64),
    Exact(String),
}

impl ScalarRepr {
    pub fn of<R: Real>(v: &R) -> Self {
        if R::EXACT {
            ScalarRepr::Exact(v.to_string())
        } else {
            ScalarRepr::Float(v.to_f64_lossy())
        }
    }

    pub fn value<R: Real>(&self) -> Option<R> {
        match self {
            ScalarRepr::Float(x) => {
                if R::EXACT {
                    // shortest round-trip decimal keeps literals like 0.1 exact
                    parse_real(&format!("{x:?}"))
                } else {
                    Some(R::from_f64_lossy(*x))
                }
            }
            ScalarRepr::Exact(s) => parse_real(s),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            ScalarRepr::Float(x) => *x,
            ScalarRepr::Exact(s) => crate::scalar::parse_rational(s).map_or(f64::NAN, |q| q.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub re_exp: ScalarRepr,
    pub im_exp: ScalarRepr,
    pub re_coef: ScalarRepr,
    pub im_coef: ScalarRepr,
}

/// JSON shape `{cutoff, cone, terms: [{re_exp, im_exp, re_coef, im_coef}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovikovRecord {
    pub mode: String,
    pub cutoff: ScalarRepr,
    pub cone: ConeRecord,
    pub terms: Vec<TermRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    fn lam0(cutoff: Q, terms: &[((i64, i64), (i64, i64))]) -> NovikovElement<Q> {
        // exponents given as (numerator, denominator) on the real axis
        NovikovElement::from_terms(
            terms.iter().map(|&((en, ed), (an, ad))| (c_real(q(en, ed)), c_real(q(an, ad)))).collect(),
            ConicRegion::nonnegative_reals(),
            cutoff,
        )
        .unwrap()
    }

    #[test]
    fn add_examples() {
        let e = q(10, 1);
        let a = lam0(e.clone(), &[((1, 2), (1, 1))]);
        let b = lam0(e.clone(), &[((1, 2), (2, 1))]);
        assert_eq!(a.try_add(&b).unwrap(), lam0(e.clone(), &[((1, 2), (3, 1))]));
        let c = lam0(e.clone(), &[((1, 1), (1, 1))]);
        assert!(c.try_add(&c.neg()).unwrap().is_zero());
    }

    #[test]
    fn complex_exponents_stay_distinct() {
        let cone = ConicRegion::closed_arc(q(-1, 2), q(1, 2));
        let e = q(10, 1);
        let a = NovikovElement::monomial(c_one(), cplx(q(1, 1), q(1, 1)), cone.clone(), e.clone()).unwrap();
        let b = NovikovElement::monomial(c_one(), cplx(q(1, 1), q(-1, 1)), cone.clone(), e.clone()).unwrap();
        assert_eq!(a.try_add(&b).unwrap().terms().len(), 2);
        let p = a.try_mul(&b).unwrap();
        assert_eq!(p.terms(), &[(c_real(q(2, 1)), c_one())]);
    }

    #[test]
    fn product_truncates_at_cutoff() {
        let e = q(4, 1);
        let a = lam0(e.clone(), &[((0, 1), (1, 1)), ((1, 1), (-1, 1))]);
        let b = lam0(e.clone(), &[((0, 1), (1, 1)), ((1, 1), (1, 1)), ((2, 1), (1, 1)), ((3, 1), (1, 1))]);
        assert_eq!(a.try_mul(&b).unwrap(), a.one());
        let t2 = lam0(q(3, 1), &[((2, 1), (1, 1))]);
        assert!(t2.try_mul(&t2).unwrap().is_zero());
    }

    #[test]
    fn valuation_examples() {
        let e = q(10, 1);
        assert_eq!(lam0(e.clone(), &[((1, 2), (1, 1)), ((2, 1), (1, 1))]).valuation(), Valuation::Finite(q(1, 2)));
        assert_eq!(lam0(e.clone(), &[]).valuation(), Valuation::Infinite);
        assert_eq!(lam0(e.clone(), &[((0, 1), (3, 1)), ((1, 1), (1, 1))]).valuation(), Valuation::Finite(q(0, 1)));
    }

    #[test]
    fn inversion() {
        let e = q(7, 2);
        let two = lam0(e.clone(), &[((0, 1), (2, 1))]);
        assert_eq!(two.invert().unwrap(), lam0(e.clone(), &[((0, 1), (1, 2))]));
        let a = lam0(e.clone(), &[((0, 1), (1, 1)), ((1, 1), (1, 1))]);
        let inv = a.invert().unwrap();
        assert_eq!(inv, lam0(e.clone(), &[((0, 1), (1, 1)), ((1, 1), (-1, 1)), ((2, 1), (1, 1)), ((3, 1), (-1, 1))]));
        assert_eq!(a.try_mul(&inv).unwrap(), a.one());
        assert!(matches!(lam0(e.clone(), &[((1, 1), (1, 1))]).invert(), Err(NovikovError::NotAUnit(_))));
        assert!(matches!(lam0(e, &[]).invert(), Err(NovikovError::NotAUnit(_))));
    }

    #[test]
    fn float_merge_skips_over_transverse_neighbours() {
        let cone = ConicRegion::<f64>::ray(0.0).polar_dual();
        let terms = vec![
            (Complex::new(2.6666666666666665, -2.0), Complex::new(1.0, 0.0)),
            (Complex::new(2.6666666666666665, 0.0), Complex::new(1.0, 0.0)),
            (Complex::new(2.666666666666667, -2.0), Complex::new(-1.0, 0.0)),
        ];
        let a = NovikovElement::from_terms(terms, cone, 3.0).unwrap();
        assert_eq!(a.terms().len(), 1);
        assert_eq!(a.terms()[0].0, Complex::new(2.6666666666666665, 0.0));
    }

    #[test]
    fn mismatches_are_errors() {
        let a = lam0(q(3, 1), &[((1, 1), (1, 1))]);
        let b = lam0(q(4, 1), &[((1, 1), (1, 1))]);
        assert_eq!(a.try_add(&b), Err(NovikovError::CutoffMismatch));
        let c = NovikovElement::monomial(c_one(), c_real(q(1, 1)), ConicRegion::closed_arc(q(-1, 4), q(1, 4)), q(3, 1)).unwrap();
        assert_eq!(a.try_mul(&c), Err(NovikovError::ConeMismatch));
        let nonconvex = ConicRegion::from_arcs(vec![(q(0, 1), q(0, 1)), (q(1, 2), q(0, 1))], true);
        let d = NovikovElement::monomial(c_one(), c_real(q(1, 1)), nonconvex, q(3, 1)).unwrap();
        assert_eq!(d.try_mul(&d), Err(NovikovError::NonConvexCone));
        assert!(matches!(
            NovikovElement::monomial(c_one(), c_real(q(-1, 1)), ConicRegion::nonnegative_reals(), q(3, 1)),
            Err(NovikovError::ExponentOutsideCone(_))
        ));
    }

    #[test]
    fn restriction_into_half_plane_cone() {
        let a = lam0(q(5, 1), &[((0, 1), (1, 1)), ((1, 1), (1, 1))]);
        // a thin sector around the positive real axis sits inside Re > 0
        let thin = ConicRegion::open_arc(q(-1, 100), q(1, 100));
        let r = a.restrict(&thin).unwrap();
        assert_eq!(r.terms(), a.terms());
        assert!(r.cone().contains(&cplx(q(1, 1), q(10, 1))));
        let wide = ConicRegion::open_arc(q(-1, 1), q(1, 2));
        assert_eq!(a.restrict(&wide), Err(NovikovError::ConeNotContained));
    }

    #[test]
    fn logarithm_of_unipotent() {
        let a = lam0(q(3, 1), &[((0, 1), (1, 1)), ((1, 1), (1, 1))]);
        let l = a.log_unipotent().unwrap();
        assert_eq!(l, lam0(q(3, 1), &[((1, 1), (1, 1)), ((2, 1), (-1, 2))]));
    }

    #[test]
    fn record_roundtrip() {
        let a = lam0(q(3, 1), &[((0, 1), (1, 3)), ((1, 2), (-2, 1))]);
        let json = serde_json::to_string(&a.record()).unwrap();
        let back: NovikovRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(NovikovElement::<Q>::from_record(&back).unwrap(), a);
        let f = a.to_float();
        assert!((f.terms()[0].1.re - 1.0 / 3.0).abs() < 1e-15);
        let _ = Q::from_i64(0);
    }
}
