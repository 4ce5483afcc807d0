//! Truncated transseries `Σ_c e^{-c/ℏ} φ_c(ℏ)` where each `φ_c` is an
//! ℏ-Laurent polynomial over a parameter ring.
//!
//! Two truncations apply at once: exponents whose directional value reaches
//! the cutoff vanish, and ℏ-powers at or above `hbar_order` vanish. Negative
//! ℏ-powers are allowed down to `min_degree`; going below is an error rather
//! than a silent drop, since those are the dominant terms.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cone::{ConeRecord, ConicRegion, ANGLE_TOL_RAD};
use crate::expr::{parse_expr, Expr, ParseError};
use crate::jet::Jet;
use crate::novikov::{exponents_equal, normalize_terms, NovikovElement, ScalarRepr, EXPONENT_TOL};
use crate::poly::{convert_c, fmt_complex, RatFunc, RatFuncRecord};
use crate::ring::RingElem;
use crate::scalar::{c_from_f64, c_inv, c_is_zero, c_near, c_one, c_real, c_to_f64, c_zero, inv_factorial, Real, C};

/// Default lowest admissible ℏ-degree.
pub const DEFAULT_MIN_DEGREE: i32 = -8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsError {
    #[error("operands live over different exponent cones")]
    ConeMismatch,
    #[error("operands use different cutoffs")]
    CutoffMismatch,
    #[error("operands use different ℏ truncations")]
    OrderMismatch,
    #[error("exponent cone is not closed under addition")]
    NonConvexCone,
    #[error("ℏ-degree {0} is below the admissible minimum")]
    DegreeBelowCap(i32),
    #[error("not exponentiable: {0}")]
    NotExponentiable(String),
    #[error("not a unit: {0}")]
    NotAUnit(String),
    #[error("zero element has no subexponential support")]
    ZeroElement,
    #[error("invalid grade window: {0}")]
    InvalidWindow(String),
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("pole of a coefficient at the base point")]
    PoleAtBase,
    #[error("malformed record: {0}")]
    Record(String),
}

/// Coefficient rings usable inside a transseries.
pub trait ParamRing<R: Real>: RingElem + fmt::Display {
    /// Name used in serialized records.
    const KIND: &'static str;
    /// Embeds a scalar in the same context as `self`.
    fn scalar_like(&self, v: C<R>) -> Self;
    fn scale(&self, v: &C<R>) -> Self;
    /// `d/dx`.
    fn derivative(&self) -> Self;
    fn as_constant(&self) -> Option<C<R>>;
    /// `exp`, when it stays inside the ring.
    fn exp(&self) -> Option<Self>;
    fn record(&self) -> Value;
    fn from_record(v: &Value, proto: &Self) -> Option<Self>;
    /// Poles in the `x`-plane, if the ring has any.
    fn poles(&self) -> Vec<Complex64> {
        Vec::new()
    }
}

fn scalar_record<R: Real>(z: &C<R>) -> Value {
    serde_json::to_value([ScalarRepr::of(&z.re), ScalarRepr::of(&z.im)]).unwrap()
}

fn scalar_from_record<R: Real>(v: &Value) -> Option<C<R>> {
    let [re, im]: [ScalarRepr; 2] = serde_json::from_value(v.clone()).ok()?;
    Some(C::new(re.value()?, im.value()?))
}

impl<R: Real> ParamRing<R> for C<R> {
    const KIND: &'static str = "complex";
    fn scalar_like(&self, v: C<R>) -> Self {
        v
    }
    fn scale(&self, v: &C<R>) -> Self {
        self.clone() * v.clone()
    }
    fn derivative(&self) -> Self {
        c_zero()
    }
    fn as_constant(&self) -> Option<C<R>> {
        Some(self.clone())
    }
    fn exp(&self) -> Option<Self> {
        if c_is_zero(self) {
            Some(c_one())
        } else if R::EXACT {
            None
        } else {
            Some(c_from_f64(c_to_f64(self).exp()))
        }
    }
    fn record(&self) -> Value {
        scalar_record(self)
    }
    fn from_record(v: &Value, _proto: &Self) -> Option<Self> {
        scalar_from_record(v)
    }
}

impl<R: Real> ParamRing<R> for RatFunc<R> {
    const KIND: &'static str = "rational";
    fn scalar_like(&self, v: C<R>) -> Self {
        RatFunc::constant(v)
    }
    fn scale(&self, v: &C<R>) -> Self {
        RatFunc::scale(self, v)
    }
    fn derivative(&self) -> Self {
        RatFunc::derivative(self)
    }
    fn as_constant(&self) -> Option<C<R>> {
        RatFunc::as_constant(self)
    }
    fn exp(&self) -> Option<Self> {
        self.as_constant().and_then(|c| c.exp()).map(RatFunc::constant)
    }
    fn record(&self) -> Value {
        serde_json::to_value(RatFunc::record(self)).unwrap()
    }
    fn from_record(v: &Value, _proto: &Self) -> Option<Self> {
        let rec: RatFuncRecord = serde_json::from_value(v.clone()).ok()?;
        RatFunc::from_record(&rec)
    }
    fn poles(&self) -> Vec<Complex64> {
        RatFunc::poles(self)
    }
}

impl<R: Real> ParamRing<R> for Jet<R> {
    const KIND: &'static str = "jet";
    fn scalar_like(&self, v: C<R>) -> Self {
        Jet::constant(v, self.prec())
    }
    fn scale(&self, v: &C<R>) -> Self {
        Jet::scale(self, v)
    }
    fn derivative(&self) -> Self {
        Jet::derivative(self)
    }
    fn as_constant(&self) -> Option<C<R>> {
        if self.coeffs().iter().skip(1).all(c_is_zero) {
            Some(self.value())
        } else {
            None
        }
    }
    fn exp(&self) -> Option<Self> {
        Jet::exp(self)
    }
    fn record(&self) -> Value {
        Value::Array(self.coeffs().iter().map(scalar_record).collect())
    }
    fn from_record(v: &Value, _proto: &Self) -> Option<Self> {
        let arr = v.as_array()?;
        Some(Jet::from_coeffs(arr.iter().map(scalar_from_record).collect::<Option<Vec<_>>>()?))
    }
}

/// Shared truncation data.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation<R: Real> {
    pub cone: ConicRegion<R>,
    pub cutoff: R,
    pub hbar_order: i32,
    pub min_degree: i32,
}

impl<R: Real> Truncation<R> {
    pub fn new(cone: ConicRegion<R>, cutoff: R, hbar_order: i32) -> Result<Self, TsError> {
        Self::with_min_degree(cone, cutoff, hbar_order, DEFAULT_MIN_DEGREE)
    }

    pub fn with_min_degree(cone: ConicRegion<R>, cutoff: R, hbar_order: i32, min_degree: i32) -> Result<Self, TsError> {
        if cutoff <= R::zero() {
            return Err(TsError::InvalidTruncation("cutoff must be positive".into()));
        }
        if min_degree >= hbar_order {
            return Err(TsError::InvalidTruncation("min_degree must lie below hbar_order".into()));
        }
        Ok(Self { cone, cutoff, hbar_order, min_degree })
    }

    /// `Λ₀`-shaped truncation: exponent cone `ℝ≥0`.
    pub fn lambda0(cutoff: R, hbar_order: i32) -> Self {
        Self::new(ConicRegion::nonnegative_reals(), cutoff, hbar_order).expect("valid truncation")
    }

    fn compatible(&self, o: &Self) -> Result<(), TsError> {
        if !self.cone.same_region(&o.cone) || !c_near(self.cone.direction(), o.cone.direction(), ANGLE_TOL_RAD) {
            return Err(TsError::ConeMismatch);
        }
        if !self.cutoff.near(&o.cutoff, EXPONENT_TOL) {
            return Err(TsError::CutoffMismatch);
        }
        if self.hbar_order != o.hbar_order || self.min_degree != o.min_degree {
            return Err(TsError::OrderMismatch);
        }
        Ok(())
    }

    pub fn convert<S: Real>(&self) -> Truncation<S> {
        Truncation {
            cone: self.cone.convert(),
            cutoff: if R::EXACT && S::EXACT {
                crate::scalar::parse_real(&self.cutoff.to_string()).unwrap()
            } else {
                S::from_f64_lossy(self.cutoff.to_f64_lossy())
            },
            hbar_order: self.hbar_order,
            min_degree: self.min_degree,
        }
    }
}

/// ℏ-Laurent polynomial `Σ_{k} c_k ℏ^{low+k}`, trimmed at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct HbarPoly<P> {
    low: i32,
    c: Vec<P>,
}

impl<P: RingElem> HbarPoly<P> {
    pub fn zero() -> Self {
        Self { low: 0, c: vec![] }
    }

    pub fn monomial(v: P, degree: i32) -> Self {
        Self::from_coeffs(degree, vec![v])
    }

    pub fn from_coeffs(low: i32, mut c: Vec<P>) -> Self {
        while c.last().is_some_and(|v| v.is_zero()) {
            c.pop();
        }
        let lead = c.iter().take_while(|v| v.is_zero()).count();
        if lead == c.len() {
            return Self::zero();
        }
        c.drain(..lead);
        Self { low: low + lead as i32, c }
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Lowest degree present (`None` for zero).
    pub fn low_degree(&self) -> Option<i32> {
        (!self.c.is_empty()).then_some(self.low)
    }

    /// One past the highest degree present.
    pub fn high_degree(&self) -> Option<i32> {
        (!self.c.is_empty()).then_some(self.low + self.c.len() as i32)
    }

    pub fn coeff(&self, d: i32) -> Option<&P> {
        if d < self.low {
            return None;
        }
        self.c.get((d - self.low) as usize).filter(|v| !v.is_zero())
    }

    /// `(degree, coefficient)` pairs for nonzero coefficients.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &P)> {
        self.c.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(move |(k, v)| (self.low + k as i32, v))
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let low = self.low.min(o.low);
        let high = self.high_degree().unwrap().max(o.high_degree().unwrap());
        let proto = self.c[0].zero_like();
        let c = (low..high)
            .map(|d| match (self.coeff(d), o.coeff(d)) {
                (Some(a), Some(b)) => a.radd(b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => proto.clone(),
            })
            .collect();
        Self::from_coeffs(low, c)
    }

    pub fn neg(&self) -> Self {
        Self { low: self.low, c: self.c.iter().map(|v| v.rneg()).collect() }
    }

    pub fn map(&self, f: impl Fn(&P) -> P) -> Self {
        Self::from_coeffs(self.low, self.c.iter().map(f).collect())
    }

    /// Product keeping only degrees below `high`.
    pub fn mul_below(&self, o: &Self, high: i32) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let low = self.low + o.low;
        if low >= high {
            return Self::zero();
        }
        let n = ((self.c.len() + o.c.len() - 1) as i32).min(high - low) as usize;
        let mut c: Vec<Option<P>> = vec![None; n];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() || i >= n {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                let p = a.rmul(b);
                c[i + j] = Some(match c[i + j].take() {
                    Some(acc) => acc.radd(&p),
                    None => p,
                });
            }
        }
        let proto = self.c[0].zero_like();
        Self::from_coeffs(low, c.into_iter().map(|v| v.unwrap_or_else(|| proto.clone())).collect())
    }

    /// Multiplication by `ℏ^k`.
    pub fn shift(&self, k: i32) -> Self {
        Self { low: self.low + k, c: self.c.clone() }
    }

    /// Drops degrees at or above `high`.
    pub fn truncate(&self, high: i32) -> Self {
        if self.is_zero() || self.low >= high {
            return Self::zero();
        }
        let keep = ((high - self.low) as usize).min(self.c.len());
        Self::from_coeffs(self.low, self.c[..keep].to_vec())
    }
}

/// Subexponential hierarchy labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeClass {
    VeryRapidDecayZero,
    Ae,
    Ce,
    Se,
    ExpGrowth,
}

/// Grade window `D`: a bound `r` on the directional exponent value.
#[derive(Debug, Clone, PartialEq)]
pub struct GradeWindow<R> {
    radius: R,
}

impl<R: Real> GradeWindow<R> {
    pub fn new(radius: R, cutoff: &R) -> Result<Self, TsError> {
        if radius <= R::zero() {
            return Err(TsError::InvalidWindow("radius must be positive".into()));
        }
        if &radius > cutoff {
            return Err(TsError::InvalidWindow("radius exceeds the cutoff".into()));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> &R {
        &self.radius
    }
}

/// Truncated transseries with coefficients in `P`.
#[derive(Debug, Clone)]
pub struct Transseries<R: Real, P> {
    trunc: Arc<Truncation<R>>,
    proto: P,
    terms: Vec<(C<R>, HbarPoly<P>)>,
}

impl<R: Real, P: ParamRing<R>> PartialEq for Transseries<R, P> {
    fn eq(&self, o: &Self) -> bool {
        (Arc::ptr_eq(&self.trunc, &o.trunc) || self.trunc == o.trunc) && self.terms == o.terms
    }
}

impl<R: Real, P: ParamRing<R>> Transseries<R, P> {
    /// Zero element; `proto` fixes the coefficient context (e.g. jet precision).
    pub fn zero(trunc: Arc<Truncation<R>>, proto: &P) -> Self {
        Self { trunc, proto: proto.zero_like(), terms: vec![] }
    }

    /// `Σ coef · e^{-c/ℏ} ℏ^d` from `(c, d, coef)` triples.
    pub fn from_terms(trunc: Arc<Truncation<R>>, proto: &P, terms: Vec<(C<R>, i32, P)>) -> Result<Self, TsError> {
        let mut out = Self::zero(trunc, proto);
        let mut grouped: Vec<(C<R>, HbarPoly<P>)> = Vec::new();
        for (c, d, v) in terms {
            if d < out.trunc.min_degree && !v.is_zero() {
                return Err(TsError::DegreeBelowCap(d));
            }
            grouped.push((c, HbarPoly::monomial(v, d)));
        }
        out.terms = out.normalize(grouped);
        Ok(out)
    }

    pub fn constant(trunc: Arc<Truncation<R>>, v: P) -> Self {
        let proto = v.zero_like();
        Self::from_terms(trunc, &proto, vec![(c_zero(), 0, v)]).expect("degree 0 is admissible")
    }

    pub fn monomial(trunc: Arc<Truncation<R>>, v: P, exponent: C<R>, degree: i32) -> Result<Self, TsError> {
        let proto = v.zero_like();
        Self::from_terms(trunc, &proto, vec![(exponent, degree, v)])
    }

    pub fn one(&self) -> Self {
        Self::constant(self.trunc.clone(), self.proto.one_like())
    }

    pub fn zero_elem(&self) -> Self {
        Self::zero(self.trunc.clone(), &self.proto)
    }

    pub fn scalar(&self, v: C<R>) -> Self {
        Self::constant(self.trunc.clone(), self.proto.scalar_like(v))
    }

    pub fn with_terms(&self, terms: Vec<(C<R>, HbarPoly<P>)>) -> Self {
        Self { trunc: self.trunc.clone(), proto: self.proto.clone(), terms: self.normalize(terms) }
    }

    fn normalize(&self, terms: Vec<(C<R>, HbarPoly<P>)>) -> Vec<(C<R>, HbarPoly<P>)> {
        let n = self.trunc.hbar_order;
        let terms = terms.into_iter().map(|(c, p)| (c, p.truncate(n))).collect();
        normalize_terms(terms, &self.trunc.cone, &self.trunc.cutoff, |a, b| a.add(b), |p| p.is_zero())
    }

    fn check_degrees(&self) -> Result<(), TsError> {
        for (_, p) in &self.terms {
            if let Some(lo) = p.low_degree() {
                if lo < self.trunc.min_degree {
                    return Err(TsError::DegreeBelowCap(lo));
                }
            }
        }
        Ok(())
    }

    pub fn trunc(&self) -> &Arc<Truncation<R>> {
        &self.trunc
    }

    pub fn proto(&self) -> &P {
        &self.proto
    }

    pub fn terms(&self) -> &[(C<R>, HbarPoly<P>)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// ℏ-polynomial at exponent `c`.
    pub fn exponent_part(&self, c: &C<R>) -> HbarPoly<P> {
        self.terms.iter().find(|(e, _)| exponents_equal(e, c)).map_or_else(HbarPoly::zero, |(_, p)| p.clone())
    }

    /// Coefficient of `e^{-c/ℏ} ℏ^d`.
    pub fn coefficient(&self, c: &C<R>, d: i32) -> P {
        self.terms
            .iter()
            .find(|(e, _)| exponents_equal(e, c))
            .and_then(|(_, p)| p.coeff(d).cloned())
            .unwrap_or_else(|| self.proto.zero_like())
    }

    /// Every `(exponent, degree, coefficient)` triple.
    pub fn triples(&self) -> Vec<(C<R>, i32, P)> {
        self.terms.iter().flat_map(|(c, p)| p.iter().map(move |(d, v)| (c.clone(), d, v.clone()))).collect()
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, TsError> {
        self.trunc.compatible(&o.trunc)?;
        let mut t = self.terms.clone();
        t.extend(o.terms.iter().cloned());
        Ok(self.with_terms(t))
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self, TsError> {
        self.try_add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(c, p)| (c.clone(), p.neg())).collect(), ..self.clone() }
    }

    pub fn scale(&self, v: &C<R>) -> Self {
        self.with_terms(self.terms.iter().map(|(c, p)| (c.clone(), p.map(|a| a.scale(v)))).collect())
    }

    /// Multiplication by a coefficient-ring element.
    pub fn scale_param(&self, v: &P) -> Self {
        self.with_terms(self.terms.iter().map(|(c, p)| (c.clone(), p.map(|a| a.rmul(v)))).collect())
    }

    /// Multiplication by `ℏ^k`.
    pub fn mul_hbar(&self, k: i32) -> Result<Self, TsError> {
        let out = self.with_terms(self.terms.iter().map(|(c, p)| (c.clone(), p.shift(k))).collect());
        out.check_degrees()?;
        Ok(out)
    }

    /// Multiplication by `e^{-c/ℏ}`.
    pub fn mul_exponential(&self, c: &C<R>) -> Self {
        self.with_terms(self.terms.iter().map(|(e, p)| (e.clone() + c.clone(), p.clone())).collect())
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self, TsError> {
        self.trunc.compatible(&o.trunc)?;
        if !self.trunc.cone.hull().same_region(&self.trunc.cone) {
            return Err(TsError::NonConvexCone);
        }
        let n = self.trunc.hbar_order;
        let mut t = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (ca, pa) in &self.terms {
            for (cb, pb) in &o.terms {
                let c = ca.clone() + cb.clone();
                if crate::novikov::at_or_above_cutoff(&self.trunc.cone.directional_value(&c), &self.trunc.cutoff) {
                    continue;
                }
                t.push((c, pa.mul_below(pb, n)));
            }
        }
        let out = self.with_terms(t);
        out.check_degrees()?;
        Ok(out)
    }

    /// Coefficient-wise `d/dx`.
    pub fn derivative(&self) -> Self {
        self.with_terms(self.terms.iter().map(|(c, p)| (c.clone(), p.map(|a| a.derivative()))).collect())
    }

    /// Keeps the terms with directional exponent value below the window radius.
    pub fn grade_project(&self, window: &GradeWindow<R>) -> Self {
        let cone = &self.trunc.cone;
        Self {
            terms: self.terms.iter().filter(|(c, _)| cone.directional_value(c) < window.radius).cloned().collect(),
            ..self.clone()
        }
    }

    fn has_boundary_exponents(&self) -> bool {
        let zero = c_zero::<R>();
        self.terms
            .iter()
            .any(|(c, _)| !exponents_equal(c, &zero) && self.trunc.cone.directional_value(c) <= R::zero())
    }

    /// `exp(a)` by Taylor expansion of the nilpotent part.
    pub fn exp(&self) -> Result<Self, TsError> {
        let zero = c_zero::<R>();
        let base = self.exponent_part(&zero);
        if base.low_degree().is_some_and(|d| d < 0) {
            return Err(TsError::NotExponentiable("negative ℏ-degree at exponent 0".into()));
        }
        if self.has_boundary_exponents() {
            return Err(TsError::NotExponentiable("exponent with non-positive directional value".into()));
        }
        let a00 = self.coefficient(&zero, 0);
        let e0 = a00
            .exp()
            .ok_or_else(|| TsError::NotExponentiable(format!("exp of the classical constant {a00} leaves the coefficient ring")))?;
        let m = self.try_sub(&Self::constant(self.trunc.clone(), a00))?;
        let mut sum = self.one();
        let mut power = self.one();
        for k in 1.. {
            power = power.try_mul(&m)?;
            if power.is_zero() {
                break;
            }
            sum = sum.try_add(&power.scale(&inv_factorial(k)))?;
        }
        Ok(sum.scale_param(&e0))
    }

    /// Inverse of the classical coefficient when the element is a unit: no
    /// negative ℏ-degree at exponent 0, an invertible coefficient at degree 0
    /// and no other exponents on the boundary of the cone.
    pub fn unit_part(&self) -> Result<P, TsError> {
        let zero = c_zero::<R>();
        let base = self.exponent_part(&zero);
        if base.low_degree().is_none_or(|d| d != 0) {
            return Err(TsError::NotAUnit("no invertible classical term".into()));
        }
        if self.has_boundary_exponents() {
            return Err(TsError::NotAUnit("exponent with non-positive directional value".into()));
        }
        let u0 = self.coefficient(&zero, 0);
        u0.try_inv().ok_or_else(|| TsError::NotAUnit(format!("classical term {u0} is not invertible")))
    }

    pub fn invert(&self) -> Result<Self, TsError> {
        let u0_inv = self.unit_part()?;
        let m = self.scale_param(&u0_inv).try_sub(&self.one())?;
        let neg_m = m.neg();
        let mut sum = self.one();
        let mut power = self.one();
        loop {
            power = power.try_mul(&neg_m)?;
            if power.is_zero() {
                break;
            }
            sum = sum.try_add(&power)?;
        }
        Ok(sum.scale_param(&u0_inv))
    }

    /// Every hierarchy class containing the element, smallest first.
    pub fn memberships(&self) -> Vec<SeClass> {
        if self.is_zero() {
            return vec![SeClass::VeryRapidDecayZero, SeClass::Ae, SeClass::Ce, SeClass::Se];
        }
        let cone = &self.trunc.cone;
        let zero = c_zero::<R>();
        let growth = self.terms.iter().any(|(c, _)| {
            !exponents_equal(c, &zero) && (!cone.contains(c) || cone.directional_value(c) < R::zero())
        });
        if growth {
            return vec![SeClass::ExpGrowth];
        }
        let negative = self.terms.iter().any(|(_, p)| p.low_degree().is_some_and(|d| d < 0));
        if negative {
            vec![SeClass::Se]
        } else {
            vec![SeClass::Ae, SeClass::Ce, SeClass::Se]
        }
    }

    /// Classification label. Finite sums without negative ℏ-powers have a
    /// classical limit and are reported as `Ce`; negative powers (always
    /// dominated by any `e^{c/ℏ}` twist) give `Se`; exponents outside the
    /// cone give `ExpGrowth`.
    pub fn se_classify(&self) -> SeClass {
        let m = self.memberships();
        if m[0] == SeClass::VeryRapidDecayZero || m[0] == SeClass::ExpGrowth || m[0] == SeClass::Se {
            m[0]
        } else {
            SeClass::Ce
        }
    }

    /// Supremum of the shifts `s` with `e^{s/ℏ}·a` still subexponential: the
    /// least directional exponent value.
    pub fn se_support(&self) -> Result<R, TsError> {
        let cone = &self.trunc.cone;
        self.terms
            .iter()
            .map(|(c, _)| cone.directional_value(c))
            .reduce(R::min_of)
            .ok_or(TsError::ZeroElement)
    }

    /// Changes the coefficient ring term by term.
    pub fn map_param<Q: ParamRing<R>>(&self, proto: &Q, f: impl Fn(&P) -> Q) -> Transseries<R, Q> {
        let out = Transseries::<R, Q>::zero(self.trunc.clone(), proto);
        let terms = self
            .terms
            .iter()
            .map(|(c, p)| {
                let lo = p.low_degree().unwrap_or(0);
                let coeffs = (lo..p.high_degree().unwrap_or(0))
                    .map(|d| p.coeff(d).map_or_else(|| proto.zero_like(), &f))
                    .collect();
                (c.clone(), HbarPoly::from_coeffs(lo, coeffs))
            })
            .collect();
        out.with_terms(terms)
    }

    /// Numerical value at a complex ℏ, given a way to evaluate coefficients.
    pub fn eval_numeric(&self, hbar: Complex64, coeff: impl Fn(&P) -> Complex64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (c, p) in &self.terms {
            let e = (-c_to_f64(c) / hbar).exp();
            for (d, v) in p.iter() {
                total += e * hbar.powi(d) * coeff(v);
            }
        }
        total
    }

    /// Projection to the Novikov ring when all coefficients are constants of degree 0.
    pub fn to_novikov(&self) -> Option<NovikovElement<R>> {
        let mut t = Vec::new();
        for (c, d, v) in self.triples() {
            if d != 0 {
                return None;
            }
            t.push((c, v.as_constant()?));
        }
        NovikovElement::from_terms(t, self.trunc.cone.clone(), self.trunc.cutoff.clone()).ok()
    }

    pub fn record(&self) -> TransseriesRecord {
        TransseriesRecord {
            mode: R::MODE.to_string(),
            param: P::KIND.to_string(),
            cutoff: ScalarRepr::of(&self.trunc.cutoff),
            cone: self.trunc.cone.record(),
            hbar_order: self.trunc.hbar_order,
            min_degree: self.trunc.min_degree,
            terms: self
                .terms
                .iter()
                .map(|(c, p)| TsTermRecord {
                    re_exp: ScalarRepr::of(&c.re),
                    im_exp: ScalarRepr::of(&c.im),
                    hbar: p.iter().map(|(d, v)| HbarTermRecord { degree: d, coef: v.record() }).collect(),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &TransseriesRecord, proto: &P) -> Result<Self, TsError> {
        let bad = |w: &str| TsError::Record(w.to_string());
        if rec.param != P::KIND {
            return Err(bad("coefficient ring"));
        }
        let cone = rec.cone.to_region::<R>().ok_or_else(|| bad("cone"))?;
        let cutoff = rec.cutoff.value::<R>().ok_or_else(|| bad("cutoff"))?;
        let trunc = Arc::new(Truncation::with_min_degree(cone, cutoff, rec.hbar_order, rec.min_degree)?);
        let mut triples = Vec::new();
        for t in &rec.terms {
            let c = C::new(t.re_exp.value().ok_or_else(|| bad("exponent"))?, t.im_exp.value().ok_or_else(|| bad("exponent"))?);
            for h in &t.hbar {
                triples.push((c.clone(), h.degree, P::from_record(&h.coef, proto).ok_or_else(|| bad("coefficient"))?));
            }
        }
        Self::from_terms(trunc, proto, triples)
    }
}

impl<R: Real> Transseries<R, RatFunc<R>> {
    /// Parses an expression in `x`, `h` and `T^c` into a transseries.
    pub fn parse(s: &str, trunc: Arc<Truncation<R>>) -> Result<Self, TsError> {
        let e = parse_expr(s)?;
        let zero = Self::zero(trunc, &RatFunc::zero());
        from_expr(&e, &zero)
    }

    /// Taylor jets of every coefficient at `x0`.
    pub fn to_jets(&self, x0: &C<R>, prec: usize) -> Result<Transseries<R, Jet<R>>, TsError> {
        for (_, _, v) in self.triples() {
            if v.eval(x0).is_none() {
                return Err(TsError::PoleAtBase);
            }
        }
        Ok(self.map_param(&Jet::zero(prec), |f| f.to_jet(x0, prec).expect("pole checked")))
    }

    /// Substitutes a number for `x`.
    pub fn eval_x(&self, x: &C<R>) -> Result<Transseries<R, C<R>>, TsError> {
        for (_, _, v) in self.triples() {
            if v.eval(x).is_none() {
                return Err(TsError::PoleAtBase);
            }
        }
        Ok(self.map_param(&c_zero(), |f| f.eval(x).expect("pole checked")))
    }
}

impl<R: Real> Transseries<R, Jet<R>> {
    /// Values of the coefficient jets at the base point.
    pub fn at_base(&self) -> Transseries<R, C<R>> {
        self.map_param(&c_zero(), |j| j.value())
    }

    /// Lowest jet precision among the coefficients.
    pub fn min_prec(&self) -> usize {
        self.triples().iter().map(|(_, _, j)| j.prec()).min().unwrap_or(self.proto.prec())
    }
}

impl<R: Real> Transseries<R, C<R>> {
    /// Parses a constant-coefficient expression in `h` and `T^c`.
    pub fn parse_scalar(s: &str, trunc: Arc<Truncation<R>>) -> Result<Self, TsError> {
        let r = Transseries::<R, RatFunc<R>>::parse(s, trunc)?;
        for (_, _, v) in r.triples() {
            if v.as_constant().is_none() {
                return Err(TsError::Parse(ParseError { pos: 0, msg: "x is not allowed here".into() }));
            }
        }
        Ok(r.map_param(&c_zero(), |f| f.as_constant().unwrap()))
    }

    /// Embeds constants into jets of precision `prec`.
    pub fn to_jets(&self, prec: usize) -> Transseries<R, Jet<R>> {
        self.map_param(&Jet::zero(prec), |v| Jet::constant(v.clone(), prec))
    }
}

impl<R: Real, P: ParamRing<R>> Transseries<R, P> {
    /// Same transseries over another real field (coefficients converted through records).
    pub fn convert_scalar<S: Real, Q: ParamRing<S>>(&self, proto: &Q) -> Result<Transseries<S, Q>, TsError> {
        let rec = self.record();
        let mut rec2 = rec.clone();
        rec2.mode = S::MODE.to_string();
        rec2.param = Q::KIND.to_string();
        Transseries::<S, Q>::from_record(&rec2, proto)
    }
}

fn from_expr<R: Real>(e: &Expr, zero: &Transseries<R, RatFunc<R>>) -> Result<Transseries<R, RatFunc<R>>, TsError> {
    let trunc = zero.trunc.clone();
    Ok(match e {
        Expr::Num(_) | Expr::I | Expr::X => Transseries::constant(trunc, e.to_ratfunc()?),
        Expr::H => Transseries::monomial(trunc, RatFunc::one(), c_zero(), 1)?,
        Expr::T => Transseries::monomial(trunc, RatFunc::one(), c_one(), 0)?,
        Expr::Add(a, b) => from_expr(a, zero)?.try_add(&from_expr(b, zero)?)?,
        Expr::Sub(a, b) => from_expr(a, zero)?.try_sub(&from_expr(b, zero)?)?,
        Expr::Mul(a, b) => from_expr(a, zero)?.try_mul(&from_expr(b, zero)?)?,
        Expr::Neg(a) => from_expr(a, zero)?.neg(),
        Expr::Div(a, b) => {
            let num = from_expr(a, zero)?;
            if !b.mentions_h_or_t() {
                let den = b.to_ratfunc::<R>()?;
                let inv = RatFunc::one().div(&den).ok_or_else(|| ParseError { pos: 0, msg: "division by zero".into() })?;
                num.scale_param(&inv)
            } else if let Some(k) = pure_hbar_power(b)? {
                num.mul_hbar(-k)?
            } else {
                num.try_mul(&from_expr(b, zero)?.invert()?)?
            }
        }
        Expr::Pow(base, ex) => match **base {
            Expr::T => {
                let c = ex.constant::<R>()?;
                Transseries::monomial(trunc, RatFunc::one(), c, 0)?
            }
            Expr::H => Transseries::monomial(trunc, RatFunc::one(), c_zero(), ex.integer_exponent()?)?,
            _ => {
                let k = ex.integer_exponent()?;
                let b = from_expr(base, zero)?;
                let b = if k < 0 { b.invert()? } else { b };
                let mut acc = b.one();
                for _ in 0..k.unsigned_abs() {
                    acc = acc.try_mul(&b)?;
                }
                acc
            }
        },
    })
}

/// `Some(k)` when the expression is exactly `h^k` or `h`.
fn pure_hbar_power(e: &Expr) -> Result<Option<i32>, ParseError> {
    Ok(match e {
        Expr::H => Some(1),
        Expr::Pow(b, ex) if matches!(**b, Expr::H) => Some(ex.integer_exponent()?),
        _ => None,
    })
}

impl<R: Real, P: ParamRing<R>> fmt::Display for Transseries<R, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        let zero = c_zero::<R>();
        for (c, p) in &self.terms {
            for (d, v) in p.iter() {
                let mut s = format!("({v})");
                if d != 0 {
                    s.push_str(&format!("·h^{d}"));
                }
                if !exponents_equal(c, &zero) {
                    s.push_str(&format!("·T^{}", fmt_complex(c)));
                }
                parts.push(s);
            }
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl<R: Real, P: ParamRing<R>> RingElem for Transseries<R, P> {
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
        self.try_add(o).expect("compatible transseries")
    }
    fn rsub(&self, o: &Self) -> Self {
        self.try_sub(o).expect("compatible transseries")
    }
    fn rmul(&self, o: &Self) -> Self {
        self.try_mul(o).expect("compatible transseries")
    }
    fn rneg(&self) -> Self {
        self.neg()
    }
    fn try_inv(&self) -> Option<Self> {
        self.invert().ok()
    }
    fn unit_weight(&self) -> f64 {
        match self.unit_part() {
            Ok(_) => self.coefficient(&c_zero(), 0).unit_weight().max(f64::MIN_POSITIVE),
            Err(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbarTermRecord {
    pub degree: i32,
    pub coef: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsTermRecord {
    pub re_exp: ScalarRepr,
    pub im_exp: ScalarRepr,
    pub hbar: Vec<HbarTermRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransseriesRecord {
    pub mode: String,
    pub param: String,
    pub cutoff: ScalarRepr,
    pub cone: ConeRecord,
    pub hbar_order: i32,
    pub min_degree: i32,
    pub terms: Vec<TsTermRecord>,
}

/// Converts a constant scalar between fields.
pub fn convert_scalar<R: Real, S: Real>(z: &C<R>) -> C<S> {
    convert_c(z)
}

/// `1/k` as a complex scalar.
pub fn reciprocal<R: Real>(k: i64) -> C<R> {
    c_real(R::one() / R::from_i64(k).unwrap())
}

/// Inverse of a complex scalar, panicking on zero.
pub fn inv_scalar<R: Real>(z: &C<R>) -> C<R> {
    c_inv(z).expect("nonzero scalar")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c_int;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    fn tr(cutoff: Q, n: i32) -> Arc<Truncation<Q>> {
        Arc::new(Truncation::lambda0(cutoff, n))
    }

    fn ts(s: &str, t: &Arc<Truncation<Q>>) -> Transseries<Q, RatFunc<Q>> {
        Transseries::parse(s, t.clone()).unwrap()
    }

    #[test]
    fn products() {
        let t = tr(q(10, 1), 4);
        let a = ts("T^(1/2) * h", &t);
        let b = ts("T^(3/4)", &t);
        assert_eq!(a.try_mul(&b).unwrap(), ts("h*T^(5/4)", &t));
        let t2 = tr(q(10, 1), 2);
        assert_eq!(ts("1+h", &t2).try_mul(&ts("1-h", &t2)).unwrap(), ts("1", &t2));
        assert_eq!(ts("x*T", &t).try_mul(&ts("x", &t)).unwrap(), ts("x^2*T", &t));
    }

    #[test]
    fn grade_projection() {
        let t = tr(q(10, 1), 4);
        let w = GradeWindow::new(q(1, 2), &q(10, 1)).unwrap();
        assert_eq!(ts("1 + T", &t).grade_project(&w), ts("1", &t));
        assert_eq!(ts("T^0.3 + T^0.7", &t).grade_project(&w), ts("T^0.3", &t));
        assert!(GradeWindow::new(q(11, 1), &q(10, 1)).is_err());
    }

    #[test]
    fn exponentials() {
        let t = tr(q(7, 2), 4);
        assert_eq!(ts("0", &t).exp().unwrap(), ts("1", &t));
        assert_eq!(ts("T", &t).exp().unwrap(), ts("1 + T + T^2/2 + T^3/6", &t));
        let t3 = tr(q(7, 2), 3);
        assert_eq!(ts("h", &t3).exp().unwrap(), ts("1 + h + h^2/2", &t3));
        assert!(matches!(ts("1/h", &t3).exp(), Err(TsError::NotExponentiable(_))));
        assert!(matches!(ts("1", &t3).exp(), Err(TsError::NotExponentiable(_))));
    }

    #[test]
    fn classification() {
        let t = tr(q(5, 1), 4);
        assert_eq!(ts("1 + h*x", &t).se_classify(), SeClass::Ce);
        assert_eq!(ts("T/h", &t).se_classify(), SeClass::Se);
        let growth = Transseries::monomial(t.clone(), RatFunc::one(), c_int(-1), 0).unwrap();
        assert_eq!(growth.se_classify(), SeClass::ExpGrowth);
        assert_eq!(ts("0", &t).se_classify(), SeClass::VeryRapidDecayZero);
    }

    #[test]
    fn support() {
        let t = tr(q(5, 1), 4);
        assert_eq!(ts("T", &t).se_support().unwrap(), q(1, 1));
        assert_eq!(ts("1", &t).se_support().unwrap(), q(0, 1));
        assert_eq!(ts("T^0.3 + T^0.9", &t).se_support().unwrap(), q(3, 10));
        assert_eq!(ts("0", &t).se_support(), Err(TsError::ZeroElement));
    }

    #[test]
    fn inverse_and_jets() {
        let t = tr(q(3, 1), 4);
        let a = ts("1 + x*h + T", &t);
        let inv = a.invert().unwrap();
        assert_eq!(a.try_mul(&inv).unwrap(), ts("1", &t));
        let j = a.to_jets(&c_int(1), 5).unwrap();
        assert_eq!(j.coefficient(&c_zero(), 1).value(), c_int(1));
        assert!(ts("h", &t).invert().is_err());
    }

    #[test]
    fn record_roundtrip() {
        let t = tr(q(3, 1), 4);
        let a = ts("(1 + x)/(x - 2) * h + i*T^(1/2)/h", &t);
        let json = serde_json::to_string(&a.record()).unwrap();
        let rec: TransseriesRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(Transseries::from_record(&rec, &RatFunc::zero()).unwrap(), a);
    }
}
