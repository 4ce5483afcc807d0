//! Exact-WKB geometry: the Riccati recursion, turning points, Stokes curve
//! tracing, higher-order scattering and the region decomposition.
//!
//! Conventions: the Schrödinger equation is `ℏ²ψ'' = Qψ` with `S = ℏψ'/ψ`,
//! so `S² + ℏS' = Q`. An order-`m` potential `ℏ^mψ^{(m)} = Σ a_k ℏ^k ψ^{(k)}`
//! has characteristic polynomial `ξ^m − Σ a_k ξ^k`. A Stokes curve of type
//! `(i, j)` is a level set `Im e^{−iθ}∫(λ_i − λ_j) = 0` along which the weight
//! `Re e^{−iθ}∫(λ_i − λ_j)` increases from its source.

mod regions;
mod render;
mod trace;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::connection::SpectralData;
use crate::expr::parse_ratfunc;
use crate::numeric::cluster_roots;
use crate::poly::RatFunc;
use crate::scalar::{c_real, Real};

pub use regions::{detect_regions, Arrangement, ArrangementStats, Region, RegionEdge, Vertex, VertexKind};
pub use render::{graph_json, graph_svg, GRAPH_SCHEMA_VERSION};
pub(crate) use trace::{match_all, nearest};
pub use trace::{
    higher_order_scattering, is_gmn_generic, trace_stokes_curves, CurveEnd, CurveSource, GmnReport, StokesCurve,
    StokesGraph, TraceOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StokesError {
    #[error("evaluation at a turning point")]
    TurningPointEvaluation,
    #[error("discriminant vanishes identically")]
    DegenerateDiscriminant,
    #[error("turning point {0} is not simple")]
    NonSimpleTurningPoint(String),
    #[error("tracer stalled: {0}")]
    TracerStalled(String),
    #[error("arrangement degeneracy: {0}")]
    ArrangementDegeneracy(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// A scalar ODE `ℏ^mψ^{(m)} = Σ_{k<m} a_k(x) ℏ^k ψ^{(k)}`, stored through its
/// monic characteristic polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<R: Real> {
    coefficients: Vec<RatFunc<R>>,
    char_poly: Vec<RatFunc<R>>,
    discriminant: RatFunc<R>,
}

impl<R: Real> Potential<R> {
    /// `ℏ²ψ'' = Qψ`.
    pub fn schrodinger(q: RatFunc<R>) -> Result<Self, StokesError> {
        Self::from_coefficients(vec![q, RatFunc::zero()])
    }

    /// Coefficients `a_0, …, a_{m−1}`.
    pub fn from_coefficients(a: Vec<RatFunc<R>>) -> Result<Self, StokesError> {
        if a.is_empty() {
            return Err(StokesError::InvalidOption("empty coefficient list".into()));
        }
        let mut char_poly: Vec<RatFunc<R>> = a.iter().map(|c| c.neg()).collect();
        char_poly.push(RatFunc::one());
        let discriminant = SpectralData::from_char_poly(char_poly.clone(), Complex64::new(0.0, 0.0)).discriminant;
        if discriminant.is_zero() {
            return Err(StokesError::DegenerateDiscriminant);
        }
        Ok(Self { coefficients: a, char_poly, discriminant })
    }

    pub fn parse(coefficients: &[String]) -> Result<Self, StokesError> {
        let a = coefficients
            .iter()
            .map(|s| parse_ratfunc(s).map_err(|e| StokesError::Parse(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_coefficients(a)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[RatFunc<R>] {
        &self.coefficients
    }

    pub fn char_poly(&self) -> &[RatFunc<R>] {
        &self.char_poly
    }

    pub fn discriminant(&self) -> &RatFunc<R> {
        &self.discriminant
    }

    /// `Q` of a Schrödinger potential.
    pub fn q(&self) -> Option<&RatFunc<R>> {
        (self.order() == 2 && self.coefficients[1].is_zero()).then(|| &self.coefficients[0])
    }

    pub fn spectral(&self, base: Complex64) -> SpectralData<R> {
        SpectralData::from_char_poly(self.char_poly.clone(), base)
    }

    pub fn to_f64(&self) -> Potential<f64> {
        let c = self.coefficients.iter().map(|c| c.convert()).collect();
        Potential::<f64>::from_coefficients(c).expect("discriminant survives conversion")
    }

    /// Roots `λ` of the characteristic polynomial at `x`.
    pub fn roots_at(&self, x: Complex64) -> Vec<Complex64> {
        if let Some(q) = self.q() {
            let s = q.eval_f64(x).sqrt();
            return vec![s, -s];
        }
        crate::numeric::poly_roots(&self.char_poly.iter().map(|c| c.eval_f64(x)).collect::<Vec<_>>())
    }

    /// Poles of the coefficients.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for c in &self.coefficients {
            for p in c.poles() {
                if !out.iter().any(|q| (q - p).norm() < 1e-9) {
                    out.push(p);
                }
            }
        }
        out.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        out
    }

    pub fn text(&self) -> Vec<String> {
        self.coefficients.iter().map(|c| c.to_string()).collect()
    }
}

impl<R: Real> Serialize for Potential<R> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Rec {
            order: usize,
            coefficients: Vec<String>,
        }
        Rec { order: self.order(), coefficients: self.text() }.serialize(s)
    }
}

/// A turning point with the multiplicity of the discriminant root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurningPoint {
    pub position: Complex64,
    pub multiplicity: usize,
}

impl TurningPoint {
    pub fn is_simple(&self) -> bool {
        self.multiplicity == 1
    }
}

const ROOT_CLUSTER_TOL: f64 = 1e-6;

/// Roots of the discriminant, deduplicated, sorted by `(re, im)`.
pub fn turning_points<R: Real>(p: &Potential<R>) -> Result<Vec<TurningPoint>, StokesError> {
    if p.discriminant.is_zero() {
        return Err(StokesError::DegenerateDiscriminant);
    }
    // floating-point rational functions are not gcd-reduced: cancel shared roots
    let mut num = p.discriminant.num().roots_f64();
    for d in p.discriminant.den().roots_f64() {
        if let Some(k) = num.iter().position(|z| (z - d).norm() < ROOT_CLUSTER_TOL * (1.0 + d.norm())) {
            num.remove(k);
        }
    }
    let mut tp: Vec<TurningPoint> = cluster_roots(&num, ROOT_CLUSTER_TOL)
        .into_iter()
        .map(|(position, multiplicity)| TurningPoint { position, multiplicity })
        .collect();
    tp.sort_by(|a, b| {
        a.position.re.partial_cmp(&b.position.re).unwrap().then(a.position.im.partial_cmp(&b.position.im).unwrap())
    });
    Ok(tp)
}

/// `a + b√Q`, an element of `K(x)[s]/(s² − Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtExt<R: Real> {
    pub a: RatFunc<R>,
    pub b: RatFunc<R>,
}

impl<R: Real> SqrtExt<R> {
    fn zero() -> Self {
        Self { a: RatFunc::zero(), b: RatFunc::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    fn add(&self, o: &Self) -> Self {
        Self { a: self.a.add(&o.a), b: self.b.add(&o.b) }
    }

    fn sub(&self, o: &Self) -> Self {
        Self { a: self.a.sub(&o.a), b: self.b.sub(&o.b) }
    }

    fn mul(&self, o: &Self, q: &RatFunc<R>) -> Self {
        Self { a: self.a.mul(&o.a).add(&self.b.mul(&o.b).mul(q)), b: self.a.mul(&o.b).add(&self.b.mul(&o.a)) }
    }

    /// `d/dx`, using `s' = Q' s / (2Q)`.
    fn derivative(&self, q: &RatFunc<R>) -> Self {
        let half = c_real(R::one() / (R::one() + R::one()));
        let ds = q.derivative().div(q).expect("Q is nonzero").scale(&half);
        Self { a: self.a.derivative(), b: self.b.derivative().add(&self.b.mul(&ds)) }
    }

    /// Division by `2s`: `(a + bs)/(2s) = b/2 + a/(2Q) s`.
    fn div_two_s(&self, q: &RatFunc<R>) -> Self {
        let half = c_real(R::one() / (R::one() + R::one()));
        Self { a: self.b.scale(&half), b: self.a.div(q).expect("Q is nonzero").scale(&half) }
    }

    /// Value at `x` on the sheet `s = sign·√Q(x)` (principal root).
    pub fn eval(&self, q: &RatFunc<R>, x: Complex64, sign: f64) -> Result<Complex64, StokesError> {
        let qx = q.eval_f64(x);
        if qx.norm() < 1e-300 || !qx.is_finite() {
            return Err(StokesError::TurningPointEvaluation);
        }
        let v = self.a.eval_f64(x) + self.b.eval_f64(x) * qx.sqrt() * sign;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(StokesError::TurningPointEvaluation)
        }
    }
}

/// Formal WKB solution `S = Σ S_n ℏ^n` of `S² + ℏS' = Q` with `S_0 = √Q`.
/// The other sheet is obtained by `√Q ↦ −√Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct WkbSeries<R: Real> {
    pub q: RatFunc<R>,
    pub terms: Vec<SqrtExt<R>>,
}

/// Solves the Riccati recursion `2S_0S_n = −Σ_{k=1}^{n−1} S_kS_{n−k} − S'_{n−1}`
/// through order `n`. The recursion always runs over the rationals: floating
/// coefficients convert exactly, and without exact cancellation the degrees
/// of the `S_n` grow until evaluation overflows around `n = 5`.
pub fn wkb_recursion<R: Real>(q: &RatFunc<R>, n: usize) -> Result<WkbSeries<BigRational>, StokesError> {
    if q.is_zero() {
        return Err(StokesError::DegenerateDiscriminant);
    }
    let q = &q.convert::<BigRational>();
    let mut terms = vec![SqrtExt { a: RatFunc::zero(), b: RatFunc::one() }];
    for k in 1..=n {
        let mut acc = terms[k - 1].derivative(q);
        for l in 1..k {
            acc = acc.add(&terms[l].mul(&terms[k - l], q));
        }
        let minus = SqrtExt { a: acc.a.neg(), b: acc.b.neg() };
        terms.push(minus.div_two_s(q));
    }
    Ok(WkbSeries { q: q.clone(), terms })
}

impl<R: Real> WkbSeries<R> {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// `S_n(x)` on the sheet `sign = ±1`.
    pub fn eval_term(&self, n: usize, x: Complex64, sign: f64) -> Result<Complex64, StokesError> {
        self.terms[n].eval(&self.q, x, sign)
    }

    /// Exact coefficients `r_k` of `S_{≤N}² + ℏS_{≤N}' − Q = Σ r_k ℏ^k`.
    pub fn residual_coefficients(&self) -> Vec<SqrtExt<R>> {
        let n = self.order();
        let mut r = vec![SqrtExt::zero(); 2 * n + 2];
        for i in 0..=n {
            for j in 0..=n {
                r[i + j] = r[i + j].add(&self.terms[i].mul(&self.terms[j], &self.q));
            }
            r[i + 1] = r[i + 1].add(&self.terms[i].derivative(&self.q));
        }
        r[0] = r[0].sub(&SqrtExt { a: self.q.clone(), b: RatFunc::zero() });
        r
    }

    /// Riccati residual of the truncation at `x`, `ℏ`, summed from the exact
    /// coefficients so that cancelled orders stay cancelled.
    pub fn residual(&self, x: Complex64, hbar: f64, sign: f64) -> Result<Complex64, StokesError> {
        Ok(self.residual_profile(x, &[hbar], sign)?[0])
    }

    /// [`Self::residual`] at several `ℏ`, sharing the coefficient evaluation.
    pub fn residual_profile(&self, x: Complex64, hbars: &[f64], sign: f64) -> Result<Vec<Complex64>, StokesError> {
        let mut at_x = Vec::new();
        for (k, r) in self.residual_coefficients().iter().enumerate() {
            if !r.is_zero() {
                at_x.push((k as i32, r.eval(&self.q, x, sign)?));
            }
        }
        Ok(hbars.iter().map(|h| at_x.iter().map(|(k, v)| v * h.powi(*k)).sum()).collect())
    }

    /// `Σ S_n(x) ℏ^n`.
    pub fn eval(&self, x: Complex64, hbar: f64, sign: f64) -> Result<Complex64, StokesError> {
        let mut total = Complex64::new(0.0, 0.0);
        for n in 0..=self.order() {
            total += self.eval_term(n, x, sign)? * hbar.powi(n as i32);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn rf(s: &str) -> RatFunc<Q> {
        parse_ratfunc(s).unwrap()
    }

    #[test]
    fn riccati_terms() {
        let w = wkb_recursion(&rf("x"), 3).unwrap();
        assert_eq!(w.terms[1], SqrtExt { a: rf("-1/(4*x)"), b: RatFunc::zero() });
        let w = wkb_recursion(&rf("x^2"), 2).unwrap();
        let x = Complex64::new(1.3, 0.2);
        assert!((w.eval_term(0, x, 1.0).unwrap() - x).norm() < 1e-14);
        assert!((w.eval_term(1, x, 1.0).unwrap() + 0.5 / x).norm() < 1e-14);
        let w = wkb_recursion(&rf("1"), 4).unwrap();
        assert!(w.terms[1..].iter().all(|t| t.is_zero()));
    }

    #[test]
    fn residual_vanishes_through_order() {
        for q in ["x", "x^2 - 1", "x^3 + 2*x"] {
            let w = wkb_recursion(&rf(q), 4).unwrap();
            let r = w.residual_coefficients();
            assert!(r[..=4].iter().all(|t| t.is_zero()), "{q}");
            assert!(!r[5].is_zero());
        }
        // oracle: S_1 = −Q'/(4Q) by hand
        let w = wkb_recursion(&rf("x^2 - 1"), 1).unwrap();
        let x = Complex64::new(0.4, 0.7);
        let expect = -(2.0 * x) / (4.0 * (x * x - 1.0));
        assert!((w.eval_term(1, x, -1.0).unwrap() - expect).norm() < 1e-13);
        assert_eq!(w.eval_term(0, Complex64::new(1.0, 0.0), 1.0), Err(StokesError::TurningPointEvaluation));
    }

    #[test]
    fn turning_point_lists() {
        let tp = turning_points(&Potential::schrodinger(rf("x")).unwrap()).unwrap();
        assert_eq!(tp.len(), 1);
        assert!(tp[0].position.norm() < 1e-12 && tp[0].is_simple());
        let tp = turning_points(&Potential::schrodinger(rf("x^2 - 1")).unwrap()).unwrap();
        assert_eq!(tp.len(), 2);
        assert!((tp[0].position + 1.0).norm() < 1e-12 && (tp[1].position - 1.0).norm() < 1e-12);
        assert!(turning_points(&Potential::schrodinger(rf("1")).unwrap()).unwrap().is_empty());
        assert!(!turning_points(&Potential::schrodinger(rf("x^2")).unwrap()).unwrap()[0].is_simple());
        // ξ³ − 3ξ + x: discriminant 108 − 27x², resultant oracle
        let cubic = Potential::<Q>::from_coefficients(vec![rf("-x"), rf("3"), rf("0")]).unwrap();
        assert_eq!(cubic.discriminant(), &rf("108 - 27*x^2"));
        let tp = turning_points(&cubic).unwrap();
        assert!((tp[0].position + 2.0).norm() < 1e-12 && (tp[1].position - 2.0).norm() < 1e-12);
        assert_eq!(
            Potential::<Q>::from_coefficients(vec![rf("0"), rf("0")]),
            Err(StokesError::DegenerateDiscriminant)
        );
    }
}
