//! ℏ-connections `ℏ d + Ω` on one complex chart, with the convention that
//! horizontal sections satisfy `ℏψ' + Ωψ = 0`.

mod block;
mod solve;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::parse_expr;
use crate::jet::Jet;
use crate::novikov::ScalarRepr;
use crate::numeric::{cluster_roots, poly_roots};
use crate::poly::{RatFunc, RatFuncRecord};
use crate::ring::Matrix;
use crate::scalar::{c_real, c_to_f64, c_zero, Real, C};
use crate::transseries::{ParamRing, Transseries, TransseriesRecord, Truncation, TsError};

pub use block::{block_diagonalize, weak_diagonalize, BlockDiagonalization, BlockOptions, WeakDiagonalization, WeakOptions};
pub use solve::{
    graded_picard_solve, solution_basis, solve_linear, solve_reduced, LinearSolution, PolyField, SolveOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnError {
    #[error("connection matrix must be square and nonempty")]
    NotSquare,
    #[error("entries do not share truncation data")]
    TruncationMismatch,
    #[error("negative ℏ-power in the connection form")]
    NegativeHbarPower,
    #[error("coefficient has a pole at the base point")]
    PoleAtBasePoint,
    #[error("gauge matrix is not invertible at truncation")]
    NotInvertible,
    #[error("eigenvalue clusters closer than the gap tolerance (gap {0:e})")]
    ClusteredEigenvalues(f64),
    #[error("turning point at the base point")]
    TurningPointAtBase,
    #[error("leading matrix cannot be brought to block form exactly")]
    NotBlockStructured,
    #[error("a block admits no diagonal splitting at truncation")]
    NotWeaklySemisimple,
    #[error("no positive exponential gap over the region (c_* = {0})")]
    NoPositiveGap(f64),
    #[error("connection is not in reduced form: {0}")]
    NotReducedForm(String),
    #[error("classical Jacobian is degenerate at the base point")]
    DegenerateJacobian,
    #[error("seed does not solve the classical equation")]
    NoFormalSeed,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Ts(#[from] TsError),
}

/// `ℏ d + Ω` with `Ω` an `m × m` matrix of transseries over `P`.
#[derive(Debug, Clone)]
pub struct HbarConnection<R: Real, P = RatFunc<R>> {
    omega: Matrix<Transseries<R, P>>,
    trunc: Arc<Truncation<R>>,
    base: C<R>,
    pole_set: Vec<Complex64>,
}

impl<R: Real, P: ParamRing<R>> PartialEq for HbarConnection<R, P> {
    fn eq(&self, o: &Self) -> bool {
        self.omega == o.omega && self.base == o.base
    }
}

impl<R: Real, P: ParamRing<R>> HbarConnection<R, P> {
    pub fn new(omega: Matrix<Transseries<R, P>>, base: C<R>) -> Result<Self, ConnError> {
        if !omega.is_square() || omega.rows() == 0 {
            return Err(ConnError::NotSquare);
        }
        let trunc = omega.get(0, 0).trunc().clone();
        let mut poles: Vec<Complex64> = Vec::new();
        for e in omega.entries() {
            if !(Arc::ptr_eq(e.trunc(), &trunc) || **e.trunc() == *trunc) {
                return Err(ConnError::TruncationMismatch);
            }
            for (_, d, v) in e.triples() {
                if d < 0 {
                    return Err(ConnError::NegativeHbarPower);
                }
                for p in v.poles() {
                    if !poles.iter().any(|q| (q - p).norm() < 1e-9) {
                        poles.push(p);
                    }
                }
            }
        }
        poles.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        Ok(Self { omega, trunc, base, pole_set: poles })
    }

    pub fn rank(&self) -> usize {
        self.omega.rows()
    }

    pub fn omega(&self) -> &Matrix<Transseries<R, P>> {
        &self.omega
    }

    pub fn entry(&self, i: usize, j: usize) -> &Transseries<R, P> {
        self.omega.get(i, j)
    }

    pub fn trunc(&self) -> &Arc<Truncation<R>> {
        &self.trunc
    }

    pub fn base(&self) -> &C<R> {
        &self.base
    }

    pub fn pole_set(&self) -> &[Complex64] {
        &self.pole_set
    }

    fn proto(&self) -> P {
        self.omega.get(0, 0).proto().clone()
    }

    /// `Ω` at `ℏ = 0, T = 0`.
    pub fn classical_part(&self) -> Matrix<P> {
        self.omega.map(|e| e.coefficient(&c_zero(), 0))
    }

    /// Coefficient matrix of `ℏ^r` in the exponent-0 part.
    pub fn hbar_coefficient(&self, r: i32) -> Matrix<P> {
        self.omega.map(|e| e.coefficient(&c_zero(), r))
    }

    pub fn has_exponential_terms(&self) -> bool {
        let zero = c_zero::<R>();
        self.omega.entries().any(|e| e.terms().iter().any(|(c, _)| !crate::novikov::exponents_equal(c, &zero)))
    }

    pub fn is_diagonal(&self) -> bool {
        let m = self.rank();
        (0..m).all(|i| (0..m).all(|j| i == j || self.omega.get(i, j).is_zero()))
    }

    /// `P⁻¹ ℏ P' + P⁻¹ Ω P`.
    pub fn gauge_transform(&self, p: &Matrix<Transseries<R, P>>) -> Result<Self, ConnError> {
        if p.rows() != self.rank() || !p.is_square() {
            return Err(ConnError::Dimension("gauge matrix size".into()));
        }
        for e in p.entries() {
            if !(Arc::ptr_eq(e.trunc(), &self.trunc) || **e.trunc() == *self.trunc) {
                return Err(ConnError::TruncationMismatch);
            }
        }
        let p_inv = p.inverse().ok_or(ConnError::NotInvertible)?;
        let mut dp = p.map(|e| e.derivative());
        for i in 0..dp.rows() {
            for j in 0..dp.cols() {
                let v = dp.get(i, j).mul_hbar(1)?;
                dp.set(i, j, v);
            }
        }
        let omega = p_inv.mul(&dp.add(&self.omega.mul(p)));
        Self::new(omega, self.base.clone())
    }

    pub fn record(&self) -> ConnectionRecord {
        ConnectionRecord {
            mode: R::MODE.to_string(),
            rank: self.rank(),
            base: [ScalarRepr::of(&self.base.re), ScalarRepr::of(&self.base.im)],
            pole_set: self.pole_set.iter().map(|z| [z.re, z.im]).collect(),
            omega: (0..self.rank())
                .map(|i| (0..self.rank()).map(|j| self.omega.get(i, j).record()).collect())
                .collect(),
        }
    }
}

impl<R: Real> HbarConnection<R, RatFunc<R>> {
    /// `ℰ^{α/ℏ}`: the rank-1 connection with `Ω = dα/dx`.
    pub fn exponential_module(alpha: &RatFunc<R>, trunc: Arc<Truncation<R>>, base: C<R>) -> Result<Self, ConnError> {
        if alpha.eval(&base).is_none() {
            return Err(ConnError::PoleAtBasePoint);
        }
        let entry = Transseries::constant(trunc, alpha.derivative());
        Self::new(Matrix::from_rows(vec![vec![entry]]), base)
    }

    /// Parses a matrix of expression strings in `x`, `h` and `T^c`.
    pub fn from_strings(rows: &[Vec<String>], trunc: Arc<Truncation<R>>, base: C<R>) -> Result<Self, ConnError> {
        let parsed = rows
            .iter()
            .map(|r| r.iter().map(|s| Transseries::parse(s, trunc.clone())).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        if parsed.iter().any(|r| r.len() != parsed.len()) {
            return Err(ConnError::NotSquare);
        }
        Self::new(Matrix::from_rows(parsed), base)
    }

    /// Taylor jets of every coefficient at the base point.
    pub fn to_jets(&self, prec: usize) -> Result<HbarConnection<R, Jet<R>>, ConnError> {
        let mut rows = Vec::with_capacity(self.rank());
        for i in 0..self.rank() {
            let mut row = Vec::with_capacity(self.rank());
            for j in 0..self.rank() {
                row.push(self.omega.get(i, j).to_jets(&self.base, prec).map_err(|_| ConnError::PoleAtBasePoint)?);
            }
            rows.push(row);
        }
        HbarConnection::new(Matrix::from_rows(rows), self.base.clone())
    }

    pub fn characteristic_variety(&self) -> SpectralData<R> {
        SpectralData::of(self)
    }
}

/// Coefficients `c_0, …, c_m` (low to high, `c_m = 1`) of `det(ξ − A)` by
/// the Faddeev–LeVerrier recursion.
pub fn char_poly_coeffs<R: Real, P: ParamRing<R>>(a: &Matrix<P>) -> Vec<P> {
    let m = a.rows();
    let proto = a.get(0, 0).clone();
    let ident = Matrix::identity_like(m, &proto);
    let mut c = vec![proto.zero_like(); m + 1];
    c[m] = proto.one_like();
    let mut mk = Matrix::zeros_like(m, m, &proto);
    for k in 1..=m {
        mk = a.mul(&mk).add(&ident.scale(&c[m + 1 - k]));
        let tr = a.mul(&mk).trace();
        c[m - k] = tr.scale(&c_real(-R::one() / R::from_usize(k).unwrap()));
    }
    c
}

/// Eigenvalues of a constant matrix, numerically.
pub fn eigenvalues_f64<R: Real>(a: &Matrix<C<R>>) -> Vec<Complex64> {
    let af: Matrix<C<f64>> = a.map(c_to_f64);
    poly_roots(&char_poly_coeffs::<f64, C<f64>>(&af))
}

/// A sheet of the spectral curve, labelled by its value at the base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    pub value_at_base: [f64; 2],
    pub multiplicity: usize,
}

/// Characteristic polynomial, discriminant, turning points and sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData<R: Real> {
    pub char_poly: Vec<RatFunc<R>>,
    pub discriminant: RatFunc<R>,
    pub turning_points: Vec<Complex64>,
    pub sheets: Vec<Sheet>,
    pub base: Complex64,
}

const PRIMITIVE_PIECES: usize = 48;
const PRIMITIVE_NODES: usize = 8;

impl<R: Real> SpectralData<R> {
    fn of(conn: &HbarConnection<R, RatFunc<R>>) -> Self {
        let char_poly = char_poly_coeffs::<R, RatFunc<R>>(&conn.classical_part());
        Self::from_char_poly(char_poly, c_to_f64(conn.base()))
    }

    /// Spectral data of a monic characteristic polynomial (coefficients low
    /// to high) with sheets labelled at `base`.
    pub fn from_char_poly(char_poly: Vec<RatFunc<R>>, base: Complex64) -> Self {
        let discriminant = discriminant(&char_poly);
        let turning_points = if discriminant.is_zero() {
            Vec::new()
        } else {
            let mut tp: Vec<Complex64> =
                cluster_roots(&discriminant.num().roots_f64(), 1e-6).into_iter().map(|(z, _)| z).collect();
            tp.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
            tp
        };
        let mut s = Self { char_poly, discriminant, turning_points, sheets: Vec::new(), base };
        s.sheets = cluster_roots(&s.roots_at(base), 1e-7)
            .into_iter()
            .map(|(z, m)| Sheet { value_at_base: [z.re, z.im], multiplicity: m })
            .collect();
        s
    }

    pub fn degree(&self) -> usize {
        self.char_poly.len() - 1
    }

    pub fn char_poly_at(&self, x: Complex64) -> Vec<Complex64> {
        self.char_poly.iter().map(|c| c.eval_f64(x)).collect()
    }

    /// Roots `λ` of the characteristic polynomial at `x`.
    pub fn roots_at(&self, x: Complex64) -> Vec<Complex64> {
        poly_roots(&self.char_poly_at(x))
    }

    /// Values of a sheet along a path from the base point, continued by
    /// nearest-root matching.
    pub fn track(&self, sheet: usize, path: &[Complex64]) -> Vec<Complex64> {
        let s = &self.sheets[sheet].value_at_base;
        let mut prev = Complex64::new(s[0], s[1]);
        path.iter()
            .map(|&x| {
                let next = self
                    .roots_at(x)
                    .into_iter()
                    .min_by(|a, b| (a - prev).norm().partial_cmp(&(b - prev).norm()).unwrap())
                    .unwrap_or(prev);
                prev = next;
                next
            })
            .collect()
    }

    /// `∫ λ dx` along the straight segment from the base point to `x`.
    pub fn primitive(&self, sheet: usize, x: Complex64) -> Complex64 {
        let rule = crate::numeric::gauss_legendre(PRIMITIVE_NODES);
        let (a, b) = (self.base, x);
        let mut nodes = Vec::with_capacity(PRIMITIVE_PIECES * PRIMITIVE_NODES);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in 0..PRIMITIVE_PIECES {
            let s0 = p as f64 / PRIMITIVE_PIECES as f64;
            let s1 = (p + 1) as f64 / PRIMITIVE_PIECES as f64;
            for &(u, w) in &rule {
                nodes.push(a + (b - a) * (0.5 * (s0 + s1) + 0.5 * (s1 - s0) * u));
                weights.push(0.5 * (s1 - s0) * w);
            }
        }
        let values = self.track(sheet, &nodes);
        values.iter().zip(&weights).map(|(v, w)| v * w).sum::<Complex64>() * (b - a)
    }

    pub fn record(&self) -> SpectralRecord {
        SpectralRecord {
            char_poly: self.char_poly.iter().map(|c| c.record()).collect(),
            char_poly_text: char_poly_text(&self.char_poly),
            discriminant: self.discriminant.record(),
            turning_points: self.turning_points.iter().map(|z| [z.re, z.im]).collect(),
            sheets: self.sheets.clone(),
        }
    }
}

fn char_poly_text<R: Real>(c: &[RatFunc<R>]) -> String {
    let mut parts = Vec::new();
    for (k, v) in c.iter().enumerate().rev() {
        if v.is_zero() {
            continue;
        }
        let xi = match k {
            0 => String::new(),
            1 => "ξ".to_string(),
            _ => format!("ξ^{k}"),
        };
        parts.push(match (v.as_constant(), k) {
            (Some(z), _) if k > 0 && z == crate::scalar::c_one() => xi,
            (_, 0) => format!("({v})"),
            _ => format!("({v})·{xi}"),
        });
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Discriminant `(-1)^{m(m-1)/2} Res(p, p')` of a monic polynomial in `ξ`.
fn discriminant<R: Real>(p: &[RatFunc<R>]) -> RatFunc<R> {
    let m = p.len() - 1;
    if m <= 1 {
        return RatFunc::one();
    }
    let dp: Vec<RatFunc<R>> =
        (1..=m).map(|k| p[k].scale(&c_real(R::from_usize(k).unwrap()))).collect();
    let n = 2 * m - 1;
    let zero = RatFunc::zero();
    let mut rows = vec![vec![zero.clone(); n]; n];
    for i in 0..m - 1 {
        for (k, c) in p.iter().rev().enumerate() {
            rows[i][i + k] = c.clone();
        }
    }
    for i in 0..m {
        for (k, c) in dp.iter().rev().enumerate() {
            rows[m - 1 + i][i + k] = c.clone();
        }
    }
    let det = Matrix::from_rows(rows).determinant();
    if (m * (m - 1) / 2) % 2 == 1 {
        det.neg()
    } else {
        det
    }
}

/// Free-function forms of the connection operations.
pub fn exponential_module<R: Real>(
    alpha: &RatFunc<R>,
    trunc: Arc<Truncation<R>>,
    base: C<R>,
) -> Result<HbarConnection<R>, ConnError> {
    HbarConnection::exponential_module(alpha, trunc, base)
}

pub fn characteristic_variety<R: Real>(conn: &HbarConnection<R>) -> SpectralData<R> {
    conn.characteristic_variety()
}

pub fn gauge_transform<R: Real, P: ParamRing<R>>(
    conn: &HbarConnection<R, P>,
    p: &Matrix<Transseries<R, P>>,
) -> Result<HbarConnection<R, P>, ConnError> {
    conn.gauge_transform(p)
}

/// Identity gauge matrix in the connection's truncation.
pub fn identity_gauge<R: Real, P: ParamRing<R>>(conn: &HbarConnection<R, P>) -> Matrix<Transseries<R, P>> {
    let one = Transseries::constant(conn.trunc.clone(), conn.proto().one_like());
    Matrix::identity_like(conn.rank(), &one)
}

/// Parses one expression as a transseries in a connection's truncation.
pub fn parse_entry<R: Real>(s: &str, trunc: &Arc<Truncation<R>>) -> Result<Transseries<R, RatFunc<R>>, ConnError> {
    parse_expr(s).map_err(TsError::from)?;
    Ok(Transseries::parse(s, trunc.clone())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    pub mode: String,
    pub rank: usize,
    pub base: [ScalarRepr; 2],
    pub pole_set: Vec<[f64; 2]>,
    pub omega: Vec<Vec<TransseriesRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub char_poly: Vec<RatFuncRecord>,
    pub char_poly_text: String,
    pub discriminant: RatFuncRecord,
    pub turning_points: Vec<[f64; 2]>,
    pub sheets: Vec<Sheet>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_ratfunc;
    use crate::scalar::c_int;
    use num_rational::BigRational;

    type Q = BigRational;

    fn trunc() -> Arc<Truncation<Q>> {
        Arc::new(Truncation::lambda0(Q::from_integer(3.into()), 4))
    }

    fn conn(rows: &[&[&str]]) -> HbarConnection<Q> {
        let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        HbarConnection::from_strings(&rows, trunc(), c_int(1)).unwrap()
    }

    #[test]
    fn exponential_modules() {
        let t = trunc();
        let e = HbarConnection::exponential_module(&parse_ratfunc::<Q>("x^2/2").unwrap(), t.clone(), c_zero()).unwrap();
        assert_eq!(e.entry(0, 0), &Transseries::parse("x", t.clone()).unwrap());
        let e = HbarConnection::exponential_module(&parse_ratfunc::<Q>("1/x").unwrap(), t.clone(), c_int(1)).unwrap();
        assert_eq!(e.entry(0, 0), &Transseries::parse("-1/x^2", t.clone()).unwrap());
        assert_eq!(e.pole_set().len(), 1);
        assert!(e.pole_set()[0].norm() < 1e-9);
        let z = HbarConnection::exponential_module(&RatFunc::zero(), t.clone(), c_zero()).unwrap();
        assert!(z.entry(0, 0).is_zero());
        assert_eq!(
            HbarConnection::exponential_module(&parse_ratfunc::<Q>("1/x").unwrap(), t, c_zero()),
            Err(ConnError::PoleAtBasePoint)
        );
    }

    #[test]
    fn characteristic_polynomials() {
        let s = conn(&[&["0", "1"], &["x", "0"]]).characteristic_variety();
        assert_eq!(s.char_poly[0], parse_ratfunc("-x").unwrap());
        assert!(s.char_poly[1].is_zero());
        assert_eq!(s.turning_points.len(), 1);
        assert!(s.turning_points[0].norm() < 1e-9);
        let s = conn(&[&["h", "h*x"], &["0", "h"]]).characteristic_variety();
        assert_eq!(s.char_poly, vec![RatFunc::zero(), RatFunc::zero(), RatFunc::one()]);
        assert_eq!(s.sheets, vec![Sheet { value_at_base: [0.0, 0.0], multiplicity: 2 }]);
    }

    #[test]
    fn primitives_follow_sheets() {
        let s = conn(&[&["0", "1"], &["x^2", "0"]]).characteristic_variety();
        // sheets ±x from base 1; primitive of x from 1 to 2 is 3/2
        let k = s.sheets.iter().position(|sh| sh.value_at_base[0] > 0.0).unwrap();
        let v = s.primitive(k, Complex64::new(2.0, 0.5));
        let exact = (Complex64::new(2.0, 0.5).powi(2) - 1.0) / 2.0;
        assert!((v - exact).norm() < 1e-12, "{v}");
    }

    #[test]
    fn gauge_by_scalar_function() {
        let t = trunc();
        let zero = conn(&[&["0"]]);
        let u = Transseries::parse("1 + x^2", t.clone()).unwrap();
        let g = zero.gauge_transform(&Matrix::from_rows(vec![vec![u]])).unwrap();
        assert_eq!(g.entry(0, 0), &Transseries::parse("h*2*x/(1 + x^2)", t.clone()).unwrap());
        let c = conn(&[&["x", "h"], &["T", "1"]]);
        assert_eq!(c.gauge_transform(&identity_gauge(&c)).unwrap(), c);
    }

    #[test]
    fn gauge_composition() {
        let t = trunc();
        let c = conn(&[&["x", "h"], &["T", "1"]]);
        let p1 = Matrix::from_rows(vec![
            vec![Transseries::parse("1", t.clone()).unwrap(), Transseries::parse("x*h", t.clone()).unwrap()],
            vec![Transseries::parse("0", t.clone()).unwrap(), Transseries::parse("1 + T", t.clone()).unwrap()],
        ]);
        let p2 = Matrix::from_rows(vec![
            vec![Transseries::parse("2", t.clone()).unwrap(), Transseries::parse("0", t.clone()).unwrap()],
            vec![Transseries::parse("x", t.clone()).unwrap(), Transseries::parse("1", t.clone()).unwrap()],
        ]);
        let lhs = c.gauge_transform(&p1.mul(&p2)).unwrap();
        let rhs = c.gauge_transform(&p1).unwrap().gauge_transform(&p2).unwrap();
        assert_eq!(lhs, rhs);
    }
}
