//! Hand-built SQ data: trivial and rank-1 models, a consistent triple, random
//! fans around a single vertex, strips of several vertices, and the numeric
//! side of rank-1 monodromy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::{
    phase_cone, Gluing, RegionModule, SheafQuantizationData, SheetDatum, SqError, SqStep, SqVertex, SqVertexKind,
};
use crate::cone::ConicRegion;
use crate::novikov::NovikovElement;
use crate::ring::{Matrix, RingElem};
use crate::scalar::{c_int, c_real, c_zero, Real, C};

fn region<R: Real>(id: usize, alphas: &[C<R>]) -> RegionModule<R> {
    RegionModule {
        region: id,
        base_point: Complex64::new(id as f64, 0.0),
        sheets: alphas
            .iter()
            .enumerate()
            .map(|(k, a)| SheetDatum { label: k, alpha: a.clone(), multiplicity: 1 })
            .collect(),
    }
}

fn gluing<R: Real>(id: usize, from: usize, to: usize, matrix: Matrix<NovikovElement<R>>) -> Gluing<R> {
    let n = matrix.rows();
    Gluing {
        id,
        from,
        to,
        curve: None,
        sheets: None,
        anchor: None,
        weight: None,
        coefficient: None,
        matrix,
        permutation: (0..n).collect(),
    }
}

/// One region, one sheet with the given primitive, no gluings.
pub fn point_module<R: Real>(alpha: C<R>, cone: ConicRegion<R>, cutoff: R) -> SheafQuantizationData<R> {
    SheafQuantizationData { theta: 0.0, cone, cutoff, regions: vec![region(0, &[alpha])], gluings: vec![], vertices: vec![] }
}

/// The unit object over a point: rank 1, `α = 0`.
pub fn trivial<R: Real>(cone: ConicRegion<R>, cutoff: R) -> SheafQuantizationData<R> {
    point_module(c_zero(), cone, cutoff)
}

/// Rank 1 over an annulus chart: one region glued to itself by `ψ`.
pub fn annulus_rank1<R: Real>(psi: NovikovElement<R>) -> SheafQuantizationData<R> {
    let (cone, cutoff) = (psi.cone().clone(), psi.cutoff().clone());
    let m = Matrix::from_rows(vec![vec![psi]]);
    SheafQuantizationData {
        theta: 0.0,
        cone,
        cutoff,
        regions: vec![region(0, &[c_zero()])],
        gluings: vec![gluing(0, 0, 0, m)],
        vertices: vec![],
    }
}

/// Three regions around one vertex with `V₀₁ = a`, `V₁₂ = b` and
/// `V₀₂ = b·a`; the vertex cycle is `0 → 1 → 2 → 0`.
pub fn consistent_triple<R: Real>(
    alphas: &[C<R>],
    a: Matrix<NovikovElement<R>>,
    b: Matrix<NovikovElement<R>>,
) -> SheafQuantizationData<R> {
    let proto = a.get(0, 0).clone();
    let c = b.mul(&a);
    SheafQuantizationData {
        theta: 0.0,
        cone: proto.cone().clone(),
        cutoff: proto.cutoff().clone(),
        regions: (0..3).map(|k| region(k, alphas)).collect(),
        gluings: vec![gluing(0, 0, 1, a), gluing(1, 1, 2, b), gluing(2, 0, 2, c)],
        vertices: vec![SqVertex {
            id: 0,
            position: None,
            kind: SqVertexKind::Synthetic,
            steps: vec![SqStep::plain(0, true), SqStep::plain(1, true), SqStep::plain(2, false)],
        }],
    }
}

fn random_exponent<R: Real>(rng: &mut impl Rng, cutoff: &R) -> C<R> {
    // quarter-integer exponents in (0, cutoff)
    let top = (cutoff.to_f64_lossy() * 4.0).ceil().max(2.0) as i64;
    c_real(R::from_ratio(rng.gen_range(1..top), 4))
}

fn random_scalar<R: Real>(rng: &mut impl Rng) -> C<R> {
    let n = rng.gen_range(1..=4) * if rng.gen_bool(0.5) { 1 } else { -1 };
    C::new(R::from_ratio(n, rng.gen_range(1..=3)), R::from_ratio(rng.gen_range(-2..=2), 2))
}

/// Random invertible matrix: unit diagonal with higher terms, sparse
/// positive-valuation off-diagonal monomials.
pub fn random_gluing_matrix<R: Real>(
    rng: &mut impl Rng,
    rank: usize,
    proto: &NovikovElement<R>,
) -> Result<Matrix<NovikovElement<R>>, SqError> {
    let (cone, cutoff) = (proto.cone().clone(), proto.cutoff().clone());
    let mut m = Matrix::zeros_like(rank, rank, proto);
    for i in 0..rank {
        for j in 0..rank {
            let mut terms = Vec::new();
            if i == j {
                terms.push((c_zero(), if rng.gen_bool(0.5) { c_int(1) } else { random_scalar(rng) }));
            }
            if rng.gen_bool(if i == j { 0.3 } else { 0.6 }) {
                terms.push((random_exponent(rng, &cutoff), random_scalar(rng)));
            }
            m.set(i, j, NovikovElement::from_terms(terms, cone.clone(), cutoff.clone())?);
        }
    }
    Ok(m)
}

/// `n ≥ 2` regions around one vertex, glued `k → k+1` by random matrices
/// and closed by `n−1 → 0` with the inverse product. Primitives are random
/// quarter-integers.
pub fn random_fan<R: Real>(
    rng: &mut impl Rng,
    rank: usize,
    n: usize,
    cutoff: R,
) -> Result<SheafQuantizationData<R>, SqError> {
    assert!(n >= 2 && rank >= 1);
    let cone = phase_cone::<R>(0.0);
    let proto = NovikovElement::zero(cone.clone(), cutoff.clone())?;
    let alphas: Vec<C<R>> = (0..rank).map(|_| c_real(R::from_ratio(rng.gen_range(-4..=4), 4))).collect();
    let mut gluings = Vec::with_capacity(n);
    let mut product = Matrix::identity_like(rank, &proto);
    for k in 0..n - 1 {
        let m = random_gluing_matrix(rng, rank, &proto)?;
        product = m.mul(&product);
        gluings.push(gluing(k, k, k + 1, m));
    }
    let close = product.inverse().ok_or_else(|| SqError::Invalid("random product is singular".into()))?;
    gluings.push(gluing(n - 1, n - 1, 0, close));
    Ok(SheafQuantizationData {
        theta: 0.0,
        cone,
        cutoff,
        regions: (0..n).map(|k| region(k, &alphas)).collect(),
        gluings,
        vertices: vec![SqVertex {
            id: 0,
            position: None,
            kind: SqVertexKind::Synthetic,
            steps: (0..n).map(|k| SqStep::plain(k, true)).collect(),
        }],
    })
}

/// A strip of `k ≥ 1` square vertices over regions `U_0..U_k` (top) and
/// `L_0..L_k` (bottom). Gluings are `W_i : L_i → U_i`, then `H_i : U_i → U_{i+1}`
/// and `B_i : L_i → L_{i+1}` with `B_i = W_{i+1}⁻¹ H_i W_i`, so vertex `i`
/// closes. Gluing ids: `W_i = i`, `H_i = k + 1 + i`, `B_i = 2k + 1 + i`.
pub fn random_strip<R: Real>(
    rng: &mut impl Rng,
    rank: usize,
    k: usize,
    cutoff: R,
) -> Result<SheafQuantizationData<R>, SqError> {
    assert!(k >= 1 && rank >= 1);
    let cone = phase_cone::<R>(0.0);
    let proto = NovikovElement::zero(cone.clone(), cutoff.clone())?;
    let alphas: Vec<C<R>> = (0..rank).map(|_| c_real(R::from_ratio(rng.gen_range(-4..=4), 4))).collect();
    let (up, low) = (|i: usize| i, |i: usize| k + 1 + i);
    let w: Vec<_> = (0..=k).map(|_| random_gluing_matrix(rng, rank, &proto)).collect::<Result<_, _>>()?;
    let h: Vec<_> = (0..k).map(|_| random_gluing_matrix(rng, rank, &proto)).collect::<Result<_, _>>()?;
    let mut gluings: Vec<Gluing<R>> = w.iter().enumerate().map(|(i, m)| gluing(i, low(i), up(i), m.clone())).collect();
    for (i, m) in h.iter().enumerate() {
        gluings.push(gluing(k + 1 + i, up(i), up(i + 1), m.clone()));
    }
    for i in 0..k {
        let wi = w[i + 1].inverse().ok_or_else(|| SqError::Invalid("random gluing is singular".into()))?;
        gluings.push(gluing(2 * k + 1 + i, low(i), low(i + 1), wi.mul(&h[i]).mul(&w[i])));
    }
    let vertices = (0..k)
        .map(|i| SqVertex {
            id: i,
            position: Some(Complex64::new(i as f64 + 0.5, 0.0)),
            kind: SqVertexKind::Synthetic,
            steps: vec![
                SqStep::plain(i, true),
                SqStep::plain(k + 1 + i, true),
                SqStep::plain(i + 1, false),
                SqStep::plain(2 * k + 1 + i, false),
            ],
        })
        .collect();
    Ok(SheafQuantizationData {
        theta: 0.0,
        cone,
        cutoff,
        regions: (0..2 * (k + 1)).map(|r| region(r, &alphas)).collect(),
        gluings,
        vertices,
    })
}

/// Continuation of `ψ' = −Ω ψ/ℏ` with `Ω = −ℏ L(ℏ)/(2πi x)` once around the
/// unit circle by classical RK4, where `L(ℏ)` is `log_psi` at `T = e^{−1/ℏ}`.
/// The solution is `x^{L/2πi}`, so the result approximates `e^{L}`.
pub fn rank1_numeric_monodromy<R: Real>(log_psi: &NovikovElement<R>, hbar: f64, steps: usize) -> Complex64 {
    let l = log_psi.eval_at_hbar(Complex64::new(hbar, 0.0));
    let omega = |x: Complex64| -l * hbar / (2.0 * PI * Complex64::i() * x);
    // dψ/dφ along x = e^{iφ}
    let rhs = |phi: f64, psi: Complex64| {
        let x = Complex64::from_polar(1.0, phi);
        -omega(x) * psi / hbar * (Complex64::i() * x)
    };
    let h = 2.0 * PI / steps as f64;
    let mut psi = Complex64::new(1.0, 0.0);
    for k in 0..steps {
        let phi = k as f64 * h;
        let k1 = rhs(phi, psi);
        let k2 = rhs(phi + h / 2.0, psi + k1 * (h / 2.0));
        let k3 = rhs(phi + h / 2.0, psi + k2 * (h / 2.0));
        let k4 = rhs(phi + h, psi + k3 * h);
        psi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    psi
}

/// Adds `coefficient · T^{exponent}` to one gluing entry.
pub fn perturb<R: Real>(
    sq: &SheafQuantizationData<R>,
    gluing: usize,
    (i, j): (usize, usize),
    exponent: C<R>,
    coefficient: C<R>,
) -> Result<SheafQuantizationData<R>, SqError> {
    let mut out = sq.clone();
    let e = out.gluings[gluing].matrix.get(i, j).clone();
    let t = NovikovElement::monomial(coefficient, exponent, e.cone().clone(), e.cutoff().clone())?;
    out.gluings[gluing].matrix.set(i, j, e.radd(&t));
    Ok(out)
}
