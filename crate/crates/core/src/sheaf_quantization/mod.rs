//! Combinatorial sheaf-quantization data: free Novikov modules over the
//! Stokes regions glued by unipotent Voros matrices.
//!
//! A region module is `⊕ᵢ Λ^{mᵢ}`, one summand per sheet with primitive `αᵢ`
//! at the region's base point. A gluing from region `A` to region `B` is
//! stored in the solution bases normalized at its anchor point on the curve;
//! going around a vertex, each step is rebased to the vertex by the diagonal
//! change `diag(T^{rᵢ})` with `rᵢ = ∫_{anchor}^{vertex} λᵢ`.

mod build;
mod hom;
pub mod synthetic;

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::cone::{ConeRecord, ConicRegion};
use crate::novikov::{NovikovElement, NovikovError, NovikovRecord, ScalarRepr};
use crate::ring::{Matrix, RingElem};
use crate::scalar::{c_to_f64, c_zero, Real, C};

pub use build::{build_sq, GluingRules};
pub use hom::{hom_module, HomFamily, HomModule, HomOptions};

pub const SQ_SCHEMA_VERSION: u32 = 1;

/// Valuation tolerance for comparisons in floating mode.
pub const VAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqError {
    #[error("Stokes graph is not GMN-generic: curve {curve} runs into turning point {turning_point}")]
    NotGeneric { curve: usize, turning_point: usize },
    #[error("no gluing rule for curve {0}")]
    MissingRule(String),
    #[error("Stokes graph has no region arrangement")]
    MissingRegions,
    #[error("loop is not closed: {0}")]
    NotClosed(String),
    #[error("the two SQs do not share an underlying graph")]
    GraphMismatch,
    #[error("malformed SQ data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheetDatum<R: Real> {
    pub label: usize,
    /// Primitive `∫λ` at the region's base point.
    pub alpha: C<R>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionModule<R: Real> {
    pub region: usize,
    pub base_point: Complex64,
    pub sheets: Vec<SheetDatum<R>>,
}

impl<R: Real> RegionModule<R> {
    pub fn rank(&self) -> usize {
        self.sheets.iter().map(|s| s.multiplicity).sum()
    }

    /// Sheet position of each basis index.
    pub fn index_sheets(&self) -> Vec<usize> {
        self.sheets.iter().enumerate().flat_map(|(k, s)| std::iter::repeat(k).take(s.multiplicity)).collect()
    }

    /// `α` of each basis index.
    pub fn index_alphas(&self) -> Vec<C<R>> {
        self.index_sheets().into_iter().map(|k| self.sheets[k].alpha.clone()).collect()
    }
}

/// Gluing from region `from` to region `to`: `ψ^{to} = matrix · ψ^{from}`.
/// `permutation[i]` is the `to` index of the continuation of `from` index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gluing<R: Real> {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub curve: Option<usize>,
    /// Curve type `(i, j)` in `from` indices: the entry sits in row `i`, column `j`.
    pub sheets: Option<[usize; 2]>,
    pub anchor: Option<Complex64>,
    pub weight: Option<f64>,
    pub coefficient: Option<Complex64>,
    pub matrix: Matrix<NovikovElement<R>>,
    pub permutation: Vec<usize>,
}

/// One step of a vertex cycle. `shift` (in the gluing's `from` indices,
/// empty for none) rebases the gluing from its anchor to the vertex.
/// `relabel`, when present, sends the gluing's `from` and `to` indices to
/// the sheet labels at the vertex itself, so that every step of a cycle is
/// written in one local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SqStep<R: Real> {
    pub gluing: usize,
    pub forward: bool,
    pub shift: Vec<C<R>>,
    pub relabel: Option<[Vec<usize>; 2]>,
}

impl<R: Real> SqStep<R> {
    pub fn plain(gluing: usize, forward: bool) -> Self {
        Self { gluing, forward, shift: vec![], relabel: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum SqVertexKind {
    Crossing,
    TurningPoint(usize),
    CurveEnd,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqVertex<R: Real> {
    pub id: usize,
    pub position: Option<Complex64>,
    pub kind: SqVertexKind,
    /// Counterclockwise cycle of steps; the product is taken with the first
    /// step rightmost.
    pub steps: Vec<SqStep<R>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheafQuantizationData<R: Real> {
    pub theta: f64,
    pub cone: ConicRegion<R>,
    pub cutoff: R,
    pub regions: Vec<RegionModule<R>>,
    pub gluings: Vec<Gluing<R>>,
    pub vertices: Vec<SqVertex<R>>,
}

/// Exponent cone for phase `θ`: the closed half-plane `Re(c e^{−iθ}) ≥ 0`
/// with direction `e^{iθ}`.
pub fn phase_cone<R: Real>(theta: f64) -> ConicRegion<R> {
    ConicRegion::ray(R::from_f64_lossy(theta / std::f64::consts::PI)).polar_dual()
}

/// Shifts come from quadrature, which near a turning point is only good to
/// about 1e-9; exponents that leave the cone by less than this are snapped
/// to the origin.
const SNAP_TOL: f64 = 1e-6;

fn snap_exponent<R: Real>(c: C<R>, cone: &ConicRegion<R>) -> C<R> {
    if !cone.contains(&c) && c_to_f64(&c).norm() < SNAP_TOL {
        c_zero()
    } else {
        c
    }
}

/// `x · T^{shift}`, with exponents that fall outside the cone by rounding
/// only snapped to the origin.
pub(crate) fn shifted<R: Real>(x: &NovikovElement<R>, shift: &C<R>) -> Result<NovikovElement<R>, NovikovError> {
    let terms =
        x.terms().iter().map(|(c, a)| (snap_exponent(c.clone() + shift.clone(), x.cone()), a.clone())).collect();
    NovikovElement::from_terms(terms, x.cone().clone(), x.cutoff().clone())
}

impl<R: Real> SheafQuantizationData<R> {
    pub fn proto(&self) -> Result<NovikovElement<R>, SqError> {
        Ok(NovikovElement::zero(self.cone.clone(), self.cutoff.clone())?)
    }

    /// Checks dimensions, permutations and diagonal units.
    pub fn validate(&self) -> Result<(), SqError> {
        for g in &self.gluings {
            let (Some(a), Some(b)) = (self.regions.get(g.from), self.regions.get(g.to)) else {
                return Err(SqError::Invalid(format!("gluing {} refers to a missing region", g.id)));
            };
            let n = a.rank();
            if b.rank() != n || g.matrix.rows() != n || g.matrix.cols() != n || g.permutation.len() != n {
                return Err(SqError::Invalid(format!("gluing {} has mismatched rank", g.id)));
            }
            let mut seen = vec![false; n];
            for &p in &g.permutation {
                if p >= n || std::mem::replace(&mut seen[p], true) {
                    return Err(SqError::Invalid(format!("gluing {} has a bad permutation", g.id)));
                }
            }
            if g.matrix.inverse().is_none() {
                return Err(SqError::Invalid(format!("gluing {} is not invertible at the cutoff", g.id)));
            }
        }
        for v in &self.vertices {
            if let Some(s) = v.steps.iter().find(|s| s.gluing >= self.gluings.len()) {
                return Err(SqError::Invalid(format!("vertex {} refers to missing gluing {}", v.id, s.gluing)));
            }
        }
        Ok(())
    }

    /// Region entered and left by a step.
    pub fn step_regions(&self, s: &SqStep<R>) -> (usize, usize) {
        let g = &self.gluings[s.gluing];
        if s.forward {
            (g.from, g.to)
        } else {
            (g.to, g.from)
        }
    }

    /// Matrix of a step, rebased by its shift and inverted when backward.
    pub fn step_matrix(&self, s: &SqStep<R>) -> Result<Matrix<NovikovElement<R>>, SqError> {
        let g = &self.gluings[s.gluing];
        let mut m = g.matrix.clone();
        if !s.shift.is_empty() {
            let n = m.rows();
            let mut to_shift = vec![c_zero::<R>(); n];
            for (i, &p) in g.permutation.iter().enumerate() {
                to_shift[p] = s.shift[i].clone();
            }
            for i in 0..n {
                for j in 0..n {
                    let e = m.get(i, j);
                    if !e.is_zero() {
                        let v = shifted(e, &(to_shift[i].clone() - s.shift[j].clone()))?;
                        m.set(i, j, v);
                    }
                }
            }
        }
        if let Some([from, to]) = &s.relabel {
            let proto = m.get(0, 0).clone();
            let mut local = Matrix::zeros_like(m.rows(), m.cols(), &proto);
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    local.set(to[i], from[j], m.get(i, j).clone());
                }
            }
            m = local;
        }
        if s.forward {
            Ok(m)
        } else {
            m.inverse().ok_or_else(|| SqError::Invalid(format!("gluing {} is not invertible", g.id)))
        }
    }

    /// Ordered product of step matrices, first step rightmost.
    pub fn path_product(&self, steps: &[SqStep<R>]) -> Result<Matrix<NovikovElement<R>>, SqError> {
        let n = match steps.first() {
            Some(s) => self.regions[self.step_regions(s).0].rank(),
            None => return Err(SqError::NotClosed("empty loop".into())),
        };
        let mut m = Matrix::identity_like(n, &self.proto()?);
        for s in steps {
            m = self.step_matrix(s)?.mul(&m);
        }
        Ok(m)
    }

    pub fn to_float(&self) -> SheafQuantizationData<f64> {
        let conv = |m: &Matrix<NovikovElement<R>>| {
            Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j).to_float())
        };
        SheafQuantizationData {
            theta: self.theta,
            cone: self.cone.convert(),
            cutoff: self.cutoff.to_f64_lossy(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionModule {
                    region: r.region,
                    base_point: r.base_point,
                    sheets: r
                        .sheets
                        .iter()
                        .map(|s| SheetDatum { label: s.label, alpha: c_to_f64(&s.alpha), multiplicity: s.multiplicity })
                        .collect(),
                })
                .collect(),
            gluings: self
                .gluings
                .iter()
                .map(|g| Gluing {
                    id: g.id,
                    from: g.from,
                    to: g.to,
                    curve: g.curve,
                    sheets: g.sheets,
                    anchor: g.anchor,
                    weight: g.weight,
                    coefficient: g.coefficient,
                    matrix: conv(&g.matrix),
                    permutation: g.permutation.clone(),
                })
                .collect(),
            vertices: self
                .vertices
                .iter()
                .map(|v| SqVertex {
                    id: v.id,
                    position: v.position,
                    kind: v.kind,
                    steps: v
                        .steps
                        .iter()
                        .map(|s| SqStep {
                            gluing: s.gluing,
                            forward: s.forward,
                            shift: s.shift.iter().map(c_to_f64).collect(),
                            relabel: s.relabel.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Same regions, gluing pattern and phase.
    pub fn same_graph(&self, other: &Self) -> bool {
        self.theta == other.theta
            && self.cutoff == other.cutoff
            && self.cone.same_region(&other.cone)
            && self.regions.len() == other.regions.len()
            && self.gluings.len() == other.gluings.len()
            && self.gluings.iter().zip(&other.gluings).all(|(a, b)| a.from == b.from && a.to == b.to && a.curve == b.curve)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleOptions {
    /// Exponents closer than this are merged before judging the residual.
    pub val_tol: f64,
    /// Merged coefficients below this count as zero.
    pub coef_tol: f64,
}

impl Default for CocycleOptions {
    fn default() -> Self {
        Self { val_tol: VAL_TOL, coef_tol: VAL_TOL }
    }
}

impl CocycleOptions {
    /// Structural comparison, for exact-mode data.
    pub fn exact() -> Self {
        Self { val_tol: 0.0, coef_tol: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexStatus {
    Pass,
    Fail,
    /// Residual computed but not judged (turning-point fill-in is not modeled).
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexReport {
    pub vertex: usize,
    pub kind: SqVertexKind,
    pub position: Option<Complex64>,
    pub status: VertexStatus,
    /// Valuation of `product − 1` (`+∞` serialized as `null`).
    pub residual_valuation: Option<f64>,
    pub max_residual_coefficient: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleReport {
    pub pass: bool,
    pub checked: usize,
    pub failed: Vec<usize>,
    pub vertices: Vec<VertexReport>,
}

/// Residual terms of `m − 1` after merging nearby exponents:
/// `(directional value, |coefficient|)` of each surviving cluster. Terms
/// within `val_tol` of the cutoff count as truncated.
fn residual_terms<R: Real>(
    m: &Matrix<NovikovElement<R>>,
    cone: &ConicRegion<R>,
    cutoff: f64,
    opts: &CocycleOptions,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let mut e = m.get(i, j).clone();
            if i == j {
                e = e.rsub(&e.one());
            }
            if opts.val_tol == 0.0 && opts.coef_tol == 0.0 {
                for (c, a) in e.terms() {
                    out.push((cone.directional_value(c).to_f64_lossy(), c_to_f64(a).norm()));
                }
                continue;
            }
            let mut clusters: Vec<(Complex64, Complex64)> = Vec::new();
            for (c, a) in e.terms() {
                let (cf, af) = (c_to_f64(c), c_to_f64(a));
                match clusters.iter_mut().find(|(x, _)| (x - cf).norm() <= opts.val_tol * (1.0 + cf.norm())) {
                    Some(cl) => cl.1 += af,
                    None => clusters.push((cf, af)),
                }
            }
            let dir = c_to_f64(cone.direction());
            for (c, a) in clusters {
                let value = (c * dir.conj()).re / dir.norm();
                if a.norm() > opts.coef_tol && value < cutoff - opts.val_tol * (1.0 + cutoff) {
                    out.push((value, a.norm()));
                }
            }
        }
    }
    out
}

/// Product of the gluings around every vertex against the identity.
pub fn check_cocycle<R: Real>(sq: &SheafQuantizationData<R>, opts: &CocycleOptions) -> CocycleReport {
    let mut vertices = Vec::new();
    for v in &sq.vertices {
        let mut rep = VertexReport {
            vertex: v.id,
            kind: v.kind,
            position: v.position,
            status: VertexStatus::Pass,
            residual_valuation: None,
            max_residual_coefficient: 0.0,
            note: None,
        };
        match sq.path_product(&v.steps) {
            Ok(m) => {
                let terms = residual_terms(&m, &sq.cone, sq.cutoff.to_f64_lossy(), opts);
                rep.residual_valuation = terms.iter().map(|t| t.0).reduce(f64::min);
                rep.max_residual_coefficient = terms.iter().map(|t| t.1).fold(0.0, f64::max);
                if !terms.is_empty() {
                    rep.status = VertexStatus::Fail;
                }
            }
            Err(e) => {
                rep.status = VertexStatus::Fail;
                rep.note = Some(e.to_string());
            }
        }
        if let SqVertexKind::TurningPoint(k) = v.kind {
            log::info!("vertex {} sits on turning point {k}; its residual is reported but not judged", v.id);
            rep.status = VertexStatus::Skipped;
            rep.note.get_or_insert_with(|| "turning-point fill-in is not modeled".into());
        }
        vertices.push(rep);
    }
    let failed: Vec<usize> = vertices.iter().filter(|r| r.status == VertexStatus::Fail).map(|r| r.vertex).collect();
    CocycleReport {
        pass: failed.is_empty(),
        checked: vertices.iter().filter(|r| r.status != VertexStatus::Skipped).count(),
        failed,
        vertices,
    }
}

fn chain_steps<R: Real>(sq: &SheafQuantizationData<R>, steps: &[SqStep<R>]) -> Result<(), SqError> {
    let Some(first) = steps.first() else {
        return Err(SqError::NotClosed("empty loop".into()));
    };
    if let Some(s) = steps.iter().find(|s| s.gluing >= sq.gluings.len()) {
        return Err(SqError::NotClosed(format!("no gluing {}", s.gluing)));
    }
    let start = sq.step_regions(first).0;
    let mut at = start;
    for s in steps {
        let (a, b) = sq.step_regions(s);
        if a != at {
            return Err(SqError::NotClosed(format!("step through gluing {} starts in region {a}, not {at}", s.gluing)));
        }
        at = b;
    }
    if at != start {
        return Err(SqError::NotClosed(format!("walk ends in region {at}, not {start}")));
    }
    Ok(())
}

/// Monodromy along a closed walk of gluing steps.
pub fn monodromy_steps<R: Real>(
    sq: &SheafQuantizationData<R>,
    steps: &[SqStep<R>],
) -> Result<Matrix<NovikovElement<R>>, SqError> {
    chain_steps(sq, steps)?;
    sq.path_product(steps)
}

/// Monodromy along a closed region walk `r₀, r₁, …, r₀` (a single region is
/// the constant loop). Each hop uses the
/// lowest-numbered gluing between the two regions, forward ones first.
pub fn monodromy<R: Real>(sq: &SheafQuantizationData<R>, walk: &[usize]) -> Result<Matrix<NovikovElement<R>>, SqError> {
    if let [r] = walk {
        let rank = sq.regions.get(*r).ok_or_else(|| SqError::NotClosed(format!("no region {r}")))?.rank();
        return Ok(Matrix::identity_like(rank, &sq.proto()?));
    }
    if walk.len() < 2 || walk.first() != walk.last() {
        return Err(SqError::NotClosed(format!("{walk:?} does not return to its start")));
    }
    let mut steps = Vec::new();
    for w in walk.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fwd = sq.gluings.iter().find(|g| g.from == a && g.to == b).map(|g| SqStep::plain(g.id, true));
        let bwd = || sq.gluings.iter().find(|g| g.to == a && g.from == b).map(|g| SqStep::plain(g.id, false));
        match fwd.or_else(bwd) {
            Some(s) => steps.push(s),
            None => return Err(SqError::NotClosed(format!("regions {a} and {b} are not adjacent"))),
        }
    }
    monodromy_steps(sq, &steps)
}

/// Negated primitives and inverse-transposed gluings.
pub fn dualize<R: Real>(sq: &SheafQuantizationData<R>) -> Result<SheafQuantizationData<R>, SqError> {
    let mut out = sq.clone();
    for r in &mut out.regions {
        for s in &mut r.sheets {
            s.alpha = -s.alpha.clone();
        }
    }
    for g in &mut out.gluings {
        g.matrix = g.matrix.inverse().ok_or_else(|| SqError::Invalid(format!("gluing {} is not invertible", g.id)))?.transpose();
        g.coefficient = g.coefficient.map(|a| -a);
    }
    for v in &mut out.vertices {
        for s in &mut v.steps {
            for x in &mut s.shift {
                *x = -x.clone();
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SheetDoc {
    label: usize,
    alpha: [ScalarRepr; 2],
    multiplicity: usize,
}

#[derive(Serialize)]
struct RegionDoc {
    id: usize,
    base_point: Complex64,
    sheets: Vec<SheetDoc>,
}

#[derive(Serialize)]
struct StepDoc {
    gluing: usize,
    forward: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    relabel: Option<[Vec<usize>; 2]>,
}

#[derive(Serialize)]
struct VertexDoc {
    id: usize,
    #[serde(flatten)]
    kind: SqVertexKind,
    position: Option<Complex64>,
    steps: Vec<StepDoc>,
}

#[derive(Serialize)]
struct EdgeDoc {
    id: usize,
    from: usize,
    to: usize,
    curve: Option<usize>,
    sheets: Option<[usize; 2]>,
    anchor: Option<Complex64>,
    weight: Option<f64>,
    coefficient: Option<Complex64>,
    permutation: Vec<usize>,
    matrix: Vec<Vec<NovikovRecord>>,
}

#[derive(Serialize)]
struct SqDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    mode: &'static str,
    theta: f64,
    cutoff: ScalarRepr,
    cone: ConeRecord,
    regions: Vec<RegionDoc>,
    edges: Vec<EdgeDoc>,
    vertices: Vec<VertexDoc>,
    verification: Option<&'a CocycleReport>,
}

/// Pretty JSON document with a schema version and an optional report block.
pub fn sq_json<R: Real>(sq: &SheafQuantizationData<R>, report: Option<&CocycleReport>) -> String {
    let doc = SqDoc {
        schema_version: SQ_SCHEMA_VERSION,
        kind: "sheaf_quantization",
        mode: R::MODE,
        theta: sq.theta,
        cutoff: ScalarRepr::of(&sq.cutoff),
        cone: sq.cone.record(),
        regions: sq
            .regions
            .iter()
            .map(|r| RegionDoc {
                id: r.region,
                base_point: r.base_point,
                sheets: r
                    .sheets
                    .iter()
                    .map(|s| SheetDoc {
                        label: s.label,
                        alpha: [ScalarRepr::of(&s.alpha.re), ScalarRepr::of(&s.alpha.im)],
                        multiplicity: s.multiplicity,
                    })
                    .collect(),
            })
            .collect(),
        edges: sq
            .gluings
            .iter()
            .map(|g| EdgeDoc {
                id: g.id,
                from: g.from,
                to: g.to,
                curve: g.curve,
                sheets: g.sheets,
                anchor: g.anchor,
                weight: g.weight,
                coefficient: g.coefficient,
                permutation: g.permutation.clone(),
                matrix: (0..g.matrix.rows())
                    .map(|i| (0..g.matrix.cols()).map(|j| g.matrix.get(i, j).record()).collect())
                    .collect(),
            })
            .collect(),
        vertices: sq
            .vertices
            .iter()
            .map(|v| VertexDoc {
                id: v.id,
                kind: v.kind,
                position: v.position,
                steps: v.steps.iter().map(|s| StepDoc { gluing: s.gluing, forward: s.forward, relabel: s.relabel.clone() }).collect(),
            })
            .collect(),
        verification: report,
    };
    serde_json::to_string_pretty(&doc).expect("SQ serializes")
}

impl<R: Real> fmt::Display for SheafQuantizationData<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SQ over {} regions, {} gluings, {} vertices (θ = {}, cutoff {})",
            self.regions.len(),
            self.gluings.len(),
            self.vertices.len(),
            self.theta,
            self.cutoff
        )
    }
}

#[cfg(test)]
mod tests;
