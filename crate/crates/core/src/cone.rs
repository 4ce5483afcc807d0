//! Angular cone arithmetic on the ℏ-plane: sectors, the cones they span,
//! additive hulls, polar duals, acuteness and γ-finiteness.
//!
//! Angles are stored in half-turns (multiples of π) in the scalar field `R`,
//! so rational inputs stay exact (`2/3` means 2π/3). Floating modes compare
//! angles with a tolerance of 1e-12 radians.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{c_to_f64, im_mul_conj, re_mul_conj, Real, C};

/// Angular tolerance in radians.
pub const ANGLE_TOL_RAD: f64 = 1e-12;

fn tol() -> f64 {
    ANGLE_TOL_RAD / PI
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("sectoroid has no sectors")]
    EmptySectoroid,
    #[error("invalid sector: {0}")]
    InvalidSector(String),
}

/// Open sector `{ θ₁ < arg ℏ < θ₂, 0 < |ℏ| < ε }`, angles in half-turns.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector<R> {
    pub theta1: R,
    pub theta2: R,
    pub radius: R,
}

impl<R: Real> Sector<R> {
    /// Angles in half-turns.
    pub fn new(theta1: R, theta2: R, radius: R) -> Result<Self, ConeError> {
        if theta1 >= theta2 {
            return Err(ConeError::InvalidSector(format!("θ₁ = {theta1} must be below θ₂ = {theta2}")));
        }
        if theta2.clone() - theta1.clone() > R::from_i64(2).unwrap() {
            return Err(ConeError::InvalidSector("aperture exceeds 2π".into()));
        }
        if radius <= R::zero() {
            return Err(ConeError::InvalidSector("radius must be positive".into()));
        }
        Ok(Self { theta1, theta2, radius })
    }

    /// Angles in radians (converted to half-turns through `f64`).
    pub fn from_radians(theta1: f64, theta2: f64, radius: f64) -> Result<Self, ConeError> {
        Self::new(R::from_f64_lossy(theta1 / PI), R::from_f64_lossy(theta2 / PI), R::from_f64_lossy(radius))
    }
}

/// Angular interval `[start, start + len)` in half-turns, `start ∈ [0, 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc<R> {
    pub start: R,
    pub len: R,
}

impl<R: Real> Arc<R> {
    pub fn end(&self) -> R {
        self.start.clone() + self.len.clone()
    }
}

/// Union of angular arcs, optionally with the origin, together with the
/// reference direction used for properness and cutoff comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicRegion<R> {
    arcs: Vec<Arc<R>>,
    closed: bool,
    includes_origin: bool,
    direction: C<R>,
}

fn two<R: Real>() -> R {
    R::from_i64(2).unwrap()
}

fn half<R: Real>() -> R {
    R::from_ratio(1, 2)
}

fn wrap2<R: Real>(mut x: R) -> R {
    let t = two::<R>();
    while x < R::zero() {
        x = x + t.clone();
    }
    while x >= t {
        x = x - t.clone();
    }
    x
}

fn lt<R: Real>(a: &R, b: &R) -> bool {
    if R::EXACT {
        a < b
    } else {
        a.to_f64_lossy() < b.to_f64_lossy() - tol()
    }
}

fn approx_eq<R: Real>(a: &R, b: &R) -> bool {
    a.near(b, tol())
}

/// Unit vector at angle `φ·π`, exact for multiples of π/2 and a rational
/// point of the circle otherwise in exact mode.
pub fn unit_direction<R: Real>(phi_half_turns: &R) -> C<R> {
    let phi = wrap2(phi_half_turns.clone());
    let q = |n: i64, d: i64| R::from_ratio(n, d);
    for (k, re, im) in [(0i64, 1i64, 0i64), (1, 0, 1), (2, -1, 0), (3, 0, -1)] {
        if phi == q(k, 2) {
            return Complex::new(R::from_i64(re).unwrap(), R::from_i64(im).unwrap());
        }
    }
    let rad = phi.to_f64_lossy() * PI;
    if !R::EXACT {
        return Complex::new(R::from_f64_lossy(rad.cos()), R::from_f64_lossy(rad.sin()));
    }
    // Rational parametrization of the circle: s = tan(rad/2).
    let s = R::from_f64_lossy((rad / 2.0).tan());
    let one = R::one();
    let d = one.clone() + s.clone() * s.clone();
    Complex::new((one - s.clone() * s.clone()) / d.clone(), two::<R>() * s / d)
}

/// Argument of `z` in half-turns, in `[0, 2)`.
pub fn arg_half_turns(z: &Complex<f64>) -> f64 {
    let a = z.im.atan2(z.re) / PI;
    if a < 0.0 {
        a + 2.0
    } else if a >= 2.0 {
        a - 2.0
    } else {
        a
    }
}

impl<R: Real> ConicRegion<R> {
    /// Builds a normalized region from arcs given as `(start, len)` in half-turns.
    pub fn from_arcs(arcs: Vec<(R, R)>, closed: bool) -> Self {
        let mut r = Self {
            arcs: arcs.into_iter().map(|(start, len)| Arc { start, len }).collect(),
            closed,
            includes_origin: closed,
            direction: Complex::new(R::one(), R::zero()),
        };
        r.normalize();
        r.direction = r.default_direction();
        r
    }

    /// The closed ray `arg = φ` (half-turns).
    pub fn ray(phi: R) -> Self {
        Self::from_arcs(vec![(phi, R::zero())], true)
    }

    /// `ℝ≥0`, the exponent cone of Λ₀.
    pub fn nonnegative_reals() -> Self {
        Self::ray(R::zero())
    }

    /// Closed arc `[a, b]` (half-turns).
    pub fn closed_arc(a: R, b: R) -> Self {
        let len = b - a.clone();
        Self::from_arcs(vec![(a, len)], true)
    }

    /// Open arc `(a, b)` (half-turns).
    pub fn open_arc(a: R, b: R) -> Self {
        let len = b - a.clone();
        Self::from_arcs(vec![(a, len)], false)
    }

    pub fn zero_cone() -> Self {
        Self { arcs: vec![], closed: true, includes_origin: true, direction: Complex::new(R::one(), R::zero()) }
    }

    pub fn full_plane() -> Self {
        Self::from_arcs(vec![(R::zero(), two::<R>())], true)
    }

    pub fn with_direction(mut self, direction: C<R>) -> Self {
        self.direction = direction;
        self
    }

    pub fn arcs(&self) -> &[Arc<R>] {
        &self.arcs
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn includes_origin(&self) -> bool {
        self.includes_origin
    }

    pub fn direction(&self) -> &C<R> {
        &self.direction
    }

    pub fn is_zero_cone(&self) -> bool {
        self.arcs.is_empty() && self.includes_origin
    }

    pub fn is_full_plane(&self) -> bool {
        self.arcs.len() == 1 && approx_eq(&self.arcs[0].len, &two::<R>())
    }

    /// Total angular measure in half-turns.
    pub fn aperture(&self) -> R {
        self.arcs.iter().fold(R::zero(), |acc, a| acc + a.len.clone())
    }

    fn normalize(&mut self) {
        let t = two::<R>();
        let mut arcs: Vec<Arc<R>> = self
            .arcs
            .drain(..)
            .filter(|a| a.len >= R::zero())
            .map(|a| Arc { start: wrap2(a.start), len: if a.len > t { t.clone() } else { a.len } })
            .collect();
        arcs.sort_by(|a, b| a.start.partial_cmp(&b.start).expect("comparable angles"));
        let overlaps = |end: &R, next_start: &R, closed: bool| {
            if closed {
                !lt(end, next_start)
            } else {
                lt(next_start, end)
            }
        };
        let mut merged: Vec<Arc<R>> = Vec::new();
        for a in arcs {
            if let Some(last) = merged.last_mut() {
                if overlaps(&last.end(), &a.start, self.closed) {
                    let end = R::max_of(last.end(), a.end());
                    last.len = end - last.start.clone();
                    continue;
                }
            }
            merged.push(a);
        }
        // wrap-around merge of the last arc into the first
        if merged.len() > 1 {
            let first_start = merged[0].start.clone() + t.clone();
            let last = merged.last().unwrap().clone();
            if overlaps(&last.end(), &first_start, self.closed) {
                let first = merged.remove(0);
                let end = R::max_of(last.end(), first.end() + t.clone());
                let l = merged.last_mut().unwrap();
                l.len = end - l.start.clone();
            }
        }
        let total = merged.iter().fold(R::zero(), |acc, a| acc + a.len.clone());
        if !lt(&total, &t) {
            merged = vec![Arc { start: R::zero(), len: t }];
        }
        self.arcs = merged;
    }

    /// Bisector of the smallest arc containing the region, as a unit vector.
    fn default_direction(&self) -> C<R> {
        match self.span_arc() {
            Some(a) if lt(&a.len, &two::<R>()) => unit_direction(&(a.start.clone() + a.len.clone() * half::<R>())),
            _ => Complex::new(R::one(), R::zero()),
        }
    }

    /// Smallest arc containing every arc (complement of the largest gap).
    fn span_arc(&self) -> Option<Arc<R>> {
        match self.arcs.len() {
            0 => None,
            1 => Some(self.arcs[0].clone()),
            n => {
                let t = two::<R>();
                let mut best: Option<(R, usize)> = None;
                for i in 0..n {
                    let next_start = if i + 1 < n { self.arcs[i + 1].start.clone() } else { self.arcs[0].start.clone() + t.clone() };
                    let gap = next_start - self.arcs[i].end();
                    if best.as_ref().map_or(true, |(g, _)| gap > *g) {
                        best = Some((gap, i));
                    }
                }
                let (gap, i) = best.unwrap();
                let start = if i + 1 < n { self.arcs[i + 1].start.clone() } else { self.arcs[0].start.clone() };
                Some(Arc { start, len: t - gap })
            }
        }
    }

    /// Smallest addition-closed cone containing the region.
    pub fn hull(&self) -> Self {
        let Some(span) = self.span_arc() else {
            return self.clone();
        };
        let one = R::one();
        let dir = self.direction.clone();
        if lt(&one, &span.len) {
            return Self::full_plane().with_direction(dir);
        }
        if approx_eq(&span.len, &one) && self.arcs.len() > 1 && self.closed {
            let degenerate = self.arcs.iter().all(|a| approx_eq(&a.len, &R::zero()));
            if degenerate && self.arcs.len() == 2 {
                // two opposite rays: the hull is the line through them
                return self.clone();
            }
        }
        let mut h = Self {
            arcs: vec![span],
            closed: self.closed,
            includes_origin: self.includes_origin,
            direction: self.direction.clone(),
        };
        h.normalize();
        h.direction = h.default_direction();
        h
    }

    /// `{a : Re(a·conj(b)) ≥ 0 for all b}`; always closed.
    pub fn polar_dual(&self) -> Self {
        let h = self.hull();
        if h.arcs.is_empty() {
            return Self::full_plane();
        }
        if h.is_full_plane() {
            return Self::zero_cone();
        }
        let dir = h.default_direction();
        let one = R::one();
        let hf = half::<R>();
        if h.arcs.len() == 2 {
            // a line: its dual is the perpendicular line
            let a = h.arcs[0].start.clone() + hf;
            return Self::from_arcs(vec![(a.clone(), R::zero()), (a + one, R::zero())], true);
        }
        let span = &h.arcs[0];
        if lt(&one, &span.len) {
            return Self::zero_cone();
        }
        let start = span.end() - hf.clone();
        let len = one - span.len.clone();
        let len = if len < R::zero() { R::zero() } else { len };
        Self::from_arcs(vec![(start, len)], true).with_direction(dir)
    }

    /// Hull aperture strictly below π.
    pub fn is_acute(&self) -> bool {
        let h = self.hull();
        if h.arcs.is_empty() {
            return true;
        }
        if h.arcs.len() > 1 {
            return false;
        }
        lt(&h.arcs[0].len, &R::one())
    }

    pub fn closure(&self) -> Self {
        let mut c = self.clone();
        c.closed = true;
        c.includes_origin = true;
        c.normalize();
        c
    }

    /// Whether the direction `φ` (half-turns) lies in the region, to angular tolerance.
    pub fn contains_angle(&self, phi: f64) -> bool {
        let t = tol();
        self.arcs.iter().any(|a| {
            let s = a.start.to_f64_lossy();
            let l = a.len.to_f64_lossy();
            let mut d = phi - s;
            while d < -t {
                d += 2.0;
            }
            while d >= 2.0 - t {
                d -= 2.0;
            }
            if self.closed {
                d >= -t && d <= l + t
            } else {
                d > t && d < l - t || (l >= 2.0 - t)
            }
        })
    }

    /// Membership of a complex point in the cone.
    pub fn contains(&self, z: &C<R>) -> bool {
        let zf = c_to_f64(z);
        if zf.norm() == 0.0 {
            return self.includes_origin || !self.arcs.is_empty();
        }
        // exact axis points get an exact angle
        let phi = if R::EXACT && (z.re.is_zero() || z.im.is_zero()) {
            match (z.re > R::zero(), z.re < R::zero(), z.im > R::zero()) {
                (true, _, _) => 0.0,
                (_, true, _) => 1.0,
                (_, _, true) => 0.5,
                _ => 1.5,
            }
        } else {
            arg_half_turns(&zf)
        };
        self.contains_angle(phi)
    }

    /// `Re(z · conj(direction))`.
    pub fn directional_value(&self, z: &C<R>) -> R {
        re_mul_conj(z, &self.direction)
    }

    /// `Im(z · conj(direction))`.
    pub fn transverse_value(&self, z: &C<R>) -> R {
        im_mul_conj(z, &self.direction)
    }

    /// Region with the same arcs under another scalar field.
    pub fn convert<S: Real>(&self) -> ConicRegion<S> {
        let cv = |x: &R| -> S {
            if S::EXACT && R::EXACT {
                crate::scalar::parse_real::<S>(&x.to_string()).expect("rational literal")
            } else {
                S::from_f64_lossy(x.to_f64_lossy())
            }
        };
        ConicRegion {
            arcs: self.arcs.iter().map(|a| Arc { start: cv(&a.start), len: cv(&a.len) }).collect(),
            closed: self.closed,
            includes_origin: self.includes_origin,
            direction: Complex::new(cv(&self.direction.re), cv(&self.direction.im)),
        }
    }

    /// Structural equality up to angular tolerance (ignores the direction).
    pub fn same_region(&self, other: &Self) -> bool {
        self.closed == other.closed
            && self.includes_origin == other.includes_origin
            && self.arcs.len() == other.arcs.len()
            && self
                .arcs
                .iter()
                .zip(&other.arcs)
                .all(|(a, b)| approx_eq(&a.start, &b.start) && approx_eq(&a.len, &b.len))
    }

    /// Every arc of `self` lies inside `other` (angular tolerance).
    pub fn is_subcone_of(&self, other: &Self) -> bool {
        if self.includes_origin && !other.includes_origin && other.arcs.is_empty() {
            return false;
        }
        self.arcs.iter().all(|a| {
            let s = a.start.to_f64_lossy();
            let l = a.len.to_f64_lossy();
            let samples = 16;
            (0..=samples).all(|k| {
                let phi = s + l * (k as f64) / samples as f64;
                let probe = if self.closed || (k > 0 && k < samples) {
                    phi
                } else if k == 0 {
                    phi + 2.0 * tol()
                } else {
                    phi - 2.0 * tol()
                };
                other.closure().contains_angle(probe)
            })
        })
    }

    pub fn record(&self) -> ConeRecord {
        ConeRecord {
            arcs: self
                .arcs
                .iter()
                .map(|a| ArcRecord {
                    start_pi: a.start.to_string(),
                    len_pi: a.len.to_string(),
                    start_rad: a.start.to_f64_lossy() * PI,
                    end_rad: a.end().to_f64_lossy() * PI,
                })
                .collect(),
            closed: self.closed,
            includes_origin: self.includes_origin,
            direction: [self.direction.re.to_f64_lossy(), self.direction.im.to_f64_lossy()],
        }
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct ArcRecord {
    pub start_pi: String,
    pub len_pi: String,
    pub start_rad: f64,
    pub end_rad: f64,
}

/// JSON shape of a [`ConicRegion`].
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct ConeRecord {
    pub arcs: Vec<ArcRecord>,
    pub closed: bool,
    pub includes_origin: bool,
    pub direction: [f64; 2],
}

impl ConeRecord {
    pub fn to_region<R: Real>(&self) -> Option<ConicRegion<R>> {
        let mut arcs = Vec::new();
        for a in &self.arcs {
            arcs.push((crate::scalar::parse_real::<R>(&a.start_pi)?, crate::scalar::parse_real::<R>(&a.len_pi)?));
        }
        let mut r = if arcs.is_empty() {
            if self.includes_origin {
                ConicRegion::zero_cone()
            } else {
                ConicRegion { arcs: vec![], closed: self.closed, includes_origin: false, direction: Complex::new(R::one(), R::zero()) }
            }
        } else {
            ConicRegion::from_arcs(arcs, self.closed)
        };
        r.includes_origin = self.includes_origin;
        Some(r.with_direction(Complex::new(R::from_f64_lossy(self.direction[0]), R::from_f64_lossy(self.direction[1]))))
    }
}

/// Union of the angular parts of the sectors (radii are discarded).
pub fn cone_of<R: Real>(sectoroid: &[Sector<R>]) -> Result<ConicRegion<R>, ConeError> {
    if sectoroid.is_empty() {
        return Err(ConeError::EmptySectoroid);
    }
    Ok(ConicRegion::from_arcs(
        sectoroid.iter().map(|s| (s.theta1.clone(), s.theta2.clone() - s.theta1.clone())).collect(),
        false,
    ))
}

/// Whether some translate `c + γ` contains every exponent; returns the translate.
///
/// Only the containment clause matters: the discreteness clause is automatic
/// for finite sets.
pub fn gamma_translate<R: Real>(exponents: &[C<R>], gamma: &ConicRegion<R>) -> Option<C<R>> {
    if exponents.is_empty() {
        return Some(Complex::new(R::zero(), R::zero()));
    }
    let g = gamma.closure();
    if g.arcs.is_empty() {
        // γ = {0}: only a single point fits
        let first = &exponents[0];
        return exponents.iter().all(|z| crate::scalar::c_near(z, first, ANGLE_TOL_RAD)).then(|| first.clone());
    }
    let span = g.span_arc().unwrap();
    let dir = unit_direction::<R>(&(span.start.clone() + span.len.clone() * half::<R>()));
    let inside = |c: &C<R>| exponents.iter().all(|z| g.contains(&(z.clone() - c.clone())));
    if approx_eq(&span.len, &R::zero()) {
        // a ray: all points on one line parallel to it, shifted to the lowest one
        let base = exponents
            .iter()
            .min_by(|a, b| re_mul_conj(*a, &dir).partial_cmp(&re_mul_conj(*b, &dir)).unwrap())
            .unwrap()
            .clone();
        return inside(&base).then_some(base);
    }
    // positive aperture: push the apex far enough against the bisector
    let mut t = R::one();
    for _ in 0..200 {
        let lowest = exponents
            .iter()
            .map(|z| re_mul_conj(z, &dir))
            .fold(None::<R>, |acc, v| Some(acc.map_or(v.clone(), |a| R::min_of(a, v))))
            .unwrap();
        let c = dir.clone() * Complex::new(lowest - t.clone(), R::zero());
        if inside(&c) {
            return Some(c);
        }
        t = t * two::<R>();
    }
    None
}

pub fn is_gamma_finite<R: Real>(exponents: &[C<R>], gamma: &ConicRegion<R>) -> bool {
    gamma_translate(exponents, gamma).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    fn sector(a: Q, b: Q) -> Sector<Q> {
        Sector::new(a, b, Q::from_i64(1).unwrap()).unwrap()
    }

    #[test]
    fn cone_of_single_sector_drops_radius() {
        let c = cone_of(&[sector(q(-1, 2), q(1, 2))]).unwrap();
        assert_eq!(c.arcs().len(), 1);
        assert_eq!(c.arcs()[0].start, q(3, 2));
        assert_eq!(c.arcs()[0].len, q(1, 1));
    }

    #[test]
    fn cone_of_merges_overlaps() {
        let c = cone_of(&[sector(q(0, 1), q(1, 4)), sector(q(1, 8), q(1, 2))]).unwrap();
        assert_eq!(c.arcs(), &[Arc { start: q(0, 1), len: q(1, 2) }]);
        let d = cone_of(&[sector(q(0, 1), q(1, 4)), sector(q(1, 2), q(3, 4))]).unwrap();
        assert_eq!(d.arcs().len(), 2);
        assert!(matches!(cone_of::<Q>(&[]), Err(ConeError::EmptySectoroid)));
    }

    #[test]
    fn sector_validation() {
        assert!(Sector::new(q(1, 1), q(0, 1), q(1, 1)).is_err());
        assert!(Sector::new(q(0, 1), q(3, 1), q(1, 1)).is_err());
        assert!(Sector::new(q(0, 1), q(1, 1), q(0, 1)).is_err());
    }

    #[test]
    fn hull_examples() {
        let a = ConicRegion::open_arc(q(-1, 4), q(1, 4));
        assert!(a.hull().same_region(&a));
        let b = ConicRegion::from_arcs(vec![(q(0, 1), q(1, 8)), (q(1, 2), q(1, 8))], false);
        assert!(b.hull().same_region(&ConicRegion::open_arc(q(0, 1), q(5, 8))));
        let c = ConicRegion::open_arc(q(0, 1), q(3, 2));
        assert!(c.hull().is_full_plane());
    }

    #[test]
    fn dual_of_right_half_plane_is_nonnegative_reals() {
        let hp = ConicRegion::open_arc(q(-1, 2), q(1, 2));
        let d = hp.polar_dual();
        assert!(d.same_region(&ConicRegion::nonnegative_reals()));
        assert!(!hp.is_acute());
    }

    #[test]
    fn dual_of_nonacute_is_zero() {
        let c = ConicRegion::open_arc(q(0, 1), q(3, 2));
        assert!(c.polar_dual().is_zero_cone());
        assert!(!c.is_acute());
        assert!(ConicRegion::<Q>::zero_cone().polar_dual().is_full_plane());
    }

    #[test]
    fn dual_of_quarter_arc() {
        let c = ConicRegion::open_arc(q(-1, 4), q(1, 4));
        assert!(c.is_acute());
        assert!(c.polar_dual().same_region(&ConicRegion::closed_arc(q(-1, 4), q(1, 4))));
    }

    #[test]
    fn exact_direction_for_axes() {
        assert_eq!(unit_direction::<Q>(&q(1, 2)), Complex::new(q(0, 1), q(1, 1)));
        let u = unit_direction::<Q>(&q(1, 3));
        assert_eq!(u.re.clone() * u.re.clone() + u.im.clone() * u.im.clone(), q(1, 1));
    }

    #[test]
    fn gamma_finite_examples() {
        let r = |a: i64, b: i64| Complex::new(Q::from_i64(a).unwrap(), Q::from_i64(b).unwrap());
        let ray = ConicRegion::<Q>::nonnegative_reals();
        assert!(is_gamma_finite(&[r(1, 0), r(2, 0), r(3, 0)], &ray));
        assert!(is_gamma_finite(&[r(0, 1)], &ray));
        assert!(!is_gamma_finite(&[r(1, 0), r(1, 1)], &ray));
        // a sector with interior swallows any finite set after a translation
        let quarter = ConicRegion::closed_arc(q(-1, 4), q(1, 4));
        let pts = [r(1, 1), r(2, 0), r(1, -2)];
        let c = gamma_translate(&pts, &quarter).unwrap();
        assert!(pts.iter().all(|p| quarter.contains(&(p.clone() - c.clone()))));
    }

    #[test]
    fn float_mode_tolerance() {
        let c = ConicRegion::<f64>::open_arc(-0.25, 0.25);
        let d = c.polar_dual();
        assert!(d.same_region(&ConicRegion::closed_arc(-0.25, 0.25)));
        assert!(d.contains(&Complex::new(1.0, 1.0)));
        assert!(!d.contains(&Complex::new(1.0, 1.01)));
    }
}
