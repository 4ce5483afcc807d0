//! Stokes curve tracing, higher-order scattering and the GMN check.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::regions::Arrangement;
use super::{turning_points, Potential, StokesError, TurningPoint};
use crate::numeric::{dopri_step, gauss_legendre};
use crate::scalar::Real;

const CHORD_NODES: usize = 8;
const START_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    /// Local error tolerance of the embedded Runge–Kutta pair.
    pub step_tol: f64,
    /// Distance from a turning point at which curves are launched.
    pub start_offset: f64,
    /// Radius of the bounding disk about the origin; defaults to ten times
    /// the largest turning-point modulus (at least 10).
    pub disk_radius: Option<f64>,
    /// Largest step; defaults to `disk_radius / 200`.
    pub max_step: Option<f64>,
    pub min_step: f64,
    pub max_steps: usize,
    /// A curve passing this close to another turning point ends there.
    pub saddle_radius: f64,
    pub pole_radius: f64,
    /// Intersections with `|sin angle|` below this are tangential.
    pub angle_tol: f64,
    /// Base point for sheet labels; defaults to a fixed off-axis point.
    pub label_base: Option<[f64; 2]>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-10,
            start_offset: 1e-4,
            disk_radius: None,
            max_step: None,
            min_step: 1e-13,
            max_steps: 200_000,
            saddle_radius: 1e-6,
            pole_radius: 1e-3,
            angle_tol: 1e-6,
            label_base: None,
        }
    }
}

impl TraceOptions {
    pub fn validate(&self) -> Result<(), StokesError> {
        let positive = [
            ("step_tol", self.step_tol),
            ("start_offset", self.start_offset),
            ("min_step", self.min_step),
            ("saddle_radius", self.saddle_radius),
            ("pole_radius", self.pole_radius),
            ("angle_tol", self.angle_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StokesError::InvalidOption(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("disk_radius", self.disk_radius), ("max_step", self.max_step)] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return Err(StokesError::InvalidOption(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSource {
    TurningPoint { index: usize, direction: usize },
    Intersection { point: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum CurveEnd {
    Cutoff,
    Boundary,
    Pole(usize),
    /// Reached another turning point.
    Saddle(usize),
    MaxSteps,
}

/// A traced curve. `periods[k] = ∫(λ_i − λ_j)` from the source (for a
/// scattered curve, the parents' periods at the seed plus the integral from
/// the seed), so `weights[k] = Re e^{−iθ} periods[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesCurve {
    pub id: usize,
    pub label: String,
    /// Sheet labels `(i, j)` at the first traced point.
    pub sheets: [usize; 2],
    pub generation: usize,
    pub parents: Vec<usize>,
    pub source: CurveSource,
    pub points: Vec<Complex64>,
    pub periods: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// Tracked `(λ_i, λ_j)` at each point.
    pub lambdas: Vec<[Complex64; 2]>,
    pub end: CurveEnd,
}

impl StokesCurve {
    pub fn initial_weight(&self) -> f64 {
        self.weights[0]
    }

    pub fn final_weight(&self) -> f64 {
        *self.weights.last().unwrap()
    }

    pub fn arclengths(&self) -> Vec<f64> {
        let mut s = vec![0.0];
        for w in self.points.windows(2) {
            s.push(s.last().unwrap() + (w[1] - w[0]).norm());
        }
        s
    }

    /// Weight at arclength `s` from the source, linearly interpolated.
    pub fn weight_at(&self, s: f64) -> f64 {
        let arc = self.arclengths();
        if s <= 0.0 {
            return self.weights[0];
        }
        for k in 1..arc.len() {
            if arc[k] >= s {
                let t = (s - arc[k - 1]) / (arc[k] - arc[k - 1]).max(f64::MIN_POSITIVE);
                return self.weights[k - 1] + t * (self.weights[k] - self.weights[k - 1]);
            }
        }
        self.final_weight()
    }

    /// `Im e^{−iθ} periods` along the curve.
    pub fn phase_defects(&self, theta: f64) -> Vec<f64> {
        let em = Complex64::from_polar(1.0, -theta);
        self.periods.iter().map(|w| (em * w).im).collect()
    }

    /// Angle of the last segment, in radians.
    pub fn final_direction(&self) -> f64 {
        let n = self.points.len();
        (self.points[n - 1] - self.points[n - 2]).arg()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringReport {
    /// No further curve below the cutoff would be spawned.
    pub complete: bool,
    pub max_depth: usize,
    pub pairs_examined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesGraph {
    pub potential: Potential<f64>,
    pub theta: f64,
    pub turning_points: Vec<TurningPoint>,
    pub poles: Vec<Complex64>,
    pub curves: Vec<StokesCurve>,
    pub cutoff: f64,
    /// Largest generation present.
    pub depth: usize,
    pub center: Complex64,
    pub radius: f64,
    pub label_base: Complex64,
    /// Roots at `label_base`; sheet `i` is continued from `base_sheets[i]`.
    pub base_sheets: Vec<Complex64>,
    pub options: TraceOptions,
    pub scattering: Option<ScatteringReport>,
    pub arrangement: Option<Arrangement>,
    pub diagnostics: Vec<String>,
}

impl StokesGraph {
    fn scale(&self) -> f64 {
        (self.radius / 10.0).max(1.0)
    }

    /// Roots at `x`, ordered by sheet label (continuation along the straight
    /// segment from the label base).
    pub fn sheet_values_at(&self, x: Complex64) -> Vec<Complex64> {
        let n = 64 + ((x - self.label_base).norm() / self.scale() * 32.0) as usize;
        let mut vals = self.base_sheets.clone();
        for k in 1..=n {
            let y = self.label_base + (x - self.label_base) * (k as f64 / n as f64);
            let roots = self.potential.roots_at(y);
            vals = match_all(&roots, &vals);
        }
        vals
    }

    /// Sheet label of the root nearest to `lambda` at `x`.
    pub fn label_of(&self, x: Complex64, lambda: Complex64) -> usize {
        nearest(&self.sheet_values_at(x), lambda, None)
    }

    pub fn curves_of_generation(&self, k: usize) -> impl Iterator<Item = &StokesCurve> {
        self.curves.iter().filter(move |c| c.generation == k)
    }

    fn tracer(&self) -> Tracer<'_> {
        let max_step = self.options.max_step.unwrap_or(self.radius / 200.0);
        Tracer { g: self, e: Complex64::from_polar(1.0, self.theta), max_step }
    }
}

pub(crate) fn nearest(roots: &[Complex64], v: Complex64, skip: Option<usize>) -> usize {
    (0..roots.len())
        .filter(|&k| Some(k) != skip)
        .min_by(|&a, &b| (roots[a] - v).norm().partial_cmp(&(roots[b] - v).norm()).unwrap())
        .unwrap()
}

/// Greedy nearest matching of `roots` to `prev`, closest pairs first.
pub(crate) fn match_all(roots: &[Complex64], prev: &[Complex64]) -> Vec<Complex64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in prev.iter().enumerate() {
        for (j, r) in roots.iter().enumerate() {
            pairs.push(((p - r).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = prev.to_vec();
    let (mut used_i, mut used_j) = (vec![false; prev.len()], vec![false; roots.len()]);
    for (_, i, j) in pairs {
        if !used_i[i] && !used_j[j] {
            out[i] = roots[j];
            used_i[i] = true;
            used_j[j] = true;
        }
    }
    out
}

fn match_pair(roots: &[Complex64], pair: [Complex64; 2]) -> ([usize; 2], [Complex64; 2]) {
    let a = nearest(roots, pair[0], None);
    let b = nearest(roots, pair[1], Some(a));
    ([a, b], [roots[a], roots[b]])
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / l2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

struct Tracer<'a> {
    g: &'a StokesGraph,
    e: Complex64,
    max_step: f64,
}

struct Traced {
    points: Vec<Complex64>,
    periods: Vec<Complex64>,
    lambdas: Vec<[Complex64; 2]>,
    end: CurveEnd,
}

impl Tracer<'_> {
    fn pair_at(&self, x: Complex64, pair: [Complex64; 2]) -> [Complex64; 2] {
        match_pair(&self.g.potential.roots_at(x), pair).1
    }

    /// `∫(λ_i − λ_j)` along the chord `a → b`, tracking the pair across the
    /// quadrature nodes; returns the integral and the pair at `b`.
    fn chord(&self, a: Complex64, b: Complex64, pair: [Complex64; 2]) -> (Complex64, [Complex64; 2]) {
        let mut p = pair;
        let mut total = Complex64::new(0.0, 0.0);
        for (u, w) in gauss_legendre(CHORD_NODES) {
            let x = a + (b - a) * (0.5 * (u + 1.0));
            p = self.pair_at(x, p);
            total += (p[0] - p[1]) * (0.5 * w);
        }
        (total * (b - a), self.pair_at(b, p))
    }

    /// Newton correction of a clipped endpoint: onto `W = cutoff·e^{iθ}`
    /// when `to_cutoff`, otherwise only onto the level set `Im e^{−iθ}W = 0`.
    fn polish(
        &self,
        mut x: Complex64,
        mut w: Complex64,
        mut pair: [Complex64; 2],
        to_cutoff: bool,
        h: f64,
    ) -> (Complex64, Complex64, [Complex64; 2]) {
        let em = self.e.conj();
        for _ in 0..4 {
            let defect = em * w;
            let target = if to_cutoff { Complex64::new(self.g.cutoff, 0.0) } else { Complex64::new(defect.re, 0.0) };
            let delta = (target - defect) / (em * (pair[0] - pair[1]));
            if !delta.is_finite() || delta.norm() > h || delta.norm() < 1e-15 * (1.0 + x.norm()) {
                break;
            }
            let (dw, np) = self.chord(x, x + delta, pair);
            x += delta;
            w += dw;
            pair = np;
        }
        (x, w, pair)
    }

    fn trace(
        &self,
        start: Traced,
        exclude_tp: Option<usize>,
    ) -> Result<Traced, StokesError> {
        let o = &self.g.options;
        let em = self.e.conj();
        let snap = o.saddle_radius * self.g.scale();
        let mut t = start;
        let mut x = *t.points.last().unwrap();
        let mut w = *t.periods.last().unwrap();
        let mut pair = *t.lambdas.last().unwrap();
        let mut h = self.max_step * 0.01;
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > o.max_steps {
                t.end = CurveEnd::MaxSteps;
                warn!("curve tracing hit the step limit at {x}");
                return Ok(t);
            }
            let cur = pair;
            let field = |y: Complex64| -> Option<Complex64> {
                let p = self.pair_at(y, cur);
                let d = p[0] - p[1];
                let n = d.norm();
                (n > 1e-300 && n.is_finite()).then(|| self.e * d.conj() / n)
            };
            let Some((mut xn, err)) = dopri_step(&field, x, h) else {
                h *= 0.25;
                if h < o.min_step {
                    return Err(StokesError::TracerStalled(format!("field undefined near {x}")));
                }
                continue;
            };
            if err > o.step_tol {
                h *= (0.9 * (o.step_tol / err).powf(0.2)).max(0.1);
                if h < o.min_step {
                    return Err(StokesError::TracerStalled(format!("step underflow near {x}")));
                }
                continue;
            }
            let (dw, mut pn) = self.chord(x, xn, pair);
            let mut wn = w + dw;
            // pull back onto the level set Im e^{−iθ}W = 0
            let d = pn[0] - pn[1];
            let defect = (em * wn).im;
            let delta = Complex64::new(0.0, -defect) * self.e / d;
            if delta.is_finite() && delta.norm() < 0.1 * h {
                xn += delta;
                wn += d * delta;
                pn = self.pair_at(xn, pn);
            }
            let (w_prev, w_new) = ((em * w).re, (em * wn).re);

            for (k, tp) in self.g.turning_points.iter().enumerate() {
                if Some(k) != exclude_tp && point_segment_distance(tp.position, x, xn) < snap {
                    let (dw, pt) = self.chord(x, tp.position, pair);
                    t.points.push(tp.position);
                    t.periods.push(w + dw);
                    t.lambdas.push(pt);
                    t.end = CurveEnd::Saddle(k);
                    return Ok(t);
                }
            }
            if let Some(k) = self.g.poles.iter().position(|p| (xn - p).norm() < o.pole_radius) {
                t.points.push(xn);
                t.periods.push(wn);
                t.lambdas.push(pn);
                t.end = CurveEnd::Pole(k);
                return Ok(t);
            }
            let outside = (xn - self.g.center).norm() >= self.g.radius;
            let s_cut = (w_new >= self.g.cutoff).then(|| (self.g.cutoff - w_prev) / (w_new - w_prev));
            let s_bdy = outside.then(|| circle_exit(x - self.g.center, xn - self.g.center, self.g.radius));
            let clip = match (s_cut, s_bdy) {
                (Some(a), Some(b)) if a <= b => Some((a, CurveEnd::Cutoff)),
                (_, Some(b)) => Some((b, CurveEnd::Boundary)),
                (Some(a), None) => Some((a, CurveEnd::Cutoff)),
                (None, None) => None,
            };
            if let Some((s, end)) = clip {
                let xc = x + (xn - x) * s;
                let (dw, pc) = self.chord(x, xc, pair);
                let (xc, wc, pc) = self.polish(xc, w + dw, pc, end == CurveEnd::Cutoff, h);
                t.points.push(xc);
                t.periods.push(wc);
                t.lambdas.push(pc);
                t.end = end;
                return Ok(t);
            }
            t.points.push(xn);
            t.periods.push(wn);
            t.lambdas.push(pn);
            x = xn;
            w = wn;
            pair = pn;
            h = (h * (0.9 * (o.step_tol / err.max(1e-300)).powf(0.2)).min(4.0)).min(self.max_step);
        }
    }
}

/// Parameter `s ∈ [0, 1]` where `a + s(b − a)` meets the circle `|z| = r`.
fn circle_exit(a: Complex64, b: Complex64, r: f64) -> f64 {
    let d = b - a;
    let (qa, qb, qc) = (d.norm_sqr(), 2.0 * (a * d.conj()).re, a.norm_sqr() - r * r);
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0)
}

fn finish_curve(g: &StokesGraph, t: Traced, id: usize, label: String, generation: usize, parents: Vec<usize>, source: CurveSource) -> StokesCurve {
    let em = Complex64::from_polar(1.0, -g.theta);
    let first = if matches!(source, CurveSource::TurningPoint { .. }) { 1 } else { 0 };
    let probe = t.points[first.min(t.points.len() - 1)];
    let pair = t.lambdas[first.min(t.lambdas.len() - 1)];
    let vals = g.sheet_values_at(probe);
    let i = nearest(&vals, pair[0], None);
    let j = nearest(&vals, pair[1], Some(i));
    StokesCurve {
        id,
        label,
        sheets: [i, j],
        generation,
        parents,
        source,
        weights: t.periods.iter().map(|w| (em * w).re).collect(),
        points: t.points,
        periods: t.periods,
        lambdas: t.lambdas,
        end: t.end,
    }
}

/// Generation-0 Stokes curves: three from each simple turning point, launched
/// where the local model `e^{−iθ}·(2/3)√κ·(x − x₀)^{3/2}` is real, and traced
/// until the weight reaches `c_max`, the boundary circle, a pole or another
/// turning point.
pub fn trace_stokes_curves<R: Real>(
    p: &Potential<R>,
    theta: f64,
    c_max: f64,
    opts: &TraceOptions,
) -> Result<StokesGraph, StokesError> {
    opts.validate()?;
    if !(c_max >= 0.0) || !theta.is_finite() {
        return Err(StokesError::InvalidOption("c_max must be nonnegative and θ finite".into()));
    }
    let potential = p.to_f64();
    let tps = turning_points(&potential)?;
    if let Some(bad) = tps.iter().find(|t| !t.is_simple()) {
        return Err(StokesError::NonSimpleTurningPoint(format!("{}", bad.position)));
    }
    let poles = potential.poles();
    let max_mod = tps.iter().map(|t| t.position.norm()).fold(1.0, f64::max);
    let radius = opts.disk_radius.unwrap_or(10.0 * max_mod);
    let label_base = opts
        .label_base
        .map_or(Complex64::new(0.21 * radius, 0.37 * radius), |b| Complex64::new(b[0], b[1]));
    let base_sheets = potential.roots_at(label_base);
    let mut g = StokesGraph {
        potential,
        theta,
        turning_points: tps,
        poles,
        curves: Vec::new(),
        cutoff: c_max,
        depth: 0,
        center: Complex64::new(0.0, 0.0),
        radius,
        label_base,
        base_sheets,
        options: opts.clone(),
        scattering: None,
        arrangement: None,
        diagnostics: Vec::new(),
    };
    if c_max == 0.0 {
        return Ok(g);
    }
    let tracer = g.tracer();
    let mut curves = Vec::new();
    for (k, tp) in g.turning_points.iter().enumerate() {
        let x0 = tp.position;
        let clearance = g
            .turning_points
            .iter()
            .map(|t| t.position)
            .chain(g.poles.iter().copied())
            .filter(|z| (z - x0).norm() > 0.0)
            .map(|z| (z - x0).norm())
            .fold(f64::INFINITY, f64::min);
        let eps = (opts.start_offset * max_mod).min(0.01 * clearance);
        let probe = closest_pair(&g.potential.roots_at(x0 + eps));
        let kappa = (probe[0] - probe[1]).powi(2) / eps;
        for dir in 0..3 {
            let phi = 2.0 / 3.0 * (theta - kappa.arg() / 2.0) + 2.0 * PI * dir as f64 / 3.0;
            let xs = x0 + Complex64::from_polar(eps, phi);
            let mut pair = closest_pair(&g.potential.roots_at(xs));
            let mut ws = start_period(&tracer, x0, xs, pair);
            if (tracer.e.conj() * ws).re < 0.0 {
                pair.swap(0, 1);
                ws = -ws;
            }
            let double = (pair[0] + pair[1]) * 0.5;
            let start = Traced {
                points: vec![x0, xs],
                periods: vec![Complex64::new(0.0, 0.0), ws],
                lambdas: vec![[double, double], pair],
                end: CurveEnd::Cutoff,
            };
            let t = tracer.trace(start, Some(k))?;
            debug!("traced curve from turning point {k} direction {dir}: {} points", t.points.len());
            curves.push(finish_curve(
                &g,
                t,
                curves.len(),
                format!("t{k}.{dir}"),
                0,
                Vec::new(),
                CurveSource::TurningPoint { index: k, direction: dir },
            ));
        }
    }
    g.curves = curves;
    Ok(g)
}

fn closest_pair(roots: &[Complex64]) -> [Complex64; 2] {
    let mut best = (f64::INFINITY, 0, 1);
    for a in 0..roots.len() {
        for b in a + 1..roots.len() {
            let d = (roots[a] - roots[b]).norm();
            if d < best.0 {
                best = (d, a, b);
            }
        }
    }
    [roots[best.1], roots[best.2]]
}

/// `∫_{x₀}^{x_s}(λ_i − λ_j)` with `r = εt²` to remove the square-root
/// singularity, tracking the pair inward from `x_s`.
fn start_period(tr: &Tracer<'_>, x0: Complex64, xs: Complex64, pair: [Complex64; 2]) -> Complex64 {
    let d = xs - x0;
    let mut nodes = gauss_legendre(START_NODES);
    nodes.reverse();
    let mut p = pair;
    let mut total = Complex64::new(0.0, 0.0);
    for (u, w) in nodes {
        let t = 0.5 * (u + 1.0);
        p = tr.pair_at(x0 + d * (t * t), p);
        total += (p[0] - p[1]) * (2.0 * t * 0.5 * w);
    }
    total * d
}

struct Crossing {
    seg_a: usize,
    seg_b: usize,
    point: Complex64,
    sin_angle: f64,
}

fn bbox(pts: &[Complex64]) -> (f64, f64, f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |b, p| {
        (b.0.min(p.re), b.1.min(p.im), b.2.max(p.re), b.3.max(p.im))
    })
}

fn boxes_meet(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), pad: f64) -> bool {
    a.0 <= b.2 + pad && b.0 <= a.2 + pad && a.1 <= b.3 + pad && b.1 <= a.3 + pad
}

const CHUNK: usize = 32;

/// Transversal crossings of two polylines away from their first points.
fn crossings(a: &[Complex64], b: &[Complex64], snap: f64) -> (Vec<Crossing>, usize) {
    let mut out = Vec::new();
    let mut overlaps = 0;
    let chunks_a: Vec<(usize, (f64, f64, f64, f64))> =
        (0..a.len().saturating_sub(1)).step_by(CHUNK).map(|s| (s, bbox(&a[s..(s + CHUNK + 1).min(a.len())]))).collect();
    let chunks_b: Vec<(usize, (f64, f64, f64, f64))> =
        (0..b.len().saturating_sub(1)).step_by(CHUNK).map(|s| (s, bbox(&b[s..(s + CHUNK + 1).min(b.len())]))).collect();
    for &(sa, ba) in &chunks_a {
        for &(sb, bb) in &chunks_b {
            if !boxes_meet(ba, bb, snap) {
                continue;
            }
            for i in sa..(sa + CHUNK).min(a.len() - 1) {
                for j in sb..(sb + CHUNK).min(b.len() - 1) {
                    let (p, r) = (a[i], a[i + 1] - a[i]);
                    let (q, s) = (b[j], b[j + 1] - b[j]);
                    let denom = r.re * s.im - r.im * s.re;
                    let qp = q - p;
                    if denom.abs() <= 1e-14 * r.norm() * s.norm() {
                        let dist = (qp.re * r.im - qp.im * r.re).abs() / r.norm().max(f64::MIN_POSITIVE);
                        if dist < snap && r.norm() > 0.0 && s.norm() > 0.0 {
                            overlaps += 1;
                        }
                        continue;
                    }
                    let t = (qp.re * s.im - qp.im * s.re) / denom;
                    let u = (qp.re * r.im - qp.im * r.re) / denom;
                    if !(0.0..1.0).contains(&t) || !(0.0..1.0).contains(&u) {
                        continue;
                    }
                    let point = p + r * t;
                    if (point - a[0]).norm() < 10.0 * snap || (point - b[0]).norm() < 10.0 * snap {
                        continue;
                    }
                    if (point - a[a.len() - 1]).norm() < snap || (point - b[b.len() - 1]).norm() < snap {
                        continue;
                    }
                    out.push(Crossing { seg_a: i, seg_b: j, point, sin_angle: denom.abs() / (r.norm() * s.norm()) });
                }
            }
        }
    }
    out.sort_by_key(|c| (c.seg_a, c.seg_b));
    (out, overlaps)
}

/// Spawns curves of type `(i, k)` from transversal crossings of curves of
/// types `(i, j)` and `(j, k)`, starting with the sum of the parents'
/// weights, until nothing new appears below the cutoff or the generation
/// reaches `max_depth`.
pub fn higher_order_scattering(g: &StokesGraph, max_depth: usize) -> Result<StokesGraph, StokesError> {
    let mut g = g.clone();
    g.arrangement = None;
    let snap = g.options.saddle_radius * g.scale();
    let em = Complex64::from_polar(1.0, -g.theta);
    let mut examined: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut seeds: Vec<Complex64> = Vec::new();
    let mut complete = true;
    if g.cutoff > 0.0 {
        loop {
            let n = g.curves.len();
            let mut fresh: Vec<StokesCurve> = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if !examined.insert((a, b)) {
                        continue;
                    }
                    let (ca, cb) = (&g.curves[a], &g.curves[b]);
                    let (found, overlaps) = crossings(&ca.points, &cb.points, snap);
                    if overlaps > 0 {
                        g.diagnostics.push(format!("curves {} and {} overlap along {overlaps} segments", ca.label, cb.label));
                    }
                    for c in found {
                        if c.sin_angle < g.options.angle_tol {
                            g.diagnostics.push(format!(
                                "tangential intersection of {} and {} at {}",
                                ca.label, cb.label, c.point
                            ));
                            continue;
                        }
                        let Some(child) = compose(&g, ca, cb, &c, em) else { continue };
                        let generation = ca.generation.max(cb.generation) + 1;
                        let w0 = (em * child.periods[0]).re;
                        if w0 >= g.cutoff {
                            continue;
                        }
                        if generation > max_depth {
                            complete = false;
                            continue;
                        }
                        if seeds.iter().any(|s| (s - c.point).norm() < 10.0 * snap) {
                            g.diagnostics.push(format!("several crossings at {}; spawning pairwise", c.point));
                        }
                        seeds.push(c.point);
                        let t = g.tracer().trace(child, None)?;
                        let label = format!("({}*{})@{}:{}", ca.label, cb.label, c.seg_a, c.seg_b);
                        fresh.push(finish_curve(
                            &g,
                            t,
                            n + fresh.len(),
                            label,
                            generation,
                            vec![a, b],
                            CurveSource::Intersection { point: c.point },
                        ));
                    }
                }
            }
            if fresh.is_empty() {
                break;
            }
            g.curves.extend(fresh);
        }
    }
    if !complete {
        g.diagnostics.push(format!("scattering stopped at depth {max_depth} with curves still below the cutoff"));
    }
    g.depth = g.curves.iter().map(|c| c.generation).max().unwrap_or(0);
    g.scattering = Some(ScatteringReport { complete, max_depth, pairs_examined: examined.len() });
    Ok(g)
}

fn compose(g: &StokesGraph, ca: &StokesCurve, cb: &StokesCurve, c: &Crossing, em: Complex64) -> Option<Traced> {
    let tr = g.tracer();
    let roots = g.potential.roots_at(c.point);
    let (wa, pa) = tr.chord(ca.points[c.seg_a], c.point, ca.lambdas[c.seg_a]);
    let (wb, pb) = tr.chord(cb.points[c.seg_b], c.point, cb.lambdas[c.seg_b]);
    let (ia, _) = match_pair(&roots, pa);
    let (ib, _) = match_pair(&roots, pb);
    let (first, second) = if ia[1] == ib[0] && ia[0] != ib[1] {
        (ia[0], ib[1])
    } else if ib[1] == ia[0] && ib[0] != ia[1] {
        (ib[0], ia[1])
    } else {
        return None;
    };
    // The polyline crossing sits O(h²) off the true locus; pull the seed
    // back onto Im e^{−iθ}W = 0 before tracing from it.
    let w0 = ca.periods[c.seg_a] + wa + cb.periods[c.seg_b] + wb;
    let pair0 = [roots[first], roots[second]];
    let (mut w, mut x, mut pair) = (w0, c.point, pair0);
    for _ in 0..4 {
        let defect = (em * w).im;
        if defect.abs() <= 1e-13 * (1.0 + w.norm()) {
            break;
        }
        let delta = Complex64::new(0.0, -defect) / (em * (pair[0] - pair[1]));
        if !delta.is_finite() || delta.norm() > 1e-2 * g.scale() {
            return None;
        }
        let (dw, np) = tr.chord(x, x + delta, pair);
        x += delta;
        w += dw;
        pair = np;
    }
    if (em * w).im.abs() > 1e-8 * (1.0 + w.norm()) {
        warn!("seed at {x} keeps phase defect {:.2e}", (em * w).im);
    }
    // keep the polyline crossing as the first point so the child stays
    // attached to its parents in the arrangement
    let mut t = Traced { points: vec![c.point], periods: vec![w0], lambdas: vec![pair0], end: CurveEnd::Cutoff };
    if x != c.point {
        t.points.push(x);
        t.periods.push(w);
        t.lambdas.push(pair);
    }
    Some(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmnReport {
    pub generic: bool,
    /// `(curve id, turning point index)` of a saddle trajectory.
    pub witness: Option<(usize, usize)>,
}

/// Not generic iff some curve ends at a turning point other than its source.
pub fn is_gmn_generic(g: &StokesGraph) -> GmnReport {
    let witness = g.curves.iter().find_map(|c| match c.end {
        CurveEnd::Saddle(k) => Some((c.id, k)),
        _ => None,
    });
    GmnReport { generic: witness.is_none(), witness }
}
