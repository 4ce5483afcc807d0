//! SQ data from a traced Stokes graph and its region arrangement.

use std::collections::{BTreeMap, HashSet};

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    phase_cone, Gluing, RegionModule, SheafQuantizationData, SheetDatum, SqError, SqStep, SqVertex, SqVertexKind,
};
use crate::novikov::NovikovElement;
use crate::numeric::gauss_legendre;
use crate::ring::Matrix;
use crate::scalar::{c_from_f64, c_to_f64, Real};
use crate::stokes::{is_gmn_generic, match_all, nearest, CurveSource, Potential, StokesGraph, VertexKind};

/// Voros coefficients `a` in `ψᵢ ⇝ ψᵢ + a T^{w} ψⱼ`, as `[re, im]`.
/// Curves spawned at intersections take the coefficient that closes the
/// cocycle at their source vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GluingRules {
    pub simple_turning_point: [f64; 2],
    pub non_simple_turning_point: Option<[f64; 2]>,
    /// Per-curve coefficients keyed by curve label.
    pub overrides: BTreeMap<String, [f64; 2]>,
}

impl Default for GluingRules {
    fn default() -> Self {
        Self { simple_turning_point: [0.0, 1.0], non_simple_turning_point: None, overrides: BTreeMap::new() }
    }
}

const NODES: usize = 8;

/// `∫ λᵢ` along a polyline for roots continued from `start`; returns the
/// integrals and the continued values at the end.
fn integrate_sheets(
    p: &Potential<f64>,
    path: &[Complex64],
    start: &[Complex64],
    h: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let gl = gauss_legendre(NODES);
    let mut vals = start.to_vec();
    let mut total = vec![Complex64::new(0.0, 0.0); start.len()];
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = 1 + ((b - a).norm() / h) as usize;
        for k in 0..n {
            let (x0, x1) = (a + (b - a) * (k as f64 / n as f64), a + (b - a) * ((k + 1) as f64 / n as f64));
            let half = (x1 - x0) * 0.5;
            for &(u, wt) in &gl {
                let x = x0 + half * (u + 1.0);
                vals = match_all(&p.roots_at(x), &vals);
                for (t, v) in total.iter_mut().zip(&vals) {
                    *t += v * half * wt;
                }
            }
            vals = match_all(&p.roots_at(x1), &vals);
        }
    }
    (total, vals)
}

/// Nearest segment of a polyline and the parameter along it.
fn locate_on(points: &[Complex64], z: Complex64) -> (usize, f64) {
    let mut best = (f64::INFINITY, 0, 0.0);
    for k in 0..points.len().saturating_sub(1) {
        let (a, b) = (points[k], points[k + 1]);
        let d = b - a;
        let t = if d.norm_sqr() == 0.0 { 0.0 } else { (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0) };
        let dist = (a + d * t - z).norm();
        if dist < best.0 {
            best = (dist, k, t);
        }
    }
    (best.1, best.2)
}

/// Polyline from `p` to `v` along the curve.
fn curve_path(points: &[Complex64], p: Complex64, v: Complex64) -> Vec<Complex64> {
    let (lp, lv) = (locate_on(points, p), locate_on(points, v));
    let mut path = vec![p];
    if (lv.0, lv.1) >= (lp.0, lp.1) {
        path.extend_from_slice(&points[lp.0 + 1..=lv.0]);
    } else {
        path.extend(points[lv.0 + 1..=lp.0].iter().rev());
    }
    path.push(v);
    path.dedup();
    path
}

fn as_permutation(from: &[Complex64], to: &[Complex64]) -> Vec<usize> {
    let matched = match_all(to, from);
    matched.iter().map(|m| to.iter().position(|t| t == m).expect("matched root")).collect()
}

struct Group {
    curve: usize,
    from: usize,
    to: usize,
    anchor: Complex64,
    weight: f64,
    /// `from` values of the roots at the anchor.
    values: Vec<Complex64>,
    period: Complex64,
    sheets: [usize; 2],
    permutation: Vec<usize>,
}

fn gluing_matrix<R: Real>(
    gr: &Group,
    a: Complex64,
    proto: &NovikovElement<R>,
) -> Result<Matrix<NovikovElement<R>>, SqError> {
    let n = gr.permutation.len();
    let mut m = Matrix::zeros_like(n, n, proto);
    for c in 0..n {
        m.set(gr.permutation[c], c, proto.one());
    }
    if a != Complex64::new(0.0, 0.0) {
        let [i, j] = gr.sheets;
        let e = NovikovElement::monomial(c_from_f64(a), c_from_f64(gr.period), proto.cone().clone(), proto.cutoff().clone())?;
        m.set(gr.permutation[i], j, e);
    }
    Ok(m)
}

/// Builds the SQ datum of a GMN-generic graph with detected regions.
///
/// Each maximal run of arrangement edges of one curve between the same two
/// regions becomes one gluing, from the region on the curve's right to the
/// one on its left, anchored at the run's middle edge.
pub fn build_sq<R: Real>(g: &StokesGraph, rules: &GluingRules) -> Result<SheafQuantizationData<R>, SqError> {
    let gmn = is_gmn_generic(g);
    if let Some((curve, turning_point)) = gmn.witness.filter(|_| !gmn.generic) {
        return Err(SqError::NotGeneric { curve, turning_point });
    }
    let arr = g.arrangement.as_ref().ok_or(SqError::MissingRegions)?;
    if !(g.cutoff > 0.0) {
        return Err(SqError::Invalid("cutoff must be positive".into()));
    }
    let cone = phase_cone::<R>(g.theta);
    let cutoff = R::from_f64_lossy(g.cutoff);
    let proto = NovikovElement::zero(cone.clone(), cutoff.clone())?;
    let pot = &g.potential;
    let h = (g.radius / 10.0).max(1.0) / 64.0;

    let mut regions = Vec::with_capacity(arr.regions.len());
    let mut base_values = Vec::with_capacity(arr.regions.len());
    for r in &arr.regions {
        let vals = g.sheet_values_at(r.base_point);
        let (alpha, _) = integrate_sheets(pot, &[g.label_base, r.base_point], &g.base_sheets, h);
        regions.push(RegionModule {
            region: r.id,
            base_point: r.base_point,
            sheets: alpha
                .iter()
                .enumerate()
                .map(|(k, a)| SheetDatum { label: k, alpha: c_from_f64(*a), multiplicity: 1 })
                .collect(),
        });
        base_values.push(vals);
    }

    // runs of edges between interesting vertices
    let interesting: HashSet<usize> = arr.vertices.iter().map(|v| v.id).collect();
    let mut groups: Vec<Group> = Vec::new();
    let mut edge_group = vec![None; arr.edges.len()];
    for (cid, curve) in g.curves.iter().enumerate() {
        let mut ks: Vec<(usize, f64, usize)> = (0..arr.edges.len())
            .filter(|&k| arr.edges[k].curve == cid)
            .map(|k| {
                let (s, t) = locate_on(&curve.points, arr.edges[k].point);
                (s, t, k)
            })
            .collect();
        ks.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
        let mut runs: Vec<Vec<usize>> = Vec::new();
        for &(_, _, k) in &ks {
            let e = &arr.edges[k];
            if e.left.is_none() || e.right.is_none() {
                continue;
            }
            let extend = runs.last().and_then(|run| run.last()).is_some_and(|&last| {
                let l = &arr.edges[last];
                l.to == e.from && l.left == e.left && l.right == e.right && !interesting.contains(&e.from)
            });
            if extend {
                runs.last_mut().unwrap().push(k);
            } else {
                runs.push(vec![k]);
            }
        }
        for run in runs {
            let mid = &arr.edges[run[run.len() / 2]];
            let (from, to) = (mid.right.unwrap(), mid.left.unwrap());
            let p = mid.point;
            let (_, vals_from) = integrate_sheets(pot, &[arr.regions[from].base_point, p], &base_values[from], h);
            let (_, vals_to) = integrate_sheets(pot, &[arr.regions[to].base_point, p], &base_values[to], h);
            let (k, _) = locate_on(&curve.points, p);
            let (ints, pair) = integrate_sheets(pot, &[curve.points[k], p], &curve.lambdas[k], h);
            let period = curve.periods[k] + ints[0] - ints[1];
            let i = nearest(&vals_from, pair[0], None);
            let j = nearest(&vals_from, pair[1], Some(i));
            let gid = groups.len();
            for &e in &run {
                edge_group[e] = Some(gid);
            }
            groups.push(Group {
                curve: cid,
                from,
                to,
                anchor: p,
                weight: mid.weight,
                permutation: as_permutation(&vals_from, &vals_to),
                values: vals_from,
                period,
                sheets: [i, j],
            });
        }
    }

    // Voros coefficients by rule; spawned curves are solved for below
    let mut coefficient: Vec<Complex64> = Vec::with_capacity(g.curves.len());
    for c in &g.curves {
        let a = if let Some(a) = rules.overrides.get(&c.label) {
            Complex64::new(a[0], a[1])
        } else {
            match c.source {
                CurveSource::TurningPoint { index, .. } => {
                    let rule = if g.turning_points[index].is_simple() {
                        Some(rules.simple_turning_point)
                    } else {
                        rules.non_simple_turning_point
                    };
                    let a = rule.ok_or_else(|| SqError::MissingRule(c.label.clone()))?;
                    Complex64::new(a[0], a[1])
                }
                CurveSource::Intersection { .. } => Complex64::new(0.0, 0.0),
            }
        };
        coefficient.push(a);
    }

    let mut gluings = Vec::with_capacity(groups.len());
    for (gid, gr) in groups.iter().enumerate() {
        gluings.push(Gluing {
            id: gid,
            from: gr.from,
            to: gr.to,
            curve: Some(gr.curve),
            sheets: Some(gr.sheets),
            anchor: Some(gr.anchor),
            weight: Some(gr.weight),
            coefficient: Some(coefficient[gr.curve]),
            matrix: gluing_matrix(gr, coefficient[gr.curve], &proto)?,
            permutation: gr.permutation.clone(),
        });
    }

    let mut vertices = Vec::new();
    'vertices: for v in &arr.vertices {
        let kind = match v.kind {
            VertexKind::Crossing => SqVertexKind::Crossing,
            VertexKind::TurningPoint(k) => SqVertexKind::TurningPoint(k),
            VertexKind::CurveEnd => SqVertexKind::CurveEnd,
            VertexKind::Boundary => continue,
        };
        let mut steps = Vec::with_capacity(v.around.len());
        for s in &v.around {
            let Some(gid) = s.edge.and_then(|e| edge_group[e]) else {
                debug!("vertex {} touches an edge without a gluing; not checked", v.id);
                continue 'vertices;
            };
            let gr = &groups[gid];
            let path = curve_path(&g.curves[gr.curve].points, gr.anchor, v.position);
            let (shift, end) = integrate_sheets(pot, &path, &gr.values, h);
            // at a turning point the local frame is degenerate
            let relabel = (!matches!(kind, SqVertexKind::TurningPoint(_))).then(|| {
                let from = as_permutation(&end, &pot.roots_at(v.position));
                let mut to = vec![0; from.len()];
                for (i, &p) in gr.permutation.iter().enumerate() {
                    to[p] = from[i];
                }
                [from, to]
            });
            let step =
                SqStep { gluing: gid, forward: s.forward, shift: shift.into_iter().map(c_from_f64).collect(), relabel };
            let expect = if s.forward { (gr.from, gr.to) } else { (gr.to, gr.from) };
            if (s.from, s.to) != (Some(expect.0), Some(expect.1)) {
                warn!("vertex {} step across gluing {gid} disagrees with the edge orientation", v.id);
            }
            steps.push(step);
        }
        vertices.push(SqVertex { id: v.id, position: Some(v.position), kind, steps });
    }

    let mut sq = SheafQuantizationData { theta: g.theta, cone, cutoff, regions, gluings, vertices };

    // Spawned curves: the coefficient making the product around the source
    // vertex trivial. Repeated so later spawns at shared vertices settle.
    let spawned: Vec<usize> = (0..g.curves.len())
        .filter(|&c| matches!(g.curves[c].source, CurveSource::Intersection { .. }) && !g.curves[c].label.is_empty())
        .filter(|&c| !rules.overrides.contains_key(&g.curves[c].label))
        .collect();
    for _ in 0..3 {
        if spawned.is_empty() {
            break;
        }
        for &cid in &spawned {
            let CurveSource::Intersection { point } = g.curves[cid].source else { unreachable!() };
            let found = sq.vertices.iter().enumerate().find_map(|(vi, v)| {
                let close = v.position.is_some_and(|p| (p - point).norm() < 1e-6 * (1.0 + g.radius));
                let s = v.steps.iter().position(|s| groups[s.gluing].curve == cid)?;
                close.then_some((vi, s))
            });
            let Some((vi, si)) = found else {
                warn!("no vertex found at the source of {}; coefficient left at zero", g.curves[cid].label);
                continue;
            };
            let x = solve_spawn(&sq, vi, si, &groups)?;
            if let Some(x) = x {
                coefficient[cid] = x;
                for (gid, gr) in groups.iter().enumerate().filter(|(_, gr)| gr.curve == cid) {
                    sq.gluings[gid].matrix = gluing_matrix(gr, x, &proto)?;
                    sq.gluings[gid].coefficient = Some(x);
                }
            }
        }
    }
    sq.validate()?;
    Ok(sq)
}

/// Coefficient of the spawned curve crossed by step `si` of vertex `vi`
/// that makes the vertex product the identity.
fn solve_spawn<R: Real>(
    sq: &SheafQuantizationData<R>,
    vi: usize,
    si: usize,
    groups: &[Group],
) -> Result<Option<Complex64>, SqError> {
    let v = &sq.vertices[vi];
    let n = sq.regions[sq.step_regions(&v.steps[0]).0].rank();
    let id = Matrix::identity_like(n, &sq.proto()?);
    let before = if si == 0 { id.clone() } else { sq.path_product(&v.steps[..si])? };
    let after = if si + 1 == v.steps.len() { id } else { sq.path_product(&v.steps[si + 1..])? };
    let inv = |m: &Matrix<NovikovElement<R>>| m.inverse().ok_or_else(|| SqError::Invalid("singular vertex product".into()));
    let mut s = inv(&after)?.mul(&inv(&before)?);
    let step = &v.steps[si];
    if !step.forward {
        s = inv(&s)?;
    }
    let gr = &groups[step.gluing];
    let [i, j] = gr.sheets;
    let (row, col) = match &step.relabel {
        Some([from, to]) => (to[gr.permutation[i]], from[j]),
        None => (gr.permutation[i], j),
    };
    let entry = s.get(row, col);
    let expected = c_from_f64::<R>(gr.period) + step.shift[i].clone() - step.shift[j].clone();
    let target = c_to_f64(&expected);
    let term = entry
        .terms()
        .iter()
        .map(|(c, a)| ((c_to_f64(c) - target).norm(), c_to_f64(a)))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    match term {
        Some((d, a)) if d <= 1e-6 * (1.0 + target.norm()) => Ok(Some(a)),
        _ => {
            debug!("vertex {} does not constrain gluing {}", v.id, step.gluing);
            Ok(None)
        }
    }
}
