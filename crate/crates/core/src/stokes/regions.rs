//! Planar arrangement of traced curves inside the bounding disk.
//!
//! The curves and the boundary circle are split at all mutual intersections
//! into a planar graph; faces are the cycles of the half-edge structure with
//! positive signed area. Cycles of nonpositive area (the outer face and the
//! outer boundaries of components floating inside a face) are attached to the
//! face that contains them.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::{StokesError, StokesGraph};

const CIRCLE_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub id: usize,
    pub base_point: Complex64,
    pub area: f64,
    /// Boundary cycle, counterclockwise.
    pub boundary: Vec<Complex64>,
}

/// A piece of a curve between two arrangement vertices. Regions are `None`
/// outside the disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionEdge {
    pub curve: usize,
    /// Region to the left of the curve's direction of travel.
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub from: usize,
    pub to: usize,
    /// A point on the edge and the curve's weight there.
    pub point: Complex64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum VertexKind {
    TurningPoint(usize),
    Crossing,
    CurveEnd,
    Boundary,
}

/// One counterclockwise step around a vertex: from region `from` across
/// curve edge `edge` (or the boundary circle when `None`) into `to`.
/// `forward` means the step crosses the edge from its right to its left.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexStep {
    pub edge: Option<usize>,
    pub forward: bool,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex {
    pub id: usize,
    pub position: Complex64,
    pub kind: VertexKind,
    pub around: Vec<VertexStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArrangementStats {
    pub vertices: usize,
    pub edges: usize,
    pub components: usize,
    /// Bounded faces found by the traversal.
    pub faces: usize,
    /// Bounded faces below the area tolerance, merged into their
    /// surroundings.
    pub slivers: usize,
}

impl ArrangementStats {
    /// Bounded faces predicted by Euler's formula `V − E + F = 1 + C`.
    pub fn euler_faces(&self) -> i64 {
        self.edges as i64 - self.vertices as i64 + self.components as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrangement {
    pub regions: Vec<Region>,
    pub edges: Vec<RegionEdge>,
    /// Turning points, crossings, curve ends and boundary exits.
    pub vertices: Vec<Vertex>,
    pub stats: ArrangementStats,
}

impl Arrangement {
    /// Region containing `p`, if inside the disk.
    pub fn locate(&self, p: Complex64) -> Option<usize> {
        self.regions
            .iter()
            .filter(|r| winding(&r.boundary, p) != 0)
            .min_by(|a, b| a.area.partial_cmp(&b.area).unwrap())
            .map(|r| r.id)
    }

    /// Edges between two regions, in either orientation.
    pub fn edges_between(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&k| {
                let e = &self.edges[k];
                (e.left == Some(a) && e.right == Some(b)) || (e.left == Some(b) && e.right == Some(a))
            })
            .collect()
    }
}

struct Poly {
    points: Vec<Complex64>,
    curve: Option<usize>,
    closed: bool,
}

fn winding(cycle: &[Complex64], p: Complex64) -> i32 {
    let mut w = 0;
    let n = cycle.len();
    for k in 0..n {
        let (a, b) = (cycle[k], cycle[(k + 1) % n]);
        let cross = (b.re - a.re) * (p.im - a.im) - (p.re - a.re) * (b.im - a.im);
        if a.im <= p.im {
            if b.im > p.im && cross > 0.0 {
                w += 1;
            }
        } else if b.im <= p.im && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

fn signed_area(cycle: &[Complex64]) -> f64 {
    let n = cycle.len();
    (0..n).map(|k| cycle[k].re * cycle[(k + 1) % n].im - cycle[(k + 1) % n].re * cycle[k].im).sum::<f64>() * 0.5
}

fn seg_dist(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / l2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

struct Snapper {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Complex64>,
}

impl Snapper {
    fn id(&mut self, p: Complex64) -> usize {
        let cell = ((p.re / self.tol).floor() as i64, (p.im / self.tol).floor() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.cells.get(&(cell.0 + dx, cell.1 + dy)) {
                    for &k in v {
                        if (self.points[k] - p).norm() <= self.tol {
                            return k;
                        }
                    }
                }
            }
        }
        self.points.push(p);
        self.cells.entry(cell).or_default().push(self.points.len() - 1);
        self.points.len() - 1
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Faces of the arrangement of the graph's curves and the boundary circle.
pub fn detect_regions(g: &StokesGraph) -> Result<Arrangement, StokesError> {
    let r = g.radius;
    let c0 = g.center;
    let scale = r.max(1.0);
    let tol = 1e-9 * scale;

    let mut polys: Vec<Poly> = g
        .curves
        .iter()
        .map(|c| Poly { points: c.points.clone(), curve: Some(c.id), closed: false })
        .collect();
    let mut angles: Vec<f64> = (0..CIRCLE_SAMPLES).map(|k| -PI + 2.0 * PI * k as f64 / CIRCLE_SAMPLES as f64).collect();
    for c in &g.curves {
        let last = *c.points.last().unwrap();
        if ((last - c0).norm() - r).abs() < 1e-7 * scale {
            angles.push((last - c0).arg());
        }
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let circle: Vec<Complex64> = angles.iter().map(|&t| c0 + Complex64::from_polar(r, t)).collect();
    polys.push(Poly { points: circle, curve: None, closed: true });

    // segments
    struct Seg {
        poly: usize,
        idx: usize,
        a: Complex64,
        b: Complex64,
    }
    let mut segs: Vec<Seg> = Vec::new();
    for (pi, p) in polys.iter().enumerate() {
        let n = p.points.len();
        let m = if p.closed { n } else { n.saturating_sub(1) };
        for k in 0..m {
            segs.push(Seg { poly: pi, idx: k, a: p.points[k], b: p.points[(k + 1) % n] });
        }
    }
    let mut splits: Vec<Vec<(f64, Complex64)>> = segs.iter().map(|s| vec![(0.0, s.a), (1.0, s.b)]).collect();

    // uniform grid over the disk
    let grid = 64usize;
    let cell = 2.0 * r * 1.0001 / grid as f64;
    let to_cell = |v: f64, lo: f64| (((v - lo) / cell).floor().max(0.0) as usize).min(grid - 1);
    let (lox, loy) = (c0.re - r * 1.00005, c0.im - r * 1.00005);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); grid * grid];
    for (k, s) in segs.iter().enumerate() {
        let (x0, x1) = (to_cell(s.a.re.min(s.b.re) - tol, lox), to_cell(s.a.re.max(s.b.re) + tol, lox));
        let (y0, y1) = (to_cell(s.a.im.min(s.b.im) - tol, loy), to_cell(s.a.im.max(s.b.im) + tol, loy));
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                buckets[gx * grid + gy].push(k);
            }
        }
    }
    let adjacent = |s1: &Seg, s2: &Seg| {
        if s1.poly != s2.poly {
            return false;
        }
        let n = polys[s1.poly].points.len();
        let d = s1.idx.abs_diff(s2.idx);
        d <= 1 || (polys[s1.poly].closed && d == n - 1)
    };
    for (bi, bucket) in buckets.iter().enumerate() {
        for (x, &i) in bucket.iter().enumerate() {
            for &j in &bucket[x + 1..] {
                let (s1, s2) = (&segs[i], &segs[j]);
                // handle each pair in one bucket only
                let mx = to_cell(s1.a.re.min(s1.b.re).max(s2.a.re.min(s2.b.re)) - tol, lox);
                let my = to_cell(s1.a.im.min(s1.b.im).max(s2.a.im.min(s2.b.im)) - tol, loy);
                if mx * grid + my != bi {
                    continue;
                }
                if adjacent(s1, s2) {
                    continue;
                }
                let rr = s1.b - s1.a;
                let ss = s2.b - s2.a;
                let qp = s2.a - s1.a;
                let denom = rr.re * ss.im - rr.im * ss.re;
                let (lr, ls) = (rr.norm(), ss.norm());
                if lr == 0.0 || ls == 0.0 {
                    continue;
                }
                if denom.abs() <= 1e-12 * lr * ls {
                    // parallel: overlapping collinear pieces are a degeneracy
                    let dist = (qp.re * rr.im - qp.im * rr.re).abs() / lr;
                    if dist < tol {
                        let t0 = (qp * rr.conj()).re / (lr * lr);
                        let t1 = ((s2.b - s1.a) * rr.conj()).re / (lr * lr);
                        let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
                        if (hi - lo) * lr > tol {
                            return Err(StokesError::ArrangementDegeneracy(format!(
                                "overlapping pieces near {}",
                                s1.a + rr * (0.5 * (lo + hi))
                            )));
                        }
                    }
                    continue;
                }
                let t = (qp.re * ss.im - qp.im * ss.re) / denom;
                let u = (qp.re * rr.im - qp.im * rr.re) / denom;
                let (et, eu) = (tol / lr, tol / ls);
                if t < -et || t > 1.0 + et || u < -eu || u > 1.0 + eu {
                    continue;
                }
                let p = s1.a + rr * t.clamp(0.0, 1.0);
                splits[i].push((t.clamp(0.0, 1.0), p));
                splits[j].push((u.clamp(0.0, 1.0), p));
            }
        }
    }

    // vertices and edges
    let mut snap = Snapper { tol, cells: HashMap::new(), points: Vec::new() };
    struct Edge {
        u: usize,
        v: usize,
        poly: usize,
        seg: usize,
        t_mid: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (k, sp) in splits.iter_mut().enumerate() {
        sp.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let ids: Vec<(f64, usize)> = sp.iter().map(|&(t, p)| (t, snap.id(p))).collect();
        for w in ids.windows(2) {
            let (u, v) = (w[0].1, w[1].1);
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if let Some(&other) = seen.get(&key) {
                if edges[other].poly != segs[k].poly {
                    return Err(StokesError::ArrangementDegeneracy(format!(
                        "two curves share an edge near {}",
                        snap.points[u]
                    )));
                }
                continue;
            }
            seen.insert(key, edges.len());
            edges.push(Edge { u, v, poly: segs[k].poly, seg: segs[k].idx, t_mid: 0.5 * (w[0].0 + w[1].0) });
        }
    }
    let pts = snap.points.clone();
    let nv = pts.len();

    // half-edges: 2k is u→v, 2k+1 is v→u
    let head = |h: usize| if h % 2 == 0 { edges[h / 2].v } else { edges[h / 2].u };
    let tail = |h: usize| if h % 2 == 0 { edges[h / 2].u } else { edges[h / 2].v };
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for h in 0..2 * edges.len() {
        out[tail(h)].push(h);
    }
    for (v, list) in out.iter_mut().enumerate() {
        list.sort_by(|&a, &b| {
            let da = (pts[head(a)] - pts[v]).arg();
            let db = (pts[head(b)] - pts[v]).arg();
            da.partial_cmp(&db).unwrap()
        });
    }
    let mut pos_in_out = vec![0usize; 2 * edges.len()];
    for list in &out {
        for (k, &h) in list.iter().enumerate() {
            pos_in_out[h] = k;
        }
    }
    let next = |h: usize| {
        let v = head(h);
        let twin = h ^ 1;
        let list = &out[v];
        list[(pos_in_out[twin] + list.len() - 1) % list.len()]
    };
    let mut cycle_of = vec![usize::MAX; 2 * edges.len()];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for h0 in 0..2 * edges.len() {
        if cycle_of[h0] != usize::MAX {
            continue;
        }
        let id = cycles.len();
        let mut cyc = Vec::new();
        let mut h = h0;
        loop {
            cycle_of[h] = id;
            cyc.push(h);
            h = next(h);
            if h == h0 {
                break;
            }
        }
        cycles.push(cyc);
    }
    let cycle_pts = |c: &[usize]| c.iter().map(|&h| pts[tail(h)]).collect::<Vec<_>>();
    let areas: Vec<f64> = cycles.iter().map(|c| signed_area(&cycle_pts(c))).collect();
    let area_tol = 1e-12 * scale * scale;

    let mut regions: Vec<Region> = Vec::new();
    let mut region_of_cycle: Vec<Option<usize>> = vec![None; cycles.len()];
    for (ci, c) in cycles.iter().enumerate() {
        if areas[ci] > area_tol {
            region_of_cycle[ci] = Some(regions.len());
            regions.push(Region { id: regions.len(), base_point: Complex64::new(0.0, 0.0), area: areas[ci], boundary: cycle_pts(c) });
        }
    }
    let mut arr = Arrangement {
        regions,
        edges: Vec::new(),
        vertices: Vec::new(),
        stats: ArrangementStats {
            vertices: nv,
            edges: edges.len(),
            components: 0,
            faces: 0,
            slivers: 0,
        },
    };
    let left_probe = |h: usize, frac: f64| {
        let (a, b) = (pts[tail(h)], pts[head(h)]);
        let d = b - a;
        (a + b) * 0.5 + Complex64::new(-d.im, d.re) / d.norm() * (frac * d.norm().min(scale * 1e-3))
    };
    for (ci, c) in cycles.iter().enumerate() {
        if region_of_cycle[ci].is_none() {
            region_of_cycle[ci] = arr.locate(left_probe(c[0], 1e-3));
        }
    }

    // base points: left-offset probes with the largest clearance
    let seg_list: Vec<(Complex64, Complex64)> = edges.iter().map(|e| (pts[e.u], pts[e.v])).collect();
    let clearance = |p: Complex64| seg_list.iter().map(|&(a, b)| seg_dist(p, a, b)).fold(f64::INFINITY, f64::min);
    for rid in 0..arr.regions.len() {
        let ci = region_of_cycle.iter().position(|&r| r == Some(rid)).unwrap();
        let cyc = &cycles[ci];
        let stride = (cyc.len() / 48).max(1);
        let mut cands: Vec<Complex64> = Vec::new();
        let bnd = &arr.regions[rid].boundary;
        cands.push(bnd.iter().sum::<Complex64>() / bnd.len() as f64);
        for &h in cyc.iter().step_by(stride) {
            let (a, b) = (pts[tail(h)], pts[head(h)]);
            let d = b - a;
            if d.norm() == 0.0 {
                continue;
            }
            let nrm = Complex64::new(-d.im, d.re) / d.norm();
            for f in [1e-3, 1e-2, 5e-2, 0.15] {
                cands.push((a + b) * 0.5 + nrm * (f * r));
            }
        }
        let best = cands
            .into_iter()
            .filter(|&p| arr.locate(p) == Some(rid))
            .map(|p| (clearance(p), p))
            .fold(None::<(f64, Complex64)>, |acc, x| match acc {
                Some(a) if a.0 >= x.0 => Some(a),
                _ => Some(x),
            });
        arr.regions[rid].base_point = best.map_or(bnd[0], |b| b.1);
    }

    // curve edges with their adjacent regions
    let mut region_edge_of = vec![None; edges.len()];
    for (k, e) in edges.iter().enumerate() {
        let Some(cid) = polys[e.poly].curve else { continue };
        let curve = &g.curves[cid];
        let w = curve.weights[e.seg] + e.t_mid * (curve.weights[e.seg + 1] - curve.weights[e.seg]);
        region_edge_of[k] = Some(arr.edges.len());
        arr.edges.push(RegionEdge {
            curve: cid,
            left: region_of_cycle[cycle_of[2 * k]],
            right: region_of_cycle[cycle_of[2 * k + 1]],
            from: e.u,
            to: e.v,
            point: (pts[e.u] + pts[e.v]) * 0.5,
            weight: w,
        });
    }

    // interesting vertices
    for v in 0..nv {
        let list = &out[v];
        let on_circle = list.iter().any(|&h| polys[edges[h / 2].poly].curve.is_none());
        let mut curves_here: Vec<usize> = list.iter().filter_map(|&h| polys[edges[h / 2].poly].curve).collect();
        curves_here.sort_unstable();
        curves_here.dedup();
        let tp = g.turning_points.iter().position(|t| (t.position - pts[v]).norm() <= tol * 10.0);
        let kind = if let Some(k) = tp {
            VertexKind::TurningPoint(k)
        } else if on_circle {
            if curves_here.is_empty() {
                continue;
            }
            VertexKind::Boundary
        } else if list.len() == 1 {
            VertexKind::CurveEnd
        } else if curves_here.len() >= 2 {
            VertexKind::Crossing
        } else {
            continue;
        };
        let around = (0..list.len())
            .map(|k| {
                let h = list[k];
                let prev = list[(k + list.len() - 1) % list.len()];
                VertexStep {
                    edge: region_edge_of[h / 2],
                    forward: h % 2 == 0,
                    from: region_of_cycle[cycle_of[prev]],
                    to: region_of_cycle[cycle_of[h]],
                }
            })
            .collect();
        arr.vertices.push(Vertex { id: v, position: pts[v], kind, around });
    }

    let mut parent: Vec<usize> = (0..nv).collect();
    for e in &edges {
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a != b {
            parent[a] = b;
        }
    }
    let components = (0..nv).filter(|&v| find(&mut parent, v) == v).count();
    arr.stats.components = components;
    arr.stats.faces = arr.regions.len();
    // One nonpositive walk per component (the outer face or a hole boundary);
    // any beyond that are bounded faces too thin to keep.
    let nonpositive = areas.iter().filter(|&&a| a <= area_tol).count();
    arr.stats.slivers = nonpositive.saturating_sub(components);
    if arr.stats.euler_faces() != (arr.stats.faces + arr.stats.slivers) as i64 {
        log::warn!(
            "face traversal found {} faces and {} slivers, Euler formula predicts {}",
            arr.stats.faces,
            arr.stats.slivers,
            arr.stats.euler_faces()
        );
    } else if arr.stats.slivers > 0 {
        log::debug!("{} sliver faces below the area tolerance were merged", arr.stats.slivers);
    }
    Ok(arr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_ratfunc;
    use crate::stokes::{trace_stokes_curves, Potential, TraceOptions};

    fn graph(q: &str, theta: f64) -> StokesGraph {
        let p = Potential::<f64>::schrodinger(parse_ratfunc(q).unwrap()).unwrap();
        trace_stokes_curves(&p, theta, 1000.0, &TraceOptions::default()).unwrap()
    }

    #[test]
    fn airy_has_three_regions() {
        let g = graph("x", 0.0);
        let a = detect_regions(&g).unwrap();
        assert_eq!(a.regions.len(), 3);
        assert_eq!(a.stats.euler_faces(), 3);
        for r in &a.regions {
            assert_eq!(a.locate(r.base_point), Some(r.id));
            assert!((r.area - 100.0 * PI / 3.0).abs() < 0.1);
        }
        assert_eq!(a.edges.len(), g.curves.iter().map(|c| c.points.len() - 1).sum::<usize>());
        let tp = a.vertices.iter().find(|v| v.kind == VertexKind::TurningPoint(0)).unwrap();
        assert_eq!(tp.around.len(), 3);
        assert!(tp.around.iter().all(|s| s.from.is_some() && s.to.is_some() && s.from != s.to));
    }

    #[test]
    fn empty_graph_has_one_region() {
        let g = graph("1", 0.0);
        let a = detect_regions(&g).unwrap();
        assert_eq!(a.regions.len(), 1);
        assert!(a.edges.is_empty());
    }

    #[test]
    fn double_well_matches_euler() {
        let g = graph("x^2 - 1", 0.0);
        let a = detect_regions(&g).unwrap();
        assert_eq!(a.stats.faces as i64, a.stats.euler_faces());
        assert!(a.regions.len() >= 4);
        // the saddle configuration overlaps along [-1, 1]
        let g = graph("x^2 - 1", PI / 2.0);
        assert!(matches!(detect_regions(&g), Err(StokesError::ArrangementDegeneracy(_))));
    }
}
