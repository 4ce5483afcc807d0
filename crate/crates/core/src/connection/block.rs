//! Formal block diagonalization `Q⁻¹ℏQ' + Q⁻¹ΩQ = B` by the bi-graded
//! Sylvester recursion in (ℏ-order, Taylor order at the base point), and the
//! weak diagonalization built on top of it.

use std::sync::Arc;

use num_complex::Complex64;

use super::{eigenvalues_f64, ConnError, HbarConnection, SpectralData};
use crate::jet::Jet;
use crate::novikov::exponents_equal;
use crate::numeric::{cluster_roots, log_grid, loglog_slope};
use crate::poly::RatFunc;
use crate::ring::{null_space, Matrix, RingElem};
use crate::scalar::{c_int, c_is_zero, c_to_f64, c_zero, Real, C};
use crate::transseries::{HbarPoly, Transseries, Truncation};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOptions {
    /// Minimum admissible distance between eigenvalues of different blocks.
    pub gap_tol: f64,
    /// Single-linkage radius for grouping leading eigenvalues into blocks.
    pub cluster_radius: f64,
    /// Taylor precision of the jets at the base point (default `order + 2`).
    pub jet_order: Option<usize>,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, cluster_radius: 1e-8, jet_order: None }
    }
}

/// Output of [`block_diagonalize`]: `Q = S·Σ_r Q_r ℏ^r` and `B = Σ_r B_r ℏ^r`,
/// each `Q_r`, `B_r` stored as Taylor coefficients at the base point.
#[derive(Debug, Clone)]
pub struct BlockDiagonalization<R: Real> {
    pub base: C<R>,
    pub order: usize,
    pub blocks: Vec<Vec<usize>>,
    pub eigenvalues: Vec<Complex64>,
    /// Constant change of basis applied before the recursion.
    pub prelim: Matrix<C<R>>,
    /// `q[r][k]`: coefficient of `ℏ^r t^k`.
    pub q: Vec<Vec<Matrix<C<R>>>>,
    pub b: Vec<Vec<Matrix<C<R>>>>,
    omega: Vec<Vec<Matrix<C<R>>>>,
}

fn cluster_ids(values: &[Complex64], radius: f64) -> Vec<usize> {
    let n = values.len();
    let mut id: Vec<usize> = (0..n).collect();
    // single linkage by repeated relabelling; n is tiny
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if id[i] != id[j] && (values[i] - values[j]).norm() <= radius {
                    let (a, b) = (id[i].min(id[j]), id[i].max(id[j]));
                    id.iter_mut().filter(|v| **v == b).for_each(|v| *v = a);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut labels: Vec<usize> = id.clone();
    labels.sort();
    labels.dedup();
    id.iter().map(|v| labels.iter().position(|l| l == v).unwrap()).collect()
}

/// Best rational approximation with denominator at most `max_den`.
fn rationalize(v: f64, max_den: i64) -> Option<(i64, i64)> {
    if !v.is_finite() || v.abs() > 1e12 {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..64 {
        let a = x.floor();
        let ai = a as i64;
        let (h2, k2) = (ai.checked_mul(h1)?.checked_add(h0)?, ai.checked_mul(k1)?.checked_add(k0)?);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (v - h1 as f64 / k1 as f64).abs() <= 1e-12 * v.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = x - a;
        if frac.abs() < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    ((v - h1 as f64 / k1 as f64).abs() <= 1e-12 * v.abs().max(1.0) && k1 > 0).then_some((h1, k1))
}

fn exact_root<R: Real>(z: Complex64) -> Option<C<R>> {
    let (a, b) = rationalize(z.re, 1_000_000)?;
    let (c, d) = rationalize(z.im, 1_000_000)?;
    Some(C::new(R::from_ratio(a, b), R::from_ratio(c, d)))
}

fn is_small<R: Real>(z: &C<R>, tol: f64) -> bool {
    if R::EXACT {
        c_is_zero(z)
    } else {
        c_to_f64(z).norm() <= tol
    }
}

/// Finds a constant `S` and an index partition such that `S⁻¹ C S` is
/// block diagonal with the eigenvalue clusters as blocks.
fn block_structure<R: Real>(
    c00: &Matrix<C<R>>,
    opts: &BlockOptions,
) -> Result<(Matrix<C<R>>, Vec<usize>, Vec<Complex64>, Vec<usize>), ConnError> {
    let n = c00.rows();
    let eig = eigenvalues_f64(c00);
    let cid = cluster_ids(&eig, opts.cluster_radius);
    let nclusters = cid.iter().max().map_or(0, |m| m + 1);
    let scale = c00.entries().map(|z| c_to_f64(z).norm()).fold(1.0, f64::max);
    let ident = Matrix::identity_like(n, &c_zero::<R>());

    // coupling components of the sparsity pattern
    let mut comp: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                let linked = !is_small(c00.get(i, j), 1e-14 * scale) || !is_small(c00.get(j, i), 1e-14 * scale);
                if linked && comp[i] != comp[j] {
                    let m = comp[i].min(comp[j]);
                    let o = comp[i].max(comp[j]);
                    comp.iter_mut().filter(|v| **v == o).for_each(|v| *v = m);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut comp_cluster: Vec<Option<usize>> = vec![None; n];
    let mut pure = true;
    for root in 0..n {
        let idx: Vec<usize> = (0..n).filter(|&i| comp[i] == root).collect();
        if idx.is_empty() {
            continue;
        }
        let sub_eig = eigenvalues_f64(&c00.submatrix(&idx, &idx));
        let labels: Vec<usize> = sub_eig
            .iter()
            .map(|z| {
                (0..n).min_by(|&a, &b| (eig[a] - z).norm().partial_cmp(&(eig[b] - z).norm()).unwrap()).map(|k| cid[k]).unwrap()
            })
            .collect();
        if labels.iter().any(|l| *l != labels[0]) {
            pure = false;
            break;
        }
        comp_cluster[root] = Some(labels[0]);
    }
    if pure {
        let blk: Vec<usize> = (0..n).map(|i| comp_cluster[comp[i]].unwrap()).collect();
        return Ok((ident, blk, eig, cid));
    }

    // invariant subspaces of each cluster
    let mut columns: Vec<Vec<C<R>>> = Vec::new();
    let mut blk = Vec::new();
    for cl in 0..nclusters {
        let members: Vec<Complex64> = (0..n).filter(|&k| cid[k] == cl).map(|k| eig[k]).collect();
        let mut factor = ident.clone();
        if R::EXACT {
            let groups = cluster_roots(&members, 1e-6);
            for (z, mult) in groups {
                let lam = exact_root::<R>(z).ok_or(ConnError::NotBlockStructured)?;
                let shifted = c00.sub(&ident.scale(&lam));
                if !shifted.determinant().is_zero() {
                    return Err(ConnError::NotBlockStructured);
                }
                for _ in 0..mult {
                    factor = factor.mul(&shifted);
                }
            }
        } else {
            for z in &members {
                factor = factor.mul(&c00.sub(&ident.scale(&crate::scalar::c_from_f64(*z))));
            }
        }
        let fscale = factor.entries().map(|z| c_to_f64(z).norm()).fold(1.0, f64::max);
        let basis = null_space(&factor, 1e-7 * fscale);
        if basis.len() != members.len() {
            return Err(ConnError::NotBlockStructured);
        }
        for v in basis {
            columns.push(v);
            blk.push(cl);
        }
    }
    let s = Matrix::from_fn(n, n, |i, j| columns[j][i].clone());
    if s.inverse().is_none() {
        return Err(ConnError::NotBlockStructured);
    }
    Ok((s, blk, eig, cid))
}

fn zeros<R: Real>(n: usize) -> Matrix<C<R>> {
    Matrix::zeros_like(n, n, &c_zero::<R>())
}

fn split<R: Real>(m: &Matrix<C<R>>, blk: &[usize]) -> (Matrix<C<R>>, Matrix<C<R>>) {
    let n = m.rows();
    let diag = Matrix::from_fn(n, n, |i, j| if blk[i] == blk[j] { m.get(i, j).clone() } else { c_zero() });
    let off = Matrix::from_fn(n, n, |i, j| if blk[i] != blk[j] { m.get(i, j).clone() } else { c_zero() });
    (diag, off)
}

/// Solver for `C X − X C = R` on each off-diagonal block pair.
struct Sylvester<R: Real> {
    blocks: Vec<Vec<usize>>,
    inv: Vec<((usize, usize), Matrix<C<R>>)>,
}

impl<R: Real> Sylvester<R> {
    fn new(c: &Matrix<C<R>>, blocks: &[Vec<usize>], gap_tol: f64) -> Result<Self, ConnError> {
        let mut inv = Vec::new();
        for (a, ia) in blocks.iter().enumerate() {
            for (b, ib) in blocks.iter().enumerate() {
                if a == b {
                    continue;
                }
                let (p, q) = (ia.len(), ib.len());
                let l = Matrix::from_fn(p * q, p * q, |row, col| {
                    let (i, j) = (row / q, row % q);
                    let (k, l) = (col / q, col % q);
                    let mut v = c_zero::<R>();
                    if l == j {
                        v = v + c.get(ia[i], ia[k]).clone();
                    }
                    if k == i {
                        v = v - c.get(ib[l], ib[j]).clone();
                    }
                    v
                });
                let li = l.inverse().ok_or(ConnError::ClusteredEigenvalues(0.0))?;
                if !R::EXACT {
                    let norm = li.entries().map(|z| c_to_f64(z).norm()).fold(0.0, f64::max);
                    if norm * gap_tol > 1.0 {
                        return Err(ConnError::ClusteredEigenvalues(1.0 / norm));
                    }
                }
                inv.push(((a, b), li));
            }
        }
        Ok(Self { blocks: blocks.to_vec(), inv })
    }

    fn solve(&self, rhs: &Matrix<C<R>>) -> Matrix<C<R>> {
        let n = rhs.rows();
        let mut x = zeros::<R>(n);
        for ((a, b), li) in &self.inv {
            let (ia, ib) = (&self.blocks[*a], &self.blocks[*b]);
            let q = ib.len();
            let v: Vec<C<R>> = (0..ia.len() * q).map(|r| rhs.get(ia[r / q], ib[r % q]).clone()).collect();
            for r in 0..v.len() {
                let mut s = c_zero::<R>();
                for (k, vk) in v.iter().enumerate() {
                    if !c_is_zero(vk) {
                        s = s + li.get(r, k).clone() * vk.clone();
                    }
                }
                x.set(ia[r / q], ib[r % q], s);
            }
        }
        x
    }
}

/// Formal block diagonalization to `ℏ`-order `order` at the base point.
pub fn block_diagonalize<R: Real>(
    conn: &HbarConnection<R, RatFunc<R>>,
    order: usize,
    opts: &BlockOptions,
) -> Result<BlockDiagonalization<R>, ConnError> {
    let n = conn.rank();
    let big_k = opts.jet_order.unwrap_or(order + 2).max(order + 2);
    let base = conn.base().clone();
    let mut c: Vec<Vec<Matrix<C<R>>>> = Vec::with_capacity(order + 1);
    for r in 0..=order {
        let m = conn.hbar_coefficient(r as i32);
        let mut jets = Vec::with_capacity(n * n);
        for e in m.entries() {
            jets.push(e.to_jet(&base, big_k).ok_or(ConnError::PoleAtBasePoint)?);
        }
        c.push((0..big_k).map(|k| Matrix::from_fn(n, n, |i, j| jets[i * n + j].coeff(k))).collect());
    }

    let (s, blk, eig, cid) = block_structure(&c[0][0], opts)?;
    check_turning_point(conn, &eig, opts)?;
    if !s.is_identity() {
        let s_inv = s.inverse().expect("checked invertible");
        for row in c.iter_mut() {
            for m in row.iter_mut() {
                *m = s_inv.mul(m).mul(&s);
            }
        }
    }
    let nblocks = blk.iter().max().map_or(0, |m| m + 1);
    let blocks: Vec<Vec<usize>> = (0..nblocks).map(|b| (0..n).filter(|&i| blk[i] == b).collect()).collect();
    for i in 0..eig.len() {
        for j in 0..i {
            let gap = (eig[i] - eig[j]).norm();
            if cid[i] != cid[j] && gap < opts.gap_tol {
                return Err(ConnError::ClusteredEigenvalues(gap));
            }
        }
    }
    // exact mode keeps the leading term untouched; rounding residue is dropped in float mode
    let (c00, c00_off) = split(&c[0][0], &blk);
    if R::EXACT && !c00_off.is_zero() {
        return Err(ConnError::NotBlockStructured);
    }
    c[0][0] = c00.clone();
    let syl = Sylvester::new(&c00, &blocks, opts.gap_tol)?;

    let mut q: Vec<Vec<Matrix<C<R>>>> = Vec::with_capacity(order + 1);
    let mut b: Vec<Vec<Matrix<C<R>>>> = Vec::with_capacity(order + 1);
    for r in 0..=order {
        let len = big_k - r;
        q.push(Vec::with_capacity(len));
        b.push(Vec::with_capacity(len));
        for k in 0..len {
            if r == 0 && k == 0 {
                q[0].push(Matrix::identity_like(n, &c_zero::<R>()));
                b[0].push(c00.clone());
                continue;
            }
            let mut rhs = c[r][k].clone();
            for s_ in 0..=r {
                for j in 0..=k {
                    if (s_ == 0 && j == 0) || (s_ == r && j == k) {
                        continue;
                    }
                    let qs = &q[s_][j];
                    if qs.is_zero() {
                        continue;
                    }
                    rhs = rhs.add(&c[r - s_][k - j].mul(qs)).sub(&qs.mul(&b[r - s_][k - j]));
                }
            }
            if r >= 1 {
                rhs = rhs.add(&q[r - 1][k + 1].scale(&c_int((k + 1) as i64)));
            }
            let (diag, off) = split(&rhs, &blk);
            q[r].push(syl.solve(&off.neg()));
            b[r].push(diag);
        }
    }
    Ok(BlockDiagonalization { base, order, blocks, eigenvalues: eig, prelim: s, q, b, omega: c })
}

/// Rejects a base point where sheets collide although the spectral curve is
/// generically unramified.
fn check_turning_point<R: Real>(conn: &HbarConnection<R, RatFunc<R>>, eig: &[Complex64], opts: &BlockOptions) -> Result<(), ConnError> {
    let collide = (0..eig.len()).any(|i| (0..i).any(|j| (eig[i] - eig[j]).norm() < opts.gap_tol));
    if !collide {
        return Ok(());
    }
    let cl = conn.classical_part();
    let x0 = c_to_f64(conn.base());
    for probe in [Complex64::new(0.37, 0.21), Complex64::new(-0.29, 0.43)] {
        let x = x0 + probe;
        let m = Matrix::from_fn(cl.rows(), cl.cols(), |i, j| cl.get(i, j).eval_f64(x));
        if m.entries().any(|z| !z.is_finite()) {
            continue;
        }
        let ev = crate::numeric::poly_roots(&super::char_poly_coeffs::<f64, C<f64>>(&m));
        let distinct = (0..ev.len()).all(|i| (0..i).all(|j| (ev[i] - ev[j]).norm() > 1e-6));
        if distinct {
            return Err(ConnError::TurningPointAtBase);
        }
    }
    Ok(())
}

impl<R: Real> BlockDiagonalization<R> {
    pub fn jet_order(&self) -> usize {
        self.q[0].len()
    }

    /// `Q_r` as a matrix of jets.
    pub fn q_jets(&self, r: usize) -> Matrix<Jet<R>> {
        jets_of(&self.q[r])
    }

    pub fn b_jets(&self, r: usize) -> Matrix<Jet<R>> {
        jets_of(&self.b[r])
    }

    /// `Q_r(x₀)`.
    pub fn q_at_base(&self, r: usize) -> &Matrix<C<R>> {
        &self.q[r][0]
    }

    pub fn b_at_base(&self, r: usize) -> &Matrix<C<R>> {
        &self.b[r][0]
    }

    /// Coefficients `E_n` of `E = ℏQ' + ΩQ − QB` at the base point, in the
    /// block-adapted basis, for `n ≤ 2·order + 1`.
    pub fn residual_coefficients(&self) -> Vec<Matrix<C<R>>> {
        let n = self.q[0][0].rows();
        let top = 2 * self.order + 1;
        (0..=top)
            .map(|deg| {
                let mut e = zeros::<R>(n);
                if deg >= 1 && deg - 1 <= self.order && self.q[deg - 1].len() > 1 {
                    e = e.add(&self.q[deg - 1][1]);
                }
                for a in 0..=self.order.min(deg) {
                    let s_ = deg - a;
                    if s_ > self.order {
                        continue;
                    }
                    e = e.add(&self.omega[a][0].mul(&self.q[s_][0])).sub(&self.q[s_][0].mul(&self.b[a][0]));
                }
                e
            })
            .collect()
    }

    /// Off-block norm of `Q⁻¹E` at the base point for a numerical `ℏ`.
    pub fn residual_norm(&self, hbar: f64) -> f64 {
        let coeffs: Vec<Matrix<C<f64>>> = self.residual_coefficients().iter().map(|m| m.map(c_to_f64)).collect();
        let n = coeffs[0].rows();
        let mut e = Matrix::zeros_like(n, n, &Complex64::new(0.0, 0.0));
        for (deg, m) in coeffs.iter().enumerate() {
            e = e.add(&m.scale(&Complex64::new(hbar.powi(deg as i32), 0.0)));
        }
        let mut qh = Matrix::zeros_like(n, n, &Complex64::new(0.0, 0.0));
        for (r, qr) in self.q.iter().enumerate() {
            qh = qh.add(&qr[0].map(c_to_f64).scale(&Complex64::new(hbar.powi(r as i32), 0.0)));
        }
        let g = qh.inverse().map_or(e.clone(), |qi| qi.mul(&e));
        let blk = self.block_index();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if blk[i] != blk[j] {
                    s += g.get(i, j).norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// Log-log slope of [`Self::residual_norm`] on `n` points of `[1e-3, 1e-1]`.
    pub fn residual_slope(&self, n: usize) -> f64 {
        let hs = log_grid(1e-3, 1e-1, n);
        let rs: Vec<f64> = hs.iter().map(|&h| self.residual_norm(h)).collect();
        loglog_slope(&hs, &rs)
    }

    fn block_index(&self) -> Vec<usize> {
        let n = self.q[0][0].rows();
        let mut blk = vec![0; n];
        for (b, idx) in self.blocks.iter().enumerate() {
            for &i in idx {
                blk[i] = b;
            }
        }
        blk
    }

    /// Whether every `B_r` is diagonal (not just block diagonal).
    pub fn b_is_diagonal(&self, tol: f64) -> bool {
        self.b.iter().flatten().all(|m| {
            (0..m.rows()).all(|i| (0..m.cols()).all(|j| i == j || is_small(m.get(i, j), tol)))
        })
    }

    /// The full gauge `S·Q` as a matrix of transseries over jets.
    pub fn gauge_matrix(&self, trunc: &Arc<Truncation<R>>) -> Matrix<Transseries<R, Jet<R>>> {
        let n = self.q[0][0].rows();
        let proto = Jet::zero(self.jet_order());
        let zero = Transseries::zero(trunc.clone(), &proto);
        let q = Matrix::from_fn(n, n, |i, j| {
            let coeffs: Vec<Jet<R>> = self.q.iter().map(|qr| Jet::from_coeffs(qr.iter().map(|m| m.get(i, j).clone()).collect())).collect();
            zero.with_terms(vec![(c_zero(), HbarPoly::from_coeffs(0, coeffs))])
        });
        if self.prelim.is_identity() {
            return q;
        }
        let s = self.prelim.map(|v| Transseries::constant(trunc.clone(), Jet::constant(v.clone(), self.jet_order())));
        s.mul(&q)
    }

    /// `B` as a matrix of ℏ-series over jets.
    pub fn b_matrix(&self, trunc: &Arc<Truncation<R>>) -> Matrix<Transseries<R, Jet<R>>> {
        let n = self.b[0][0].rows();
        let zero = Transseries::zero(trunc.clone(), &Jet::zero(self.jet_order()));
        Matrix::from_fn(n, n, |i, j| {
            let coeffs: Vec<Jet<R>> = self.b.iter().map(|br| Jet::from_coeffs(br.iter().map(|m| m.get(i, j).clone()).collect())).collect();
            zero.with_terms(vec![(c_zero(), HbarPoly::from_coeffs(0, coeffs))])
        })
    }
}

fn jets_of<R: Real>(coeffs: &[Matrix<C<R>>]) -> Matrix<Jet<R>> {
    let n = coeffs[0].rows();
    Matrix::from_fn(n, n, |i, j| Jet::from_coeffs(coeffs.iter().map(|m| m.get(i, j).clone()).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakOptions {
    pub block: BlockOptions,
    /// Centre of the working disk (default: base point).
    pub center: Option<Complex64>,
    pub radius: f64,
    pub rings: usize,
    pub spokes: usize,
    /// Start point of the primitives (default: nearest turning point, else base).
    pub reference: Option<Complex64>,
}

impl Default for WeakOptions {
    fn default() -> Self {
        Self { block: BlockOptions::default(), center: None, radius: 0.0, rings: 4, spokes: 16, reference: None }
    }
}

/// A connection gauged to `Ω₀ + (exponentially small terms)` with `Ω₀` diagonal.
#[derive(Debug, Clone)]
pub struct WeakDiagonalization<R: Real> {
    pub conn: HbarConnection<R, Jet<R>>,
    pub gauge: Matrix<Transseries<R, Jet<R>>>,
    pub c_star: f64,
    /// Sheet of the spectral curve attached to each diagonal entry.
    pub sheet_of: Vec<usize>,
    pub reference: Complex64,
    pub spectral: SpectralData<R>,
}

fn region_points(center: Complex64, radius: f64, rings: usize, spokes: usize) -> Vec<Complex64> {
    let mut pts = vec![center];
    if radius > 0.0 {
        for r in 1..=rings.max(1) {
            let rho = radius * r as f64 / rings.max(1) as f64;
            for s in 0..spokes.max(1) {
                let phi = std::f64::consts::TAU * s as f64 / spokes.max(1) as f64;
                pts.push(center + Complex64::from_polar(rho, phi));
            }
        }
    }
    pts
}

/// Gauges to a diagonal ℏ-series plus exponentially small terms and
/// computes the exponential gap `c_*` over the working disk.
pub fn weak_diagonalize<R: Real>(
    conn: &HbarConnection<R, RatFunc<R>>,
    opts: &WeakOptions,
) -> Result<WeakDiagonalization<R>, ConnError> {
    let trunc = conn.trunc().clone();
    let order = (trunc.hbar_order - 1).max(0) as usize;
    let bd = block_diagonalize(conn, order, &opts.block)?;
    if !bd.b_is_diagonal(1e-12) {
        return Err(ConnError::NotWeaklySemisimple);
    }
    let k = bd.jet_order();
    let gauge = bd.gauge_matrix(&trunc);
    let gauged = conn.to_jets(k)?.gauge_transform(&gauge)?;
    // the ℏ-series part is B by construction; keep it exactly
    let b = bd.b_matrix(&trunc);
    let zero = c_zero::<R>();
    let n = conn.rank();
    let omega = Matrix::from_fn(n, n, |i, j| {
        let e = gauged.entry(i, j);
        let t_part: Vec<_> = e.terms().iter().filter(|(c, _)| !exponents_equal(c, &zero)).cloned().collect();
        let mut terms = b.get(i, j).terms().to_vec();
        terms.extend(t_part);
        e.with_terms(terms)
    });
    let conn2 = HbarConnection::new(omega, conn.base().clone())?;

    let spectral = conn.characteristic_variety();
    let sheet_of: Vec<usize> = (0..n)
        .map(|i| {
            let v = c_to_f64(bd.b[0][0].get(i, i));
            (0..spectral.sheets.len())
                .min_by(|&a, &b| {
                    let za = Complex64::new(spectral.sheets[a].value_at_base[0], spectral.sheets[a].value_at_base[1]);
                    let zb = Complex64::new(spectral.sheets[b].value_at_base[0], spectral.sheets[b].value_at_base[1]);
                    (za - v).norm().partial_cmp(&(zb - v).norm()).unwrap()
                })
                .unwrap()
        })
        .collect();
    let base = c_to_f64(conn.base());
    let reference = opts.reference.unwrap_or_else(|| {
        spectral
            .turning_points
            .iter()
            .copied()
            .min_by(|a, b| (a - base).norm().partial_cmp(&(b - base).norm()).unwrap())
            .unwrap_or(base)
    });
    let center = opts.center.unwrap_or(base);
    let pts: Vec<Complex64> = region_points(center, opts.radius, opts.rings, opts.spokes)
        .into_iter()
        .filter(|p| spectral.turning_points.iter().all(|t| (t - p).norm() > 1e-9))
        .collect();
    let nsheets = spectral.sheets.len();
    let alpha_ref: Vec<Complex64> = (0..nsheets).map(|s| spectral.primitive(s, reference)).collect();
    let alphas: Vec<Vec<Complex64>> =
        pts.iter().map(|&p| (0..nsheets).map(|s| spectral.primitive(s, p) - alpha_ref[s]).collect()).collect();
    let dir = c_to_f64(trunc.cone.direction());
    let dirv = |z: Complex64| (z * dir.conj()).re;

    let mut c_star = f64::INFINITY;
    let mut any_t = false;
    for i in 0..n {
        for j in 0..n {
            for (c, _) in conn2.entry(i, j).terms() {
                if exponents_equal(c, &zero) {
                    continue;
                }
                any_t = true;
                let cf = c_to_f64(c);
                for a in &alphas {
                    c_star = c_star.min(dirv(cf + a[sheet_of[j]] - a[sheet_of[i]]));
                }
            }
        }
    }
    if !any_t {
        let mut pairs = false;
        for i in 0..n {
            for j in 0..n {
                let (si, sj) = (sheet_of[i], sheet_of[j]);
                if si == sj {
                    continue;
                }
                pairs = true;
                let sign = {
                    let at_center = spectral.primitive(si, center) - spectral.primitive(sj, center) - alpha_ref[si] + alpha_ref[sj];
                    if dirv(at_center) >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                };
                for a in &alphas {
                    c_star = c_star.min(sign * dirv(a[si] - a[sj]));
                }
            }
        }
        if !pairs {
            c_star = trunc.cutoff.to_f64_lossy();
        }
    }
    if c_star <= 0.0 || !c_star.is_finite() {
        return Err(ConnError::NoPositiveGap(c_star));
    }
    Ok(WeakDiagonalization { conn: conn2, gauge, c_star, sheet_of, reference, spectral })
}
