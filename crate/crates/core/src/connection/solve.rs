//! Solving `ℏΦ' + MΦ = g` and `ℏu' = F(u)` grade by grade over transseries
//! with Taylor-jet coefficients at the base point.
//!
//! Linear systems need `M` at `ℏ = 0, T = 0` to split into an invertible
//! block and zero rows/columns: invertible components are solved
//! algebraically, the rest by a Taylor ODE step that takes its initial value
//! from `init`. Nonlinear systems need an invertible classical Jacobian.

use std::sync::Arc;

use super::{BlockDiagonalization, ConnError, HbarConnection, WeakDiagonalization};
use crate::jet::Jet;
use crate::novikov::{at_or_above_cutoff, exponent_key, exponents_equal};
use crate::poly::RatFunc;
use crate::ring::Matrix;
use crate::scalar::{c_int, c_is_zero, c_one, c_real, c_zero, Real, C};
use crate::transseries::{Transseries, Truncation};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Taylor precision of the coefficient jets.
    pub jet_order: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { jet_order: 16 }
    }
}

/// `ψ = e^{-α/ℏ} φ` with `α(x₀) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution<R: Real> {
    pub alpha: Jet<R>,
    pub phi: Vec<Transseries<R, Jet<R>>>,
}

impl<R: Real> LinearSolution<R> {
    /// The exponent `−α` of the prefactor.
    pub fn prefactor(&self) -> Jet<R> {
        self.alpha.neg()
    }

    /// `ℏφ' + (Ω − α')φ`; zero at truncation for a solution.
    pub fn residual(&self, omega: &Matrix<Transseries<R, Jet<R>>>) -> Result<Vec<Transseries<R, Jet<R>>>, ConnError> {
        let trunc = omega.get(0, 0).trunc().clone();
        let dalpha = Transseries::constant(trunc, self.alpha.derivative());
        let mut out = Vec::with_capacity(self.phi.len());
        for i in 0..self.phi.len() {
            let mut r = self.phi[i].derivative().mul_hbar(1)?.try_sub(&dalpha.try_mul(&self.phi[i])?)?;
            for j in 0..self.phi.len() {
                r = r.try_add(&omega.get(i, j).try_mul(&self.phi[j])?)?;
            }
            out.push(r);
        }
        Ok(out)
    }
}

/// Taylor solution of `Y' = A Y + r`, `Y(0) = y0`.
fn jet_system_ode<R: Real>(a: &Matrix<Jet<R>>, r: &[Jet<R>], y0: &[C<R>]) -> Vec<Jet<R>> {
    let m = y0.len();
    let prec = a.entries().map(|j| j.prec()).chain(r.iter().map(|j| j.prec())).min().unwrap_or(0);
    let mut y: Vec<Vec<C<R>>> = vec![y0.to_vec()];
    for k in 0..prec {
        let inv = c_real(R::one() / R::from_usize(k + 1).unwrap());
        let next = (0..m)
            .map(|i| {
                let mut s = r[i].coeff(k);
                for j in 0..m {
                    for (l, yl) in y.iter().enumerate() {
                        let aij = a.get(i, j).coeff(k - l);
                        if !c_is_zero(&aij) && !c_is_zero(&yl[j]) {
                            s = s + aij * yl[j].clone();
                        }
                    }
                }
                s * inv.clone()
            })
            .collect();
        y.push(next);
    }
    (0..m).map(|i| Jet::from_coeffs(y.iter().map(|v| v[i].clone()).collect())).collect()
}

fn jet_matvec<R: Real>(m: &Matrix<Jet<R>>, v: &[Jet<R>]) -> Vec<Jet<R>> {
    (0..m.rows())
        .map(|i| {
            (0..m.cols()).fold(None::<Jet<R>>, |acc, j| {
                let p = m.get(i, j).mul(&v[j]);
                Some(match acc {
                    Some(a) => a.add(&p),
                    None => p,
                })
            })
            .unwrap()
        })
        .collect()
}

struct TermGroup<R: Real> {
    exp: C<R>,
    deg: i32,
    mat: Matrix<Jet<R>>,
}

fn group_terms<R: Real>(m: &Matrix<Transseries<R, Jet<R>>>, prec: usize) -> Result<Vec<TermGroup<R>>, ConnError> {
    let n = m.rows();
    let trunc = m.get(0, 0).trunc().clone();
    let zero_exp = c_zero::<R>();
    let mut groups: Vec<TermGroup<R>> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for (c, d, v) in m.get(i, j).triples() {
                if d < 0 {
                    return Err(ConnError::NegativeHbarPower);
                }
                if !exponents_equal(&c, &zero_exp) && trunc.cone.directional_value(&c) <= R::zero() {
                    return Err(ConnError::NotReducedForm("exponent on or outside the cone boundary".into()));
                }
                let pos = groups.iter().position(|g| g.deg == d && exponents_equal(&g.exp, &c));
                let g = match pos {
                    Some(p) => &mut groups[p],
                    None => {
                        groups.push(TermGroup { exp: c.clone(), deg: d, mat: Matrix::zeros_like(n, n, &Jet::zero(prec)) });
                        groups.last_mut().unwrap()
                    }
                };
                g.mat.set(i, j, v);
            }
        }
    }
    Ok(groups)
}

/// Exponents reachable from `seeds` by adding `steps`, below the cutoff,
/// sorted by directional value.
fn exponent_closure<R: Real>(seeds: Vec<C<R>>, steps: &[C<R>], trunc: &Truncation<R>, self_closed: bool) -> Vec<C<R>> {
    let mut out: Vec<C<R>> = Vec::new();
    for s in seeds {
        if !out.iter().any(|e| exponents_equal(e, &s)) {
            out.push(s);
        }
    }
    let mut i = 0;
    while i < out.len() {
        let mut adds: Vec<C<R>> = steps.to_vec();
        if self_closed {
            adds.extend(out[..=i].iter().cloned());
        }
        for a in adds {
            let c = out[i].clone() + a;
            if at_or_above_cutoff(&trunc.cone.directional_value(&c), &trunc.cutoff) {
                continue;
            }
            if !out.iter().any(|e| exponents_equal(e, &c)) {
                out.push(c);
            }
        }
        i += 1;
    }
    out.sort_by(|a, b| {
        let (ka, kb) = (exponent_key(&trunc.cone, a), exponent_key(&trunc.cone, b));
        ka.partial_cmp(&kb).unwrap()
    });
    out
}

/// Solves `ℏΦ' + MΦ = g` at truncation. `init` supplies the values at the
/// base point of the components where `M|_{ℏ=0,T=0}` vanishes; the other
/// components are determined algebraically.
pub fn solve_reduced<R: Real>(
    m: &Matrix<Transseries<R, Jet<R>>>,
    g: Option<&[Transseries<R, Jet<R>>]>,
    init: &[Transseries<R, C<R>>],
) -> Result<Vec<Transseries<R, Jet<R>>>, ConnError> {
    let n = m.rows();
    if init.len() != n || g.is_some_and(|g| g.len() != n) {
        return Err(ConnError::Dimension("initial data length".into()));
    }
    let trunc = m.get(0, 0).trunc().clone();
    let prec = m
        .entries()
        .flat_map(|e| e.triples().into_iter().map(|(_, _, j)| j.prec()))
        .chain(g.into_iter().flatten().flat_map(|e| e.triples().into_iter().map(|(_, _, j)| j.prec())))
        .chain(std::iter::once(m.get(0, 0).proto().prec()))
        .max()
        .unwrap_or(0);
    let zj = Jet::<R>::zero(prec);
    let zero_exp = c_zero::<R>();
    let groups = group_terms(m, prec)?;
    let m00 = groups
        .iter()
        .find(|t| t.deg == 0 && exponents_equal(&t.exp, &zero_exp))
        .map_or_else(|| Matrix::zeros_like(n, n, &zj), |t| t.mat.clone());
    let m01 = groups
        .iter()
        .find(|t| t.deg == 1 && exponents_equal(&t.exp, &zero_exp))
        .map_or_else(|| Matrix::zeros_like(n, n, &zj), |t| t.mat.clone());
    let res: Vec<usize> = (0..n).filter(|&i| (0..n).all(|j| m00.get(i, j).is_zero() && m00.get(j, i).is_zero())).collect();
    let non: Vec<usize> = (0..n).filter(|i| !res.contains(i)).collect();
    let mnn_inv = if non.is_empty() {
        None
    } else {
        Some(
            m00.submatrix(&non, &non)
                .inverse()
                .ok_or_else(|| ConnError::NotReducedForm("classical part is singular on its support".into()))?,
        )
    };
    let a_rr = m01.submatrix(&res, &res).map(|j| j.neg());

    let mut seeds: Vec<C<R>> = init.iter().flat_map(|t| t.terms().iter().map(|(c, _)| c.clone())).collect();
    if let Some(g) = g {
        seeds.extend(g.iter().flat_map(|t| t.terms().iter().map(|(c, _)| c.clone())));
    }
    let steps: Vec<C<R>> = groups.iter().filter(|t| !exponents_equal(&t.exp, &zero_exp)).map(|t| t.exp.clone()).collect();
    let exps = exponent_closure(seeds, &steps, &trunc, false);
    let hi = trunc.hbar_order;

    // lowest stored degree per exponent
    let find = |c: &C<R>| exps.iter().position(|e| exponents_equal(e, c));
    let mut lo: Vec<Option<i32>> = vec![None; exps.len()];
    // (group index, source exponent index) pairs feeding each exponent
    let mut feeds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); exps.len()];
    for (ci, c) in exps.iter().enumerate() {
        let mut cand: Vec<i32> = Vec::new();
        for t in init.iter() {
            if let Some(d) = t.exponent_part(c).low_degree() {
                cand.push(d);
            }
        }
        if let Some(g) = g {
            for t in g {
                if let Some(d) = t.exponent_part(c).low_degree() {
                    cand.push(d);
                }
            }
        }
        for (gi, t) in groups.iter().enumerate() {
            if t.deg == 0 && exponents_equal(&t.exp, &zero_exp) {
                continue;
            }
            let src = c.clone() - t.exp.clone();
            if let Some(cj) = find(&src) {
                if cj == ci {
                    feeds[ci].push((gi, cj));
                } else if let Some(l) = lo[cj] {
                    feeds[ci].push((gi, cj));
                    cand.push(l + t.deg);
                }
            }
        }
        lo[ci] = cand.into_iter().min().map(|d| d - 1);
    }

    let mut vals: Vec<Vec<Vec<Jet<R>>>> =
        lo.iter().map(|l| l.map_or_else(Vec::new, |l| vec![vec![zj.clone(); n]; (hi - l).max(0) as usize])).collect();

    let slot = |vals: &Vec<Vec<Vec<Jet<R>>>>, ci: usize, d: i32| -> Option<Vec<Jet<R>>> {
        let l = lo[ci]?;
        if d < l || d >= hi {
            return None;
        }
        Some(vals[ci][(d - l) as usize].clone())
    };
    let rest = |vals: &Vec<Vec<Vec<Jet<R>>>>, ci: usize, d: i32, rows: &[usize]| -> Vec<Jet<R>> {
        let mut acc = vec![zj.clone(); rows.len()];
        for &(gi, cj) in &feeds[ci] {
            let t = &groups[gi];
            let Some(v) = slot(vals, cj, d - t.deg) else { continue };
            for (k, &i) in rows.iter().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    let mij = t.mat.get(i, j);
                    if !mij.is_zero() && !vj.is_zero() {
                        acc[k] = acc[k].add(&mij.mul(vj));
                    }
                }
            }
        }
        acc
    };
    let g_at = |i: usize, c: &C<R>, d: i32| -> Jet<R> {
        g.and_then(|g| g[i].exponent_part(c).coeff(d).cloned()).unwrap_or_else(|| zj.clone())
    };

    for (ci, c) in exps.iter().enumerate() {
        let Some(l) = lo[ci] else { continue };
        for d in l..=hi {
            if d - 1 >= l && !res.is_empty() {
                let r = rest(&vals, ci, d, &res);
                let rhs: Vec<Jet<R>> = res.iter().zip(&r).map(|(&i, ri)| g_at(i, c, d).sub(ri)).collect();
                let y0: Vec<C<R>> = res.iter().map(|&i| init[i].coefficient(c, d - 1)).collect();
                let y = jet_system_ode(&a_rr, &rhs, &y0);
                for (k, &i) in res.iter().enumerate() {
                    vals[ci][(d - 1 - l) as usize][i] = y[k].clone();
                }
            }
            if d < hi {
                if let Some(inv) = &mnn_inv {
                    let r = rest(&vals, ci, d, &non);
                    let prev = slot(&vals, ci, d - 1);
                    let rhs: Vec<Jet<R>> = non
                        .iter()
                        .zip(&r)
                        .map(|(&i, ri)| {
                            let dv = prev.as_ref().map_or_else(|| zj.clone(), |p| p[i].derivative());
                            g_at(i, c, d).sub(&dv).sub(ri)
                        })
                        .collect();
                    let sol = jet_matvec(inv, &rhs);
                    for (k, &i) in non.iter().enumerate() {
                        vals[ci][(d - l) as usize][i] = sol[k].clone();
                    }
                }
            }
        }
    }

    (0..n)
        .map(|i| {
            let mut triples = Vec::new();
            for (ci, c) in exps.iter().enumerate() {
                let Some(l) = lo[ci] else { continue };
                for (k, v) in vals[ci].iter().enumerate() {
                    if !v[i].is_zero() {
                        triples.push((c.clone(), l + k as i32, v[i].clone()));
                    }
                }
            }
            Ok(Transseries::from_terms(trunc.clone(), &zj, triples)?)
        })
        .collect()
}

fn unit_vector_init<R: Real>(trunc: &Arc<Truncation<R>>, n: usize, i: usize) -> Vec<Transseries<R, C<R>>> {
    (0..n)
        .map(|k| Transseries::constant(trunc.clone(), if k == i { c_one() } else { c_zero() }))
        .collect()
}

/// Solves a rank-1 or diagonal connection. Component `i` is returned as
/// `e^{-α_i/ℏ} φ_i` with `α_i' = Ω_ii|_{ℏ=0,T=0}` and `α_i(x₀) = 0`.
pub fn solve_linear<R: Real>(
    conn: &HbarConnection<R, RatFunc<R>>,
    init: &[Transseries<R, C<R>>],
    opts: &SolveOptions,
) -> Result<Vec<LinearSolution<R>>, ConnError> {
    let n = conn.rank();
    if init.len() != n {
        return Err(ConnError::Dimension("one initial value per component".into()));
    }
    if !conn.is_diagonal() {
        return Err(ConnError::NotReducedForm("solve_linear needs a rank-1 or diagonal connection".into()));
    }
    let cj = conn.to_jets(opts.jet_order)?;
    let trunc = conn.trunc().clone();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let w = cj.entry(i, i);
        let lam = w.coefficient(&c_zero(), 0);
        let m = if lam.is_zero() { w.clone() } else { w.try_sub(&Transseries::constant(trunc.clone(), lam.clone()))? };
        let phi = solve_reduced(&Matrix::from_rows(vec![vec![m]]), None, &init[i..=i])?;
        let zero = Transseries::zero(trunc.clone(), &Jet::zero(opts.jet_order));
        let phi_vec = (0..n).map(|k| if k == i { phi[0].clone() } else { zero.clone() }).collect();
        out.push(LinearSolution { alpha: lam.integral(c_zero()), phi: phi_vec });
    }
    Ok(out)
}

/// Solution basis of a weakly diagonalized connection: column `i` solves
/// `ℏφ' + (Ω − λ_i)φ = 0` with `φ(x₀) = e_i`, a Neumann-type series in the
/// exponentially small off-diagonal terms.
pub fn solution_basis<R: Real>(w: &WeakDiagonalization<R>) -> Result<Vec<LinearSolution<R>>, ConnError> {
    let conn = &w.conn;
    let n = conn.rank();
    let trunc = conn.trunc().clone();
    let zero = c_zero::<R>();
    (0..n)
        .map(|i| {
            let lam = conn.entry(i, i).coefficient(&zero, 0);
            let lam_ts = Transseries::constant(trunc.clone(), lam.clone());
            let mut m = conn.omega().clone();
            for k in 0..n {
                let v = m.get(k, k).try_sub(&lam_ts)?;
                m.set(k, k, v);
            }
            let phi = solve_reduced(&m, None, &unit_vector_init(&trunc, n, i))?;
            Ok(LinearSolution { alpha: lam.integral(c_zero()), phi })
        })
        .collect()
}

/// `F(u) = Σ coeff · u^powers`, one polynomial per equation of `ℏu' = F(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField<R: Real> {
    dim: usize,
    trunc: Arc<Truncation<R>>,
    base: C<R>,
    eqs: Vec<Vec<(Vec<u32>, Transseries<R, RatFunc<R>>)>>,
}

impl<R: Real> PolyField<R> {
    pub fn new(dim: usize, trunc: Arc<Truncation<R>>, base: C<R>) -> Self {
        Self { dim, trunc, base, eqs: vec![Vec::new(); dim] }
    }

    pub fn add_term(&mut self, eq: usize, powers: Vec<u32>, coeff: Transseries<R, RatFunc<R>>) {
        assert_eq!(powers.len(), self.dim);
        self.eqs[eq].push((powers, coeff));
    }

    /// The linear field `F(u) = g − M u` of `ℏu' + Mu = g`.
    pub fn linear(conn: &HbarConnection<R, RatFunc<R>>, g: Option<&[Transseries<R, RatFunc<R>>]>) -> Self {
        let n = conn.rank();
        let mut f = Self::new(n, conn.trunc().clone(), conn.base().clone());
        for i in 0..n {
            if let Some(g) = g {
                if !g[i].is_zero() {
                    f.add_term(i, vec![0; n], g[i].clone());
                }
            }
            for j in 0..n {
                let e = conn.entry(i, j);
                if !e.is_zero() {
                    let mut p = vec![0; n];
                    p[j] = 1;
                    f.add_term(i, p, e.neg());
                }
            }
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_linear(&self) -> bool {
        self.eqs.iter().flatten().all(|(p, _)| p.iter().sum::<u32>() <= 1)
    }

    fn jets(&self, prec: usize) -> Result<Vec<Vec<(Vec<u32>, Transseries<R, Jet<R>>)>>, ConnError> {
        self.eqs
            .iter()
            .map(|eq| {
                eq.iter()
                    .map(|(p, c)| Ok((p.clone(), c.to_jets(&self.base, prec).map_err(|_| ConnError::PoleAtBasePoint)?)))
                    .collect()
            })
            .collect()
    }

    fn eval(
        jets: &[Vec<(Vec<u32>, Transseries<R, Jet<R>>)>],
        u: &[Transseries<R, Jet<R>>],
    ) -> Result<Vec<Transseries<R, Jet<R>>>, ConnError> {
        jets.iter()
            .map(|eq| {
                let mut acc = u[0].zero_elem();
                for (p, c) in eq {
                    let mut term = c.clone();
                    for (j, &k) in p.iter().enumerate() {
                        for _ in 0..k {
                            term = term.try_mul(&u[j])?;
                        }
                    }
                    acc = acc.try_add(&term)?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// `ℏu' − F(u)` at truncation.
    pub fn residual(&self, u: &[Transseries<R, Jet<R>>], opts: &SolveOptions) -> Result<Vec<Transseries<R, Jet<R>>>, ConnError> {
        let f = Self::eval(&self.jets(opts.jet_order)?, u)?;
        u.iter().zip(f).map(|(ui, fi)| Ok(ui.derivative().mul_hbar(1)?.try_sub(&fi)?)).collect()
    }
}

/// Grade-by-grade solution of `ℏu' = F(u)` seeded by a classical solution.
///
/// Linear fields go through [`solve_reduced`] with the seed's values at the
/// base point as initial data. Otherwise the classical Jacobian `J₀` must be
/// invertible and each slot is `u_{c,d} = J₀⁻¹(u'_{c,d-1} − F̃_{c,d})`, where
/// `F̃` is `F` evaluated with the slot itself still zero.
pub fn graded_picard_solve<R: Real>(
    f: &PolyField<R>,
    seed: &[Transseries<R, Jet<R>>],
    opts: &SolveOptions,
) -> Result<Vec<Transseries<R, Jet<R>>>, ConnError> {
    let n = f.dim;
    if seed.len() != n {
        return Err(ConnError::Dimension("one seed per component".into()));
    }
    let k = opts.jet_order;
    let trunc = f.trunc.clone();
    let jets = f.jets(k)?;
    let zj = Jet::<R>::zero(k);
    let zero_exp = c_zero::<R>();

    if f.is_linear() {
        let zero_ts = Transseries::zero(trunc.clone(), &zj);
        let mut m = Matrix::zeros_like(n, n, &zero_ts);
        let mut g = vec![zero_ts.clone(); n];
        for (i, eq) in jets.iter().enumerate() {
            for (p, c) in eq {
                match p.iter().position(|&e| e == 1) {
                    Some(j) => m.set(i, j, m.get(i, j).try_add(&c.neg())?),
                    None => g[i] = g[i].try_add(c)?,
                }
            }
        }
        let init: Vec<Transseries<R, C<R>>> = seed.iter().map(|s| s.at_base()).collect();
        let g_opt = if g.iter().all(|t| t.is_zero()) { None } else { Some(g.as_slice()) };
        return solve_reduced(&m, g_opt, &init);
    }

    let u00: Vec<Jet<R>> = seed.iter().map(|s| s.coefficient(&zero_exp, 0)).collect();
    let classical: Vec<Jet<R>> = jets
        .iter()
        .map(|eq| {
            eq.iter().fold(zj.clone(), |acc, (p, c)| {
                let mut t = c.coefficient(&zero_exp, 0);
                for (j, &e) in p.iter().enumerate() {
                    for _ in 0..e {
                        t = t.mul(&u00[j]);
                    }
                }
                acc.add(&t)
            })
        })
        .collect();
    if classical.iter().any(|j| !j.is_zero()) {
        return Err(ConnError::NoFormalSeed);
    }
    let j0 = Matrix::from_fn(n, n, |i, j| {
        jets[i].iter().fold(zj.clone(), |acc, (p, c)| {
            if p[j] == 0 {
                return acc;
            }
            let mut t = c.coefficient(&zero_exp, 0).scale(&c_int(p[j] as i64));
            for (l, &e) in p.iter().enumerate() {
                let e = if l == j { e - 1 } else { e };
                for _ in 0..e {
                    t = t.mul(&u00[l]);
                }
            }
            acc.add(&t)
        })
    });
    let j0_inv = j0.inverse().ok_or(ConnError::DegenerateJacobian)?;

    let mut coef_exps: Vec<C<R>> = Vec::new();
    for eq in &jets {
        for (_, c) in eq {
            for (e, _) in c.terms() {
                if exponents_equal(e, &zero_exp) {
                    continue;
                }
                if trunc.cone.directional_value(e) <= R::zero() {
                    return Err(ConnError::NotReducedForm("exponent on or outside the cone boundary".into()));
                }
                if !coef_exps.iter().any(|x| exponents_equal(x, e)) {
                    coef_exps.push(e.clone());
                }
            }
        }
    }
    let exps = exponent_closure(vec![zero_exp.clone()], &coef_exps, &trunc, true);
    let mut u: Vec<Transseries<R, Jet<R>>> =
        u00.iter().map(|j| Transseries::constant(trunc.clone(), j.clone())).collect();
    for c in &exps {
        let start = if exponents_equal(c, &zero_exp) { 1 } else { trunc.min_degree };
        for d in start..trunc.hbar_order {
            let fu = PolyField::eval(&jets, &u)?;
            let rhs: Vec<Jet<R>> = (0..n)
                .map(|i| {
                    let prev = u[i].exponent_part(c).coeff(d - 1).map_or_else(|| zj.derivative(), |p| p.derivative());
                    prev.sub(&fu[i].exponent_part(c).coeff(d).cloned().unwrap_or_else(|| zj.clone()))
                })
                .collect();
            let v = jet_matvec(&j0_inv, &rhs);
            for i in 0..n {
                if !v[i].is_zero() {
                    let add = Transseries::monomial(trunc.clone(), v[i].clone(), c.clone(), d)?;
                    u[i] = u[i].try_add(&add)?;
                }
            }
        }
    }
    Ok(u)
}

impl<R: Real> BlockDiagonalization<R> {
    /// Connection form of `B` over jets at the base point.
    pub fn block_connection(&self, trunc: &Arc<Truncation<R>>) -> Result<HbarConnection<R, Jet<R>>, ConnError> {
        HbarConnection::new(self.b_matrix(trunc), self.base.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_ratfunc;
    use crate::scalar::c_int;
    use num_rational::BigRational;

    type Q = BigRational;

    fn tr(cutoff: i64, n: i32) -> Arc<Truncation<Q>> {
        Arc::new(Truncation::lambda0(Q::from_integer(cutoff.into()), n))
    }

    fn rank1(s: &str, t: &Arc<Truncation<Q>>) -> HbarConnection<Q> {
        HbarConnection::from_strings(&[vec![s.to_string()]], t.clone(), c_zero()).unwrap()
    }

    fn one(t: &Arc<Truncation<Q>>) -> Vec<Transseries<Q, C<Q>>> {
        vec![Transseries::constant(t.clone(), c_one())]
    }

    fn all_zero(r: &[Transseries<Q, Jet<Q>>]) -> bool {
        r.iter().all(|t| t.is_zero())
    }

    #[test]
    fn exponential_module_normal_form() {
        let t = tr(3, 4);
        let c = HbarConnection::exponential_module(&parse_ratfunc("x^2/2").unwrap(), t.clone(), c_zero()).unwrap();
        let s = &solve_linear(&c, &one(&t), &SolveOptions::default()).unwrap()[0];
        assert_eq!(s.prefactor().truncate(4).coeffs(), &[c_zero(), c_zero(), C::new(Q::new((-1).into(), 2.into()), Q::from_integer(0.into())), c_zero()]);
        assert_eq!(s.phi[0].at_base(), Transseries::constant(t.clone(), c_one()));
        assert_eq!(s.phi[0].triples().len(), 1);
        assert!(all_zero(&s.residual(c.to_jets(16).unwrap().omega()).unwrap()));
    }

    #[test]
    fn hbar_potential_gives_classical_exponential() {
        let t = tr(3, 4);
        let c = rank1("h", &t);
        let s = &solve_linear(&c, &one(&t), &SolveOptions::default()).unwrap()[0];
        let expect = Jet::<Q>::t(8).neg().exp().unwrap();
        assert_eq!(s.phi[0].coefficient(&c_zero(), 0).truncate(8), expect);
        assert!(all_zero(&s.residual(c.to_jets(16).unwrap().omega()).unwrap()));
    }

    #[test]
    fn exponential_coefficient_term_recursion() {
        let t = tr(3, 2);
        let c = rank1("T", &t);
        let s = &solve_linear(&c, &one(&t), &SolveOptions::default()).unwrap()[0];
        // exp(−x e^{−1/ℏ}/ℏ): coefficient of e^{−n/ℏ} ℏ^{−n} is (−x)^n/n!
        for n in 0..3i64 {
            let j = s.phi[0].coefficient(&c_int(n), -(n as i32));
            let sign = if n % 2 == 0 { 1 } else { -1 };
            let fact: i64 = (1..=n).product();
            assert_eq!(j.coeff(n as usize), C::new(Q::new(sign.into(), fact.into()), Q::from_integer(0.into())));
        }
        assert!(all_zero(&s.residual(c.to_jets(16).unwrap().omega()).unwrap()));
    }

    #[test]
    fn picard_linear_matches_solve_linear() {
        let t = tr(3, 3);
        let c = rank1("h*x + T*(1 + x)", &t);
        let init = vec![Transseries::parse_scalar("1 + 2*h + T", t.clone()).unwrap()];
        let a = solve_linear(&c, &init, &SolveOptions::default()).unwrap();
        let f = PolyField::linear(&c, None);
        let seed: Vec<_> = init.iter().map(|s| s.to_jets(16)).collect();
        let b = graded_picard_solve(&f, &seed, &SolveOptions::default()).unwrap();
        assert_eq!(a[0].phi, b);
    }

    #[test]
    fn picard_inhomogeneous() {
        // ℏu' = u − e^{−1/ℏ}
        let t = tr(3, 4);
        let mut f = PolyField::new(1, t.clone(), c_zero());
        f.add_term(0, vec![1], Transseries::parse("1", t.clone()).unwrap());
        f.add_term(0, vec![0], Transseries::parse("-T", t.clone()).unwrap());
        let seed = vec![Transseries::zero(t.clone(), &Jet::zero(16))];
        let u = graded_picard_solve(&f, &seed, &SolveOptions::default()).unwrap();
        assert_eq!(u[0].at_base(), Transseries::parse_scalar("T", t.clone()).unwrap());
        assert!(all_zero(&f.residual(&u, &SolveOptions::default()).unwrap()));
    }

    #[test]
    fn picard_riccati_constant_potential() {
        let t = tr(3, 4);
        let mut f = PolyField::new(1, t.clone(), c_zero());
        f.add_term(0, vec![0], Transseries::parse("1", t.clone()).unwrap());
        f.add_term(0, vec![2], Transseries::parse("-1", t.clone()).unwrap());
        let seed = vec![Transseries::constant(t.clone(), Jet::constant(c_one(), 16))];
        let u = graded_picard_solve(&f, &seed, &SolveOptions::default()).unwrap();
        assert_eq!(u[0].at_base(), Transseries::constant(t.clone(), c_one()));
        let bad = vec![Transseries::constant(t.clone(), Jet::constant(c_int(2), 16))];
        assert_eq!(graded_picard_solve(&f, &bad, &SolveOptions::default()), Err(ConnError::NoFormalSeed));
    }

    #[test]
    fn picard_riccati_linear_potential() {
        // ℏs' = x − s² at x₀ = 4 with s₀ = √x; s₁ = −1/(4x)
        let t = tr(3, 3);
        let base = c_int::<Q>(4);
        let mut f = PolyField::new(1, t.clone(), base.clone());
        f.add_term(0, vec![0], Transseries::parse("x", t.clone()).unwrap());
        f.add_term(0, vec![2], Transseries::parse("-1", t.clone()).unwrap());
        // Taylor jet of √(4 + s)
        let mut c = vec![c_int::<Q>(2)];
        let mut binom = Q::from_integer(1.into());
        for k in 1..16i64 {
            binom = binom * (Q::new(1.into(), 2.into()) - Q::from_integer((k - 1).into())) / Q::from_integer(k.into());
            let pow4 = Q::new(1.into(), 4.into()).pow(k as i32);
            c.push(C::new(binom.clone() * Q::from_integer(2.into()) * pow4, Q::from_integer(0.into())));
        }
        let seed = vec![Transseries::constant(t.clone(), Jet::from_coeffs(c))];
        let u = graded_picard_solve(&f, &seed, &SolveOptions::default()).unwrap();
        let s1 = u[0].coefficient(&c_zero(), 1).value();
        assert_eq!(s1, C::new(Q::new((-1).into(), 16.into()), Q::from_integer(0.into())));
        assert!(all_zero(&f.residual(&u, &SolveOptions::default()).unwrap()));
    }

    #[test]
    fn not_reduced_form() {
        let t = tr(3, 3);
        let c = HbarConnection::from_strings(
            &[vec!["1".into(), "x".into()], vec!["0".into(), "2".into()]],
            t.clone(),
            c_zero(),
        )
        .unwrap();
        let init = vec![Transseries::constant(t.clone(), c_one()); 2];
        assert!(matches!(solve_linear(&c, &init, &SolveOptions::default()), Err(ConnError::NotReducedForm(_))));
    }
}
