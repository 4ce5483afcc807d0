//! Intertwiners between two SQs over the same graph.
//!
//! A family `M_R : E_R → F_R` is an intertwiner when `M_{R′} G^E = G^F M_R`
//! for every gluing `R → R′`. Entries are truncated Novikov series over a
//! finite candidate set of exponents, so the constraints are a linear system
//! over ℂ whose null space spans the Hom module at the cutoff.

use super::{SheafQuantizationData, SqError, VAL_TOL};
use crate::novikov::{at_or_above_cutoff, exponents_equal, NovikovElement};
use crate::ring::{null_space, Matrix};
use crate::scalar::{c_is_zero, c_one, c_to_f64, c_zero, Real, C};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomOptions {
    /// Bound on the exponent candidates per region.
    pub max_candidates: usize,
    /// Pivot threshold of the null-space solve in floating mode.
    pub tol: f64,
}

impl Default for HomOptions {
    fn default() -> Self {
        Self { max_candidates: 4096, tol: VAL_TOL }
    }
}

/// One map per region, `rank F_R × rank E_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomFamily<R: Real> {
    pub maps: Vec<Matrix<NovikovElement<R>>>,
}

impl<R: Real> HomFamily<R> {
    pub fn identity(sq: &SheafQuantizationData<R>) -> Result<Self, SqError> {
        let proto = sq.proto()?;
        Ok(Self { maps: sq.regions.iter().map(|r| Matrix::identity_like(r.rank(), &proto)).collect() })
    }

    /// `self ∘ other`, region by region.
    pub fn compose(&self, other: &Self) -> Self {
        Self { maps: self.maps.iter().zip(&other.maps).map(|(a, b)| a.mul(b)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.maps.iter().all(|m| m.is_zero())
    }

    /// Least valuation over all entries.
    pub fn valuation(&self) -> f64 {
        self.maps.iter().flat_map(|m| m.entries()).map(|e| e.valuation().to_f64()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct HomModule<R: Real> {
    /// ℂ-basis of the solutions at the cutoff.
    pub generators: Vec<HomFamily<R>>,
    vars: Vec<(usize, usize, usize, C<R>)>,
    basis: Vec<Vec<C<R>>>,
    tol: f64,
}

impl<R: Real> HomModule<R> {
    pub fn dimension(&self) -> usize {
        self.generators.len()
    }

    pub fn candidates(&self) -> usize {
        self.vars.len()
    }

    /// Coefficients of a family on the candidate exponents; `None` if some
    /// term falls outside them.
    pub fn coordinates(&self, f: &HomFamily<R>) -> Option<Vec<C<R>>> {
        let mut v = vec![c_zero::<R>(); self.vars.len()];
        for (r, m) in f.maps.iter().enumerate() {
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    for (c, a) in m.get(i, j).terms() {
                        let k = self.vars.iter().position(|(vr, vi, vj, vc)| {
                            *vr == r && *vi == i && *vj == j && exponents_equal(vc, c)
                        })?;
                        v[k] = v[k].clone() + a.clone();
                    }
                }
            }
        }
        Some(v)
    }

    /// Membership in the ℂ-span of the generators.
    pub fn contains(&self, f: &HomFamily<R>) -> bool {
        let Some(v) = self.coordinates(f) else {
            return false;
        };
        if v.iter().all(c_is_zero) {
            return true;
        }
        let k = self.basis.len();
        let a = Matrix::from_fn(self.vars.len(), k + 1, |row, col| {
            if col < k {
                self.basis[col][row].clone()
            } else {
                -v[row].clone()
            }
        });
        null_space(&a, self.tol).iter().any(|n| {
            if R::EXACT {
                !c_is_zero(&n[k])
            } else {
                c_to_f64(&n[k]).norm() > self.tol
            }
        })
    }
}

fn push_unique<R: Real>(set: &mut Vec<C<R>>, c: C<R>) -> bool {
    if set.iter().any(|x| exponents_equal(x, &c)) {
        false
    } else {
        set.push(c);
        true
    }
}

/// Generating set of intertwiners `E → F` at the cutoff. The `(i, j)` entry
/// of `M_R` (the map `E_j → F_i`) is restricted to valuation at least
/// `max(0, Re e^{−iθ}(α^E_j − β^F_i))`.
pub fn hom_module<R: Real>(
    e: &SheafQuantizationData<R>,
    f: &SheafQuantizationData<R>,
    opts: &HomOptions,
) -> Result<HomModule<R>, SqError> {
    if !e.same_graph(f) {
        return Err(SqError::GraphMismatch);
    }
    let cone = &e.cone;
    let cutoff = &e.cutoff;
    let value = |c: &C<R>| cone.directional_value(c);
    let below_cutoff = |c: &C<R>| !at_or_above_cutoff(&value(c), cutoff);
    let nonneg = |x: &R| if R::EXACT { *x >= R::zero() } else { x.to_f64_lossy() >= -opts.tol };
    let positive = |x: &R| if R::EXACT { *x > R::zero() } else { x.to_f64_lossy() > opts.tol };

    let offsets = |r: usize| -> Vec<C<R>> {
        let (a, b) = (e.regions[r].index_alphas(), f.regions[r].index_alphas());
        let mut out = vec![c_zero::<R>()];
        for x in &a {
            for y in &b {
                push_unique(&mut out, x.clone() - y.clone());
            }
        }
        for s in [&a, &b] {
            for x in s.iter() {
                for y in s.iter() {
                    push_unique(&mut out, x.clone() - y.clone());
                }
            }
        }
        out
    };

    let mut gens: Vec<C<R>> = Vec::new();
    for sq in [e, f] {
        for g in &sq.gluings {
            for x in g.matrix.entries() {
                for (c, _) in x.terms() {
                    if positive(&value(c)) {
                        push_unique(&mut gens, c.clone());
                    }
                }
            }
        }
    }
    for r in 0..e.regions.len() {
        for c in offsets(r) {
            if positive(&value(&c)) && below_cutoff(&c) {
                push_unique(&mut gens, c);
            }
        }
    }

    let mut vars: Vec<(usize, usize, usize, C<R>)> = Vec::new();
    for r in 0..e.regions.len() {
        let mut set: Vec<C<R>> = Vec::new();
        for c in offsets(r) {
            if nonneg(&value(&c)) && below_cutoff(&c) && cone.contains(&c) {
                push_unique(&mut set, c);
            }
        }
        let mut k = 0;
        while k < set.len() {
            for g in &gens {
                let c = set[k].clone() + g.clone();
                if below_cutoff(&c) && cone.contains(&c) {
                    push_unique(&mut set, c);
                }
            }
            if set.len() > opts.max_candidates {
                return Err(SqError::Invalid(format!("more than {} exponent candidates", opts.max_candidates)));
            }
            k += 1;
        }
        let (a, b) = (e.regions[r].index_alphas(), f.regions[r].index_alphas());
        for i in 0..b.len() {
            for j in 0..a.len() {
                let d = value(&(a[j].clone() - b[i].clone()));
                let bound = if d > R::zero() { d } else { R::zero() };
                for c in &set {
                    if nonneg(&(value(c) - bound.clone())) {
                        vars.push((r, i, j, c.clone()));
                    }
                }
            }
        }
    }

    // M_{R′} G^E − G^F M_R, one row per (gluing, entry, exponent)
    let mut rows: Vec<((usize, usize, usize), C<R>, Vec<(usize, C<R>)>)> = Vec::new();
    let mut add = |key: (usize, usize, usize), c: C<R>, var: usize, coef: C<R>| {
        if !below_cutoff(&c) {
            return;
        }
        let row = match rows.iter().position(|(k, x, _)| *k == key && exponents_equal(x, &c)) {
            Some(p) => p,
            None => {
                rows.push((key, c, Vec::new()));
                rows.len() - 1
            }
        };
        rows[row].2.push((var, coef));
    };
    for (gi, (ge, gf)) in e.gluings.iter().zip(&f.gluings).enumerate() {
        for (vi, (r, i, j, c)) in vars.iter().enumerate() {
            if *r == ge.to {
                // M_{R′}[i][j] G^E[j][b]
                for b in 0..ge.matrix.cols() {
                    for (d, g) in ge.matrix.get(*j, b).terms() {
                        add((gi, *i, b), c.clone() + d.clone(), vi, g.clone());
                    }
                }
            }
            if *r == ge.from {
                // G^F[a][i] M_R[i][j]
                for a in 0..gf.matrix.rows() {
                    for (d, g) in gf.matrix.get(a, *i).terms() {
                        add((gi, a, *j), c.clone() + d.clone(), vi, -g.clone());
                    }
                }
            }
        }
    }
    let mut system = Matrix::zeros_like(rows.len().max(1), vars.len(), &c_zero::<R>());
    for (row, (_, _, entries)) in rows.iter().enumerate() {
        for (col, x) in entries {
            let v = system.get(row, *col).clone() + x.clone();
            system.set(row, *col, v);
        }
    }
    let basis = if vars.is_empty() {
        Vec::new()
    } else if rows.is_empty() {
        (0..vars.len()).map(|k| (0..vars.len()).map(|l| if k == l { c_one() } else { c_zero() }).collect()).collect()
    } else {
        null_space(&system, opts.tol)
    };

    let proto = e.proto()?;
    let mut generators = Vec::with_capacity(basis.len());
    for v in &basis {
        let mut terms: Vec<Vec<Vec<Vec<(C<R>, C<R>)>>>> =
            e.regions.iter().zip(&f.regions).map(|(re, rf)| vec![vec![Vec::new(); re.rank()]; rf.rank()]).collect();
        for (k, (r, i, j, c)) in vars.iter().enumerate() {
            if !c_is_zero(&v[k]) {
                terms[*r][*i][*j].push((c.clone(), v[k].clone()));
            }
        }
        let maps = terms
            .into_iter()
            .map(|m| {
                let rows = m
                    .into_iter()
                    .map(|row| {
                        row.into_iter()
                            .map(|t| NovikovElement::from_terms(t, cone.clone(), cutoff.clone()))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(if rows.is_empty() || rows[0].is_empty() {
                    Matrix::zeros_like(rows.len(), rows.first().map_or(0, |r| r.len()), &proto)
                } else {
                    Matrix::from_rows(rows)
                })
            })
            .collect::<Result<Vec<_>, SqError>>()?;
        generators.push(HomFamily { maps });
    }
    Ok(HomModule { generators, vars, basis, tol: opts.tol })
}
