//! Minimal ring interface and dense matrices over it.
//!
//! Elements carry their own context (cutoff, cone, jet base point), so the
//! additive and multiplicative identities are produced from an existing
//! element rather than from a context-free `Zero::zero()`.

use std::fmt::Debug;

use num_complex::Complex;

use crate::scalar::{c_inv, c_is_zero, c_one, c_to_f64, c_zero, Real, C};

pub trait RingElem: Clone + Debug + PartialEq {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn radd(&self, other: &Self) -> Self;
    fn rsub(&self, other: &Self) -> Self;
    fn rmul(&self, other: &Self) -> Self;
    fn rneg(&self) -> Self;
    /// Inverse when the element is a unit.
    fn try_inv(&self) -> Option<Self>;
    /// Pivot quality for elimination: 0 means "not a unit".
    fn unit_weight(&self) -> f64;
}

impl<R: Real> RingElem for C<R> {
    fn zero_like(&self) -> Self {
        c_zero()
    }
    fn one_like(&self) -> Self {
        c_one()
    }
    fn is_zero(&self) -> bool {
        c_is_zero(self)
    }
    fn radd(&self, o: &Self) -> Self {
        self.clone() + o.clone()
    }
    fn rsub(&self, o: &Self) -> Self {
        self.clone() - o.clone()
    }
    fn rmul(&self, o: &Self) -> Self {
        self.clone() * o.clone()
    }
    fn rneg(&self) -> Self {
        -self.clone()
    }
    fn try_inv(&self) -> Option<Self> {
        c_inv(self)
    }
    fn unit_weight(&self) -> f64 {
        if c_is_zero(self) {
            0.0
        } else if R::EXACT {
            // any nonzero pivot is exact; prefer small heights loosely
            1.0
        } else {
            c_to_f64(self).norm()
        }
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: RingElem> Matrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// `n × n` identity built from a prototype element.
    pub fn identity_like(n: usize, proto: &T) -> Self {
        let (z, o) = (proto.zero_like(), proto.one_like());
        Self::from_fn(n, n, |i, j| if i == j { o.clone() } else { z.clone() })
    }

    pub fn zeros_like(rows: usize, cols: usize, proto: &T) -> Self {
        let z = proto.zero_like();
        Self::from_fn(rows, cols, |_, _| z.clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn map<U: RingElem>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a.radd(b)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a.rsub(b)).collect() }
    }

    pub fn neg(&self) -> Self {
        self.map(|a| a.rneg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let proto = self.data.first().or(o.data.first()).expect("nonempty matrix");
        Self::from_fn(self.rows, o.cols, |i, j| {
            let mut acc = proto.zero_like();
            for k in 0..self.cols {
                let (a, b) = (self.get(i, k), o.get(k, j));
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc = acc.radd(&a.rmul(b));
            }
            acc
        })
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|a| s.rmul(a))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|a| a.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let a = self.get(i, j);
                    if i == j {
                        *a == a.one_like()
                    } else {
                        a.is_zero()
                    }
                })
            })
    }

    /// Gauss–Jordan inverse with unit pivots; `None` when a column has no unit.
    pub fn inverse(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Some(self.clone());
        }
        let proto = self.data[0].clone();
        let mut a = self.clone();
        let mut inv = Self::identity_like(n, &proto);
        for col in 0..n {
            let pivot = (col..n)
                .map(|r| (r, a.get(r, col).unit_weight()))
                .filter(|(_, w)| *w > 0.0)
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?
                .0;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p_inv = a.get(col, col).try_inv()?;
            for j in 0..n {
                let v = a.get(col, j).rmul(&p_inv);
                a.set(col, j, v);
                let w = inv.get(col, j).rmul(&p_inv);
                inv.set(col, j, w);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col).clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(r, j).rsub(&f.rmul(a.get(col, j)));
                    a.set(r, j, v);
                    let w = inv.get(r, j).rsub(&f.rmul(inv.get(col, j)));
                    inv.set(r, j, w);
                }
            }
        }
        Some(inv)
    }

    /// Determinant by elimination over a field.
    pub fn determinant(&self) -> T {
        assert!(self.is_square());
        let n = self.rows;
        let proto = self.data.first().cloned().expect("nonempty matrix");
        let mut a = self.clone();
        let mut det = proto.one_like();
        for col in 0..n {
            let Some(pivot) = (col..n)
                .map(|r| (r, a.get(r, col).unit_weight()))
                .filter(|(_, w)| *w > 0.0)
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .map(|p| p.0)
            else {
                return proto.zero_like();
            };
            if pivot != col {
                a.swap_rows(pivot, col);
                det = det.rneg();
            }
            let p = a.get(col, col).clone();
            det = det.rmul(&p);
            let p_inv = p.try_inv().expect("pivot is a unit");
            for r in col + 1..n {
                let f = a.get(r, col).rmul(&p_inv);
                if f.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = a.get(r, j).rsub(&f.rmul(a.get(col, j)));
                    a.set(r, j, v);
                }
            }
        }
        det
    }

    pub fn trace(&self) -> T {
        let proto = self.data.first().cloned().expect("nonempty matrix");
        (0..self.rows.min(self.cols)).fold(proto.zero_like(), |acc, i| acc.radd(self.get(i, i)))
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }
}

/// Solves `A x = b` over a field by Gaussian elimination (partial pivoting by
/// [`RingElem::unit_weight`]). Returns `None` for singular systems.
pub fn solve_square<T: RingElem>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let inv = a.inverse()?;
    let proto = b.first()?.clone();
    Some(
        (0..a.rows())
            .map(|i| {
                (0..a.cols()).fold(proto.zero_like(), |acc, k| {
                    if b[k].is_zero() {
                        acc
                    } else {
                        acc.radd(&inv.get(i, k).rmul(&b[k]))
                    }
                })
            })
            .collect(),
    )
}

/// Basis of the right null space of a matrix over complex scalars.
///
/// In floating modes entries with modulus below `tol` count as zero.
pub fn null_space<R: Real>(a: &Matrix<C<R>>, tol: f64) -> Vec<Vec<C<R>>> {
    let (m, n) = (a.rows(), a.cols());
    let mut rref = a.clone();
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    let small = |z: &C<R>| if R::EXACT { c_is_zero(z) } else { c_to_f64(z).norm() <= tol };
    for col in 0..n {
        if row >= m {
            break;
        }
        let best = (row..m)
            .filter(|&r| !small(rref.get(r, col)))
            .max_by(|&x, &y| c_to_f64(rref.get(x, col)).norm().partial_cmp(&c_to_f64(rref.get(y, col)).norm()).unwrap());
        let Some(p) = best else { continue };
        rref.swap_rows(p, row);
        let inv = c_inv(rref.get(row, col)).unwrap();
        for j in 0..n {
            let v = rref.get(row, j).clone() * inv.clone();
            rref.set(row, j, v);
        }
        for r in 0..m {
            if r == row {
                continue;
            }
            let f = rref.get(r, col).clone();
            if c_is_zero(&f) {
                continue;
            }
            for j in 0..n {
                let v = rref.get(r, j).clone() - f.clone() * rref.get(row, j).clone();
                rref.set(r, j, v);
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![c_zero::<R>(); n];
            v[fc] = c_one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -rref.get(r, fc).clone();
            }
            v
        })
        .collect()
}

/// Complex constant matrix helper.
pub fn cmat<R: Real>(rows: &[&[(i64, i64)]]) -> Matrix<C<R>> {
    Matrix::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|&(re, im)| Complex::new(R::from_i64(re).unwrap(), R::from_i64(im).unwrap())).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    #[test]
    fn inverse_roundtrip_exact() {
        let a = cmat::<Q>(&[&[(2, 0), (1, 1)], &[(0, 1), (3, 0)]]);
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).is_identity());
        assert!(inv.mul(&a).is_identity());
    }

    #[test]
    fn singular_has_no_inverse() {
        let a = cmat::<Q>(&[&[(1, 0), (2, 0)], &[(2, 0), (4, 0)]]);
        assert!(a.inverse().is_none());
        let ns = null_space(&a, 0.0);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert!(c_is_zero(&(a.get(0, 0).clone() * v[0].clone() + a.get(0, 1).clone() * v[1].clone())));
    }

    #[test]
    fn solve_square_float() {
        let a = cmat::<f64>(&[&[(4, 0), (1, 0)], &[(1, 0), (3, 0)]]);
        let x = solve_square(&a, &[Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)]).unwrap();
        assert!((x[0].re - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1].re - 7.0 / 11.0).abs() < 1e-14);
    }
}
