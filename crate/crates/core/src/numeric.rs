//! Floating-point kernels: polynomial roots, Gauss–Legendre quadrature and
//! an embedded Runge–Kutta step for complex autonomous ODEs.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Horner evaluation of `Σ c_k z^k` (coefficients low to high).
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Value and derivative by Horner.
fn horner_d(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a polynomial by Aberth–Ehrlich iteration, polished
/// with Newton steps. Coefficients low to high; trailing zeros are ignored.
/// Roots are returned sorted by (re, im) for deterministic output.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.last().is_some_and(|z| z.norm() == 0.0) {
        c.pop();
    }
    let mut zero_roots = 0;
    while c.len() > 1 && c[0].norm() == 0.0 {
        c.remove(0);
        zero_roots += 1;
    }
    let n = c.len().saturating_sub(1);
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
    if n == 0 {
        return roots;
    }
    if n == 1 {
        roots.push(-c[0] / c[1]);
        sort_roots(&mut roots);
        return roots;
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|z| z / lead).collect();
    // Cauchy bound for the initial circle
    let bound = 1.0 + monic[..n].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = bound.min(
        // geometric mean of root moduli is a better scale when it is available
        monic[0].norm().powf(1.0 / n as f64).max(1e-3),
    );
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * (k as f64) / (n as f64) + 0.4))
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = horner_d(&monic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            if w.is_finite() {
                z[k] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner_d(&monic, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() || step.norm() > 1e-6 * (1.0 + r.norm()) {
                break;
            }
            *r -= step;
        }
    }
    roots.extend(z);
    sort_roots(&mut roots);
    roots
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
}

/// Merges roots closer than `tol`, returning `(root, multiplicity)` pairs.
pub fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        if let Some(entry) = out.iter_mut().find(|(c, _)| (*c - r).norm() <= tol) {
            let m = entry.1 as f64;
            entry.0 = (entry.0 * m + r) / (m + 1.0);
            entry.1 += 1;
        } else {
            out.push((r, 1));
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// `∫ f` along the straight segment from `a` to `b` with an `n`-point rule
/// on each of `pieces` subintervals.
pub fn integrate_segment(f: impl Fn(Complex64) -> Complex64, a: Complex64, b: Complex64, n: usize, pieces: usize) -> Complex64 {
    let rule = gauss_legendre(n);
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..pieces {
        let s0 = a + (b - a) * (p as f64 / pieces as f64);
        let s1 = a + (b - a) * ((p + 1) as f64 / pieces as f64);
        let half = (s1 - s0) * 0.5;
        let mid = (s0 + s1) * 0.5;
        for &(x, w) in &rule {
            total += f(mid + half * x) * w * half;
        }
    }
    total
}

/// One Dormand–Prince 5(4) step for `dx/ds = f(x)`; returns the fifth-order
/// update and an error estimate.
pub fn dopri_step(f: &impl Fn(Complex64) -> Option<Complex64>, x: Complex64, h: f64) -> Option<(Complex64, f64)> {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let mut k = [Complex64::new(0.0, 0.0); 7];
    k[0] = f(x)?;
    for s in 0..6 {
        let mut xs = x;
        for (j, kj) in k.iter().enumerate().take(s + 1) {
            xs += *kj * (h * C[s][j]);
        }
        k[s + 1] = f(xs)?;
    }
    let mut x5 = x;
    let mut x4 = x;
    for j in 0..7 {
        x5 += k[j] * (h * B5[j]);
        x4 += k[j] * (h * B4[j]);
    }
    Some((x5, (x5 - x4).norm()))
}

/// Least-squares slope of `log y` against `log x`, skipping nonpositive `y`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `n` logarithmically spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_cubic() {
        // (z-1)(z+2)(z-i) = z^3 + (1-i)z^2 + (-2-i)z + 2i
        let r = poly_roots(&[c(0.0, 2.0), c(-2.0, -1.0), c(1.0, -1.0), c(1.0, 0.0)]);
        let expect = [c(-2.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        for (a, b) in r.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn roots_with_zero_and_double() {
        let r = poly_roots(&[c(0.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]);
        let cl = cluster_roots(&r, 1e-6);
        assert_eq!(cl.len(), 2);
        assert!(cl.iter().any(|(z, m)| z.norm() < 1e-12 && *m == 1));
        assert!(cl.iter().any(|(z, m)| (z - 1.0).norm() < 1e-6 && *m == 2));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(8);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let seg = integrate_segment(|z| z * z, c(0.0, 0.0), c(1.0, 1.0), 6, 1);
        assert!((seg - c(1.0, 1.0).powi(3) / 3.0).norm() < 1e-14);
    }

    #[test]
    fn dopri_exponential() {
        let f = |x: Complex64| Some(x);
        let mut x = c(1.0, 0.0);
        for _ in 0..100 {
            x = dopri_step(&f, x, 0.01).unwrap().0;
        }
        assert!((x.re - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = log_grid(1e-3, 1e-1, 9);
        let ys: Vec<f64> = xs.iter().map(|h| 3.0 * h.powi(5)).collect();
        assert!((loglog_slope(&xs, &ys) - 5.0).abs() < 1e-10);
    }
}
