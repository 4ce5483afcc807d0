//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits nonzero if any fails. Runtime limits count toward the result.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use exact_wkb::cone::ConicRegion;
use exact_wkb::connection::{
    block_diagonalize, graded_picard_solve, solve_linear, BlockOptions, HbarConnection, PolyField, SolveOptions,
};
use exact_wkb::expr::parse_ratfunc;
use exact_wkb::jet::Jet;
use exact_wkb::novikov::NovikovElement;
use exact_wkb::numeric::{log_grid, loglog_slope};
use exact_wkb::ring::Matrix;
use exact_wkb::scalar::{c_int, c_one, c_real, c_zero, cplx, C};
use exact_wkb::sheaf_quantization::synthetic::{
    annulus_rank1, perturb, random_fan, random_strip, rank1_numeric_monodromy,
};
use exact_wkb::sheaf_quantization::{
    check_cocycle, dualize, hom_module, monodromy, phase_cone, CocycleOptions, HomFamily, HomOptions,
    SheafQuantizationData,
};
use exact_wkb::stokes::{
    detect_regions, graph_json, higher_order_scattering, is_gmn_generic, trace_stokes_curves, wkb_recursion,
    CurveSource, Potential, StokesCurve, StokesGraph, TraceOptions,
};
use exact_wkb::transseries::{Transseries, Truncation};

type Q = BigRational;
type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn cq(re: (i64, i64), im: (i64, i64)) -> C<Q> {
    cplx(q(re.0, re.1), q(im.0, im.1))
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- 1

#[derive(Clone, Copy, Debug)]
enum Family {
    RayDual,
    HalfPlaneDual,
    ArcDual,
}

impl Family {
    fn cone(self) -> ConicRegion<Q> {
        match self {
            Family::RayDual => ConicRegion::ray(q(0, 1)).polar_dual(),
            Family::HalfPlaneDual => ConicRegion::closed_arc(q(-1, 2), q(1, 2)).polar_dual(),
            Family::ArcDual => ConicRegion::open_arc(q(-1, 4), q(1, 4)).polar_dual(),
        }
    }

    /// Exponent in the cone with real part `n/d`; `strict` keeps it off the
    /// properness boundary.
    fn exponent(self, rng: &mut ChaCha8Rng, strict: bool) -> C<Q> {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(if strict { 1 } else { 0 }..12);
        let m = match self {
            Family::HalfPlaneDual => 0,
            Family::RayDual => rng.gen_range(-8..=8),
            Family::ArcDual => rng.gen_range(-n..=n),
        };
        cq((n, d), (m, d))
    }
}

fn coefficient(rng: &mut ChaCha8Rng) -> C<Q> {
    cq((rng.gen_range(-5..=5), rng.gen_range(1..=3)), (rng.gen_range(-3..=3), rng.gen_range(1..=2)))
}

fn element(rng: &mut ChaCha8Rng, f: Family, cutoff: &Q) -> NovikovElement<Q> {
    let terms = (0..rng.gen_range(0..=4)).map(|_| (f.exponent(rng, false), coefficient(rng))).collect();
    NovikovElement::from_terms(terms, f.cone(), cutoff.clone()).unwrap()
}

fn unit(rng: &mut ChaCha8Rng, f: Family, cutoff: &Q) -> NovikovElement<Q> {
    let mut c0 = coefficient(rng);
    if c0 == c_zero() {
        c0 = c_one();
    }
    let mut terms = vec![(c_zero(), c0)];
    terms.extend((0..rng.gen_range(0..=3)).map(|_| (f.exponent(rng, true), coefficient(rng))));
    NovikovElement::from_terms(terms, f.cone(), cutoff.clone()).unwrap()
}

fn novikov_laws() -> Outcome {
    let cutoff = q(3, 1);
    let mut float_worst: f64 = 0.0;
    for (k, f) in [Family::RayDual, Family::HalfPlaneDual, Family::ArcDual].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        for t in 0..1000 {
            let (a, b, c) = (element(&mut rng, f, &cutoff), element(&mut rng, f, &cutoff), element(&mut rng, f, &cutoff));
            let mul = |x: &NovikovElement<Q>, y: &NovikovElement<Q>| x.try_mul(y).unwrap();
            let add = |x: &NovikovElement<Q>, y: &NovikovElement<Q>| x.try_add(y).unwrap();
            ensure!(mul(&mul(&a, &b), &c) == mul(&a, &mul(&b, &c)), "{f:?} #{t}: associativity");
            ensure!(mul(&a, &b) == mul(&b, &a), "{f:?} #{t}: commutativity");
            ensure!(mul(&a, &add(&b, &c)) == add(&mul(&a, &b), &mul(&a, &c)), "{f:?} #{t}: distributivity");
            ensure!(add(&add(&a, &b), &c) == add(&a, &add(&b, &c)), "{f:?} #{t}: additive associativity");

            let u = unit(&mut rng, f, &cutoff);
            let r = mul(&u, &u.invert().unwrap()).try_sub(&u.one()).unwrap();
            ensure!(r.is_zero(), "{f:?} #{t}: exact inverse leaves {:?}", r.terms());
            // float residual relative to ‖u‖₁‖u⁻¹‖₁, the scale of the rounding in u·u⁻¹
            let uf = u.to_float();
            let vf = uf.invert().unwrap();
            let rf = uf.try_mul(&vf).unwrap().try_sub(&uf.one()).unwrap();
            let l1 = |x: &NovikovElement<f64>| x.terms().iter().map(|(_, a)| a.norm()).sum::<f64>();
            let worst = rf.terms().iter().map(|(_, a)| a.norm()).fold(0.0, f64::max) / (l1(&uf) * l1(&vf));
            float_worst = float_worst.max(worst);
            ensure!(worst <= 1e-12, "{f:?} #{t}: float inverse residual {worst:e}");
        }
    }
    Ok(format!("3000 triples, relative float inverse residual ≤ {float_worst:.1e}"))
}

// ---------------------------------------------------------------- 2

fn wrap_half_turns(a: f64) -> f64 {
    // signed distance to 0 on the circle of length 2
    let r = a.rem_euclid(2.0);
    if r > 1.0 {
        r - 2.0
    } else {
        r
    }
}

fn cone_duality() -> Outcome {
    for hp in [ConicRegion::<f64>::closed_arc(-0.5, 0.5), ConicRegion::open_arc(-0.5, 0.5)] {
        let d = hp.polar_dual();
        ensure!(d.arcs().len() == 1 && !d.is_zero_cone(), "dual of the half-plane: {d:?}");
        let err = (wrap_half_turns(d.arcs()[0].start).abs() + d.arcs()[0].len.abs()) * PI;
        ensure!(err <= 1e-12, "dual of the half-plane is off the ray by {err:e} rad");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        // up to three arcs inside a window of aperture < π whose ends are both hit
        let s: f64 = rng.gen_range(0.0..2.0);
        let w: f64 = rng.gen_range(0.05..0.95);
        let mut arcs = vec![(s, rng.gen_range(0.0..w / 3.0))];
        let l = rng.gen_range(0.0..w / 3.0);
        arcs.push((s + w - l, l));
        if rng.gen_bool(0.5) {
            arcs.push((s + rng.gen_range(0.0..w / 2.0), rng.gen_range(0.0..w / 2.0)));
        }
        let c = ConicRegion::from_arcs(arcs.clone(), rng.gen_bool(0.5));
        ensure!(c.is_acute(), "#{t}: window {w} not acute");
        let dd = c.polar_dual().polar_dual();
        ensure!(dd.arcs().len() == 1 && dd.is_closed(), "#{t}: dual∘dual of {arcs:?} is {dd:?}");
        let err = (wrap_half_turns(dd.arcs()[0].start - s).abs() + (dd.arcs()[0].len - w).abs()) * PI;
        worst = worst.max(err);
        ensure!(err <= 1e-9, "#{t}: dual∘dual misses the closed hull by {err:e} rad");
        ensure!(dd.same_region(&c.hull().closure()), "#{t}: library hull disagrees");
    }

    for t in 0..100 {
        let s: f64 = rng.gen_range(0.0..2.0);
        let wide = if t % 2 == 0 {
            ConicRegion::open_arc(s, s + rng.gen_range(1.0 + 1e-6..2.0))
        } else {
            // three thin arcs, no two of them within a common half-plane gap
            let g1: f64 = rng.gen_range(0.2..0.95);
            let g2 = rng.gen_range((1.05 - g1).max(0.2)..0.95);
            ConicRegion::from_arcs(vec![(s, 0.01), (s + g1, 0.01), (s + g1 + g2, 0.01)], true)
        };
        ensure!(!wide.is_acute(), "#{t}: {wide:?} reported acute");
        ensure!(wide.polar_dual().is_zero_cone(), "#{t}: dual of {wide:?} is not {{0}}");
    }
    Ok(format!("100 acute arcs, worst angular error {worst:.1e} rad"))
}

// ---------------------------------------------------------------- 3

fn wkb_slopes() -> Outcome {
    let hbar = log_grid(1e-3, 1e-1, 9);
    let mut least = f64::INFINITY;
    for (qs, tps) in [("x", vec![Complex64::new(0.0, 0.0)]), ("x^2 - 1", vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)])] {
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let mut points = Vec::new();
        while points.len() < 5 {
            let z = Complex64::from_polar(rng.gen_range(0.5..2.5), rng.gen_range(0.0..2.0 * PI));
            if tps.iter().all(|t| (z - t).norm() > 0.3) {
                points.push(z);
            }
        }
        for n in [2, 4, 6] {
            let w = wkb_recursion::<Q>(&parse_ratfunc(qs).unwrap(), n).unwrap();
            for x in &points {
                let r: Vec<f64> = w.residual_profile(*x, &hbar, 1.0).unwrap().iter().map(|r| r.norm()).collect();
                let slope = loglog_slope(&hbar, &r);
                least = least.min(slope - n as f64);
                ensure!(slope >= n as f64 + 0.9, "Q = {qs}, N = {n}, x = {x}: slope {slope:.3}");
            }
        }
    }
    Ok(format!("min slope − N = {least:.3}"))
}

// ---------------------------------------------------------------- 4

fn schrodinger(qs: &str) -> Potential<f64> {
    Potential::schrodinger(parse_ratfunc(qs).unwrap()).unwrap()
}

fn angle_gap_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d).to_degrees()
}

fn airy_geometry() -> Outcome {
    let g = trace_stokes_curves(&schrodinger("x"), 0.0, 100.0, &TraceOptions::default()).map_err(|e| e.to_string())?;
    let gen0: Vec<&StokesCurve> = g.curves.iter().filter(|c| c.generation == 0).collect();
    ensure!(gen0.len() == 3, "{} generation-0 curves", gen0.len());
    let mut worst_angle: f64 = 0.0;
    let mut matched = [false; 3];
    for c in &gen0 {
        let d = c.final_direction();
        let (k, gap) = [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0]
            .iter()
            .enumerate()
            .map(|(k, e)| (k, angle_gap_deg(d, *e)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        ensure!(gap <= 1.0 && !matched[k], "curve {} leaves at {:.3}°", c.id, d.to_degrees());
        matched[k] = true;
        worst_angle = worst_angle.max(gap);
    }
    let im = g
        .curves
        .iter()
        .flat_map(|c| c.points.iter())
        .map(|p| ((2.0 / 3.0) * p.powf(1.5)).im.abs())
        .fold(0.0, f64::max);
    ensure!(im <= 1e-6, "max |Im ⅔x^(3/2)| = {im:e}");
    let a = detect_regions(&g).map_err(|e| e.to_string())?;
    ensure!(a.regions.len() == 3, "{} faces", a.regions.len());
    Ok(format!("direction error {worst_angle:.1e}°, max |Im| {im:.1e}"))
}

// ---------------------------------------------------------------- 5

/// `∫_{-1}^{1} √(x² − 1) dx` on the branch `i√(1 − x²)`, by composite Simpson
/// in `x = sin t`.
fn double_well_period() -> Complex64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |t: f64| {
        let x = t.sin();
        Complex64::new(0.0, (1.0 - x * x).max(0.0).sqrt()) * t.cos()
    };
    let mut s = f(-PI / 2.0) + f(PI / 2.0);
    for k in 1..n {
        s += f(-PI / 2.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

fn gmn_detection() -> Outcome {
    let period = double_well_period();
    ensure!((period - Complex64::new(0.0, PI / 2.0)).norm() <= 1e-8, "period oracle {period}");
    let p = schrodinger("x^2 - 1");
    let opts = TraceOptions::default();
    let g = trace_stokes_curves(&p, PI / 2.0, 50.0, &opts).map_err(|e| e.to_string())?;
    let rep = is_gmn_generic(&g);
    ensure!(!rep.generic, "θ = π/2 reported generic");
    let (cid, _) = rep.witness.unwrap();
    // the saddle trajectory carries the full period of λ₁ − λ₂ = 2√Q
    let mass = Complex64::from_polar(1.0, -PI / 2.0) * (2.0 * period);
    ensure!(mass.im.abs() < 1e-8, "period not real at θ = π/2: {mass}");
    let w = g.curves[cid].final_weight();
    ensure!((w - mass.re.abs()).abs() < 1e-6, "saddle weight {w} vs 2|period| {}", mass.re.abs());
    let g0 = trace_stokes_curves(&p, 0.0, 50.0, &opts).map_err(|e| e.to_string())?;
    ensure!(is_gmn_generic(&g0).generic, "θ = 0 reported non-generic");
    ensure!((2.0 * period).im.abs() > 1.0, "period phase would also align at θ = 0");
    Ok(format!("period error {:.1e}, saddle weight {w:.9}", (period - Complex64::new(0.0, PI / 2.0)).norm()))
}

// ---------------------------------------------------------------- 6

fn random_invertible(rng: &mut ChaCha8Rng) -> Matrix<C<Q>> {
    // unit lower times unit upper triangular
    let mut l = Matrix::from_fn(4, 4, |i, j| if i == j { c_one() } else { c_zero() });
    let mut u = l.clone();
    for i in 0..4 {
        for j in 0..i {
            l.set(i, j, c_real(q(rng.gen_range(-2..=2), 4)));
            u.set(j, i, c_real(q(rng.gen_range(-2..=2), 4)));
        }
    }
    l.mul(&u)
}

fn lit(v: &Q) -> String {
    format!("({v})")
}

fn block_diagonalization() -> Outcome {
    let t = Arc::new(Truncation::lambda0(q(3, 1), 7));
    let rows: Vec<Vec<String>> = vec![vec!["1".into(), "h".into()], vec!["h".into(), "-1".into()]];
    let c = HbarConnection::<Q>::from_strings(&rows, t.clone(), c_zero()).map_err(|e| e.to_string())?;
    let bd = block_diagonalize(&c, 3, &BlockOptions::default()).map_err(|e| e.to_string())?;
    let expect = Matrix::from_rows(vec![vec![c_zero(), cq((-1, 2), (0, 1))], vec![cq((1, 2), (0, 1)), c_zero()]]);
    ensure!(bd.q_at_base(1) == &expect, "Q₁ = {:?}", bd.q_at_base(1));

    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let opts = BlockOptions { cluster_radius: 0.3, ..Default::default() };
    let mut least = f64::INFINITY;
    for k in 0..20 {
        // spectra {a, a + 1/4} and {b, b + 1/4} with b + 1/4 + 1/2 ≤ a
        let a = q(rng.gen_range(4..=8), 4);
        let b = q(-rng.gen_range(4..=8), 4);
        let d = [a.clone(), a + q(1, 4), b.clone(), b + q(1, 4)];
        let p = random_invertible(&mut rng);
        let pinv = p.inverse().ok_or("singular gauge")?;
        let a0 = p.mul(&Matrix::from_fn(4, 4, |i, j| if i == j { c_real(d[i].clone()) } else { c_zero() })).mul(&pinv);
        let mut rows = Vec::new();
        for i in 0..4 {
            let mut row = Vec::new();
            for j in 0..4 {
                let r = |rng: &mut ChaCha8Rng| q(rng.gen_range(-3..=3), rng.gen_range(1..=3));
                let (x, h, xh, h2) = (r(&mut rng), r(&mut rng), r(&mut rng), r(&mut rng));
                row.push(format!(
                    "{} + {}*x + {}*h + {}*x*h + {}*h^2",
                    lit(&a0.get(i, j).re),
                    lit(&x),
                    lit(&h),
                    lit(&xh),
                    lit(&h2)
                ));
            }
            rows.push(row);
        }
        let c = HbarConnection::<Q>::from_strings(&rows, t.clone(), c_zero()).map_err(|e| format!("#{k}: {e}"))?;
        let bd = block_diagonalize(&c, 6, &opts).map_err(|e| format!("#{k}: {e}"))?;
        ensure!(bd.blocks.len() == 2, "#{k}: {} blocks", bd.blocks.len());
        let slope = bd.residual_slope(9);
        least = least.min(slope);
        ensure!(slope >= 6.9, "#{k}: off-block residual slope {slope:.3}");
    }
    Ok(format!("Q₁ exact, min slope {least:.3}"))
}

// ---------------------------------------------------------------- 7

fn trunc(cutoff: i64, n: i32) -> Arc<Truncation<Q>> {
    Arc::new(Truncation::lambda0(q(cutoff, 1), n))
}

fn linear_solving() -> Outcome {
    let t = trunc(3, 4);
    let one = vec![Transseries::constant(t.clone(), c_one())];
    for alpha in ["x^2/2", "x^3/3 - x", "1/(1 + x)", "2*x + x^4"] {
        let c = HbarConnection::exponential_module(&parse_ratfunc(alpha).unwrap(), t.clone(), c_zero())
            .map_err(|e| e.to_string())?;
        let s = solve_linear(&c, &one, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let omega = c.to_jets(16).map_err(|e| e.to_string())?;
        let r = s[0].residual(omega.omega()).map_err(|e| e.to_string())?;
        ensure!(r.iter().all(|x| x.is_zero()), "α = {alpha}: nonzero residual");
        let again = solve_linear(&c, &one, &SolveOptions::default()).map_err(|e| e.to_string())?;
        ensure!(again == s, "α = {alpha}: repeated solve differs");
        let two = vec![Transseries::constant(t.clone(), c_int(2))];
        let s2 = solve_linear(&c, &two, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let scaled = s[0].phi[0].scale(&c_int(2));
        ensure!(s2[0].phi[0] == scaled, "α = {alpha}: solution is not linear in the initial value");
    }

    // ℏψ' + e^{−1/ℏ}ψ = 0: the e^{−n/ℏ}ℏ^{−n} coefficient follows a_n = −a_{n−1}·x/n
    let t = trunc(5, 2);
    let c = HbarConnection::<Q>::from_strings(&[vec!["T".into()]], t.clone(), c_zero()).map_err(|e| e.to_string())?;
    let s = solve_linear(&c, &[Transseries::constant(t.clone(), c_one())], &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let mut a = Jet::constant(c_one(), 16);
    for n in 0..5i64 {
        if n > 0 {
            a = a.mul(&Jet::t(16)).scale(&cq((-1, n), (0, 1)));
        }
        let got = s[0].phi[0].coefficient(&c_int(n), -(n as i32));
        ensure!(got.truncate(10) == a.truncate(10), "n = {n}: {:?}", got.coeffs());
    }
    let r = s[0].residual(c.to_jets(16).map_err(|e| e.to_string())?.omega()).map_err(|e| e.to_string())?;
    ensure!(r.iter().all(|x| x.is_zero()), "factorial example residual nonzero");
    Ok("4 exponential modules, factorial pattern through n = 4".into())
}

// ---------------------------------------------------------------- 8

/// Taylor jet of `√(m² + s)` at `s = 0`.
fn sqrt_jet(m: Q, prec: usize) -> Jet<Q> {
    let mut c = vec![c_real(m.clone())];
    let mut binom = q(1, 1);
    let m2 = m.clone() * m.clone();
    let mut pow = q(1, 1);
    for k in 1..prec as i64 {
        binom = binom * (q(1, 2) - q(k - 1, 1)) / q(k, 1);
        pow = pow / m2.clone();
        c.push(c_real(binom.clone() * m.clone() * pow.clone()));
    }
    Jet::from_coeffs(c)
}

fn graded_picard() -> Outcome {
    let opts = SolveOptions::default();
    for (conn, init) in [("h*x + T*(1 + x)", "1 + 2*h + T"), ("h^2*x - T", "3 - T"), ("T*x", "1")] {
        let t = trunc(3, 3);
        let c = HbarConnection::<Q>::from_strings(&[vec![conn.into()]], t.clone(), c_zero()).map_err(|e| e.to_string())?;
        let init = vec![Transseries::parse_scalar(init, t.clone()).map_err(|e| e.to_string())?];
        let a = solve_linear(&c, &init, &opts).map_err(|e| e.to_string())?;
        // reduced form: no classical exponent, so both sides solve the same field
        ensure!(a[0].alpha.is_zero(), "{conn}: not in reduced form");
        let f = PolyField::linear(&c, None);
        let seed: Vec<_> = init.iter().map(|s| s.to_jets(16)).collect();
        let b = graded_picard_solve(&f, &seed, &opts).map_err(|e| e.to_string())?;
        ensure!(a[0].phi == b, "{conn}: Picard and solve_linear differ");
    }

    // ℏs' = x − s² is the Riccati equation of Q = x
    let w = wkb_recursion::<Q>(&parse_ratfunc("x").unwrap(), 4).unwrap();
    let mut worst: f64 = 0.0;
    for m in [q(2, 1), q(3, 2), q(5, 1)] {
        let x0 = m.clone() * m.clone();
        let t = trunc(3, 5);
        let mut f = PolyField::new(1, t.clone(), c_real(x0.clone()));
        f.add_term(0, vec![0], Transseries::parse("x", t.clone()).map_err(|e| e.to_string())?);
        f.add_term(0, vec![2], Transseries::parse("-1", t.clone()).map_err(|e| e.to_string())?);
        let seed = vec![Transseries::constant(t.clone(), sqrt_jet(m.clone(), 16))];
        let u = graded_picard_solve(&f, &seed, &opts).map_err(|e| e.to_string())?;
        let xf = Complex64::new(exact_wkb::scalar::Real::to_f64_lossy(&x0), 0.0);
        for n in 0..=4 {
            let v = u[0].coefficient(&c_zero(), n as i32).value();
            let got = Complex64::new(
                exact_wkb::scalar::Real::to_f64_lossy(&v.re),
                exact_wkb::scalar::Real::to_f64_lossy(&v.im),
            );
            let want = w.eval_term(n, xf, 1.0).unwrap();
            let err = (got - want).norm() / want.norm().max(1e-300);
            worst = worst.max(err);
            ensure!(err <= 1e-12, "x₀ = {x0}, order {n}: {got} vs {want}");
        }
        ensure!(f.residual(&u, &opts).map_err(|e| e.to_string())?.iter().all(|r| r.is_zero()), "Riccati residual");
    }
    Ok(format!("Riccati matches through N = 4, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- 9

fn vertices_using(sq: &SheafQuantizationData<Q>, g: usize) -> Vec<usize> {
    sq.vertices.iter().filter(|v| v.steps.iter().any(|s| s.gluing == g)).map(|v| v.id).collect()
}

fn sq_verification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let exact = CocycleOptions::exact();
    let mut cases = 0;
    for k in 0..20 {
        let sq = if k % 2 == 0 {
            random_fan::<Q>(&mut rng, 2 + k % 3, 2 + k % 4, q(2, 1))
        } else {
            random_strip::<Q>(&mut rng, 1 + k % 3, 1 + k % 4, q(2, 1))
        }
        .map_err(|e| e.to_string())?;
        let rep = check_cocycle(&sq, &exact);
        ensure!(rep.pass && rep.checked == sq.vertices.len(), "#{k}: {rep:?}");
        ensure!(rep.vertices.iter().all(|v| v.residual_valuation.is_none()), "#{k}: nonzero residual");
        let rank = sq.regions[0].rank();
        for g in 0..sq.gluings.len() {
            let (i, j) = (rng.gen_range(0..rank), rng.gen_range(0..rank));
            let bad = perturb(&sq, g, (i, j), c_real(q(1, 10)), c_int(1)).map_err(|e| e.to_string())?;
            let rep = check_cocycle(&bad, &exact);
            ensure!(rep.failed == vertices_using(&sq, g), "#{k}, gluing {g}: flagged {:?}", rep.failed);
            for v in &rep.failed {
                let val = rep.vertices[*v].residual_valuation.unwrap();
                ensure!((val - 0.1).abs() < 1e-12, "#{k}, gluing {g}: residual valuation {val}");
            }
            cases += 1;
        }
        let dd = dualize(&dualize(&sq).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure!(dd == sq, "#{k}: dualize∘dualize ≠ id");
    }

    let mut pairs = 0;
    for k in 0..10 {
        let sq = random_fan::<Q>(&mut rng, 2, 3, q(3, 2)).map_err(|e| e.to_string())?;
        let h = hom_module(&sq, &sq, &HomOptions::default()).map_err(|e| e.to_string())?;
        ensure!(h.contains(&HomFamily::identity(&sq).map_err(|e| e.to_string())?), "#{k}: id ∉ End");
        for a in &h.generators {
            for b in &h.generators {
                ensure!(h.contains(&a.compose(b)), "#{k}: End not closed under composition");
                pairs += 1;
            }
        }
    }
    Ok(format!("{cases} perturbations localized, {pairs} composites checked"))
}

// ---------------------------------------------------------------- 10

fn monodromy_check() -> Outcome {
    let cone = phase_cone::<Q>(0.0);
    let cutoff = q(3, 1);
    let psi = NovikovElement::from_terms(vec![(c_zero(), c_one()), (c_int(1), c_one())], cone, cutoff)
        .map_err(|e| e.to_string())?;
    let sq = annulus_rank1(psi.clone());
    let m = monodromy(&sq, &[0, 0]).map_err(|e| e.to_string())?;
    ensure!(m.get(0, 0) == &psi, "product monodromy is not Ψ");
    let l = psi.log_unipotent().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for hbar in [0.05, 0.1] {
        let numeric = rank1_numeric_monodromy(&l, hbar, 2000);
        let formal = m.get(0, 0).eval_at_hbar(Complex64::new(hbar, 0.0));
        let err = (numeric - formal).norm();
        worst = worst.max(err);
        ensure!(err <= 1e-8, "ℏ = {hbar}: {numeric} vs {formal}");
    }
    Ok(format!("worst error {worst:.1e}"))
}

// ---------------------------------------------------------------- 11

const CUBIC: [&str; 3] = ["-x^2", "3", "0"];
const CUBIC_THETA: f64 = 0.3;
const MAX_DEPTH: usize = 6;
/// Chord error of the traced polylines at the default step size.
const NEST_TOL: f64 = 1e-3;

fn cubic_graph(c: f64) -> Result<StokesGraph, String> {
    let a: Vec<String> = CUBIC.iter().map(|s| s.to_string()).collect();
    let p = Potential::<f64>::parse(&a).map_err(|e| e.to_string())?;
    let g = trace_stokes_curves(&p, CUBIC_THETA, c, &TraceOptions::default()).map_err(|e| e.to_string())?;
    higher_order_scattering(&g, MAX_DEPTH).map_err(|e| e.to_string())
}

fn same_source(a: &CurveSource, b: &CurveSource) -> bool {
    match (a, b) {
        (CurveSource::TurningPoint { .. }, CurveSource::TurningPoint { .. }) => a == b,
        (CurveSource::Intersection { point: p }, CurveSource::Intersection { point: q }) => (p - q).norm() < 1e-6,
        _ => false,
    }
}

fn distance_to_polyline(p: Complex64, pts: &[Complex64]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let ab = w[1] - w[0];
            let t = (((p - w[0]) * ab.conj()).re / ab.norm_sqr().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            (w[0] + ab * t - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `a` is the part of `b` below a smaller cutoff: same source and type, every
/// point within `tol` of `b`'s polyline (the last point of `a` is placed on the
/// cutoff level, between two of `b`'s vertices), and no more weight.
fn is_initial_segment(a: &StokesCurve, b: &StokesCurve, tol: f64) -> bool {
    a.sheets == b.sheets
        && a.generation == b.generation
        && same_source(&a.source, &b.source)
        && a.final_weight() <= b.final_weight() + 1e-9
        && a.points.iter().all(|p| distance_to_polyline(*p, &b.points) < tol)
}

fn gromov_monotonicity() -> Outcome {
    let cutoffs = [1.0, 2.0, 4.0];
    let graphs: Vec<StokesGraph> = cutoffs.iter().map(|&c| cubic_graph(c)).collect::<Result<_, _>>()?;
    let mut summary = Vec::new();
    let mut worst: f64 = 0.0;
    for (g, c) in graphs.iter().zip(cutoffs) {
        let s = g.scattering.as_ref().ok_or("no scattering report")?;
        ensure!(s.complete && g.depth < MAX_DEPTH, "c = {c}: scattering incomplete (depth {})", g.depth);
        summary.push(format!("{}@{c}", g.curves.len()));
    }
    for k in 1..graphs.len() {
        let (lo, hi) = (&graphs[k - 1], &graphs[k]);
        for a in &lo.curves {
            let gap = hi
                .curves
                .iter()
                .filter(|b| is_initial_segment(a, b, NEST_TOL))
                .map(|b| a.points.iter().map(|p| distance_to_polyline(*p, &b.points)).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(gap);
            ensure!(
                gap.is_finite(),
                "curve {} ({}) at c = {} has no extension at c = {}",
                a.id,
                a.label,
                cutoffs[k - 1],
                cutoffs[k]
            );
        }
        ensure!(hi.curves.len() >= lo.curves.len(), "curve count shrank");
    }
    for (g, c) in graphs.iter().zip(cutoffs) {
        ensure!(graph_json(g) == graph_json(&cubic_graph(c)?), "c = {c}: rerun JSON differs");
    }
    Ok(format!("curves {}, nesting distance ≤ {worst:.1e}", summary.join(", ")))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("Novikov ring laws", 10, novikov_laws),
        ("cone duality", 5, cone_duality),
        ("WKB residual order", 30, wkb_slopes),
        ("Airy Stokes geometry", 10, airy_geometry),
        ("GMN detection", 10, gmn_detection),
        ("block diagonalization", 60, block_diagonalization),
        ("linear solving", 10, linear_solving),
        ("graded Picard solver", 30, graded_picard),
        ("SQ verification", 30, sq_verification),
        ("monodromy", 10, monodromy_check),
        ("Gromov monotonicity", 120, gromov_monotonicity),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > Duration::from_secs(*limit) => Err(format!("over the {limit} s limit")),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => {
                failed += 1;
                ("FAIL", d.clone())
            }
        };
        println!("{tag} {:>2} {name:<24} {:>7.2} s / {limit:>3} s  {detail}", k + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
