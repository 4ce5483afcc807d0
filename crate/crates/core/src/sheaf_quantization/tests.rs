use std::f64::consts::PI;

use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::synthetic::*;
use super::*;
use crate::novikov::NovikovElement;
use crate::scalar::{c_int, c_real, c_zero, Real};
use crate::stokes::{
    detect_regions, higher_order_scattering, trace_stokes_curves, CurveSource, Potential, StokesGraph, TraceOptions,
};

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::from_ratio(n, d)
}

fn graph(coeffs: &[&str], theta: f64, cutoff: f64, scatter: bool) -> StokesGraph {
    let a: Vec<String> = coeffs.iter().map(|s| s.to_string()).collect();
    let p = Potential::<f64>::parse(&a).unwrap();
    let mut g = trace_stokes_curves(&p, theta, cutoff, &TraceOptions::default()).unwrap();
    if scatter {
        g = higher_order_scattering(&g, 6).unwrap();
    }
    g.arrangement = Some(detect_regions(&g).unwrap());
    g
}

fn unit_plus<R: Real>(c: R, cutoff: R) -> NovikovElement<R> {
    let cone = phase_cone::<R>(0.0);
    let one = NovikovElement::constant(c_int(1), cone.clone(), cutoff.clone()).unwrap();
    one.radd(&NovikovElement::monomial(c_int(1), c_real(c), cone, cutoff).unwrap())
}

fn triple(seed: u64) -> SheafQuantizationData<Q> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proto = NovikovElement::zero(phase_cone::<Q>(0.0), q(2, 1)).unwrap();
    let a = random_gluing_matrix(&mut rng, 2, &proto).unwrap();
    let b = random_gluing_matrix(&mut rng, 2, &proto).unwrap();
    consistent_triple(&[c_zero(), c_real(q(1, 2))], a, b)
}

#[test]
fn trivial_is_closed_and_self_dual() {
    let t = trivial::<Q>(phase_cone(0.0), q(3, 1));
    assert!(check_cocycle(&t, &CocycleOptions::exact()).pass);
    assert!(monodromy(&t, &[0]).unwrap().is_identity());
    assert_eq!(dualize(&t).unwrap(), t);
    let f = trivial::<f64>(phase_cone(0.0), 3.0);
    assert!(check_cocycle(&f, &CocycleOptions::default()).pass);
}

#[test]
fn annulus_monodromy_is_its_gluing() {
    let psi = unit_plus(q(1, 1), q(3, 1));
    let sq = annulus_rank1(psi.clone());
    let m = monodromy(&sq, &[0, 0]).unwrap();
    assert_eq!(m.get(0, 0), &psi);
    assert!(matches!(monodromy(&sq, &[0, 1]), Err(SqError::NotClosed(_))));
}

#[test]
fn consistent_triple_closes_exactly() {
    for seed in 0..5 {
        let sq = triple(seed);
        let rep = check_cocycle(&sq, &CocycleOptions::exact());
        assert!(rep.pass, "seed {seed}: {rep:?}");
        assert_eq!(rep.vertices[0].residual_valuation, None);
    }
}

#[test]
fn perturbation_is_flagged_at_its_vertex() {
    let sq = triple(7);
    let bad = perturb(&sq, 1, (0, 1), c_real(q(1, 10)), c_int(1)).unwrap();
    let rep = check_cocycle(&bad, &CocycleOptions::exact());
    assert!(!rep.pass);
    assert_eq!(rep.failed, vec![0]);
    assert!((rep.vertices[0].residual_valuation.unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn random_fans_close_and_dualize_involutively() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..5 {
        let sq = random_fan::<Q>(&mut rng, 3, n, q(2, 1)).unwrap();
        assert!(check_cocycle(&sq, &CocycleOptions::exact()).pass);
        let d = dualize(&sq).unwrap();
        assert!(check_cocycle(&d, &CocycleOptions::exact()).pass);
        assert_eq!(dualize(&d).unwrap(), sq);
    }
}

#[test]
fn strip_perturbations_fail_exactly_where_used() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let k = 3;
    let sq = random_strip::<Q>(&mut rng, 2, k, q(2, 1)).unwrap();
    let rep = check_cocycle(&sq, &CocycleOptions::exact());
    assert!(rep.pass && rep.checked == k, "{rep:?}");
    for g in 0..sq.gluings.len() {
        let bad = perturb(&sq, g, (0, 1), c_real(q(1, 10)), c_int(1)).unwrap();
        let users: Vec<usize> =
            sq.vertices.iter().filter(|v| v.steps.iter().any(|s| s.gluing == g)).map(|v| v.id).collect();
        assert_eq!(check_cocycle(&bad, &CocycleOptions::exact()).failed, users, "gluing {g}");
    }
}

#[test]
fn dual_of_rank_one_negates_primitive() {
    let sq = point_module::<Q>(c_real(q(3, 4)), phase_cone(0.0), q(2, 1));
    let d = dualize(&sq).unwrap();
    assert_eq!(d.regions[0].sheets[0].alpha, c_real(q(-3, 4)));
}

#[test]
fn monodromy_rotation_is_a_conjugation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sq = random_fan::<Q>(&mut rng, 2, 3, q(2, 1)).unwrap();
    // drop the closing gluing so the loop is not trivially the identity
    let mut open = sq.clone();
    open.gluings[2].matrix = random_gluing_matrix(&mut rng, 2, &sq.proto().unwrap()).unwrap();
    let a = monodromy(&open, &[0, 1, 2, 0]).unwrap();
    let b = monodromy(&open, &[1, 2, 0, 1]).unwrap();
    assert_eq!(a.trace(), b.trace());
    assert_eq!(a.determinant(), b.determinant());
    let g0 = &open.gluings[0].matrix;
    assert_eq!(g0.mul(&a), b.mul(g0));
}

#[test]
fn rank_one_hom_starts_at_the_primitive_gap() {
    let cone = phase_cone::<Q>(0.0);
    let e = point_module(c_real(q(1, 2)), cone.clone(), q(2, 1));
    let f = point_module(c_zero(), cone, q(2, 1));
    let h = hom_module(&e, &f, &HomOptions::default()).unwrap();
    assert!(h.dimension() > 0);
    let least = h.generators.iter().map(|g| g.valuation()).fold(f64::INFINITY, f64::min);
    assert_eq!(least, 0.5);
    assert!(!h.contains(&HomFamily::identity(&e).unwrap()));
    // the other direction carries no bound
    let back = hom_module(&f, &e, &HomOptions::default()).unwrap();
    assert!(back.contains(&HomFamily::identity(&f).unwrap()));
}

#[test]
fn end_module_holds_identity_and_composites() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sq = random_fan::<Q>(&mut rng, 2, 3, q(3, 2)).unwrap();
    let h = hom_module(&sq, &sq, &HomOptions::default()).unwrap();
    assert!(h.contains(&HomFamily::identity(&sq).unwrap()));
    for a in h.generators.iter().take(4) {
        for b in h.generators.iter().take(4) {
            assert!(h.contains(&a.compose(b)));
        }
    }
}

#[test]
fn obstruction_gluing_kills_identity() {
    let cutoff = q(2, 1);
    let e = annulus_rank1(NovikovElement::constant(c_int(1), phase_cone(0.0), cutoff.clone()).unwrap());
    let f = annulus_rank1(unit_plus(q(1, 2), cutoff.clone()));
    assert!(e.gluings[0].matrix.is_identity());
    let h = hom_module(&e, &f, &HomOptions::default()).unwrap();
    assert!(!h.contains(&HomFamily::identity(&e).unwrap()));
    // T^{1/2}·m = 0 at the cutoff leaves only valuation ≥ 3/2
    assert!(h.dimension() > 0);
    assert!(h.generators.iter().all(|g| g.valuation() >= 1.5));
    assert!(matches!(hom_module(&e, &trivial(phase_cone(0.0), cutoff), &HomOptions::default()), Err(SqError::GraphMismatch)));
}

#[test]
fn airy_build_matches_period_oracle() {
    let g = graph(&["x", "0"], 0.0, 1000.0, false);
    let sq = build_sq::<f64>(&g, &GluingRules::default()).unwrap();
    assert_eq!(sq.regions.len(), 3);
    assert_eq!(sq.gluings.len(), 3);
    for gl in &sq.gluings {
        // ∫(λ₊ − λ₋) from the turning point is (4/3) x^{3/2}; the anchor
        // sits on a chord, so the polyline weight agrees only to O(h²)
        let p = gl.anchor.unwrap();
        let oracle = (4.0 / 3.0 * p.powf(1.5)).re.abs();
        let w = gl.weight.unwrap();
        assert!((w - oracle).abs() < 1e-4 * oracle, "{w} vs {oracle}");
        let [i, j] = gl.sheets.unwrap();
        let entry = gl.matrix.get(gl.permutation[i], j);
        assert_eq!(entry.terms().len(), 1);
        let v = entry.valuation().to_f64();
        assert!((v - oracle).abs() < 1e-8 * oracle, "{v} vs {oracle}");
        assert_eq!(gl.coefficient, Some(Complex64::new(0.0, 1.0)));
    }
    let rep = check_cocycle(&sq, &CocycleOptions::default());
    assert!(rep.pass);
    assert_eq!(rep.checked, 0);
    assert_eq!(rep.vertices.len(), 1);
    assert_eq!(rep.vertices[0].status, VertexStatus::Skipped);
    assert!(rep.vertices[0].residual_valuation.is_some());
}

#[test]
fn double_well_closes_and_flags_nongeneric_phase() {
    let g = graph(&["x^2 - 1", "0"], 0.0, 1000.0, false);
    let sq = build_sq::<f64>(&g, &GluingRules::default()).unwrap();
    assert!(check_cocycle(&sq, &CocycleOptions::default()).pass);
    // the saddle connection makes the arrangement itself degenerate, so
    // the build is handed the bare graph
    let p = Potential::<f64>::parse(&["x^2 - 1".to_string(), "0".to_string()]).unwrap();
    let g = trace_stokes_curves(&p, PI / 2.0, 1000.0, &TraceOptions::default()).unwrap();
    assert!(matches!(build_sq::<f64>(&g, &GluingRules::default()), Err(SqError::NotGeneric { .. })));
}

#[test]
fn cubic_crossings_close_after_scattering() {
    let g = graph(&["-x^2", "3", "0"], 0.3, 4.0, true);
    let sq = build_sq::<f64>(&g, &GluingRules::default()).unwrap();
    let rep = check_cocycle(&sq, &CocycleOptions::default());
    assert!(rep.pass, "{:?}", rep.failed);
    assert!(rep.vertices.iter().any(|v| v.kind == SqVertexKind::Crossing && v.status == VertexStatus::Pass));
    for gl in &sq.gluings {
        let c = &g.curves[gl.curve.unwrap()];
        if matches!(c.source, CurveSource::Intersection { .. }) {
            assert!(gl.coefficient.unwrap().norm() > 0.5, "{} left unsolved", c.label);
        }
    }
    // exact mode reproduces the float verdict
    let exact = build_sq::<Q>(&g, &GluingRules::default()).unwrap();
    let rep = check_cocycle(&exact, &CocycleOptions::default());
    assert!(rep.pass);
}

#[test]
fn json_is_stable() {
    let g = graph(&["x", "0"], 0.0, 50.0, false);
    let sq = build_sq::<f64>(&g, &GluingRules::default()).unwrap();
    let rep = check_cocycle(&sq, &CocycleOptions::default());
    let a = sq_json(&sq, Some(&rep));
    assert_eq!(a, sq_json(&build_sq::<f64>(&g, &GluingRules::default()).unwrap(), Some(&rep)));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema_version"], SQ_SCHEMA_VERSION);
    assert_eq!(v["regions"].as_array().unwrap().len(), 3);
    assert_eq!(v["verification"]["pass"], true);
}

#[test]
fn numeric_rank_one_monodromy_matches() {
    let psi = unit_plus(q(1, 1), q(3, 1));
    let sq = annulus_rank1(psi.clone());
    let m = monodromy(&sq, &[0, 0]).unwrap();
    let l = psi.log_unipotent().unwrap();
    for hbar in [0.05, 0.1] {
        let numeric = rank1_numeric_monodromy(&l, hbar, 2000);
        let formal = m.get(0, 0).eval_at_hbar(Complex64::new(hbar, 0.0));
        assert!((numeric - formal).norm() < 1e-8, "{numeric} vs {formal}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fans_pass_and_single_perturbations_fail(seed in 0u64..10_000, n in 2usize..5, k in 0usize..4, i in 0usize..2, j in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sq = random_fan::<Q>(&mut rng, 2, n, q(2, 1)).unwrap();
        prop_assert!(check_cocycle(&sq, &CocycleOptions::exact()).pass);
        let bad = perturb(&sq, k % n, (i, j), c_real(q(1, 10)), c_int(1)).unwrap();
        let rep = check_cocycle(&bad, &CocycleOptions::exact());
        prop_assert_eq!(rep.failed, vec![0]);
        prop_assert_eq!(dualize(&dualize(&sq).unwrap()).unwrap(), sq);
    }

    #[test]
    fn gluings_invert_along_reversed_steps(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sq = random_fan::<Q>(&mut rng, 2, 3, q(2, 1)).unwrap();
        for g in 0..3 {
            let m = sq.path_product(&[SqStep::plain(g, true), SqStep::plain(g, false)]).unwrap();
            prop_assert!(m.is_identity());
        }
    }
}
