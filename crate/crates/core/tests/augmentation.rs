mod common;

use std::sync::Arc;

use hessfield_core::augmentation::{classify, regularity_check, structure_growth_check, AugmentedData, GrowthCondition, SampleBox};
use hessfield_core::catalog::{build_augmented, parse_operator, ACatalog, BCatalog, Expr};
use hessfield_core::griddisc::{DomainSpec, Field, Grid, GridFunction};
use hessfield_core::symcore::SymMat;
use proptest::prelude::*;

fn data(a: &str, b: &str) -> AugmentedData {
    let op = parse_operator("monge_ampere_root", 2).unwrap();
    build_augmented(ACatalog::parse(a).unwrap(), BCatalog::parse(b).unwrap(), &op, None).unwrap()
}

/// Same A and B with every derivative left to the finite-difference fallback.
fn fd_only(a: &str, b: &str) -> AugmentedData {
    let a = ACatalog::parse(a).unwrap();
    let BCatalog::GradQuad(c0, c1) = BCatalog::parse(b).unwrap() else { panic!() };
    AugmentedData::new(2, Box::new(move |x, z, p| a.eval(2, x, z, p)), Box::new(move |_, _, p| c0 + c1 * (p[0] * p[0] + p[1] * p[1])))
        .with_z_dependence(a.depends_on_z())
}

fn unit_box() -> SampleBox {
    SampleBox { x: vec![(-1.0, 1.0), (-1.0, 1.0)], z: (-1.0, 1.0), p: (-3.0, 3.0) }
}

fn close(a: &SymMat, b: &SymMat, tol: f64) -> bool {
    (*a - *b).max_abs() <= tol * (1.0 + a.max_abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fd_fallback_matches_analytic(
        which in 0usize..4,
        x in prop::array::uniform2(-1.0f64..1.0),
        z in -1.0f64..1.0,
        p in prop::array::uniform2(-3.0f64..3.0),
    ) {
        let a = ["quad_iso 0.7", "power_iso 0.5 3", "xz_matrix 0.3", "const_shift 2"][which];
        let exact = data(a, "grad_quad 1 0.25");
        let approx = fd_only(a, "grad_quad 1 0.25");
        prop_assert!(!approx.analytic_flags().dp_a);
        for (e, f) in exact.dp_a(&x, z, &p).iter().zip(approx.dp_a(&x, z, &p)) {
            prop_assert!(close(e, &f, 1e-6), "dp_a {:?} vs {:?}", e, f);
        }
        for (e, f) in exact.d2p_a(&x, z, &p).iter().zip(approx.d2p_a(&x, z, &p)) {
            prop_assert!(close(e, &f, 1e-4), "d2p_a {:?} vs {:?}", e, f);
        }
        prop_assert!(close(&exact.dz_a(&x, z, &p), &approx.dz_a(&x, z, &p), 1e-6));
        for (e, f) in exact.dx_a(&x, z, &p).iter().zip(approx.dx_a(&x, z, &p)) {
            prop_assert!(close(e, &f, 1e-6));
        }
        for (e, f) in exact.dp_b(&x, z, &p).iter().zip(approx.dp_b(&x, z, &p)) {
            prop_assert!((e - f).abs() <= 1e-6 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn expr_derivatives_match_finite_differences(
        which in 0usize..6,
        x in prop::array::uniform2(-0.9f64..0.9),
    ) {
        let e = Expr::parse([
            "quadratic 1 -0.5 2 0.3 -0.2 1",
            "radial_quadratic 1.5 -0.5 0.1 -0.2",
            "radial_power 1 3",
            "radial_exp 1 0.5",
            "trig_product 0.3 2 3",
            "radial_exp 1 0.5 + radial_quadratic 0.2 -0.2",
        ][which]).unwrap();
        // test-side central differences on the value only
        let h = 1e-5;
        let f = |dx: f64, dy: f64| e.value(&[x[0] + dx, x[1] + dy]);
        let g = e.gradient(&x);
        prop_assert!((g[0] - (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h)).abs() <= 1e-7);
        prop_assert!((g[1] - (f(0.0, h) - f(0.0, -h)) / (2.0 * h)).abs() <= 1e-7);
        let k = 1e-3;
        let hxx = (f(k, 0.0) - 2.0 * f(0.0, 0.0) + f(-k, 0.0)) / (k * k);
        let hyy = (f(0.0, k) - 2.0 * f(0.0, 0.0) + f(0.0, -k)) / (k * k);
        let hxy = (f(k, k) - f(k, -k) - f(-k, k) + f(-k, -k)) / (4.0 * k * k);
        let hs = e.hessian(&x);
        prop_assert!((hs.get(0, 0) - hxx).abs() <= 1e-4);
        prop_assert!((hs.get(1, 1) - hyy).abs() <= 1e-4);
        prop_assert!((hs.get(0, 1) - hxy).abs() <= 1e-4);
    }
}

#[test]
fn x_z_entries_are_regular_without_orthogonality() {
    for a in ["zero", "const_shift 1.5", "xz_matrix 0.7"] {
        let rep = regularity_check(&data(a, "const 1"), &unit_box(), 500, 3).unwrap();
        for r in [&rep.orthogonal, &rep.without_orthogonality] {
            assert!(r.pass, "{a}");
            assert!(r.constant("max_abs_form").unwrap() <= 1e-8, "{a}");
        }
    }
}

#[test]
fn quadratic_isotropic_regularity() {
    let strict = regularity_check(&data("quad_iso 1", "const 1"), &unit_box(), 500, 3).unwrap();
    assert!(strict.orthogonal.pass && strict.orthogonal.has_flag("strict"));
    // D²_p(c|p|²I)[ξ,ξ,η,η] = 2c|ξ|²|η|² for unit vectors
    assert!((strict.orthogonal.constant("min_form").unwrap() - 2.0).abs() < 1e-12);

    let bad = regularity_check(&data("quad_iso -1", "const 1"), &unit_box(), 500, 3).unwrap();
    assert!(!bad.orthogonal.pass);
    let w = bad.orthogonal.worst_witness.unwrap();
    assert!((w.value + 2.0).abs() < 1e-12);
}

#[test]
fn quadratic_growth_fails_little_o() {
    let rep = structure_growth_check(&data("quad_iso 1", "const 1"), GrowthCondition::C114, &unit_box(), 400, 9).unwrap();
    assert!(!rep.pass);
    let a = &rep.quantities[0];
    assert_eq!(a.name, "a");
    assert!((a.slope - 2.0).abs() < 1e-9, "{}", a.slope);
    assert!(!a.little_o && a.big_o);
    // p·D_pA = 2|p|² only needs O(|p|²)
    assert!(rep.quantities[1].pass);
}

#[test]
fn power_growth_slope() {
    let rep = structure_growth_check(&data("power_iso 1 1.5", "const 1"), GrowthCondition::C114, &unit_box(), 400, 9).unwrap();
    assert!((rep.quantities[0].slope - 1.5).abs() < 1e-9);
    assert!(rep.pass);
    let c116 = structure_growth_check(&data("power_iso 1 1.5", "const 1"), GrowthCondition::C116, &unit_box(), 400, 9).unwrap();
    assert!((c116.quantities[0].slope - 0.5).abs() < 1e-9);
    assert!(c116.pass);
}

#[test]
fn constant_data_passes_every_growth_condition() {
    for which in [GrowthCondition::C114, GrowthCondition::C115, GrowthCondition::C116] {
        let rep = structure_growth_check(&data("const_shift 1", "const 1"), which, &unit_box(), 400, 1).unwrap();
        assert!(rep.pass, "{which:?}");
        assert!(rep.quantities.iter().all(|q| q.slope == 0.0));
    }
}

#[test]
fn gradient_quadratic_b_fails_c116() {
    let rep = structure_growth_check(&data("zero", "grad_quad 1 1"), GrowthCondition::C116, &unit_box(), 400, 1).unwrap();
    let dp_b = rep.quantities.iter().find(|q| q.name == "dp_b").unwrap();
    assert!((dp_b.slope - 1.0).abs() < 1e-9);
    assert!(dp_b.pass);
    let c114 = structure_growth_check(&data("zero", "grad_quad 1 1"), GrowthCondition::C114, &unit_box(), 400, 1).unwrap();
    assert!(c114.pass);
}

#[test]
fn growth_needs_one_sample_per_shell() {
    assert!(structure_growth_check(&data("zero", "const 1"), GrowthCondition::C114, &unit_box(), 3, 1).is_err());
}

#[test]
fn classify_examples() {
    let op = parse_operator("monge_ampere_root", 2).unwrap();
    let aug = data("zero", "const 2");
    let grid = Arc::new(Grid::new(DomainSpec::disc([0.0, 0.0], 1.0, 1.0 / 16.0).unwrap()).unwrap());
    let f = |s: &str| GridFunction::sample(grid.clone(), &Expr::parse(s).unwrap());

    let exact = classify(&op, &aug, &f("radial_quadratic 1 0")).unwrap();
    assert!(exact.admissible && exact.subsolution && exact.supersolution);
    assert!(exact.max_residual.abs() < 1e-12);

    let sub = classify(&op, &aug, &f("radial_quadratic 1.1 -0.1")).unwrap();
    assert!(sub.subsolution && !sub.supersolution);
    assert!((sub.min_residual - 0.2).abs() < 1e-12);

    let sup = classify(&op, &aug, &f("radial_quadratic 0.9 0.1")).unwrap();
    assert!(!sup.subsolution && sup.supersolution);

    let concave = classify(&op, &aug, &f("radial_quadratic -1 1")).unwrap();
    assert!(!concave.admissible && !concave.subsolution);
    assert!(concave.min_margin < 0.0);
}

#[test]
fn sample_box_must_match_dimension() {
    let b = SampleBox { x: vec![(0.0, 1.0)], z: (0.0, 1.0), p: (0.0, 1.0) };
    assert!(regularity_check(&data("zero", "const 1"), &b, 10, 1).is_err());
}

#[test]
fn manufactured_right_hand_side() {
    let p = common::disc_problem(
        "monge_ampere_root",
        "quad_iso 0.05",
        "manufactured",
        "radial_exp 1 0.5",
        "radial_exp 1 0.5",
        None,
        Some("radial_exp 1 0.5"),
        1.0 / 16.0,
    );
    let e = Expr::parse("radial_exp 1 0.5").unwrap();
    let x = [0.3, -0.2];
    let g = e.gradient(&x);
    let m = e.hessian(&x) - SymMat::identity(2) * (0.05 * (g[0] * g[0] + g[1] * g[1]));
    let want = (m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(0, 1)).sqrt();
    assert!((p.aug.b(&x, e.value(&x), &g) - want).abs() < 1e-12);
}
