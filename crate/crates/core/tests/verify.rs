mod common;

use std::sync::Arc;

use common::{disc_problem, ma_disc};
use hessfield_core::augmentation::ProblemSpec;
use hessfield_core::catalog::{build_augmented, parse_operator, ACatalog, BCatalog, Expr};
use hessfield_core::error::Error;
use hessfield_core::griddisc::{DomainSpec, GridFunction, DXX, DYY};
use hessfield_core::solver::{DiscreteProblem, SolverConfig};
use hessfield_core::verify::{
    boundary_identity_check, default_eps_ladder, default_k_ladder, estimate_monitor, g_function_scan, observed_orders, verify_lemma21,
    verify_lemma22, verify_phi, verify_phi_from, BarrierCertificate, CertificateKind, DEFAULT_R_LADDER,
};

fn solved(p: ProblemSpec) -> (DiscreteProblem, GridFunction) {
    let dp = DiscreteProblem::new(p).unwrap();
    let (u, _) = dp.continuation_solve(&SolverConfig::default()).unwrap();
    (dp, u)
}

/// Δu = 1 with φ = |x|²/4 and ū = |x|²/4 + β(|x|² − 1), so Δū = 1 + 4β.
fn poisson(beta: f64, h: f64) -> ProblemSpec {
    let sub = format!("radial_quadratic {} {}", 0.25 + beta, -beta);
    disc_problem("k_hessian 1", "zero", "const 1", "radial_quadratic 0.25 0", &sub, None, Some("radial_quadratic 0.25 0"), h)
}

#[test]
fn lemma21_poisson_matches_direct_evaluation() {
    let h = 1.0 / 16.0;
    let beta = 0.25;
    let (dp, u) = solved(poisson(beta, h));
    let cert = verify_lemma21(&dp, &u, &default_k_ladder()).unwrap();
    assert!(cert.pass && cert.epsilon > 0.0);
    assert_eq!(cert.k, Some(1.0));

    // oracle: Δ_h e^{K(ū−u)} / (1 + 2) straight from the stencils
    let g = dp.grid();
    let eta: Vec<f64> = dp.subsolution().values().iter().zip(u.values()).map(|(s, v)| (s - v).exp()).collect();
    let want = (0..g.n_unknowns())
        .map(|i| g.stencil(i).unwrap().terms.iter().map(|(j, w)| (w[DXX] + w[DYY]) * eta[*j]).sum::<f64>() / 3.0)
        .fold(f64::INFINITY, f64::min);
    assert!((cert.epsilon - want).abs() < 1e-10, "{} vs {want}", cert.epsilon);
    // continuum value at the center: 4β e^{−β} / 3
    let closed = 4.0 * beta * (-beta).exp() / 3.0;
    assert!((cert.epsilon - closed).abs() < 10.0 * h * h, "{} vs {closed}", cert.epsilon);
}

#[test]
fn lemma21_is_monotone_in_strictness() {
    let eps: Vec<f64> = [0.05, 0.1, 0.25, 0.5]
        .iter()
        .map(|b| {
            let (dp, u) = solved(poisson(*b, 1.0 / 16.0));
            verify_lemma21(&dp, &u, &default_k_ladder()).unwrap().epsilon
        })
        .collect();
    assert!(eps.windows(2).all(|w| w[1] >= w[0]), "{eps:?}");
}

#[test]
fn lemma21_degenerate_barrier_fails() {
    let dp = DiscreteProblem::new(ma_disc(1.0 / 32.0)).unwrap();
    let u = dp.subsolution().clone();
    let cert = verify_lemma21(&dp, &u, &default_k_ladder()).unwrap();
    assert!(!cert.pass);
    assert!(cert.epsilon <= 0.0);
    assert_eq!(cert.tried, 21);
}

#[test]
fn lemma21_monge_ampere_disc() {
    let (dp, u) = solved(ma_disc(1.0 / 32.0));
    let cert = verify_lemma21(&dp, &u, &default_k_ladder()).unwrap();
    assert!(cert.pass);
    assert_eq!(cert.kind, CertificateKind::Lemma21);
    assert!(cert.k.unwrap() <= 2f64.powi(20));
    assert!(cert.epsilon > 0.0);
}

#[test]
fn lemma22_and_phi_on_disc() {
    let (dp, u) = solved(ma_disc(1.0 / 32.0));
    let cert = verify_lemma22(&dp, &u, &default_k_ladder(), &default_eps_ladder()).unwrap();
    assert!(cert.pass, "{cert:?}");
    assert!(cert.eps2.unwrap() > 0.0 && cert.slack >= 0.0);

    let phi = verify_phi_from(&dp, &u, &cert).unwrap();
    assert!(phi.pass, "{phi:?}");
    assert!(phi.max_boundary_abs <= 1e-10);
    assert!(phi.max_interior <= phi.interior_tol);

    // flipping K's sign makes Φ positive inside
    let flipped = verify_phi(&dp, &u, -cert.k.unwrap(), cert.eps2.unwrap()).unwrap();
    assert!(!flipped.pass);
    assert!(flipped.max_interior > flipped.interior_tol);
    assert!(flipped.witness_node < dp.grid().n_unknowns());
}

#[test]
fn lemma22_degenerate_and_corners() {
    let dp = DiscreteProblem::new(ma_disc(1.0 / 32.0)).unwrap();
    let u = dp.subsolution().clone();
    let cert = verify_lemma22(&dp, &u, &default_k_ladder(), &default_eps_ladder()).unwrap();
    assert!(!cert.pass);

    let phi = verify_phi(&dp, &u, 1.0, 0.1).unwrap();
    assert_eq!(phi.max_boundary_abs, 0.0);
    assert_eq!(phi.max_interior, 0.0);

    let op = parse_operator("k_hessian 1", 2).unwrap();
    let aug = build_augmented(ACatalog::Zero, BCatalog::Const(1.0), &op, None).unwrap();
    let rect = ProblemSpec {
        op,
        aug,
        domain: DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 1.0 / 16.0).unwrap(),
        phi: common::expr("radial_quadratic 1 0"),
        subsolution: common::expr("radial_quadratic 1 0"),
        supersolution: None,
        exact: None,
    };
    let dp = DiscreteProblem::new(rect).unwrap();
    let u = dp.subsolution().clone();
    assert!(matches!(verify_lemma22(&dp, &u, &[1.0], &[0.1]), Err(Error::MissingGammaExtension { .. })));
    assert!(matches!(boundary_identity_check(&dp, &u), Err(Error::CornerDomain)));
    assert!(matches!(g_function_scan(&dp, &u, &DEFAULT_R_LADDER), Err(Error::CornerDomain)));
}

#[test]
fn lemma22_poisson_reports_an_outcome() {
    let (dp, u) = solved(poisson(0.25, 1.0 / 16.0));
    let cert = verify_lemma22(&dp, &u, &default_k_ladder(), &default_eps_ladder()).unwrap();
    assert!(cert.tried >= 1);
    assert_eq!(cert.pass, cert.slack >= 0.0);
}

#[test]
fn phi_needs_a_passing_certificate() {
    let dp = DiscreteProblem::new(ma_disc(1.0 / 16.0)).unwrap();
    let u = dp.subsolution().clone();
    let failed = BarrierCertificate {
        kind: CertificateKind::Lemma22,
        k: Some(1.0),
        eps2: Some(0.1),
        epsilon: -1.0,
        slack: -1.0,
        min_node: None,
        min_pos: None,
        pass: false,
        tried: 1,
    };
    assert!(matches!(verify_phi_from(&dp, &u, &failed), Err(Error::CertificateMissing)));
}

#[test]
fn boundary_identity_trivial_cases() {
    let p = disc_problem("k_hessian 1", "zero", "const 1", "const 1", "radial_quadratic 1 0", None, None, 1.0 / 16.0);
    let dp = DiscreteProblem::new(p).unwrap();
    let one = GridFunction::from_fn(dp.grid().clone(), |_| 1.0);
    let rep = boundary_identity_check(&dp, &one).unwrap();
    assert!(rep.max_discrepancy < 1e-12 && rep.max_lhs < 1e-12);

    let dp = DiscreteProblem::new(ma_disc(1.0 / 16.0)).unwrap();
    let u = GridFunction::sample(dp.grid().clone(), &Expr::parse("radial_quadratic 1 0").unwrap());
    let rep = boundary_identity_check(&dp, &u).unwrap();
    assert!(rep.max_discrepancy < 1e-10);
}

#[test]
fn boundary_identity_first_order_on_smooth_solution() {
    // B ≡ 2 with a non-polynomial φ leaves D_γ(u − φ) ≠ 0
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let d: Vec<f64> = hs
        .iter()
        .map(|h| {
            let p = disc_problem(
                "monge_ampere_root",
                "zero",
                "const 2",
                "radial_exp 1 0.5",
                "radial_exp 1 0.5 + radial_quadratic 0.5 -0.5",
                None,
                None,
                *h,
            );
            let (dp, u) = solved(p);
            boundary_identity_check(&dp, &u).unwrap().max_discrepancy
        })
        .collect();
    for o in observed_orders(&hs, &d) {
        assert!(o >= 0.8, "order {o}: {d:?}");
    }
}

#[test]
fn g_scan_closed_forms() {
    let (dp, u) = solved(ma_disc(1.0 / 32.0));
    let rep = g_function_scan(&dp, &u, &DEFAULT_R_LADDER).unwrap();
    for (row, vals) in rep.rows.iter().zip(&rep.values) {
        let want = (2.0 * row.r).sqrt() - 2.0;
        assert!(vals.iter().all(|g| (g - want).abs() < 1e-8));
    }
    assert!(rep.monotone && rep.pass);

    // trace: g = ω_ττ + R − B is affine in R
    let p = disc_problem("k_hessian 1", "zero", "const 1", "radial_quadratic 0.25 0", "radial_quadratic 0.5 -0.25", None, None, 1.0 / 16.0);
    let (dp, u) = solved(p);
    let rep = g_function_scan(&dp, &u, &[1.0, 2.0, 4.0, 8.0]).unwrap();
    let mins: Vec<f64> = rep.rows.iter().map(|r| r.min_g).collect();
    for (w, r) in mins.windows(2).zip([1.0, 2.0, 4.0]) {
        assert!((w[1] - w[0] - r).abs() < 1e-9);
    }
    assert!(rep.monotone);
}

#[test]
fn g_scan_is_monotone_for_every_kind() {
    for op in ["k_hessian 1", "k_hessian 2", "monge_ampere_root", "log_det", "quotient 2 1"] {
        let b = if op == "log_det" { "const 1" } else { "const 2" };
        let p = disc_problem(op, "zero", b, "radial_quadratic 1 0", "radial_quadratic 1.5 -0.5", None, None, 1.0 / 16.0);
        let (dp, u) = solved(p);
        let rep = g_function_scan(&dp, &u, &DEFAULT_R_LADDER).unwrap();
        assert!(rep.monotone, "{op}");
    }
}

#[test]
fn monitor_examples() {
    let dp = DiscreteProblem::new(ma_disc(1.0 / 16.0)).unwrap();
    let lin = GridFunction::from_fn(Arc::clone(dp.grid()), |x| 0.3 * x[0] - 0.4 * x[1] + 1.0);
    let m = estimate_monitor(&dp, &lin).unwrap();
    assert!((m.sup_du - 0.5).abs() < 1e-12 && (m.ratio - 1.0).abs() < 1e-12);
    assert!(m.sup_d2u < 1e-9);
    assert!(m.v_max_on_boundary);

    let q = GridFunction::sample(dp.grid().clone(), &Expr::parse("radial_quadratic 1 0").unwrap());
    let m = estimate_monitor(&dp, &q).unwrap();
    assert!((m.sup_d2u - 2.0).abs() < 1e-9);
    assert!((m.sup_du_boundary - 2.0).abs() < 1e-9);
    assert!((m.ratio - 1.0).abs() < 1e-9);
}

#[test]
fn monitor_hessian_bound_is_stable() {
    let s: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
        .iter()
        .map(|h| {
            let (dp, u) = solved(ma_disc(*h));
            estimate_monitor(&dp, &u).unwrap().sup_d2u
        })
        .collect();
    let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!((hi - lo) / lo <= 0.05, "{s:?}");
}
