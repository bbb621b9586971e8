mod common;

use std::collections::HashMap;

use common::{disc_problem, expr, ma_disc};
use hessfield_core::augmentation::{AugmentedData, ProblemSpec};
use hessfield_core::catalog::{build_augmented, parse_operator, ACatalog, BCatalog, Expr};
use hessfield_core::error::Error;
use hessfield_core::griddisc::{DomainSpec, Field, GridFunction, DXX, DYY};
use hessfield_core::linalg::Preconditioner;
use hessfield_core::report::fit_slope;
use hessfield_core::sampling::Sampler;
use hessfield_core::solver::{DiscreteProblem, LinearSolver, SolverConfig};
use hessfield_core::symcore::SymMat;
use hessfield_core::verify::observed_orders;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Dense Gaussian elimination with partial pivoting; test oracle only.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|i, j| a[*i][c].abs().total_cmp(&a[*j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn poisson(h: f64) -> ProblemSpec {
    disc_problem("k_hessian 1", "zero", "affine 1 0.5 -0.3", "const 0", "radial_quadratic 1 -1", None, None, h)
}

#[test]
fn residual_examples() {
    let dp = DiscreteProblem::new(ma_disc(1.0 / 16.0)).unwrap();
    let r0 = dp.residual(dp.subsolution(), 0.0).unwrap();
    assert!(max_abs(r0.values()) < 1e-12);

    for (b, want) in [("const 1", 0.0), ("const 2", -1.0)] {
        let p = disc_problem("monge_ampere_root", "zero", b, "radial_quadratic 0.5 0", "radial_quadratic 0.5 0", None, None, 1.0 / 16.0);
        let dp = DiscreteProblem::new(p).unwrap();
        let u = GridFunction::sample(dp.grid().clone(), &Expr::parse("radial_quadratic 0.5 0").unwrap());
        let r = dp.residual(&u, 1.0).unwrap();
        let n = dp.grid().n_unknowns();
        assert!(r.values()[..n].iter().all(|v| (v - want).abs() < 1e-12), "{b}");
        assert!(r.values()[n..].iter().all(|v| v.abs() < 1e-15));
    }
}

#[test]
fn laplacian_linearization_is_the_discrete_laplacian() {
    let dp = DiscreteProblem::new(poisson(1.0 / 16.0)).unwrap();
    let lin = dp.assemble_linearized(dp.subsolution().values(), 1.0).unwrap();
    let g = dp.grid();
    for i in 0..g.n_unknowns() {
        let mut want: HashMap<usize, f64> = HashMap::new();
        for (j, w) in &g.stencil(i).unwrap().terms {
            *want.entry(*j).or_default() += w[DXX] + w[DYY];
        }
        for (j, w) in want {
            assert!((lin.matrix.get(i, j) - w).abs() < 1e-9 * w.abs().max(1.0));
        }
    }
    // no zero-order term: constants are annihilated at interior nodes
    let ones = vec![1.0; g.len()];
    let lv = lin.apply(&ones);
    assert!(max_abs(&lv[..g.n_unknowns()]) < 1e-8);
}

#[test]
fn linear_problem_takes_one_newton_step() {
    let dp = DiscreteProblem::new(poisson(1.0 / 8.0)).unwrap();
    let cfg = SolverConfig::default();
    let (u, trace) = dp.newton_solve(dp.subsolution(), 1.0, &cfg).unwrap();
    assert_eq!(trace.iterations, 1);
    assert!(*trace.residual_history.last().unwrap() <= 1e-12);

    // oracle: assemble Δ_h from the stencils and solve densely
    let g = dp.grid();
    let n = g.n_unknowns();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let x = g.nodes()[i].pos;
        b[i] = 1.0 + 0.5 * x[0] - 0.3 * x[1];
        for (j, w) in &g.stencil(i).unwrap().terms {
            let c = w[DXX] + w[DYY];
            if *j < n {
                a[i][*j] += c;
            } else {
                b[i] -= c * dp.phi()[*j];
            }
        }
    }
    let want = dense_solve(a, b);
    for i in 0..n {
        assert!((u.values()[i] - want[i]).abs() <= 1e-12, "node {i}: {} vs {}", u.values()[i], want[i]);
    }
}

fn gateaux_slope(dp: &DiscreteProblem, u: &[f64], v: &[f64], t: f64) -> f64 {
    let lin = dp.assemble_linearized(u, t).unwrap();
    let lv = lin.apply(v);
    let (r0, _) = dp.residual_with_margin(u, t).unwrap();
    let eps = [1e-4, 1e-5, 1e-6];
    let errs: Vec<f64> = eps
        .iter()
        .map(|e| {
            let up: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + e * b).collect();
            let (r1, _) = dp.residual_with_margin(&up, t).unwrap();
            let d: Vec<f64> = r1.iter().zip(&r0).zip(&lv).map(|((a, b), l)| (a - b) / e - l).collect();
            max_abs(&d)
        })
        .collect();
    let lx: Vec<f64> = eps.iter().map(|e| e.log10()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.log10()).collect();
    fit_slope(&lx, &ly)
}

/// Random admissible states: ū plus an h²-scaled nodal perturbation.
fn random_states(dp: &DiscreteProblem, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut s = Sampler::new(seed);
    let g = dp.grid();
    let (n, h2) = (g.n_unknowns(), g.h() * g.h());
    let mut out = Vec::new();
    while out.len() < count {
        let mut u = dp.subsolution().values().to_vec();
        let mut v = vec![0.0; g.len()];
        for k in 0..n {
            u[k] += 0.05 * h2 * s.range(-1.0, 1.0);
            v[k] = h2 * s.range(-1.0, 1.0);
        }
        let t = s.uniform();
        if dp.residual_with_margin(&u, t).is_ok() {
            out.push((u, v, t));
        }
    }
    out
}

#[test]
fn jacobian_matches_gateaux_differences() {
    let specs = [
        ("monge_ampere_root", "quad_iso 0.05", "grad_quad 1.5 0.1"),
        ("k_hessian 2", "xz_matrix 0.2", "const 1.5"),
        ("log_det", "power_iso 0.1 1.5", "const 1"),
    ];
    for (op, a, b) in specs {
        let p = disc_problem(op, a, b, "radial_quadratic 1.3 -0.3", "radial_quadratic 1.3 -0.3", None, None, 1.0 / 16.0);
        let dp = DiscreteProblem::new(p).unwrap();
        for (u, v, t) in random_states(&dp, 20, 17) {
            let slope = gateaux_slope(&dp, &u, &v, t);
            assert!((slope - 1.0).abs() <= 0.2, "{op} / {a}: slope {slope}");
        }
    }
}

#[test]
fn z_dependence_enters_the_diagonal() {
    let p = disc_problem("k_hessian 1", "xz_matrix 0.5", "const 1", "const 0", "radial_quadratic 2 -2", None, None, 1.0 / 16.0);
    let dp = DiscreteProblem::new(p).unwrap();
    let g = dp.grid();
    let lin = dp.assemble_linearized(dp.subsolution().values(), 1.0).unwrap();
    let lv = lin.apply(&vec![1.0; g.len()]);
    // F = trace, D_zA = 0.5 I: L·1 = −tr(0.5 I) = −1
    for i in 0..g.n_unknowns() {
        assert!((lv[i] + 1.0).abs() < 1e-9, "{}", lv[i]);
    }
}

#[test]
fn inadmissible_start_is_rejected() {
    let dp = DiscreteProblem::new(ma_disc(1.0 / 16.0)).unwrap();
    let bad = GridFunction::sample(dp.grid().clone(), &Expr::parse("radial_quadratic -1 2").unwrap());
    let err = dp.newton_solve(&bad, 1.0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NotAdmissible { .. }), "{err}");

    let mut p = ma_disc(1.0 / 16.0);
    p.subsolution = expr("radial_quadratic -1 2");
    p.phi = expr("radial_quadratic -1 2");
    assert!(matches!(DiscreteProblem::new(p).unwrap_err(), Error::NotAdmissible { .. }));
}

#[test]
fn subsolution_must_match_boundary_data() {
    let mut p = ma_disc(1.0 / 16.0);
    p.subsolution = expr("radial_quadratic 1.1 0");
    assert!(matches!(DiscreteProblem::new(p).unwrap_err(), Error::InvalidProblem(_)));
}

#[test]
fn right_hand_side_must_exceed_a0() {
    let p = disc_problem("monge_ampere_root", "zero", "const -1", "radial_quadratic 1 0", "radial_quadratic 1 0", None, None, 1.0 / 16.0);
    assert!(matches!(DiscreteProblem::new(p).unwrap_err(), Error::InvalidProblem(_)));
}

#[test]
fn fixed_point_of_the_family() {
    let h = 1.0 / 16.0;
    let sub = "radial_exp 1 0.5";
    let probe = DiscreteProblem::new(disc_problem("monge_ampere_root", "zero", "const 1", sub, sub, None, None, h)).unwrap();
    let key = |x: &[f64]| ((x[0] * 1e9).round() as i64, (x[1] * 1e9).round() as i64);
    let table: HashMap<(i64, i64), f64> =
        (0..probe.grid().n_unknowns()).map(|i| (key(&probe.grid().nodes()[i].pos), probe.frozen_sub_values()[i])).collect();
    let op = parse_operator("monge_ampere_root", 2).unwrap();
    let aug =
        AugmentedData::new(2, Box::new(|_, _, _| SymMat::zeros(2)), Box::new(move |x, _, _| table.get(&key(x)).copied().unwrap_or(1.0)))
            .with_dp_b(Box::new(|_, _, _| vec![0.0, 0.0]))
            .with_dz_b(Box::new(|_, _, _| 0.0));
    let spec = ProblemSpec {
        op,
        aug,
        domain: DomainSpec::disc([0.0, 0.0], 1.0, h).unwrap(),
        phi: expr(sub),
        subsolution: expr(sub),
        supersolution: None,
        exact: None,
    };
    let dp = DiscreteProblem::new(spec).unwrap();
    let (u, rep) = dp.continuation_solve(&SolverConfig::default()).unwrap();
    assert_eq!(rep.newton_iterations, 0);
    assert!(rep.steps.iter().all(|s| s.trace.iterations == 0));
    assert_eq!(u.values(), dp.subsolution().values());
}

#[test]
fn monge_ampere_disc() {
    let cfg = SolverConfig::default();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let dp = DiscreteProblem::new(ma_disc(h)).unwrap();
        let (u, rep) = dp.continuation_solve(&cfg).unwrap();
        assert!(rep.max_error.unwrap() <= 5e-3);
        assert!(rep.final_residual <= cfg.newton_tol);
        assert!(rep.min_margin > 0.0);
        assert!(rep.comparison.lower_within_tol && rep.comparison.upper == Some(true));
        assert_eq!(rep.steps.last().unwrap().t, 1.0);
        assert_eq!(u.values().len(), dp.grid().len());
        for s in &rep.steps {
            assert!(s.trace.residual_history.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

#[test]
fn quadratic_gradient_term_run() {
    let h = 1.0 / 32.0;
    let p =
        disc_problem("monge_ampere_root", "quad_iso 0.05", "const 2", "radial_quadratic 1 0", "radial_quadratic 1.3 -0.3", None, None, h);
    let dp = DiscreteProblem::new(p).unwrap();
    let (u, rep) = dp.continuation_solve(&SolverConfig::default()).unwrap();
    assert!(rep.min_margin > 0.0);
    assert!(rep.steps.iter().all(|s| s.trace.min_margin > 0.0));
    let sub = dp.subsolution().values();
    assert!(u.values().iter().zip(sub).all(|(a, b)| a >= &(b - 10.0 * h * h)));
    assert!(rep.comparison.lower_within_tol);
}

#[test]
fn iterative_and_direct_solvers_agree() {
    let p = || {
        disc_problem(
            "monge_ampere_root",
            "quad_iso 0.05",
            "const 2",
            "radial_quadratic 1 0",
            "radial_quadratic 1.3 -0.3",
            None,
            None,
            1.0 / 16.0,
        )
    };
    let direct = DiscreteProblem::new(p()).unwrap().continuation_solve(&SolverConfig::default()).unwrap().0;
    for pre in [Preconditioner::Jacobi, Preconditioner::Ilu0] {
        let cfg = SolverConfig { linear_solver: LinearSolver::IterativeBicg, preconditioner: pre, ..Default::default() };
        let (u, rep) = DiscreteProblem::new(p()).unwrap().continuation_solve(&cfg).unwrap();
        assert!(rep.steps.iter().any(|s| s.trace.linear_iterations > 0));
        for (a, b) in u.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn manufactured_smooth_solution_is_second_order() {
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let errs: Vec<f64> = hs
        .iter()
        .map(|h| {
            let p = disc_problem(
                "monge_ampere_root",
                "quad_iso 0.05",
                "manufactured",
                "radial_exp 1 0.5",
                "radial_exp 1 0.5 + radial_quadratic 0.2 -0.2",
                None,
                Some("radial_exp 1 0.5"),
                *h,
            );
            let dp = DiscreteProblem::new(p).unwrap();
            dp.continuation_solve(&SolverConfig::default()).unwrap().1.max_error.unwrap()
        })
        .collect();
    for o in observed_orders(&hs, &errs) {
        assert!((1.7..=2.3).contains(&o), "order {o}: {errs:?}");
    }
}

#[test]
fn newton_on_the_unit_square() {
    let h = 1.0 / 64.0;
    let op = parse_operator("monge_ampere_root", 2).unwrap();
    let aug = build_augmented(ACatalog::Zero, BCatalog::Const(1.0), &op, None).unwrap();
    let spec = ProblemSpec {
        op,
        aug,
        domain: DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, h).unwrap(),
        phi: expr("radial_quadratic 0.5 0"),
        subsolution: expr("radial_quadratic 0.5 0"),
        supersolution: None,
        exact: None,
    };
    let dp = DiscreteProblem::new(spec).unwrap();
    let start = Expr::parse("radial_quadratic 0.5 0 + trig_product 0.05 3.141592653589793 3.141592653589793").unwrap();
    let u0 = GridFunction::sample(dp.grid().clone(), &start);
    let (u, trace) = dp.newton_solve(&u0, 1.0, &SolverConfig::default()).unwrap();
    assert!(trace.iterations >= 1);
    let exact = Expr::parse("radial_quadratic 0.5 0").unwrap();
    let err = dp.grid().nodes().iter().zip(u.values()).map(|(n, v)| (v - exact.value(&n.pos)).abs()).fold(0.0, f64::max);
    assert!(err <= 5e-3, "{err}");
}

#[test]
fn solver_config_validation() {
    assert!(SolverConfig::default().validate().is_ok());
    assert!(SolverConfig { newton_tol: 0.0, ..Default::default() }.validate().is_err());
    assert!(SolverConfig { damping_min: 2.0, ..Default::default() }.validate().is_err());
    assert!(SolverConfig { continuation_steps: 0, ..Default::default() }.validate().is_err());
}
