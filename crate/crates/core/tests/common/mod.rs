#![allow(dead_code)]

use hessfield_core::augmentation::ProblemSpec;
use hessfield_core::catalog::{build_augmented, parse_operator, ACatalog, BCatalog, Expr};
use hessfield_core::griddisc::DomainSpec;

pub fn expr(s: &str) -> Box<Expr> {
    Box::new(Expr::parse(s).unwrap())
}

/// Disc problem from catalog ids; `exact` also feeds a manufactured B.
pub fn disc_problem(op: &str, a: &str, b: &str, phi: &str, sub: &str, sup: Option<&str>, exact: Option<&str>, h: f64) -> ProblemSpec {
    let op = parse_operator(op, 2).unwrap();
    let exact = exact.map(|e| Expr::parse(e).unwrap());
    let aug = build_augmented(ACatalog::parse(a).unwrap(), BCatalog::parse(b).unwrap(), &op, exact.as_ref()).unwrap();
    ProblemSpec {
        op,
        aug,
        domain: DomainSpec::disc([0.0, 0.0], 1.0, h).unwrap(),
        phi: expr(phi),
        subsolution: expr(sub),
        supersolution: sup.map(|s| expr(s) as Box<_>),
        exact: exact.map(|e| Box::new(e) as Box<_>),
    }
}

/// Monge–Ampère root, A = 0, B ≡ 2, φ = |x|², u* = |x|², ū = |x|² + 0.1(|x|² − 1).
pub fn ma_disc(h: f64) -> ProblemSpec {
    disc_problem(
        "monge_ampere_root",
        "zero",
        "const 2",
        "radial_quadratic 1 0",
        "radial_quadratic 1.1 -0.1",
        Some("radial_quadratic 1 0.05"),
        Some("radial_quadratic 1 0"),
        h,
    )
}
