//! Named closed-form fields, augmenting matrices and right-hand sides.
//!
//! Everything here is parsed from short strings such as `"radial_quadratic 1.1 -0.1"`
//! or `"quad_iso 0.5"` and carries analytic derivatives.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::{cos, exp, pow, sin, sqrt};

use crate::augmentation::AugmentedData;
use crate::error::{Error, Result};
use crate::griddisc::{Field, Point};
use crate::operator::{OperatorKind, OperatorSpec};
use crate::symcore::SymMat;

fn parse_args(id: &str, s: &str) -> Result<(String, Vec<f64>)> {
    let mut it = s.split_whitespace();
    let name = it.next().ok_or_else(|| Error::UnknownCatalogId(id.to_string()))?.to_string();
    let args = it
        .map(|t| t.parse::<f64>().map_err(|_| Error::UnknownCatalogId(alloc::format!("{id}: bad number {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((name, args))
}

fn arity(id: &str, args: &[f64], lo: usize, hi: usize) -> Result<()> {
    if args.len() < lo || args.len() > hi {
        return Err(Error::UnknownCatalogId(alloc::format!("{id}: expected {lo}..={hi} numbers, got {}", args.len())));
    }
    Ok(())
}

/// Closed-form scalar field on the plane.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// a x² + b xy + c y² + d x + e y + f
    Quadratic([f64; 6]),
    /// a |x − c|² + b
    RadialQuadratic {
        a: f64,
        b: f64,
        center: Point,
    },
    /// a |x|^q + b
    RadialPower {
        a: f64,
        q: f64,
        b: f64,
    },
    /// a exp(s |x|²)
    RadialExp {
        a: f64,
        s: f64,
    },
    /// a sin(kx x) sin(ky y)
    TrigProduct {
        a: f64,
        kx: f64,
        ky: f64,
    },
    Sum(Vec<Expr>),
}

impl Expr {
    /// Parses `"name args.."` terms joined by `" + "`.
    pub fn parse(s: &str) -> Result<Expr> {
        let terms: Vec<&str> = s.split(" + ").collect();
        if terms.len() > 1 {
            return Ok(Expr::Sum(terms.iter().map(|t| Expr::parse(t)).collect::<Result<_>>()?));
        }
        let (name, a) = parse_args(s, s)?;
        let e = match name.as_str() {
            "const" => {
                arity(s, &a, 1, 1)?;
                Expr::Const(a[0])
            }
            "quadratic" => {
                arity(s, &a, 6, 6)?;
                Expr::Quadratic([a[0], a[1], a[2], a[3], a[4], a[5]])
            }
            "radial_quadratic" => {
                arity(s, &a, 2, 4)?;
                let center = [a.get(2).copied().unwrap_or(0.0), a.get(3).copied().unwrap_or(0.0)];
                Expr::RadialQuadratic { a: a[0], b: a[1], center }
            }
            "radial_power" => {
                arity(s, &a, 2, 3)?;
                Expr::RadialPower { a: a[0], q: a[1], b: a.get(2).copied().unwrap_or(0.0) }
            }
            "radial_exp" => {
                arity(s, &a, 2, 2)?;
                Expr::RadialExp { a: a[0], s: a[1] }
            }
            "trig_product" => {
                arity(s, &a, 3, 3)?;
                Expr::TrigProduct { a: a[0], kx: a[1], ky: a[2] }
            }
            _ => return Err(Error::UnknownCatalogId(s.to_string())),
        };
        Ok(e)
    }
}

impl Field for Expr {
    fn value(&self, x: &Point) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match self {
            Expr::Const(c) => *c,
            Expr::Quadratic([a, b, c, d, e, f]) => a * x[0] * x[0] + b * x[0] * x[1] + c * x[1] * x[1] + d * x[0] + e * x[1] + f,
            Expr::RadialQuadratic { a, b, center } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                a * (dx * dx + dy * dy) + b
            }
            Expr::RadialPower { a, q, b } => a * pow(sqrt(r2), *q) + b,
            Expr::RadialExp { a, s } => a * exp(s * r2),
            Expr::TrigProduct { a, kx, ky } => a * sin(kx * x[0]) * sin(ky * x[1]),
            Expr::Sum(t) => t.iter().map(|e| e.value(x)).sum(),
        }
    }

    fn gradient(&self, x: &Point) -> Point {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match self {
            Expr::Const(_) => [0.0, 0.0],
            Expr::Quadratic([a, b, c, d, e, _]) => [2.0 * a * x[0] + b * x[1] + d, b * x[0] + 2.0 * c * x[1] + e],
            Expr::RadialQuadratic { a, center, .. } => [2.0 * a * (x[0] - center[0]), 2.0 * a * (x[1] - center[1])],
            Expr::RadialPower { a, q, .. } => {
                if r2 == 0.0 {
                    return [0.0, 0.0];
                }
                let c = a * q * pow(r2, 0.5 * q - 1.0);
                [c * x[0], c * x[1]]
            }
            Expr::RadialExp { a, s } => {
                let c = 2.0 * a * s * exp(s * r2);
                [c * x[0], c * x[1]]
            }
            Expr::TrigProduct { a, kx, ky } => [a * kx * cos(kx * x[0]) * sin(ky * x[1]), a * ky * sin(kx * x[0]) * cos(ky * x[1])],
            Expr::Sum(t) => t.iter().fold([0.0, 0.0], |acc, e| {
                let g = e.gradient(x);
                [acc[0] + g[0], acc[1] + g[1]]
            }),
        }
    }

    fn hessian(&self, x: &Point) -> SymMat {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let m = |xx: f64, xy: f64, yy: f64| SymMat::from_upper(2, &[xx, xy, yy]).unwrap_or_else(|_| SymMat::zeros(2));
        match self {
            Expr::Const(_) => SymMat::zeros(2),
            Expr::Quadratic([a, b, c, ..]) => m(2.0 * a, *b, 2.0 * c),
            Expr::RadialQuadratic { a, .. } => m(2.0 * a, 0.0, 2.0 * a),
            Expr::RadialPower { a, q, .. } => {
                if r2 == 0.0 {
                    let d = if *q == 2.0 {
                        2.0 * a
                    } else if *q > 2.0 {
                        0.0
                    } else {
                        f64::NAN
                    };
                    return m(d, 0.0, d);
                }
                // a q r^{q−2} (I + (q−2) x xᵀ / r²)
                let c = a * q * pow(r2, 0.5 * q - 1.0);
                let t = (q - 2.0) / r2;
                m(c * (1.0 + t * x[0] * x[0]), c * t * x[0] * x[1], c * (1.0 + t * x[1] * x[1]))
            }
            Expr::RadialExp { a, s } => {
                let c = 2.0 * a * s * exp(s * r2);
                m(c * (1.0 + 2.0 * s * x[0] * x[0]), c * 2.0 * s * x[0] * x[1], c * (1.0 + 2.0 * s * x[1] * x[1]))
            }
            Expr::TrigProduct { a, kx, ky } => {
                let (sx, cx, sy, cy) = (sin(kx * x[0]), cos(kx * x[0]), sin(ky * x[1]), cos(ky * x[1]));
                m(-a * kx * kx * sx * sy, a * kx * ky * cx * cy, -a * ky * ky * sx * sy)
            }
            Expr::Sum(t) => t.iter().fold(SymMat::zeros(2), |acc, e| acc + e.hessian(x)),
        }
    }
}

/// Parses an operator name: `k_hessian k`, `monge_ampere_root`, `log_det`,
/// `quotient k l`, `trace_squared`.
pub fn parse_operator(s: &str, n: usize) -> Result<OperatorSpec> {
    let mut it = s.split_whitespace();
    let name = it.next().unwrap_or("");
    let ints: Vec<usize> = it
        .map(|t| t.parse::<usize>().map_err(|_| Error::InvalidOperator(alloc::format!("{s}: bad integer {t:?}"))))
        .collect::<Result<_>>()?;
    let kind = match (name, ints.as_slice()) {
        ("k_hessian", [k]) => OperatorKind::KHessian { k: *k },
        ("monge_ampere_root", []) => OperatorKind::MongeAmpereRoot,
        ("log_det", []) => OperatorKind::LogDet,
        ("quotient", [k, l]) => OperatorKind::Quotient { k: *k, l: *l },
        ("trace_squared", []) => OperatorKind::TraceSquared,
        _ => return Err(Error::InvalidOperator(s.to_string())),
    };
    OperatorSpec::new(kind, n)
}

/// Augmenting matrices A(x, z, p). `n` is taken from the operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ACatalog {
    Zero,
    /// c I
    ConstShift(f64),
    /// c |p|² I
    QuadIso(f64),
    /// c |p|^q I
    PowerIso(f64, f64),
    /// c (x xᵀ + z I)
    XzMatrix(f64),
}

impl ACatalog {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, a) = parse_args(s, s)?;
        Ok(match name.as_str() {
            "zero" => {
                arity(s, &a, 0, 0)?;
                ACatalog::Zero
            }
            "const_shift" => {
                arity(s, &a, 1, 1)?;
                ACatalog::ConstShift(a[0])
            }
            "quad_iso" => {
                arity(s, &a, 1, 1)?;
                ACatalog::QuadIso(a[0])
            }
            "power_iso" => {
                arity(s, &a, 2, 2)?;
                ACatalog::PowerIso(a[0], a[1])
            }
            "xz_matrix" => {
                arity(s, &a, 1, 1)?;
                ACatalog::XzMatrix(a[0])
            }
            _ => return Err(Error::UnknownCatalogId(s.to_string())),
        })
    }

    pub fn eval(&self, n: usize, x: &[f64], z: f64, p: &[f64]) -> SymMat {
        let p2: f64 = p[..n].iter().map(|v| v * v).sum();
        match *self {
            ACatalog::Zero => SymMat::zeros(n),
            ACatalog::ConstShift(c) => SymMat::identity(n) * c,
            ACatalog::QuadIso(c) => SymMat::identity(n) * (c * p2),
            ACatalog::PowerIso(c, q) => SymMat::identity(n) * (c * pow(p2, 0.5 * q)),
            ACatalog::XzMatrix(c) => (SymMat::outer(&x[..n]) + SymMat::identity(n) * z) * c,
        }
    }

    /// [∂A/∂p_k]
    pub fn dp(&self, n: usize, _x: &[f64], _z: f64, p: &[f64]) -> Vec<SymMat> {
        let p2: f64 = p[..n].iter().map(|v| v * v).sum();
        (0..n)
            .map(|k| match *self {
                ACatalog::QuadIso(c) => SymMat::identity(n) * (2.0 * c * p[k]),
                ACatalog::PowerIso(c, q) if p2 > 0.0 => SymMat::identity(n) * (c * q * pow(p2, 0.5 * q - 1.0) * p[k]),
                _ => SymMat::zeros(n),
            })
            .collect()
    }

    /// [∂²A/∂p_k∂p_l] flattened row-major (n² entries).
    pub fn d2p(&self, n: usize, _x: &[f64], _z: f64, p: &[f64]) -> Vec<SymMat> {
        let p2: f64 = p[..n].iter().map(|v| v * v).sum();
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                let delta = if k == l { 1.0 } else { 0.0 };
                let s = match *self {
                    ACatalog::QuadIso(c) => 2.0 * c * delta,
                    ACatalog::PowerIso(c, q) if p2 > 0.0 => {
                        c * q * (pow(p2, 0.5 * q - 1.0) * delta + (q - 2.0) * pow(p2, 0.5 * q - 2.0) * p[k] * p[l])
                    }
                    _ => 0.0,
                };
                out.push(SymMat::identity(n) * s);
            }
        }
        out
    }

    pub fn dz(&self, n: usize) -> SymMat {
        match *self {
            ACatalog::XzMatrix(c) => SymMat::identity(n) * c,
            _ => SymMat::zeros(n),
        }
    }

    /// [∂A/∂x_k]
    pub fn dx(&self, n: usize, x: &[f64]) -> Vec<SymMat> {
        (0..n)
            .map(|k| match *self {
                ACatalog::XzMatrix(c) => {
                    let mut e = [0.0; 3];
                    e[k] = 1.0;
                    SymMat::sym_outer(&e[..n], &x[..n]) * (2.0 * c)
                }
                _ => SymMat::zeros(n),
            })
            .collect()
    }

    pub fn depends_on_z(&self) -> bool {
        matches!(self, ACatalog::XzMatrix(_))
    }
}

/// Right-hand sides B(x, z, p).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BCatalog {
    Const(f64),
    /// c0 + c1 x₁ + c2 x₂
    Affine(f64, f64, f64),
    /// c0 + c1 |p|²
    GradQuad(f64, f64),
    /// F[D²u* − A(x, u*, Du*)] for a given exact solution u*.
    Manufactured,
}

impl BCatalog {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, a) = parse_args(s, s)?;
        Ok(match name.as_str() {
            "const" => {
                arity(s, &a, 1, 1)?;
                BCatalog::Const(a[0])
            }
            "affine" => {
                arity(s, &a, 3, 3)?;
                BCatalog::Affine(a[0], a[1], a[2])
            }
            "grad_quad" => {
                arity(s, &a, 2, 2)?;
                BCatalog::GradQuad(a[0], a[1])
            }
            "manufactured" => {
                arity(s, &a, 0, 0)?;
                BCatalog::Manufactured
            }
            _ => return Err(Error::UnknownCatalogId(s.to_string())),
        })
    }
}

/// Assembles augmenting data with analytic derivatives. A manufactured
/// right-hand side needs the operator and the exact solution.
pub fn build_augmented(a: ACatalog, b: BCatalog, op: &OperatorSpec, exact: Option<&Expr>) -> Result<AugmentedData> {
    let n = op.dim();
    let mut data = AugmentedData::new(n, Box::new(move |x, z, p| a.eval(n, x, z, p)), b_value(b, a, op, exact)?)
        .with_dp_a(Box::new(move |x, z, p| a.dp(n, x, z, p)))
        .with_d2p_a(Box::new(move |x, z, p| a.d2p(n, x, z, p)))
        .with_dz_a(Box::new(move |_, _, _| a.dz(n)))
        .with_dx_a(Box::new(move |x, _, _| a.dx(n, x)))
        .with_z_dependence(a.depends_on_z());
    match b {
        BCatalog::Const(_) => {
            data = data
                .with_dp_b(Box::new(move |_, _, _| alloc::vec![0.0; n]))
                .with_dz_b(Box::new(|_, _, _| 0.0))
                .with_dx_b(Box::new(move |_, _, _| alloc::vec![0.0; n]));
        }
        BCatalog::Affine(_, c1, c2) => {
            data = data.with_dp_b(Box::new(move |_, _, _| alloc::vec![0.0; n])).with_dz_b(Box::new(|_, _, _| 0.0)).with_dx_b(Box::new(
                move |_, _, _| {
                    let mut v = alloc::vec![0.0; n];
                    v[0] = c1;
                    if n > 1 {
                        v[1] = c2;
                    }
                    v
                },
            ));
        }
        BCatalog::GradQuad(_, c1) => {
            data = data
                .with_dp_b(Box::new(move |_, _, p| p[..n].iter().map(|v| 2.0 * c1 * v).collect()))
                .with_dz_b(Box::new(|_, _, _| 0.0))
                .with_dx_b(Box::new(move |_, _, _| alloc::vec![0.0; n]));
        }
        BCatalog::Manufactured => {
            data = data.with_dp_b(Box::new(move |_, _, _| alloc::vec![0.0; n])).with_dz_b(Box::new(|_, _, _| 0.0));
        }
    }
    Ok(data)
}

fn b_value(b: BCatalog, a: ACatalog, op: &OperatorSpec, exact: Option<&Expr>) -> Result<crate::augmentation::ScalarFn> {
    Ok(match b {
        BCatalog::Const(c) => Box::new(move |_, _, _| c),
        BCatalog::Affine(c0, c1, c2) => Box::new(move |x, _, _| c0 + c1 * x[0] + c2 * x.get(1).copied().unwrap_or(0.0)),
        BCatalog::GradQuad(c0, c1) => Box::new(move |_, _, p| c0 + c1 * p.iter().map(|v| v * v).sum::<f64>()),
        BCatalog::Manufactured => {
            if op.dim() != 2 {
                return Err(Error::InvalidProblem("manufactured right-hand sides are planar".into()));
            }
            let u = exact.ok_or_else(|| Error::InvalidProblem("manufactured right-hand side needs an exact solution".into()))?.clone();
            let op = *op;
            Box::new(move |x, _, _| {
                let pt = [x[0], x[1]];
                let g = u.gradient(&pt);
                let m = u.hessian(&pt) - a.eval(2, x, u.value(&pt), &g);
                op.evaluate(&m).unwrap_or(f64::NAN)
            })
        }
    })
}
