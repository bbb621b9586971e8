//! Operators F defined through an eigenvalue function f on a cone, with the
//! matrix gradient F_r rebuilt in the eigenframe.

mod conditions;

pub use conditions::{check_2_52, check_eig_monotone, check_f1_f2_f3, check_f5inf_and_31, check_f7, F123Report, F5Report};

use alloc::format;

use libm::{log, pow};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symcore::{eigen, sym_poly, sym_poly_without, ConeSpec, Spectrum, SymMat, MAX_DIM};

/// Eigenvalues closer than this are treated as one cluster when building F_r.
pub const REPEATED_EIG_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// S_k^{1/k} on Γ_k
    KHessian { k: usize },
    /// det^{1/n} on Γ_n
    MongeAmpereRoot,
    /// log det on Γ_n
    LogDet,
    /// (S_k / S_l)^{1/(k−l)} on Γ_k
    Quotient { k: usize, l: usize },
    /// S_1² on Γ_1. Increasing but convex; kept as a known counterexample for
    /// the concavity checker.
    TraceSquared,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatorSpec {
    kind: OperatorKind,
    cone: ConeSpec,
    n: usize,
    a0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorDerivatives {
    pub value: f64,
    /// F_r = Q diag(f_i) Qᵀ
    pub grad: SymMat,
    /// f_i in the order of `spectrum.lambda()`
    pub eig_grad: [f64; MAX_DIM],
    /// trace(F_r)
    pub trace_t: f64,
    pub spectrum: Spectrum,
    pub margin: f64,
}

impl OperatorDerivatives {
    pub fn eig_grad(&self) -> &[f64] {
        &self.eig_grad[..self.spectrum.lambda().len()]
    }

    /// Σ f_i (1 + |λ_i|)
    pub fn trace_t_star(&self) -> f64 {
        self.eig_grad().iter().zip(self.spectrum.lambda()).map(|(f, l)| f * (1.0 + l.abs())).sum()
    }

    /// r · F_r = Σ λ_i f_i
    pub fn r_dot_grad(&self) -> f64 {
        self.eig_grad().iter().zip(self.spectrum.lambda()).map(|(f, l)| f * l).sum()
    }
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, n: usize) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidOperator(format!("{kind:?} with n = {n}: {msg}")));
        if !(2..=MAX_DIM).contains(&n) {
            return bad("dimension must be 2 or 3");
        }
        let (cone, a0) = match kind {
            OperatorKind::KHessian { k } => {
                if k == 0 || k > n {
                    return bad("need 1 ≤ k ≤ n");
                }
                (ConeSpec::gamma(k, n)?, 0.0)
            }
            OperatorKind::MongeAmpereRoot => (ConeSpec::gamma(n, n)?, 0.0),
            OperatorKind::LogDet => (ConeSpec::gamma(n, n)?, f64::NEG_INFINITY),
            OperatorKind::Quotient { k, l } => {
                if l >= k || k > n {
                    return bad("need 0 ≤ l < k ≤ n");
                }
                (ConeSpec::gamma(k, n)?, 0.0)
            }
            OperatorKind::TraceSquared => (ConeSpec::gamma(1, n)?, 0.0),
        };
        Ok(OperatorSpec { kind, cone, n, a0 })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn cone(&self) -> &ConeSpec {
        &self.cone
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower endpoint of F(Γ).
    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// f(λ) without a membership check.
    fn f(&self, lam: &[f64]) -> f64 {
        match self.kind {
            OperatorKind::KHessian { k } => root(sym_poly(lam, k), k),
            OperatorKind::MongeAmpereRoot => root(lam.iter().product(), self.n),
            OperatorKind::LogDet => lam.iter().map(|l| log(*l)).sum(),
            OperatorKind::Quotient { k, l } => root(sym_poly(lam, k) / sym_poly(lam, l), k - l),
            OperatorKind::TraceSquared => {
                let s: f64 = lam.iter().sum();
                s * s
            }
        }
    }

    /// ∂f/∂λ_i without a membership check.
    fn f_grad(&self, lam: &[f64]) -> [f64; MAX_DIM] {
        let n = lam.len();
        let mut g = [0.0; MAX_DIM];
        match self.kind {
            OperatorKind::KHessian { k } => {
                let c = pow(sym_poly(lam, k), 1.0 / k as f64 - 1.0) / k as f64;
                for i in 0..n {
                    g[i] = c * sym_poly_without(lam, i, k - 1);
                }
            }
            OperatorKind::MongeAmpereRoot => {
                let f = self.f(lam);
                for i in 0..n {
                    g[i] = f / (n as f64 * lam[i]);
                }
            }
            OperatorKind::LogDet => {
                for i in 0..n {
                    g[i] = 1.0 / lam[i];
                }
            }
            OperatorKind::Quotient { k, l } => {
                let (sk, sl) = (sym_poly(lam, k), sym_poly(lam, l));
                let m = (k - l) as f64;
                let c = pow(sk / sl, 1.0 / m - 1.0) / m;
                for i in 0..n {
                    let skm = sym_poly_without(lam, i, k - 1);
                    let slm = if l == 0 { 0.0 } else { sym_poly_without(lam, i, l - 1) };
                    g[i] = c * (skm * sl - sk * slm) / (sl * sl);
                }
            }
            OperatorKind::TraceSquared => {
                let s: f64 = lam.iter().sum();
                g[..n].iter_mut().for_each(|x| *x = 2.0 * s);
            }
        }
        g
    }

    /// F as a function of eigenvalues; errors outside the open cone.
    pub fn evaluate_eigs(&self, lam: &[f64]) -> Result<f64> {
        let margin = self.cone.margin_eigs(lam);
        if margin > 0.0 {
            Ok(self.f(lam))
        } else {
            Err(Error::NotAdmissible { node: None, margin })
        }
    }

    /// ∂f/∂λ_i at eigenvalues inside the cone (no clustering).
    pub fn eig_grad(&self, lam: &[f64]) -> Result<[f64; MAX_DIM]> {
        let margin = self.cone.margin_eigs(lam);
        if margin > 0.0 {
            Ok(self.f_grad(lam))
        } else {
            Err(Error::NotAdmissible { node: None, margin })
        }
    }

    pub fn evaluate(&self, r: &SymMat) -> Result<f64> {
        self.check_dim(r)?;
        self.evaluate_eigs(eigen(r)?.lambda())
    }

    pub fn derivatives(&self, r: &SymMat) -> Result<OperatorDerivatives> {
        self.check_dim(r)?;
        let spectrum = eigen(r)?;
        let lam = spectrum.lambda();
        let margin = self.cone.margin_eigs(lam);
        if margin <= 0.0 {
            return Err(Error::NotAdmissible { node: None, margin });
        }
        let value = self.f(lam);
        let mut g = self.f_grad(lam);
        symmetrize_clusters(lam, &mut g);
        let grad = SymMat::from_spectrum(&g[..self.n], spectrum.frame());
        let trace_t = g[..self.n].iter().sum();
        Ok(OperatorDerivatives { value, grad, eig_grad: g, trace_t, spectrum, margin })
    }

    pub fn margin(&self, r: &SymMat) -> Result<f64> {
        self.check_dim(r)?;
        Ok(self.cone.margin_eigs(eigen(r)?.lambda()))
    }

    fn check_dim(&self, r: &SymMat) -> Result<()> {
        if r.dim() != self.n {
            return Err(Error::InvalidArgument(format!("operator has n = {} but matrix is {}×{}", self.n, r.dim(), r.dim())));
        }
        Ok(())
    }
}

fn root(x: f64, k: usize) -> f64 {
    match k {
        1 => x,
        2 => libm::sqrt(x),
        3 => libm::cbrt(x),
        _ => pow(x, 1.0 / k as f64),
    }
}

/// Average f_i over runs of (ascending) eigenvalues closer than
/// [`REPEATED_EIG_TOL`], so F_r does not depend on the arbitrary frame
/// inside a repeated eigenspace.
fn symmetrize_clusters(lam: &[f64], g: &mut [f64; MAX_DIM]) {
    let n = lam.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && lam[end] - lam[end - 1] < REPEATED_EIG_TOL {
            end += 1;
        }
        if end - start > 1 {
            let avg = g[start..end].iter().sum::<f64>() / (end - start) as f64;
            g[start..end].iter_mut().for_each(|x| *x = avg);
        }
        start = end;
    }
}
