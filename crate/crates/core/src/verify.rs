//! Grid evaluation of the barrier inequalities, the boundary identity
//! τᵀD²(u − φ)τ = κ D_γ(u − φ), the boundary function g and derivative monitors.

use alloc::vec::Vec;

use libm::{exp, hypot, pow};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::griddisc::{DomainKind, GridFunction, Point};
use crate::solver::DiscreteProblem;
use crate::symcore::SymMat;

/// 2⁰, 2¹, …, 2²⁰
pub fn default_k_ladder() -> Vec<f64> {
    (0..=20).map(|j| pow(2.0, j as f64)).collect()
}

/// 2⁰, 2⁻¹, …, 2⁻²⁰
pub fn default_eps_ladder() -> Vec<f64> {
    (0..=20).map(|j| pow(2.0, -(j as f64))).collect()
}

pub const DEFAULT_R_LADDER: [f64; 4] = [1e1, 1e2, 1e3, 1e4];
/// Tolerance for Φ = 0 on boundary nodes.
pub const PHI_BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Lemma21,
    Lemma22,
    Phi,
}

/// `epsilon` is the certified constant when `pass`, otherwise the best
/// (non-positive) value seen. `slack` is the smallest nodal value of the
/// checked inequality's left minus right side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierCertificate {
    pub kind: CertificateKind,
    pub k: Option<f64>,
    pub eps2: Option<f64>,
    pub epsilon: f64,
    pub slack: f64,
    pub min_node: Option<usize>,
    pub min_pos: Option<Point>,
    pub pass: bool,
    pub tried: usize,
}

fn barrier(dp: &DiscreteProblem, u: &GridFunction, k: f64) -> Vec<f64> {
    dp.subsolution().values().iter().zip(u.values()).map(|(s, v)| exp(k * (s - v))).collect()
}

fn check_state(dp: &DiscreteProblem, u: &GridFunction) -> Result<()> {
    if u.values().len() != dp.grid().len() {
        return Err(Error::InvalidArgument("grid function does not belong to this problem".into()));
    }
    Ok(())
}

/// min over interior nodes of L[e^{K(ū−u)}] / (1 + 𝒯) for each K; the first
/// positive minimum is certified.
pub fn verify_lemma21(dp: &DiscreteProblem, u: &GridFunction, k_ladder: &[f64]) -> Result<BarrierCertificate> {
    check_state(dp, u)?;
    let lin = dp.assemble_linearized(u.values(), 1.0)?;
    let n = dp.grid().n_unknowns();
    let mut best: Option<BarrierCertificate> = None;
    for (tried, &k) in k_ladder.iter().enumerate() {
        let eta = barrier(dp, u, k);
        let l_eta = lin.apply(&eta);
        let (mut min, mut node) = (f64::INFINITY, 0);
        for i in 0..n {
            let r = l_eta[i] / (1.0 + lin.trace_t[i]);
            if r < min {
                min = r;
                node = i;
            }
        }
        let cert = BarrierCertificate {
            kind: CertificateKind::Lemma21,
            k: Some(k),
            eps2: None,
            epsilon: min,
            slack: min,
            min_node: Some(node),
            min_pos: Some(dp.grid().nodes()[node].pos),
            pass: min > 0.0,
            tried: tried + 1,
        };
        if cert.pass {
            return Ok(cert);
        }
        if best.as_ref().map_or(true, |b| min > b.epsilon) {
            best = Some(cert);
        }
    }
    let mut b = best.ok_or_else(|| Error::InvalidArgument("empty K ladder".into()))?;
    b.tried = k_ladder.len();
    Ok(b)
}

/// |δu|² at every node, δu = Du − (γ·Du)γ with the signed-distance γ.
fn tangential_sq(u: &GridFunction) -> Result<Vec<f64>> {
    let g = u.grid();
    (0..g.len())
        .map(|i| {
            let t = g.tangential_gradient(u.values(), i)?;
            Ok(t[0] * t[0] + t[1] * t[1])
        })
        .collect()
}

/// Interior nodes at distance ≥ R/2 from the center: the band where the
/// signed-distance extension of γ is smooth.
fn band(dp: &DiscreteProblem) -> Result<Vec<usize>> {
    let g = dp.grid();
    match g.domain().kind {
        DomainKind::Disc { center, radius } => Ok((0..g.n_unknowns())
            .filter(|&i| {
                let p = g.nodes()[i].pos;
                hypot(p[0] - center[0], p[1] - center[1]) >= 0.5 * radius
            })
            .collect()),
        DomainKind::Rectangle { .. } => Err(Error::MissingGammaExtension { node: g.n_unknowns() }),
    }
}

/// Searches (K, ε₂) for L[e^{K(ū−u)} + (ε₂/2)|δu|²] ≥ ε₂(1 + 𝒯*) on the band
/// R/2 ≤ |x − c| of a disc.
pub fn verify_lemma22(dp: &DiscreteProblem, u: &GridFunction, k_ladder: &[f64], eps_ladder: &[f64]) -> Result<BarrierCertificate> {
    check_state(dp, u)?;
    let nodes = band(dp)?;
    let lin = dp.assemble_linearized(u.values(), 1.0)?;
    let l_du = lin.apply(&tangential_sq(u)?);
    let mut best: Option<BarrierCertificate> = None;
    let mut tried = 0;
    for &k in k_ladder {
        let l_eta = lin.apply(&barrier(dp, u, k));
        for &e in eps_ladder {
            tried += 1;
            let (mut min, mut node) = (f64::INFINITY, 0);
            for &i in &nodes {
                let s = l_eta[i] + 0.5 * e * l_du[i] - e * (1.0 + lin.trace_t_star[i]);
                if s < min {
                    min = s;
                    node = i;
                }
            }
            let pass = min >= 0.0 && e > 0.0;
            let cert = BarrierCertificate {
                kind: CertificateKind::Lemma22,
                k: Some(k),
                eps2: Some(e),
                epsilon: if pass { e } else { min.min(0.0) },
                slack: min,
                min_node: Some(node),
                min_pos: Some(dp.grid().nodes()[node].pos),
                pass,
                tried,
            };
            if pass {
                return Ok(cert);
            }
            if best.as_ref().map_or(true, |b| min > b.slack) {
                best = Some(cert);
            }
        }
    }
    let mut b = best.ok_or_else(|| Error::InvalidArgument("empty K or ε₂ ladder".into()))?;
    b.tried = tried;
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiReport {
    pub k: f64,
    pub eps2: f64,
    pub max_boundary_abs: f64,
    pub max_interior: f64,
    pub interior_tol: f64,
    pub witness_node: usize,
    pub witness_pos: Point,
    /// min over the band of LΦ − ε₂(1 + 𝒯*)
    pub min_inequality_slack: Option<f64>,
    /// max over boundary nodes of |∂_s D_γ(u − ū)|
    pub max_tangential_of_normal_difference: f64,
    /// max over boundary nodes of |∂_s D_γ u|
    pub max_mixed_derivative: f64,
    pub pass: bool,
}

/// Φ = e^{K(ū−u)} − 1 + (ε₂/2)|δ(u − ū)|²: zero on ∂Ω and ≤ 10h² inside.
pub fn verify_phi(dp: &DiscreteProblem, u: &GridFunction, k: f64, eps2: f64) -> Result<PhiReport> {
    check_state(dp, u)?;
    let g = dp.grid();
    let n = g.n_unknowns();
    let sub = dp.subsolution().values();
    let diff = GridFunction::new(g.clone(), u.values().iter().zip(sub).map(|(a, b)| a - b).collect())?;
    let dsq = tangential_sq(&diff)?;
    let eta = barrier(dp, u, k);
    let phi: Vec<f64> = eta.iter().zip(&dsq).map(|(e, d)| e - 1.0 + 0.5 * eps2 * d).collect();
    let max_boundary_abs = phi[n..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut max_interior, mut witness) = (f64::NEG_INFINITY, 0);
    for (i, v) in phi[..n].iter().enumerate() {
        if *v > max_interior {
            max_interior = *v;
            witness = i;
        }
    }
    let interior_tol = 10.0 * g.h() * g.h();
    let min_inequality_slack = match band(dp) {
        Ok(nodes) => {
            let lin = dp.assemble_linearized(u.values(), 1.0)?;
            let l_phi = lin.apply(&phi);
            Some(nodes.iter().map(|&i| l_phi[i] - eps2 * (1.0 + lin.trace_t_star[i])).fold(f64::INFINITY, f64::min))
        }
        Err(_) => None,
    };
    let normal_diff = normal_derivatives(&diff)?;
    let normal_u = normal_derivatives(u)?;
    let max_tangential_of_normal_difference = tangential_sup(&diff, &normal_diff)?;
    let max_mixed_derivative = tangential_sup(u, &normal_u)?;
    Ok(PhiReport {
        k,
        eps2,
        max_boundary_abs,
        max_interior,
        interior_tol,
        witness_node: witness,
        witness_pos: g.nodes()[witness].pos,
        min_inequality_slack,
        max_tangential_of_normal_difference,
        max_mixed_derivative,
        pass: max_boundary_abs <= PHI_BOUNDARY_TOL && max_interior <= interior_tol,
    })
}

/// Runs [`verify_phi`] with the constants of a passing boundary barrier certificate.
pub fn verify_phi_from(dp: &DiscreteProblem, u: &GridFunction, cert: &BarrierCertificate) -> Result<PhiReport> {
    match (cert.kind, cert.pass, cert.k, cert.eps2) {
        (CertificateKind::Lemma22, true, Some(k), Some(e)) => verify_phi(dp, u, k, e),
        _ => Err(Error::CertificateMissing),
    }
}

/// D_γ f at boundary nodes (NaN at corners), full-length vector.
fn normal_derivatives(f: &GridFunction) -> Result<Vec<f64>> {
    let g = f.grid();
    let mut out = alloc::vec![0.0; g.len()];
    for i in g.n_unknowns()..g.len() {
        out[i] = if g.boundary_geometry(i).map_or(true, |b| b.corner) { f64::NAN } else { g.boundary_normal_derivative(f.values(), i)? };
    }
    Ok(out)
}

fn tangential_sup(f: &GridFunction, normal: &[f64]) -> Result<f64> {
    let g = f.grid();
    if g.domain().has_corners() {
        return Ok(f64::NAN);
    }
    let mut m = 0.0f64;
    for i in g.n_unknowns()..g.len() {
        m = m.max(g.trace_derivative(normal, i)?.abs());
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryIdentityReport {
    pub h: f64,
    pub max_discrepancy: f64,
    pub worst_node: usize,
    pub worst_pos: Point,
    /// max |τᵀD²(u − φ)τ| and max |κ D_γ(u − φ)|, for scale
    pub max_lhs: f64,
    pub max_rhs: f64,
    pub nodes: usize,
}

/// At each boundary node compares τᵀD²(u − φ)τ with κ D_γ(u − φ) (outward γ),
/// both from a local least-squares quadratic of u − φ.
pub fn boundary_identity_check(dp: &DiscreteProblem, u: &GridFunction) -> Result<BoundaryIdentityReport> {
    check_state(dp, u)?;
    let g = dp.grid();
    if g.domain().has_corners() {
        return Err(Error::CornerDomain);
    }
    let w: Vec<f64> = u.values().iter().zip(dp.phi()).map(|(a, b)| a - b).collect();
    let mut rep = BoundaryIdentityReport {
        h: g.h(),
        max_discrepancy: 0.0,
        worst_node: g.n_unknowns(),
        worst_pos: [0.0, 0.0],
        max_lhs: 0.0,
        max_rhs: 0.0,
        nodes: g.len() - g.n_unknowns(),
    };
    for i in g.n_unknowns()..g.len() {
        let geo = *g.boundary_geometry(i).expect("boundary node");
        let (gam, tau) = (geo.normal.expect("smooth boundary"), geo.tangent.expect("smooth boundary"));
        let fit = g.boundary_fit(&w, i)?;
        let lhs = fit.hessian.quad(&tau);
        let rhs = geo.curvature * (fit.gradient[0] * gam[0] + fit.gradient[1] * gam[1]);
        let d = (lhs - rhs).abs();
        rep.max_lhs = rep.max_lhs.max(lhs.abs());
        rep.max_rhs = rep.max_rhs.max(rhs.abs());
        if d > rep.max_discrepancy {
            rep.max_discrepancy = d;
            rep.worst_node = i;
        }
    }
    rep.worst_pos = g.nodes()[rep.worst_node].pos;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GScanRow {
    pub r: f64,
    pub min_g: f64,
    pub argmin_node: usize,
    pub argmin_pos: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GScanReport {
    pub rows: Vec<GScanRow>,
    /// g at every boundary node (ring order) for each R
    pub values: Vec<Vec<f64>>,
    pub boundary_nodes: Vec<usize>,
    /// g nondecreasing in R at every node
    pub monotone: bool,
    /// min g > 0 at the largest R
    pub pass: bool,
}

/// g = F(diag(ω_ττ, R)) − B with ω_ττ = τᵀ(D²u − A)τ from a boundary fit.
/// Outside the cone F is taken as a0.
pub fn g_function_scan(dp: &DiscreteProblem, u: &GridFunction, r_ladder: &[f64]) -> Result<GScanReport> {
    check_state(dp, u)?;
    let g = dp.grid();
    if g.domain().has_corners() {
        return Err(Error::CornerDomain);
    }
    if r_ladder.is_empty() {
        return Err(Error::InvalidArgument("empty R ladder".into()));
    }
    let spec = dp.spec();
    let ring: Vec<usize> = g.boundary_ring().to_vec();
    let mut values = alloc::vec![Vec::with_capacity(ring.len()); r_ladder.len()];
    for &i in &ring {
        let geo = g.boundary_geometry(i).expect("boundary node");
        let tau = geo.tangent.expect("smooth boundary");
        let x = g.nodes()[i].pos;
        let fit = g.boundary_fit(u.values(), i)?;
        let z = u.values()[i];
        let m = fit.hessian - spec.aug.a(&x, z, &fit.gradient);
        let omega = m.quad(&tau);
        let b = spec.aug.b(&x, z, &fit.gradient);
        for (k, &r) in r_ladder.iter().enumerate() {
            let d = SymMat::from_diag(&[omega, r]);
            let f = match spec.op.margin(&d)? {
                m if m > 0.0 => spec.op.evaluate(&d)?,
                _ => spec.op.a0(),
            };
            values[k].push(f - b);
        }
    }
    let rows: Vec<GScanRow> = r_ladder
        .iter()
        .zip(&values)
        .map(|(&r, v)| {
            let (k, min) = v.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, x)| if *x < acc.1 { (k, *x) } else { acc });
            GScanRow { r, min_g: min, argmin_node: ring[k], argmin_pos: g.nodes()[ring[k]].pos }
        })
        .collect();
    let mut order: Vec<usize> = (0..r_ladder.len()).collect();
    order.sort_by(|a, b| r_ladder[*a].total_cmp(&r_ladder[*b]));
    let monotone = (0..ring.len()).all(|j| order.windows(2).all(|w| values[w[1]][j] >= values[w[0]][j]));
    let pass = rows[*order.last().unwrap()].min_g > 0.0;
    Ok(GScanReport { rows, values, boundary_nodes: ring, monotone, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorReport {
    pub sup_du: f64,
    pub sup_du_boundary: f64,
    /// sup_Ω|Du| / sup_∂Ω|Du|
    pub ratio: f64,
    pub sup_d2u: f64,
    pub alpha: f64,
    pub m1: f64,
    pub v_max: f64,
    pub v_max_node: usize,
    pub v_max_on_boundary: bool,
}

/// Gradient and Hessian sups and the maximum point of
/// v = |Du|² + α M₁² (u − inf u), α = 1/(2 osc u), M₁ = sup|Du|.
pub fn estimate_monitor(dp: &DiscreteProblem, u: &GridFunction) -> Result<MonitorReport> {
    check_state(dp, u)?;
    let g = dp.grid();
    let vals = u.values();
    let n = g.n_unknowns();
    let mut grad = alloc::vec![0.0; g.len()];
    let mut sup_d2u = 0.0f64;
    for i in 0..n {
        let (du, d2u) = g.gradient_hessian(vals, i)?;
        grad[i] = hypot(du[0], du[1]);
        let (a, b, c) = (d2u.get(0, 0), d2u.get(0, 1), d2u.get(1, 1));
        sup_d2u = sup_d2u.max((0.5 * (a + c)).abs() + hypot(0.5 * (a - c), b));
    }
    for i in n..g.len() {
        grad[i] = if g.boundary_geometry(i).map_or(true, |b| b.corner) {
            0.0
        } else {
            let f = g.boundary_fit(vals, i)?;
            hypot(f.gradient[0], f.gradient[1])
        };
    }
    let sup_du = grad.iter().fold(0.0f64, |m, v| m.max(*v));
    let sup_du_boundary = grad[n..].iter().fold(0.0f64, |m, v| m.max(*v));
    let lo = vals.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let hi = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let osc = hi - lo;
    let alpha = if osc > 0.0 { 0.5 / osc } else { 0.0 };
    let (mut v_max, mut node) = (f64::NEG_INFINITY, 0);
    for i in 0..g.len() {
        let v = grad[i] * grad[i] + alpha * sup_du * sup_du * (vals[i] - lo);
        if v > v_max {
            v_max = v;
            node = i;
        }
    }
    Ok(MonitorReport {
        sup_du,
        sup_du_boundary,
        ratio: if sup_du_boundary > 0.0 { sup_du / sup_du_boundary } else { f64::INFINITY },
        sup_d2u,
        alpha,
        m1: sup_du,
        v_max,
        v_max_node: node,
        v_max_on_boundary: g.is_boundary(node),
    })
}

/// log₂ ratios of successive errors for spacings halving left to right.
pub fn observed_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2).zip(err.windows(2)).map(|(hw, ew)| libm::log(ew[0] / ew[1]) / libm::log(hw[0] / hw[1])).collect()
}
