//! Residual, Jacobian, damped Newton and the continuation driver for
//!
//!   F[D²u − A(x,u,Du)] = t B(x,u,Du) + (1 − t) F[ū]   in Ω,   u = φ on ∂Ω,
//!
//! with F[ū] frozen node-wise when the problem is set up.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::augmentation::ProblemSpec;
use crate::error::{Error, Result};
use crate::griddisc::{Grid, GridFunction, Point, DX, DXX, DXY, DY, DYY};
use crate::linalg::{bicgstab, CsrMatrix, EnvelopeLu, Preconditioner};
use crate::report::SCHEMA_VERSION;
use crate::symcore::SymMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    DirectBand,
    IterativeBicg,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub continuation_steps: usize,
    pub damping_min: f64,
    pub adm_margin: f64,
    pub linear_solver: LinearSolver,
    pub min_t_step: f64,
    pub preconditioner: Preconditioner,
    pub bicg_tol: f64,
    pub bicg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-9,
            max_newton: 50,
            continuation_steps: 10,
            damping_min: 1.0 / 1024.0,
            adm_margin: 1e-8,
            linear_solver: LinearSolver::DirectBand,
            min_t_step: 1e-4,
            preconditioner: Preconditioner::Jacobi,
            bicg_tol: 1e-13,
            bicg_max_iter: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.newton_tol, self.damping_min, self.adm_margin, self.min_t_step, self.bicg_tol];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || self.max_newton == 0
            || self.continuation_steps == 0
            || self.bicg_max_iter == 0
        {
            return Err(Error::InvalidArgument("solver settings must be positive".into()));
        }
        if self.damping_min > 1.0 || self.min_t_step > 1.0 {
            return Err(Error::InvalidArgument("damping_min and min_t_step must be ≤ 1".into()));
        }
        Ok(())
    }
}

/// Per-node quantities of the linearization at a state.
#[derive(Clone, Debug)]
pub struct Linearization {
    /// N×N: interior rows carry L, boundary rows the identity.
    pub matrix: CsrMatrix,
    /// Full-length residual (boundary rows hold u − φ).
    pub residual: Vec<f64>,
    /// trace F^{ij} per unknown node
    pub trace_t: Vec<f64>,
    /// Σ f_i (1 + |λ_i|) per unknown node
    pub trace_t_star: Vec<f64>,
    /// cone margin of M[u] per unknown node
    pub margins: Vec<f64>,
    /// ‖M[u]‖ per unknown node
    pub m_norms: Vec<f64>,
}

impl Linearization {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; v.len()];
        self.matrix.mul_vec(v, &mut out);
        out
    }

    fn interior_block(&self, n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let (c, v) = self.matrix.row(i);
                c.iter().zip(v).filter(|(j, _)| **j < n).map(|(j, x)| (*j, *x)).collect()
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NewtonTrace {
    pub iterations: usize,
    /// max-norm residual before the first and after every accepted step
    pub residual_history: Vec<f64>,
    /// accepted step fractions
    pub damping: Vec<f64>,
    /// smallest margin / (1 + ‖M‖) over accepted iterates
    pub min_margin: f64,
    pub linear_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub predictor: bool,
    pub retries: usize,
    pub trace: NewtonTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// min over nodes of u − ū
    pub min_u_minus_sub: f64,
    /// u ≥ ū − 10h² everywhere
    pub lower_within_tol: bool,
    /// u ≥ ū everywhere
    pub lower: bool,
    /// max over nodes of u − ū̄, when a supersolution is given
    pub max_u_minus_super: Option<f64>,
    pub upper: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub h: f64,
    pub unknowns: usize,
    pub steps: Vec<StepRecord>,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub min_margin: f64,
    pub sup_du: f64,
    pub sup_du_boundary: f64,
    pub sup_d2u: f64,
    pub comparison: ComparisonReport,
    /// max nodal |u − u*| when an exact solution is known
    pub max_error: Option<f64>,
}

struct NodeState {
    m: SymMat,
    x: Point,
    z: f64,
    p: Point,
}

/// A problem bound to its grid, with the subsolution's trace set to φ and
/// F[ū] precomputed.
pub struct DiscreteProblem {
    spec: ProblemSpec,
    grid: Arc<Grid>,
    sub: GridFunction,
    phi: Vec<f64>,
    f_sub: Vec<f64>,
}

impl core::fmt::Debug for DiscreteProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DiscreteProblem").field("grid", &self.grid).finish()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl DiscreteProblem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let grid = Arc::new(Grid::new(spec.domain)?);
        let n = grid.n_unknowns();
        let interior: Vec<Point> = grid.nodes()[..n].iter().map(|p| p.pos).collect();
        let boundary: Vec<Point> = grid.nodes()[n..].iter().map(|p| p.pos).collect();
        spec.validate_at(&interior, &boundary)?;
        let phi: Vec<f64> = grid.nodes().iter().map(|p| spec.phi.value(&p.pos)).collect();
        let mut sub = GridFunction::sample(grid.clone(), spec.subsolution.as_ref());
        sub.values_mut()[n..].copy_from_slice(&phi[n..]);
        let mut dp = DiscreteProblem { spec, grid, sub, phi, f_sub: Vec::new() };
        let mut f_sub = Vec::with_capacity(n);
        for i in 0..n {
            let st = dp.state(dp.sub.values(), i)?;
            let margin = dp.spec.op.margin(&st.m)?;
            if margin <= 0.0 {
                return Err(Error::NotAdmissible { node: Some(i), margin });
            }
            f_sub.push(dp.spec.op.evaluate(&st.m)?);
        }
        dp.f_sub = f_sub;
        Ok(dp)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// ū with its boundary trace replaced by φ.
    pub fn subsolution(&self) -> &GridFunction {
        &self.sub
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// F[M[ū]] at the unknown nodes.
    pub fn frozen_sub_values(&self) -> &[f64] {
        &self.f_sub
    }

    fn state(&self, u: &[f64], i: usize) -> Result<NodeState> {
        let d = self.grid.stencil(i).expect("unknown node").apply(u);
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::DiscretizationError { node: i, reason: "non-finite derivative" });
        }
        let x = self.grid.nodes()[i].pos;
        let p = [d[DX], d[DY]];
        let z = u[i];
        let d2 = SymMat::from_upper(2, &[d[DXX], d[DXY], d[DYY]]).expect("finite");
        let m = d2 - self.spec.aug.a(&x, z, &p);
        Ok(NodeState { m, x, z, p })
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.grid.len() {
            return Err(Error::InvalidArgument(alloc::format!("{} values for {} nodes", u.len(), self.grid.len())));
        }
        Ok(())
    }

    /// Full-length residual and the smallest margin/(1 + ‖M‖).
    pub fn residual_with_margin(&self, u: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
        self.check_len(u)?;
        check_t(t)?;
        let n = self.grid.n_unknowns();
        let mut r = alloc::vec![0.0; u.len()];
        let mut rel = f64::INFINITY;
        for i in 0..n {
            let st = self.state(u, i)?;
            let margin = self.spec.op.margin(&st.m)?;
            if margin <= 0.0 {
                return Err(Error::NotAdmissible { node: Some(i), margin });
            }
            rel = rel.min(margin / (1.0 + st.m.norm()));
            let f = self.spec.op.evaluate(&st.m)?;
            r[i] = f - t * self.spec.aug.b(&st.x, st.z, &st.p) - (1.0 - t) * self.f_sub[i];
        }
        for i in n..u.len() {
            r[i] = u[i] - self.phi[i];
        }
        Ok((r, rel))
    }

    pub fn residual(&self, u: &GridFunction, t: f64) -> Result<GridFunction> {
        let (r, _) = self.residual_with_margin(u.values(), t)?;
        GridFunction::new(self.grid.clone(), r)
    }

    /// L v = F^{ij}D_ij v − (F^{ij}A^k_ij + t B_{p_k}) D_k v − (F^{ij}D_zA_ij + t D_zB) v
    /// at interior nodes: the exact derivative of the residual.
    pub fn assemble_linearized(&self, u: &[f64], t: f64) -> Result<Linearization> {
        self.check_len(u)?;
        check_t(t)?;
        let n = self.grid.n_unknowns();
        let total = u.len();
        let aug = &self.spec.aug;
        let mut rows = Vec::with_capacity(total);
        let mut residual = alloc::vec![0.0; total];
        let mut trace_t = Vec::with_capacity(n);
        let mut trace_t_star = Vec::with_capacity(n);
        let mut margins = Vec::with_capacity(n);
        let mut m_norms = Vec::with_capacity(n);
        for i in 0..n {
            let st = self.state(u, i)?;
            let der = self.spec.op.derivatives(&st.m).map_err(|e| match e {
                Error::NotAdmissible { margin, .. } => Error::NotAdmissible { node: Some(i), margin },
                e => e,
            })?;
            let g = der.grad;
            let dpa = aug.dp_a(&st.x, st.z, &st.p);
            let dpb = aug.dp_b(&st.x, st.z, &st.p);
            let drift = [g.dot(&dpa[0]) + t * dpb[0], g.dot(&dpa[1]) + t * dpb[1]];
            let zero = g.dot(&aug.dz_a(&st.x, st.z, &st.p)) + t * aug.dz_b(&st.x, st.z, &st.p);
            let (fxx, fxy, fyy) = (g.get(0, 0), g.get(0, 1), g.get(1, 1));
            let mut row: Vec<(usize, f64)> = self
                .grid
                .stencil(i)
                .expect("unknown node")
                .terms
                .iter()
                .map(|(j, w)| (*j, fxx * w[DXX] + 2.0 * fxy * w[DXY] + fyy * w[DYY] - drift[0] * w[DX] - drift[1] * w[DY]))
                .collect();
            row.push((i, -zero));
            rows.push(row);
            residual[i] = der.value - t * aug.b(&st.x, st.z, &st.p) - (1.0 - t) * self.f_sub[i];
            trace_t.push(der.trace_t);
            trace_t_star.push(der.trace_t_star());
            margins.push(der.margin);
            m_norms.push(st.m.norm());
        }
        for i in n..total {
            rows.push(alloc::vec![(i, 1.0)]);
            residual[i] = u[i] - self.phi[i];
        }
        Ok(Linearization { matrix: CsrMatrix::from_rows(total, rows), residual, trace_t, trace_t_star, margins, m_norms })
    }

    fn solve_linear(&self, lin: &Linearization, cfg: &SolverConfig, trace: &mut NewtonTrace) -> Result<Vec<f64>> {
        let n = self.grid.n_unknowns();
        let a = lin.interior_block(n);
        let rhs: Vec<f64> = lin.residual[..n].iter().map(|r| -r).collect();
        match cfg.linear_solver {
            LinearSolver::DirectBand => Ok(EnvelopeLu::factor(&a)?.solve(&rhs)),
            LinearSolver::IterativeBicg => {
                let (x, st) = bicgstab(&a, &rhs, cfg.preconditioner, cfg.bicg_tol, cfg.bicg_max_iter)?;
                trace.linear_iterations += st.iterations;
                Ok(x)
            }
        }
    }

    /// Damped Newton at fixed t. Steps are halved until every node keeps
    /// margin ≥ adm_margin·(1 + ‖M‖) and the max-norm residual decreases.
    pub fn newton_solve(&self, u0: &GridFunction, t: f64, cfg: &SolverConfig) -> Result<(GridFunction, NewtonTrace)> {
        cfg.validate()?;
        let mut u = u0.values().to_vec();
        let (r, rel) = self.residual_with_margin(&u, t)?;
        if rel < cfg.adm_margin {
            return Err(Error::NotAdmissible { node: None, margin: rel });
        }
        let n = self.grid.n_unknowns();
        let mut res = max_abs(&r);
        let mut trace = NewtonTrace { residual_history: alloc::vec![res], min_margin: rel, ..Default::default() };
        while res > cfg.newton_tol {
            if trace.iterations >= cfg.max_newton {
                return Err(Error::MaxIterations { iterations: trace.iterations, residual: res });
            }
            let lin = self.assemble_linearized(&u, t)?;
            let delta = self.solve_linear(&lin, cfg, &mut trace)?;
            let mut s = 1.0;
            loop {
                if s < cfg.damping_min {
                    return Err(Error::LineSearchStalled { iteration: trace.iterations, step: s });
                }
                let mut cand = u.clone();
                for k in 0..n {
                    cand[k] += s * delta[k];
                }
                match self.residual_with_margin(&cand, t) {
                    Ok((rc, relc)) if relc >= cfg.adm_margin && max_abs(&rc) < res => {
                        u = cand;
                        res = max_abs(&rc);
                        trace.min_margin = trace.min_margin.min(relc);
                        break;
                    }
                    Ok(_) | Err(Error::NotAdmissible { .. }) => s *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            trace.iterations += 1;
            trace.residual_history.push(res);
            trace.damping.push(s);
        }
        Ok((GridFunction::new(self.grid.clone(), u)?, trace))
    }

    /// Marches t from 0 to 1, warm-starting each step with a secant
    /// prediction from the last two accepted states and halving the step on
    /// failure.
    pub fn continuation_solve(&self, cfg: &SolverConfig) -> Result<(GridFunction, SolveReport)> {
        cfg.validate()?;
        let mut u = self.sub.clone();
        let (r0, rel0) = self.residual_with_margin(u.values(), 0.0)?;
        let mut steps = alloc::vec![StepRecord {
            t: 0.0,
            dt: 0.0,
            predictor: false,
            retries: 0,
            trace: NewtonTrace { residual_history: alloc::vec![max_abs(&r0)], min_margin: rel0, ..Default::default() },
        }];
        let mut prev: Option<(GridFunction, f64)> = None;
        let mut t = 0.0;
        let mut dt = 1.0 / cfg.continuation_steps as f64;
        while t < 1.0 {
            let t_new = if t + dt >= 1.0 - 1e-12 { 1.0 } else { t + dt };
            let step = t_new - t;
            let mut retries = 0;
            let mut outcome = None;
            let mut last_err = None;
            if let Some((up, dt_old)) = &prev {
                let ratio = step / dt_old;
                let n = self.grid.n_unknowns();
                let mut guess = u.clone();
                for k in 0..n {
                    guess.values_mut()[k] += ratio * (u.values()[k] - up.values()[k]);
                }
                match self.newton_solve(&guess, t_new, cfg) {
                    Ok(ok) => outcome = Some((ok, true)),
                    Err(e) => {
                        retries += 1;
                        last_err = Some(e);
                    }
                }
            }
            if outcome.is_none() {
                match self.newton_solve(&u, t_new, cfg) {
                    Ok(ok) => outcome = Some((ok, false)),
                    Err(e) => last_err = Some(e),
                }
            }
            match outcome {
                Some(((sol, trace), predictor)) => {
                    prev = Some((u, step));
                    u = sol;
                    t = t_new;
                    steps.push(StepRecord { t, dt: step, predictor, retries, trace });
                }
                None => {
                    let e = last_err.expect("failed step has an error");
                    if !recoverable(&e) {
                        return Err(e);
                    }
                    dt = step * 0.5;
                    prev = None;
                    if dt < cfg.min_t_step {
                        return Err(Error::ContinuationStalled { t, reason: e.to_string() });
                    }
                }
            }
        }
        let report = self.report(&u, steps)?;
        Ok((u, report))
    }

    fn report(&self, u: &GridFunction, steps: Vec<StepRecord>) -> Result<SolveReport> {
        let g = &self.grid;
        let n = g.n_unknowns();
        let vals = u.values();
        let (r, rel) = self.residual_with_margin(vals, 1.0)?;
        let mut sup_du = 0.0f64;
        let mut sup_d2u = 0.0f64;
        for i in 0..n {
            let (du, d2u) = g.gradient_hessian(vals, i)?;
            sup_du = sup_du.max(libm::hypot(du[0], du[1]));
            sup_d2u = sup_d2u.max(spectral_norm(&d2u));
        }
        let mut sup_du_boundary = 0.0f64;
        for i in n..g.len() {
            if g.boundary_geometry(i).map(|b| b.corner).unwrap_or(true) {
                continue;
            }
            let fit = g.boundary_fit(vals, i)?;
            sup_du_boundary = sup_du_boundary.max(libm::hypot(fit.gradient[0], fit.gradient[1]));
        }
        let comparison = self.compare(vals);
        let max_error =
            self.spec.exact.as_ref().map(|e| g.nodes().iter().zip(vals).map(|(nd, v)| (v - e.value(&nd.pos)).abs()).fold(0.0, f64::max));
        Ok(SolveReport {
            schema_version: SCHEMA_VERSION,
            h: g.h(),
            unknowns: n,
            newton_iterations: steps.iter().map(|s| s.trace.iterations).sum(),
            min_margin: steps.iter().map(|s| s.trace.min_margin).fold(rel, f64::min),
            steps,
            final_residual: max_abs(&r),
            sup_du: sup_du.max(sup_du_boundary),
            sup_du_boundary,
            sup_d2u,
            comparison,
            max_error,
        })
    }

    /// Node-wise comparison with the sub- and supersolution.
    pub fn compare(&self, u: &[f64]) -> ComparisonReport {
        let g = &self.grid;
        let tol = 10.0 * g.h() * g.h();
        let sub = self.sub.values();
        let min_u_minus_sub = u.iter().zip(sub).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        let max_u_minus_super = self
            .spec
            .supersolution
            .as_ref()
            .map(|s| g.nodes().iter().zip(u).map(|(nd, v)| v - s.value(&nd.pos)).fold(f64::NEG_INFINITY, f64::max));
        ComparisonReport {
            min_u_minus_sub,
            lower_within_tol: min_u_minus_sub >= -tol,
            lower: min_u_minus_sub >= 0.0,
            max_u_minus_super,
            upper: max_u_minus_super.map(|m| m <= 0.0),
        }
    }
}

fn spectral_norm(m: &SymMat) -> f64 {
    // 2×2 closed form: |mean| + radius
    let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
    let mean = 0.5 * (a + c);
    let rad = libm::hypot(0.5 * (a - c), b);
    mean.abs() + rad
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(alloc::format!("t = {t} outside [0, 1]")));
    }
    Ok(())
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::LineSearchStalled { .. } | Error::MaxIterations { .. } | Error::LinearSolveFailure(_) | Error::NotAdmissible { .. })
}
