//! Augmenting data A(x, z, p), B(x, z, p), admissibility and structure checks.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::log10;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::griddisc::{DomainSpec, Field, GridFunction};
use crate::operator::OperatorSpec;
use crate::report::{fit_slope, BinRow, ConditionReport, Witness};
use crate::sampling::Sampler;
use crate::symcore::{eigen, SymMat, MAX_DIM};

pub type MatFn = Box<dyn Fn(&[f64], f64, &[f64]) -> SymMat + Send + Sync>;
pub type MatListFn = Box<dyn Fn(&[f64], f64, &[f64]) -> Vec<SymMat> + Send + Sync>;
pub type ScalarFn = Box<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;
pub type VecFn = Box<dyn Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// A and B with optional analytic derivatives. Missing derivatives fall back
/// to central differences.
pub struct AugmentedData {
    n: usize,
    a: MatFn,
    b: ScalarFn,
    dp_a: Option<MatListFn>,
    d2p_a: Option<MatListFn>,
    dz_a: Option<MatFn>,
    dx_a: Option<MatListFn>,
    dp_b: Option<VecFn>,
    dz_b: Option<ScalarFn>,
    dx_b: Option<VecFn>,
    z_dependence: bool,
}

impl core::fmt::Debug for AugmentedData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("AugmentedData").field("n", &self.n).field("analytic", &self.analytic_flags()).finish()
    }
}

/// Which derivatives are supplied in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AnalyticFlags {
    pub dp_a: bool,
    pub d2p_a: bool,
    pub dz_a: bool,
    pub dx_a: bool,
    pub dp_b: bool,
    pub dz_b: bool,
    pub dx_b: bool,
}

fn step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

fn bumped(v: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    w[k] += h;
    w
}

impl AugmentedData {
    pub fn new(n: usize, a: MatFn, b: ScalarFn) -> Self {
        AugmentedData { n, a, b, dp_a: None, d2p_a: None, dz_a: None, dx_a: None, dp_b: None, dz_b: None, dx_b: None, z_dependence: true }
    }

    pub fn with_dp_a(mut self, f: MatListFn) -> Self {
        self.dp_a = Some(f);
        self
    }

    pub fn with_d2p_a(mut self, f: MatListFn) -> Self {
        self.d2p_a = Some(f);
        self
    }

    pub fn with_dz_a(mut self, f: MatFn) -> Self {
        self.dz_a = Some(f);
        self
    }

    pub fn with_dx_a(mut self, f: MatListFn) -> Self {
        self.dx_a = Some(f);
        self
    }

    pub fn with_dp_b(mut self, f: VecFn) -> Self {
        self.dp_b = Some(f);
        self
    }

    pub fn with_dz_b(mut self, f: ScalarFn) -> Self {
        self.dz_b = Some(f);
        self
    }

    pub fn with_dx_b(mut self, f: VecFn) -> Self {
        self.dx_b = Some(f);
        self
    }

    /// Whether A or B may depend on z. Only informational.
    pub fn with_z_dependence(mut self, on: bool) -> Self {
        self.z_dependence = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn z_dependence(&self) -> bool {
        self.z_dependence
    }

    pub fn analytic_flags(&self) -> AnalyticFlags {
        AnalyticFlags {
            dp_a: self.dp_a.is_some(),
            d2p_a: self.d2p_a.is_some(),
            dz_a: self.dz_a.is_some(),
            dx_a: self.dx_a.is_some(),
            dp_b: self.dp_b.is_some(),
            dz_b: self.dz_b.is_some(),
            dx_b: self.dx_b.is_some(),
        }
    }

    pub fn a(&self, x: &[f64], z: f64, p: &[f64]) -> SymMat {
        (self.a)(x, z, p)
    }

    pub fn b(&self, x: &[f64], z: f64, p: &[f64]) -> f64 {
        (self.b)(x, z, p)
    }

    pub fn dp_a(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<SymMat> {
        match &self.dp_a {
            Some(f) => f(x, z, p),
            None => (0..self.n)
                .map(|k| {
                    let h = step(p[k]);
                    (self.a(x, z, &bumped(p, k, h)) - self.a(x, z, &bumped(p, k, -h))) * (0.5 / h)
                })
                .collect(),
        }
    }

    /// Row-major n×n list of ∂²A/∂p_k∂p_l. Without a closed form this
    /// differences the first derivative (analytic or not) with a larger step.
    pub fn d2p_a(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<SymMat> {
        if let Some(f) = &self.d2p_a {
            return f(x, z, p);
        }
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                let m = if self.dp_a.is_some() {
                    let h = step(p[l]);
                    (self.dp_a(x, z, &bumped(p, l, h))[k] - self.dp_a(x, z, &bumped(p, l, -h))[k]) * (0.5 / h)
                } else {
                    let hk = 1e-4 * (1.0 + p[k].abs());
                    let hl = 1e-4 * (1.0 + p[l].abs());
                    let f = |sk: f64, sl: f64| {
                        let mut q = p.to_vec();
                        q[k] += sk;
                        q[l] += sl;
                        self.a(x, z, &q)
                    };
                    (f(hk, hl) - f(hk, -hl) - f(-hk, hl) + f(-hk, -hl)) * (0.25 / (hk * hl))
                };
                out.push(m);
            }
        }
        out
    }

    pub fn dz_a(&self, x: &[f64], z: f64, p: &[f64]) -> SymMat {
        match &self.dz_a {
            Some(f) => f(x, z, p),
            None => {
                let h = step(z);
                (self.a(x, z + h, p) - self.a(x, z - h, p)) * (0.5 / h)
            }
        }
    }

    pub fn dx_a(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<SymMat> {
        match &self.dx_a {
            Some(f) => f(x, z, p),
            None => (0..self.n)
                .map(|k| {
                    let h = step(x[k]);
                    (self.a(&bumped(x, k, h), z, p) - self.a(&bumped(x, k, -h), z, p)) * (0.5 / h)
                })
                .collect(),
        }
    }

    pub fn dp_b(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<f64> {
        match &self.dp_b {
            Some(f) => f(x, z, p),
            None => (0..self.n)
                .map(|k| {
                    let h = step(p[k]);
                    (self.b(x, z, &bumped(p, k, h)) - self.b(x, z, &bumped(p, k, -h))) / (2.0 * h)
                })
                .collect(),
        }
    }

    pub fn dz_b(&self, x: &[f64], z: f64, p: &[f64]) -> f64 {
        match &self.dz_b {
            Some(f) => f(x, z, p),
            None => {
                let h = step(z);
                (self.b(x, z + h, p) - self.b(x, z - h, p)) / (2.0 * h)
            }
        }
    }

    pub fn dx_b(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<f64> {
        match &self.dx_b {
            Some(f) => f(x, z, p),
            None => (0..self.n)
                .map(|k| {
                    let h = step(x[k]);
                    (self.b(&bumped(x, k, h), z, p) - self.b(&bumped(x, k, -h), z, p)) / (2.0 * h)
                })
                .collect(),
        }
    }
}

/// M[u] = D²u − A(x, u, Du)
pub fn augmented_hessian(d2u: &SymMat, aug: &AugmentedData, x: &[f64], z: f64, p: &[f64]) -> SymMat {
    *d2u - aug.a(x, z, p)
}

/// Sampling region for x, z and p. `x` holds one interval per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBox {
    pub x: Vec<(f64, f64)>,
    pub z: (f64, f64),
    pub p: (f64, f64),
}

impl SampleBox {
    fn draw_x(&self, s: &mut Sampler, n: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for k in 0..n {
            let (lo, hi) = self.x.get(k).copied().unwrap_or((0.0, 0.0));
            x[k] = s.range(lo, hi);
        }
        x
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.x.len() != n {
            return Err(Error::InvalidArgument(alloc::format!("sample box has {} x-intervals, need {n}", self.x.len())));
        }
        let ok = self.x.iter().chain([&self.z, &self.p]).all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi);
        if !ok {
            return Err(Error::InvalidArgument("sample box intervals must be finite with lo ≤ hi".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    /// ξ ⊥ η
    pub orthogonal: ConditionReport,
    /// ξ, η arbitrary unit vectors
    pub without_orthogonality: ConditionReport,
}

/// Samples D²_pA^{ij} ξ_i ξ_j η_k η_l. A report passes when the form never
/// drops below −1e−8; the "strict" flag marks a positive lower bound.
pub fn regularity_check(aug: &AugmentedData, sample: &SampleBox, samples: usize, seed: u64) -> Result<RegularityReport> {
    let n = aug.dim();
    sample.validate(n)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut out = [ConditionReport::new("regular_orthogonal", seed), ConditionReport::new("regular", seed)];
    for (which, rep) in out.iter_mut().enumerate() {
        let mut s = Sampler::new(seed.wrapping_add(which as u64));
        let mut min = f64::INFINITY;
        let mut max_abs = 0.0f64;
        for _ in 0..samples {
            let x = sample.draw_x(&mut s, n);
            let z = s.range(sample.z.0, sample.z.1);
            let mut p = [0.0; MAX_DIM];
            for v in p.iter_mut().take(n) {
                *v = s.range(sample.p.0, sample.p.1);
            }
            let (xi, eta) = if which == 0 { s.orthonormal_pair(n) } else { (s.unit_vector(n), s.unit_vector(n)) };
            let d2 = aug.d2p_a(&x[..n], z, &p[..n]);
            let mut w = SymMat::zeros(n);
            for k in 0..n {
                for l in 0..n {
                    w = w + d2[k * n + l] * (eta[k] * eta[l]);
                }
            }
            let form = w.quad(&xi[..n]);
            if !form.is_finite() {
                return Err(Error::InvalidArgument("non-finite second p-derivative of A".into()));
            }
            max_abs = max_abs.max(form.abs());
            if form < min {
                min = form;
                rep.worst_witness = Some(Witness { matrix: w, value: form, margin: form });
            }
        }
        rep.samples = samples;
        rep.set("min_form", min);
        rep.set("max_abs_form", max_abs);
        rep.pass = min >= -1e-8;
        if min > 1e-8 {
            rep.flag("strict");
        }
    }
    let [orthogonal, without_orthogonality] = out;
    Ok(RegularityReport { orthogonal, without_orthogonality })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthCondition {
    /// A = o(|p|²)I, p·D_pA ≤ O(|p|²)I, p·D_pB ≤ O(|p|²)
    C114,
    /// p·D_xA + |p|²D_zA ≥ o(|p|⁴)I, p·D_xB + |p|²D_zB ≥ o(|p|⁴)
    C115,
    /// D_pA, D_pB = O(|p|)
    C116,
}

/// |p| of the sampling shells.
pub const GROWTH_SHELLS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];
/// Bins below this are treated as identically zero.
const NEGLIGIBLE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthQuantity {
    pub name: String,
    /// e in o(|p|^e) or O(|p|^e)
    pub exponent: f64,
    /// true when the condition asks for o(·), false for O(·)
    pub little_o_required: bool,
    /// fitted log-log slope of the per-shell supremum
    pub slope: f64,
    pub bins: Vec<BinRow>,
    /// slope ≤ e − 0.1
    pub little_o: bool,
    /// slope ≤ e + 0.1
    pub big_o: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub condition: GrowthCondition,
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    pub quantities: Vec<GrowthQuantity>,
}

fn spectral_norm(m: &SymMat) -> Result<f64> {
    let l = eigen(m)?;
    let lam = l.lambda();
    Ok(lam[0].abs().max(lam[lam.len() - 1].abs()))
}

/// Checks one growth condition on shells |p| ∈ {10, …, 10⁴}. Each tracked
/// quantity is reduced to a nonnegative scalar; its supremum per shell is fitted
/// against |p| on a log-log scale.
pub fn structure_growth_check(
    aug: &AugmentedData,
    which: GrowthCondition,
    sample: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<GrowthReport> {
    let n = aug.dim();
    sample.validate(n)?;
    if samples < GROWTH_SHELLS.len() {
        return Err(Error::InvalidArgument(alloc::format!("need at least {} samples", GROWTH_SHELLS.len())));
    }
    let (names, exps, little): (&[&str], &[f64], &[bool]) = match which {
        GrowthCondition::C114 => (&["a", "p_dot_dp_a", "p_dot_dp_b"], &[2.0, 2.0, 2.0], &[true, false, false]),
        GrowthCondition::C115 => (&["a_x_z_lower", "b_x_z_lower"], &[4.0, 4.0], &[true, true]),
        GrowthCondition::C116 => (&["dp_a", "dp_b"], &[1.0, 1.0], &[false, false]),
    };
    let per_shell = samples / GROWTH_SHELLS.len();
    let mut sup = alloc::vec![[0.0f64; 4]; names.len()];
    let mut s = Sampler::new(seed);
    for (shell, &r) in GROWTH_SHELLS.iter().enumerate() {
        for _ in 0..per_shell {
            let x = sample.draw_x(&mut s, n);
            let z = s.range(sample.z.0, sample.z.1);
            let u = s.unit_vector(n);
            let p: Vec<f64> = u[..n].iter().map(|v| v * r).collect();
            let x = &x[..n];
            let vals: Vec<f64> = match which {
                GrowthCondition::C114 => {
                    let dpa = aug.dp_a(x, z, &p);
                    let pda = (0..n).fold(SymMat::zeros(n), |m, k| m + dpa[k] * p[k]);
                    let pdb: f64 = aug.dp_b(x, z, &p).iter().zip(&p).map(|(a, b)| a * b).sum();
                    let top = *eigen(&pda)?.lambda().last().unwrap();
                    alloc::vec![spectral_norm(&aug.a(x, z, &p))?, top.max(0.0), pdb.max(0.0)]
                }
                GrowthCondition::C115 => {
                    let p2 = r * r;
                    let dxa = aug.dx_a(x, z, &p);
                    let m = (0..n).fold(aug.dz_a(x, z, &p) * p2, |m, k| m + dxa[k] * p[k]);
                    let bot = eigen(&m)?.lambda()[0];
                    let bq: f64 = aug.dx_b(x, z, &p).iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() + p2 * aug.dz_b(x, z, &p);
                    alloc::vec![(-bot).max(0.0), (-bq).max(0.0)]
                }
                GrowthCondition::C116 => {
                    let na = aug.dp_a(x, z, &p).iter().map(|m| m.norm() * m.norm()).sum::<f64>();
                    let nb = aug.dp_b(x, z, &p).iter().map(|v| v * v).sum::<f64>();
                    alloc::vec![libm::sqrt(na), libm::sqrt(nb)]
                }
            };
            for (q, v) in vals.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(alloc::format!("non-finite {} at |p| = {r}", names[q])));
                }
                sup[q][shell] = sup[q][shell].max(*v);
            }
        }
    }
    let mut quantities = Vec::new();
    for q in 0..names.len() {
        let mut flags = Vec::new();
        let (lx, ly): (Vec<f64>, Vec<f64>) =
            GROWTH_SHELLS.iter().zip(&sup[q]).filter(|(_, v)| **v > NEGLIGIBLE).map(|(r, v)| (log10(*r), log10(*v))).unzip();
        let slope = if lx.len() >= 2 {
            fit_slope(&lx, &ly)
        } else {
            flags.push(if lx.is_empty() { "negligible" } else { "single_shell" }.to_string());
            0.0
        };
        let e = exps[q];
        let little_o = slope <= e - 0.1;
        let big_o = slope <= e + 0.1;
        let bins = GROWTH_SHELLS.iter().zip(&sup[q]).map(|(r, v)| BinRow { lo: *r, hi: *r, count: per_shell, value: *v }).collect();
        quantities.push(GrowthQuantity {
            name: names[q].to_string(),
            exponent: e,
            little_o_required: little[q],
            slope,
            bins,
            little_o,
            big_o,
            pass: if little[q] { little_o } else { big_o },
            flags,
        });
    }
    Ok(GrowthReport {
        condition: which,
        pass: quantities.iter().all(|q| q.pass),
        samples: per_shell * GROWTH_SHELLS.len(),
        seed,
        quantities,
    })
}

/// Relation of a grid function to F[D²u − A] = B on the unknown nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub min_margin: f64,
    pub min_margin_node: usize,
    /// F[u] − B ≥ −1e−9 at admissible nodes and u admissible everywhere
    pub subsolution: bool,
    /// F[u] − B ≤ 1e−9 wherever F[u] is defined
    pub supersolution: bool,
    /// min over admissible nodes of F[u] − B
    pub min_residual: f64,
    pub max_residual: f64,
    pub worst_node: usize,
}

pub const CLASSIFY_TOL: f64 = 1e-9;

pub fn classify(op: &OperatorSpec, aug: &AugmentedData, u: &GridFunction) -> Result<AdmissibilityReport> {
    let grid = u.grid();
    let mut rep = AdmissibilityReport {
        admissible: true,
        min_margin: f64::INFINITY,
        min_margin_node: 0,
        subsolution: true,
        supersolution: true,
        min_residual: f64::INFINITY,
        max_residual: f64::NEG_INFINITY,
        worst_node: 0,
    };
    let mut worst = 0.0f64;
    for i in 0..grid.n_unknowns() {
        let x = grid.nodes()[i].pos;
        let (du, d2u) = grid.gradient_hessian(u.values(), i)?;
        let z = u.values()[i];
        let m = augmented_hessian(&d2u, aug, &x, z, &du);
        let margin = op.margin(&m)?;
        if margin < rep.min_margin {
            rep.min_margin = margin;
            rep.min_margin_node = i;
        }
        if margin <= 0.0 {
            rep.admissible = false;
            rep.subsolution = false;
            continue;
        }
        let r = op.evaluate(&m)? - aug.b(&x, z, &du);
        rep.min_residual = rep.min_residual.min(r);
        rep.max_residual = rep.max_residual.max(r);
        if r < -CLASSIFY_TOL {
            rep.subsolution = false;
        }
        if r > CLASSIFY_TOL {
            rep.supersolution = false;
        }
        if r.abs() > worst {
            worst = r.abs();
            rep.worst_node = i;
        }
    }
    Ok(rep)
}

/// A complete boundary value problem on a planar domain.
pub struct ProblemSpec {
    pub op: OperatorSpec,
    pub aug: AugmentedData,
    pub domain: DomainSpec,
    pub phi: Box<dyn Field>,
    pub subsolution: Box<dyn Field>,
    pub supersolution: Option<Box<dyn Field>>,
    pub exact: Option<Box<dyn Field>>,
}

impl core::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ProblemSpec").field("op", &self.op).field("domain", &self.domain).finish()
    }
}

/// Tolerance for ū = φ on boundary nodes.
pub const TRACE_TOL: f64 = 1e-8;

impl ProblemSpec {
    /// Checks dimensions, the boundary trace of ū against φ and B > a0 at the
    /// given boundary and interior points.
    pub fn validate_at(&self, interior: &[[f64; 2]], boundary: &[[f64; 2]]) -> Result<()> {
        if self.op.dim() != 2 || self.aug.dim() != 2 {
            return Err(Error::InvalidProblem("grid problems are planar: operator and A must have n = 2".into()));
        }
        self.domain.validate()?;
        for b in boundary {
            let d = self.subsolution.value(b) - self.phi.value(b);
            if !(d.abs() <= TRACE_TOL) {
                return Err(Error::InvalidProblem(alloc::format!(
                    "subsolution differs from φ by {d:e} at boundary point ({}, {})",
                    b[0],
                    b[1]
                )));
            }
        }
        let a0 = self.op.a0();
        for x in interior {
            let z = self.subsolution.value(x);
            let p = self.subsolution.gradient(x);
            let b = self.aug.b(x, z, &p);
            if !b.is_finite() || b <= a0 {
                return Err(Error::InvalidProblem(alloc::format!("B = {b} is not above a0 = {a0} at ({}, {})", x[0], x[1])));
            }
        }
        Ok(())
    }
}
