//! Executes the actions of a run configuration and writes the artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hessfield_core::augmentation::{
    classify, regularity_check, structure_growth_check, AdmissibilityReport, GrowthCondition, GrowthReport, RegularityReport, SampleBox,
};
use hessfield_core::griddisc::GridFunction;
use hessfield_core::operator::{check_2_52, check_eig_monotone, check_f1_f2_f3, check_f5inf_and_31, check_f7, OperatorSpec};
use hessfield_core::report::{ConditionReport, SCHEMA_VERSION};
use hessfield_core::solver::{DiscreteProblem, SolveReport};
use hessfield_core::verify::{
    boundary_identity_check, default_eps_ladder, default_k_ladder, estimate_monitor, g_function_scan, observed_orders, verify_lemma21,
    verify_lemma22, verify_phi_from, BarrierCertificate, BoundaryIdentityReport, GScanReport, MonitorReport, PhiReport, DEFAULT_R_LADDER,
};
use serde::Serialize;

use crate::config::{Action, ProblemSummary, RunConfig};

/// Errors at or below this are reported as exact in the convergence table.
const EXACT_ERR: f64 = 1e-12;

pub const CONDITION_NAMES: [&str; 9] = ["F1", "F2", "F3", "F5", "F7", "eig_monotone", "2.52", "regular", "growth"];

/// Result of a run: which certificates failed, and the files written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    schema_version: u32,
    seed: u64,
    problem: &'a ProblemSummary,
    subsolution: &'a AdmissibilityReport,
    solve: &'a SolveReport,
}

#[derive(Serialize, Default)]
struct ConditionsOutput {
    schema_version: u32,
    seed: u64,
    operator: String,
    a: String,
    b: String,
    level: f64,
    pass: bool,
    conditions: Vec<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regularity: Option<RegularityReport>,
    growth: Vec<GrowthReport>,
}

#[derive(Serialize)]
struct BarriersOutput {
    schema_version: u32,
    seed: u64,
    lemma21: BarrierCertificate,
    lemma22: BarrierCertificate,
    phi: Option<PhiReport>,
    phi_skipped: Option<String>,
    pass: bool,
}

#[derive(Serialize)]
struct BoundaryOutput {
    schema_version: u32,
    identity: Option<BoundaryIdentityReport>,
    g_scan: Option<GScanReport>,
    monitor: MonitorReport,
    pass: bool,
}

#[derive(Serialize)]
struct Timing {
    action: &'static str,
    seconds: f64,
}

#[derive(Serialize)]
struct TimingOutput {
    schema_version: u32,
    actions: Vec<Timing>,
}

/// One row of the convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub err_max: f64,
    /// None on the first row; Some(None) when both errors are at roundoff
    pub order: Option<Option<f64>>,
    pub sup_d2u: f64,
    pub sup_du: f64,
}

pub struct Runner<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    solved: Option<(DiscreteProblem, GridFunction)>,
    outcome: Outcome,
    timing: Vec<Timing>,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a RunConfig, out: PathBuf) -> Self {
        Runner { cfg, out, solved: None, outcome: Outcome::default(), timing: Vec::new() }
    }

    pub fn run(mut self, actions: &[Action]) -> Result<Outcome> {
        if actions.is_empty() {
            bail!("{}: no actions requested", self.cfg.path().display());
        }
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        for a in actions {
            let t0 = Instant::now();
            match a {
                Action::Solve => self.solve()?,
                Action::CheckConditions => self.check_conditions()?,
                Action::VerifyBarriers => self.verify_barriers()?,
                Action::BoundaryScan => self.boundary_scan()?,
                Action::SweepH => {
                    let hs = self.cfg.sweep_spacings();
                    self.sweep(&hs)?;
                }
            }
            self.timing.push(Timing { action: a.name(), seconds: t0.elapsed().as_secs_f64() });
        }
        let timing = TimingOutput { schema_version: SCHEMA_VERSION, actions: std::mem::take(&mut self.timing) };
        self.write_json("timing.json", &timing)?;
        Ok(self.outcome)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.out.join(name);
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        self.outcome.written.push(path);
        Ok(())
    }

    fn fail(&mut self, what: impl Into<String>) {
        self.outcome.failures.push(what.into());
    }

    fn context(&self) -> String {
        format!("{} (h = {})", self.cfg.path().display(), self.cfg.h())
    }

    fn ensure_solved(&mut self) -> Result<()> {
        if self.solved.is_none() {
            self.solve()?;
        }
        Ok(())
    }

    fn solve(&mut self) -> Result<()> {
        let ctx = self.context();
        let dp = DiscreteProblem::new(self.cfg.problem(self.cfg.h())?).with_context(|| format!("setting up {ctx}"))?;
        let spec = dp.spec();
        let sub = classify(&spec.op, &spec.aug, dp.subsolution()).with_context(|| format!("classifying ū in {ctx}"))?;
        let (u, report) = dp.continuation_solve(&self.cfg.solver).with_context(|| format!("solving {ctx}"))?;
        write_solution(&self.out.join("solution.csv"), &u)?;
        self.outcome.written.push(self.out.join("solution.csv"));
        let summary = self.cfg.summary();
        let out = SolveOutput { schema_version: SCHEMA_VERSION, seed: self.cfg.seed, problem: &summary, subsolution: &sub, solve: &report };
        self.write_json("report.json", &out)?;
        self.solved = Some((dp, u));
        Ok(())
    }

    fn check_conditions(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let ch = &cfg.checks;
        let seed = cfg.seed;
        let spec = cfg.problem(cfg.h())?;
        let op: OperatorSpec = spec.op;
        let mut out = ConditionsOutput {
            schema_version: SCHEMA_VERSION,
            seed,
            operator: cfg.problem.operator.get_ref().clone(),
            a: cfg.problem.a.get_ref().clone(),
            b: cfg.problem.b.get_ref().clone(),
            level: ch.level,
            ..Default::default()
        };
        let want = |n: &str| ch.conditions.iter().any(|c| c == n);
        for c in &ch.conditions {
            if !CONDITION_NAMES.contains(&c.as_str()) {
                bail!("{}: unknown condition `{c}` (known: {})", cfg.path().display(), CONDITION_NAMES.join(", "));
            }
        }
        if want("F1") || want("F2") || want("F3") {
            let r = check_f1_f2_f3(&op, ch.samples, seed)?;
            for (name, rep) in [("F1", r.f1), ("F2", r.f2), ("F3", r.f3)] {
                if want(name) {
                    out.conditions.push(rep);
                }
            }
        }
        if want("F5") {
            let r = check_f5inf_and_31(&op, ch.level, ch.samples, seed)?;
            out.conditions.extend([r.f5_inf, r.cond_3_1]);
        }
        if want("F7") {
            out.conditions.push(check_f7(&op, ch.level, ch.samples, seed)?);
        }
        if want("eig_monotone") {
            out.conditions.push(check_eig_monotone(&op, ch.samples, seed)?);
        }
        if want("2.52") {
            out.conditions.push(check_2_52(&op, ch.level, ch.samples, seed)?);
        }
        let [bx, by] = spec.domain.bounding_box();
        let z_box = if want("regular") || want("growth") {
            ch.z_box.with_context(|| {
                format!("{}: [checks] z_box is required for the regularity and growth checks", self.cfg.path().display())
            })?
        } else {
            [0.0, 0.0]
        };
        let sample = SampleBox { x: vec![bx, by], z: (z_box[0], z_box[1]), p: (ch.p_box[0], ch.p_box[1]) };
        let mut pass = out.conditions.iter().all(|c| c.pass);
        if want("regular") {
            let r = regularity_check(&spec.aug, &sample, ch.samples, seed)?;
            pass &= r.orthogonal.pass;
            out.regularity = Some(r);
        }
        if want("growth") {
            for which in [GrowthCondition::C114, GrowthCondition::C115, GrowthCondition::C116] {
                let r = structure_growth_check(&spec.aug, which, &sample, ch.samples, seed)?;
                pass &= r.pass;
                out.growth.push(r);
            }
        }
        out.pass = pass;
        if !pass {
            let mut failed: Vec<String> = out.conditions.iter().filter(|c| !c.pass).map(|c| c.condition.clone()).collect();
            if out.regularity.as_ref().is_some_and(|r| !r.orthogonal.pass) {
                failed.push("regular".into());
            }
            failed.extend(out.growth.iter().filter(|g| !g.pass).map(|g| format!("growth {:?}", g.condition)));
            self.fail(format!("conditions: {}", failed.join(", ")));
        }
        self.write_json("conditions.json", &out)
    }

    fn verify_barriers(&mut self) -> Result<()> {
        self.ensure_solved()?;
        let (dp, u) = self.solved.as_ref().expect("solved");
        let ctx = self.context();
        let l21 = verify_lemma21(dp, u, &default_k_ladder()).with_context(|| format!("interior barrier on {ctx}"))?;
        let l22 =
            verify_lemma22(dp, u, &default_k_ladder(), &default_eps_ladder()).with_context(|| format!("boundary barrier on {ctx}"))?;
        let (phi, phi_skipped) = if l22.pass {
            (Some(verify_phi_from(dp, u, &l22)?), None)
        } else {
            (None, Some("no passing boundary barrier certificate".to_string()))
        };
        let pass = l21.pass && l22.pass && phi.as_ref().is_some_and(|p| p.pass);
        let out =
            BarriersOutput { schema_version: SCHEMA_VERSION, seed: self.cfg.seed, lemma21: l21, lemma22: l22, phi, phi_skipped, pass };
        if !pass {
            let mut f = Vec::new();
            if !out.lemma21.pass {
                f.push("lemma21");
            }
            if !out.lemma22.pass {
                f.push("lemma22");
            }
            if !out.phi.as_ref().is_some_and(|p| p.pass) {
                f.push("phi");
            }
            self.fail(format!("barriers: {}", f.join(", ")));
        }
        self.write_json("barriers.json", &out)
    }

    fn boundary_scan(&mut self) -> Result<()> {
        self.ensure_solved()?;
        let (dp, u) = self.solved.as_ref().expect("solved");
        let smooth = !dp.grid().domain().has_corners();
        let identity = if smooth { Some(boundary_identity_check(dp, u)?) } else { None };
        let g_scan = if smooth { Some(g_function_scan(dp, u, &DEFAULT_R_LADDER)?) } else { None };
        let monitor = estimate_monitor(dp, u)?;
        let pass = g_scan.as_ref().map_or(true, |g| g.pass && g.monotone);
        let out = BoundaryOutput { schema_version: SCHEMA_VERSION, identity, g_scan, monitor, pass };
        if !pass {
            self.fail("boundary: g-function scan");
        }
        self.write_json("boundary.json", &out)
    }

    /// Solves at each spacing (in parallel) and writes convergence.csv.
    pub fn sweep(&mut self, hs: &[f64]) -> Result<Vec<SweepRow>> {
        let cfg = self.cfg;
        if hs.len() < 2 {
            bail!("{}: an h-sweep needs at least two spacings", cfg.path().display());
        }
        if cfg.problem.exact.is_none() {
            bail!("{}: an h-sweep needs an exact solution in [problem] exact", cfg.path().display());
        }
        // set every problem up first so bad data fails before any solve
        let problems = hs
            .iter()
            .map(|h| {
                cfg.problem(*h)
                    .and_then(|p| Ok(DiscreteProblem::new(p)?))
                    .with_context(|| format!("setting up {} at h = {h}", cfg.path().display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let results: Vec<Result<SolveReport>> = std::thread::scope(|s| {
            let handles: Vec<_> = problems
                .iter()
                .zip(hs)
                .map(|(dp, h)| {
                    s.spawn(move || {
                        dp.continuation_solve(&cfg.solver)
                            .map(|(_, r)| r)
                            .with_context(|| format!("solving {} at h = {h}", cfg.path().display()))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        });
        let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
        let errs: Vec<f64> = reports.iter().map(|r| r.max_error.expect("exact solution given")).collect();
        let orders = observed_orders(hs, &errs);
        let rows: Vec<SweepRow> = reports
            .iter()
            .enumerate()
            .map(|(k, r)| SweepRow {
                h: hs[k],
                err_max: errs[k],
                order: (k > 0).then(|| (errs[k - 1].max(errs[k]) > EXACT_ERR).then(|| orders[k - 1])),
                sup_d2u: r.sup_d2u,
                sup_du: r.sup_du,
            })
            .collect();
        let path = self.out.join("convergence.csv");
        write_convergence(&path, &rows)?;
        self.outcome.written.push(path);
        Ok(rows)
    }
}

fn write_solution(path: &Path, u: &GridFunction) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["x", "y", "class", "value"])?;
    for (node, v) in u.grid().nodes().iter().zip(u.values()) {
        w.write_record([format!("{:e}", node.pos[0]), format!("{:e}", node.pos[1]), node.class.as_str().to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn write_convergence(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["h", "err_max", "order", "sup_D2u", "sup_Du"])?;
    for r in rows {
        let order = match r.order {
            None => String::new(),
            Some(None) => "exact".to_string(),
            Some(Some(o)) => format!("{o:.4}"),
        };
        w.write_record([format!("{:e}", r.h), format!("{:e}", r.err_max), order, format!("{:e}", r.sup_d2u), format!("{:e}", r.sup_du)])?;
    }
    w.flush()?;
    Ok(())
}
