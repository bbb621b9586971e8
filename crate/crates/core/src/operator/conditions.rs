//! Sampling certificates for the structure conditions on F. Each report
//! carries its seed; rerunning with the same (seed, samples) reproduces it.

use alloc::vec::Vec;

use libm::{floor, log10, pow};
use serde::Serialize;

use super::OperatorSpec;
use crate::error::{Error, Result};
use crate::report::{fit_slope, BinRow, ConditionReport, Witness};
use crate::sampling::Sampler;
use crate::symcore::{eigen, SymMat, MAX_DIM};

const F2_STEP: f64 = 1e-3;
const F2_TOL: f64 = 1e-6;
const F3_TOL: f64 = 1e-3;
const F5_TOL: f64 = 1e-8;
const MONOTONE_TOL: f64 = 1e-9;
const SLOPE_TOL_2_52: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct F123Report {
    pub f1: ConditionReport,
    pub f2: ConditionReport,
    pub f3: ConditionReport,
}

impl F123Report {
    pub fn pass(&self) -> bool {
        self.f1.pass && self.f2.pass && self.f3.pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct F5Report {
    pub f5_inf: ConditionReport,
    pub cond_3_1: ConditionReport,
}

fn need_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be ≥ 1".into()));
    }
    Ok(())
}

fn need_level(op: &OperatorSpec, a: f64) -> Result<()> {
    if !(a > op.a0()) || !a.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("level a = {a} must be finite and above a0 = {}", op.a0())));
    }
    Ok(())
}

fn witness(op: &OperatorSpec, r: &SymMat, value: f64) -> Witness {
    Witness { matrix: *r, value, margin: op.margin(r).unwrap_or(f64::NAN) }
}

/// Monotonicity (F_r > 0), concavity by second differences, and the limits of
/// F at the cone boundary and along r + sI.
pub fn check_f1_f2_f3(op: &OperatorSpec, samples: usize, seed: u64) -> Result<F123Report> {
    need_samples(samples)?;
    let mut rng = Sampler::new(seed);
    let mut f1 = ConditionReport::new("F1", seed);
    let mut f2 = ConditionReport::new("F2", seed);
    let mut f3 = ConditionReport::new("F3", seed);
    let (mut f1_min, mut f2_max, mut f3_gap) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut f3_ok = true;
    let mut f3_worst = f64::NEG_INFINITY;
    let mut f2_skipped = 0usize;

    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 100 * samples {
            return Err(Error::InsufficientSamples { accepted, attempts });
        }
        let Some(r) = rng.cone_matrix(op.cone(), -1.0, 1.0, 1) else { continue };
        accepted += 1;
        let d = op.derivatives(&r)?;

        let g_min = d.eig_grad().iter().copied().fold(f64::INFINITY, f64::min);
        if g_min < f1_min {
            f1_min = g_min;
            f1.worst_witness = Some(witness(op, &r, g_min));
        }

        match second_difference(op, &r, &mut rng) {
            Some(d2) => {
                if d2 > f2_max {
                    f2_max = d2;
                    f2.worst_witness = Some(witness(op, &r, d2));
                }
            }
            None => f2_skipped += 1,
        }

        let (ok, gap) = boundary_and_growth(op, d.spectrum.lambda(), d.value)?;
        let score = if ok { gap } else { f64::INFINITY };
        if score > f3_worst {
            f3_worst = score;
            f3.worst_witness = Some(witness(op, &r, gap));
        }
        f3_ok &= ok;
        f3_gap = f3_gap.max(gap);
    }

    f1.samples = samples;
    f1.pass = f1_min > 0.0;
    f1.set("min_eig_grad", f1_min);

    f2.samples = samples - f2_skipped;
    f2.pass = f2_max <= F2_TOL && f2.samples > 0;
    f2.set("max_second_difference", f2_max);
    f2.set("step", F2_STEP);
    if f2_skipped > 0 {
        f2.set("skipped", f2_skipped as f64);
    }

    f3.samples = samples;
    f3.pass = f3_ok;
    if op.a0().is_finite() {
        f3.set("a0", op.a0());
        f3.set("max_relative_boundary_gap", f3_gap);
    } else {
        f3.flag("a0_minus_infinity");
    }
    Ok(F123Report { f1, f2, f3 })
}

/// (F(r+tη) − 2F(r) + F(r−tη))/t² for a random direction with ‖η‖ = ‖r‖.
/// None if no direction kept both points inside the cone.
fn second_difference(op: &OperatorSpec, r: &SymMat, rng: &mut Sampler) -> Option<f64> {
    let n = op.dim();
    let scale = r.norm();
    for _ in 0..20 {
        let e = rng.symmetric(n);
        let en = e.norm();
        if en < 1e-8 {
            continue;
        }
        let eta = e.scaled(scale / en);
        let plus = *r + eta.scaled(F2_STEP);
        let minus = *r - eta.scaled(F2_STEP);
        let (Ok(fp), Ok(fm)) = (op.evaluate(&plus), op.evaluate(&minus)) else { continue };
        let f0 = op.evaluate(r).ok()?;
        return Some((fp - 2.0 * f0 + fm) / (F2_STEP * F2_STEP));
    }
    None
}

/// Ray from λ toward the boundary point reached by lowering the smallest
/// eigenvalue, then the ray λ + s·1. Returns (ok, relative boundary gap).
fn boundary_and_growth(op: &OperatorSpec, lam: &[f64], f0: f64) -> Result<(bool, f64)> {
    let n = lam.len();
    let cone = op.cone();
    let mut shifted = [0.0; MAX_DIM];
    let mut at = |s: f64| {
        shifted[..n].copy_from_slice(lam);
        shifted[0] -= s;
        shifted
    };
    let mut lo = 0.0;
    let mut hi = 1.0 + lam.iter().map(|l| l.abs()).sum::<f64>();
    while cone.margin_eigs(&at(hi)[..n]) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cone.margin_eigs(&at(mid)[..n]) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_star = lo;

    let mut ok = true;
    let mut prev = f0;
    let mut values = Vec::with_capacity(10);
    for j in 1..=10 {
        let theta = 1.0 - pow(10.0, -(j as f64));
        let v = match op.evaluate_eigs(&at(theta * s_star)[..n]) {
            Ok(v) => v,
            Err(_) => return Ok((false, f64::INFINITY)),
        };
        if v > prev + 1e-12 * (1.0 + prev.abs()) {
            ok = false;
        }
        prev = v;
        values.push(v);
    }
    let last = *values.last().unwrap_or(&f0);
    let gap = if op.a0().is_finite() {
        let g = (last - op.a0()).abs() / (f0 - op.a0()).abs().max(f64::MIN_POSITIVE);
        ok &= g <= F3_TOL;
        g
    } else {
        // log-type divergence: each further decade must still drop by a fixed amount
        ok &= values.windows(2).rev().take(3).all(|w| w[0] - w[1] >= 1.0);
        0.0
    };

    let top = 1.0 + lam.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let mut up = [0.0; MAX_DIM];
    let mut prev = f0;
    for j in 0..=8 {
        let s = top * pow(10.0, j as f64);
        for i in 0..n {
            up[i] = lam[i] + s;
        }
        let v = op.evaluate_eigs(&up[..n])?;
        if !(v > prev) || (j >= 6 && v - prev < 0.5) {
            ok = false;
        }
        prev = v;
    }
    Ok((ok, gap))
}

/// Lower bound F_r ξξ ≥ δ0 + δ1·𝒯 for ξ a unit eigenvector of a negative
/// eigenvalue, over samples with F(r) ≥ a. Vacuous on the positive cone.
///
/// The reported pair is δ1 = ½ min(q/𝒯), δ0 = ½ min q, which always
/// satisfies the bound and can only shrink as samples are added.
pub fn check_f7(op: &OperatorSpec, a: f64, samples: usize, seed: u64) -> Result<ConditionReport> {
    need_samples(samples)?;
    need_level(op, a)?;
    let mut rep = ConditionReport::new("F7", seed);
    if op.cone().is_positive_cone() {
        rep.pass = true;
        rep.flag("vacuous_domain");
        return Ok(rep);
    }
    let mut rng = Sampler::new(seed);
    let shift = log10(a.abs().max(1.0));
    let (mut q_min, mut ratio_min) = (f64::INFINITY, f64::INFINITY);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 100 * samples {
            return Err(Error::InsufficientSamples { accepted, attempts });
        }
        let r = rng.box_matrix(op.dim(), shift - 1.0, shift + 3.0);
        let Ok(d) = op.derivatives(&r) else { continue };
        if d.value < a || d.spectrum.lambda()[0] >= 0.0 {
            continue;
        }
        accepted += 1;
        let q = d.grad.quad(d.spectrum.vector(0));
        if q < q_min {
            q_min = q;
            rep.worst_witness = Some(witness(op, &r, q));
        }
        ratio_min = ratio_min.min(q / d.trace_t);
    }
    let (delta0, delta1) = (0.5 * q_min, 0.5 * ratio_min);
    rep.samples = samples;
    rep.pass = delta0 > 0.0 && delta1 > 0.0;
    rep.set("a", a);
    rep.set("delta0", delta0);
    rep.set("delta1", delta1);
    Ok(rep)
}

/// inf 𝒯 over {F > a}, and the ratio (r·F_r)/(|λ₀|𝒯) binned by log₁₀|λ₀|.
pub fn check_f5inf_and_31(op: &OperatorSpec, a: f64, samples: usize, seed: u64) -> Result<F5Report> {
    need_samples(samples)?;
    need_level(op, a)?;
    let mut rng = Sampler::new(seed);
    let shift = log10(a.abs().max(1.0));
    let mut f5 = ConditionReport::new("F5_inf", seed);
    let mut c31 = ConditionReport::new("3.1", seed);
    let mut t_inf = f64::INFINITY;
    const LO: i32 = -2;
    const HI: i32 = 6;
    let mut bins: Vec<(usize, f64)> = alloc::vec![(0, f64::INFINITY); (HI - LO) as usize];
    let mut worst_ratio = f64::INFINITY;
    let mut negatives = 0;

    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 100 * samples {
            return Err(Error::InsufficientSamples { accepted, attempts });
        }
        let r = rng.box_matrix(op.dim(), shift - 1.0, shift + 4.0);
        let Ok(d) = op.derivatives(&r) else { continue };
        if !(d.value > a) {
            continue;
        }
        accepted += 1;
        if d.trace_t < t_inf {
            t_inf = d.trace_t;
            f5.worst_witness = Some(witness(op, &r, d.trace_t));
        }
        let l0 = d.spectrum.lambda()[0];
        if l0 < 0.0 {
            let ratio = d.r_dot_grad() / (l0.abs() * d.trace_t);
            let b = (floor(log10(l0.abs())) as i32).clamp(LO, HI - 1);
            let bin = &mut bins[(b - LO) as usize];
            bin.0 += 1;
            bin.1 = bin.1.min(ratio);
            if ratio < worst_ratio {
                worst_ratio = ratio;
                c31.worst_witness = Some(witness(op, &r, ratio));
            }
            if ratio < 0.0 {
                negatives += 1;
            }
        }
    }

    f5.samples = samples;
    f5.pass = t_inf >= F5_TOL;
    f5.set("a", a);
    f5.set("delta0", t_inf);

    let used: usize = bins.iter().map(|b| b.0).sum();
    c31.samples = used;
    c31.set("a", a);
    if used == 0 {
        c31.pass = true;
        c31.flag("vacuous_domain");
    } else {
        for (i, (count, v)) in bins.iter().enumerate() {
            if *count > 0 {
                let lo = pow(10.0, (LO + i as i32) as f64);
                c31.bins.push(BinRow { lo, hi: 10.0 * lo, count: *count, value: *v });
            }
        }
        c31.set("min_ratio", worst_ratio);
        c31.pass = negatives == 0;
        if negatives > 0 {
            c31.flag("negative");
        } else {
            let first = c31.bins.first().map_or(0.0, |b| b.value);
            let last = c31.bins.last().map_or(0.0, |b| b.value);
            if c31.bins.len() > 1 && last < 0.1 * first {
                c31.flag("decays_toward_zero");
            }
        }
    }
    Ok(F5Report { f5_inf: f5, cond_3_1: c31 })
}

/// λ_i ≥ λ_j ⇒ f_i ≤ f_j over admissible samples.
pub fn check_eig_monotone(op: &OperatorSpec, samples: usize, seed: u64) -> Result<ConditionReport> {
    need_samples(samples)?;
    let mut rng = Sampler::new(seed);
    let mut rep = ConditionReport::new("eig_monotone", seed);
    let mut worst = f64::NEG_INFINITY;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 100 * samples {
            return Err(Error::InsufficientSamples { accepted, attempts });
        }
        let Some(r) = rng.cone_matrix(op.cone(), -1.0, 1.0, 1) else { continue };
        accepted += 1;
        let s = eigen(&r)?;
        let lam = s.lambda();
        let g = op.eig_grad(lam)?;
        for i in 0..lam.len() {
            for j in 0..lam.len() {
                if lam[i] >= lam[j] + MONOTONE_TOL {
                    let excess = g[i] - g[j];
                    if excess > worst {
                        worst = excess;
                        rep.worst_witness = Some(witness(op, &r, excess));
                    }
                }
            }
        }
    }
    rep.samples = samples;
    rep.pass = worst <= MONOTONE_TOL;
    rep.set("max_excess", worst);
    Ok(rep)
}

/// sup |r·F_r| / (𝒯 + |F|) per decade of ‖r‖ up to 10⁶; passes when the
/// log-log slope of the binned sup is at most 0.05.
pub fn check_2_52(op: &OperatorSpec, a: f64, samples: usize, seed: u64) -> Result<ConditionReport> {
    need_samples(samples)?;
    need_level(op, a)?;
    let mut rng = Sampler::new(seed);
    let mut rep = ConditionReport::new("2.52", seed);
    let shift = log10(a.abs().max(1.0));
    const DECADES: usize = 7;
    let mut bins = [(0usize, 0.0f64, 0.0f64); DECADES];
    let mut sup = f64::NEG_INFINITY;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 100 * samples {
            return Err(Error::InsufficientSamples { accepted, attempts });
        }
        let r = rng.box_matrix(op.dim(), shift, 6.0);
        let Ok(d) = op.derivatives(&r) else { continue };
        if !(d.value > a) {
            continue;
        }
        accepted += 1;
        let ratio = d.r_dot_grad().abs() / (d.trace_t + d.value.abs());
        let lr = log10(r.norm());
        let b = (floor(lr).max(0.0) as usize).min(DECADES - 1);
        let bin = &mut bins[b];
        bin.0 += 1;
        bin.1 = bin.1.max(ratio);
        bin.2 += lr;
        if ratio > sup {
            sup = ratio;
            rep.worst_witness = Some(witness(op, &r, ratio));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, (count, v, lsum)) in bins.iter().enumerate() {
        if *count > 0 {
            let lo = pow(10.0, i as f64);
            rep.bins.push(BinRow { lo, hi: 10.0 * lo, count: *count, value: *v });
            if *v > 0.0 {
                xs.push(lsum / *count as f64);
                ys.push(log10(*v));
            }
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientSamples { accepted: xs.len(), attempts });
    }
    let slope = fit_slope(&xs, &ys);
    rep.samples = samples;
    rep.pass = slope <= SLOPE_TOL_2_52;
    rep.set("a", a);
    rep.set("sup_ratio", sup);
    rep.set("loglog_slope", slope);
    Ok(rep)
}
