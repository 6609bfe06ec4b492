//! Named verification batteries run against a stored trajectory.

use fdlab::diagnostics::{energy_budget, speed_bound, verify_interpolation, verify_parabolic_sobolev, vrho_l1_bound, weak_solution_residual, interpolation_r2};
use fdlab::diffusion::{diffusion_energy_identity, entropy_dissipation_report, step_diffusion};
use fdlab::drift::{classify, DriftClass};
use fdlab::field::MixedNormSpec;
use fdlab::metrics::{holder_fit, majorant_constant, metric_speed, w2_1d, w2_fields, wp_exact, DiscreteMeasure};
use fdlab::splitting::{cosine_family, is_divergence_free, max_abs_residual, splitting_energy_report, weak_residual, TrajectoryRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const BATTERIES: &[&str] = &["lemma-A1", "energy-divfree", "energy-budget", "speed", "holder", "metric-speed", "weak", "splitting-residual", "inequalities", "vrho", "metrics", "all"];

/// Options shared by the batteries.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Class for `energy-budget`; defaults to `D` for divergence-free drifts and `S` otherwise.
    pub class: Option<String>,
    pub q: f64,
    pub space: f64,
    pub time: f64,
    /// Threshold for `weak`.
    pub weak_tolerance: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { class: None, q: 1.0, space: f64::INFINITY, time: f64::INFINITY, weak_tolerance: 1e-2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    /// Signed margin: nonnegative when the check holds.
    pub slack: Option<f64>,
    pub detail: Value,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, slack: Option<f64>, detail: Value) -> Self {
        Self { name: name.into(), passed, skipped: false, slack, detail }
    }
    fn skipped(name: impl Into<String>, reason: String) -> Self {
        Self { name: name.into(), passed: true, skipped: true, slack: None, detail: json!({ "reason": reason }) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub battery: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn compute<T>(r: fdlab::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Compute)
}

fn lemma_a1(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let sched = traj.schedule();
    let p = sched.diffusion;
    let mut qs: Vec<f64> = sched.diagnostic_exponents.iter().copied().filter(|q| *q > 1.0).collect();
    if qs.is_empty() {
        qs.push(2.0);
    }
    let mut worst_lq = f64::INFINITY;
    let mut worst_entropy = f64::INFINITY;
    let mut passed = true;
    for s in &traj.snapshots {
        let after = compute(step_diffusion(&s.field, &p))?.field;
        for &q in &qs {
            let r = compute(diffusion_energy_identity(&s.field, &after, &p, q))?;
            let tol = 1e-10 * (1.0 + r.before.abs());
            worst_lq = worst_lq.min(r.residual + tol);
            passed &= r.residual >= -tol;
        }
        let e = compute(entropy_dissipation_report(&s.field, &after, &p))?;
        worst_entropy = worst_entropy.min(e.slack);
        passed &= e.satisfied;
    }
    Ok(vec![CheckResult::new(
        "homogeneous-step identities",
        passed,
        Some(worst_lq.min(worst_entropy)),
        json!({ "exponents": qs, "min_lq_slack": worst_lq, "min_entropy_slack": worst_entropy, "snapshots": traj.snapshots.len() }),
    )])
}

fn energy_divfree(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    if !compute(is_divergence_free(traj))? {
        return Err(CliError::Compute(fdlab::Error::Refused(format!(
            "drift `{}` is not divergence-free; the divergence-free classes (D, D_plus, D_s) require div V = 0, so the monotonicity estimate is not claimed",
            traj.provenance.drift.kind_name()
        ))));
    }
    let n = traj.schedule().substeps as f64;
    let mut qs = vec![1.0];
    qs.extend(traj.schedule().diagnostic_exponents.iter().copied().filter(|q| *q > 1.0));
    let mut out = Vec::new();
    for q in qs {
        let r = compute(splitting_energy_report(traj, &drift, q))?;
        let tol = (1.0 + r.rows.first().map_or(0.0, |row| row.before.abs())) / n;
        out.push(CheckResult::new(
            format!("monotone functional q={q}"),
            r.max_violation <= tol,
            Some(tol - r.max_violation),
            json!({ "max_violation": r.max_violation, "constant": r.constant, "tolerance": tol }),
        ));
    }
    Ok(out)
}

fn class_for(traj: &TrajectoryRecord, opts: &VerifyOptions) -> Result<DriftClass, CliError> {
    match &opts.class {
        Some(c) => compute(DriftClass::parse(c)),
        None => Ok(if compute(is_divergence_free(traj))? { DriftClass::D } else { DriftClass::S }),
    }
}

fn energy(traj: &TrajectoryRecord, opts: &VerifyOptions) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    let class = class_for(traj, opts)?;
    let spec = compute(MixedNormSpec::new(opts.space, opts.time))?;
    let sched = traj.schedule();
    let report = compute(classify(&drift, sched.diffusion.m, opts.q, spec, class, sched.horizon))?;
    let budget = compute(energy_budget(traj, &drift, opts.q, &report))?;
    Ok(vec![CheckResult::new(
        format!("energy budget q={}", opts.q),
        budget.satisfied,
        Some(budget.rhs_constant + budget.tolerance - budget.lhs),
        serde_json::to_value(&budget)?,
    )])
}

fn speed(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    let r = compute(speed_bound(traj, &drift))?;
    Ok(vec![CheckResult::new("speed bound", r.within_factor_two, Some(2.0 * r.rhs - r.lhs), serde_json::to_value(&r)?)])
}

/// `(s, t, W2)` for every ordered pair of snapshots.
pub fn w2_pairs(traj: &TrajectoryRecord) -> Result<Vec<(f64, f64, f64)>, CliError> {
    use rayon::prelude::*;
    let snaps = &traj.snapshots;
    let idx: Vec<(usize, usize)> = (0..snaps.len()).flat_map(|i| (i + 1..snaps.len()).map(move |j| (i, j))).collect();
    idx.par_iter()
        .map(|&(i, j)| Ok((snaps[i].time, snaps[j].time, compute(w2_fields(&snaps[i].field, &snaps[j].field))?)))
        .collect()
}

fn holder(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let pairs = w2_pairs(traj)?;
    let fit = compute(holder_fit(&pairs))?;
    let c = majorant_constant(&pairs, 0.5);
    Ok(vec![CheckResult::new("W2 majorized by C |t-s|^(1/2)", c.is_finite(), None, json!({ "majorant_constant": c, "fit": fit }))])
}

fn metric(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    let p = traj.schedule().diffusion;
    let snaps: Vec<(f64, &fdlab::DensityField)> = traj.snapshots.iter().map(|s| (s.time, &s.field)).collect();
    let r = compute(metric_speed(&snaps, &drift, p.m, p.epsilon))?;
    Ok(vec![CheckResult::new("distance bounded by integrated speed", r.violations == 0, Some(r.min_slack + r.budget), serde_json::to_value(&r)?)])
}

fn weak(traj: &TrajectoryRecord, opts: &VerifyOptions) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    let fns = cosine_family(traj.grid().dim(), 2, 1, true);
    let r = compute(weak_solution_residual(traj, &drift, &fns))?;
    let max = max_abs_residual(&r);
    Ok(vec![CheckResult::new("weak-solution residual", max <= opts.weak_tolerance, Some(opts.weak_tolerance - max), json!({ "max_abs": max, "residuals": r }))])
}

fn splitting_residual(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    let fns = cosine_family(traj.grid().dim(), 3, 2, false);
    let r = compute(weak_residual(traj, &drift, &fns))?;
    let max = max_abs_residual(&r);
    let n = traj.schedule().substeps;
    Ok(vec![CheckResult::new("splitting residual E_n", max.is_finite(), None, json!({ "n": n, "max_abs": max, "n_times_max": n as f64 * max, "residuals": r }))])
}

fn inequalities(traj: &TrajectoryRecord) -> Result<Vec<CheckResult>, CliError> {
    let g = traj.grid();
    let m = traj.schedule().diffusion.m;
    let series = traj.series();
    let mut out = Vec::new();
    if g.dim() == 2 {
        let r = compute(verify_parabolic_sobolev(g, &series, 1.0, 1.0))?;
        out.push(CheckResult::new("parabolic Sobolev (p=1, q=1)", r.constant.is_some(), None, serde_json::to_value(&r)?));
    } else {
        out.push(CheckResult::skipped("parabolic Sobolev", "needs 1 <= p < d, impossible in one dimension".into()));
    }
    if m > 0.0 && m < 1.0 {
        let d = g.dim();
        let r1 = if d == 1 { 2.0 } else { 1.5 };
        match interpolation_r2(d, 1.0, 1.0, m, r1) {
            Some(r2) => {
                let r = compute(verify_interpolation(g, &series, 1.0, 1.0, m, r1, r2))?;
                out.push(CheckResult::new(format!("interpolation (r1={r1}, r2={r2:.4})"), r.constant.is_some(), None, serde_json::to_value(&r)?));
            }
            None => out.push(CheckResult::skipped("interpolation", format!("no admissible r2 for r1 = {r1}"))),
        }
    } else {
        out.push(CheckResult::skipped("interpolation", format!("needs 0 < m < 1, got {m}")));
    }
    Ok(out)
}

fn vrho(traj: &TrajectoryRecord, opts: &VerifyOptions) -> Result<Vec<CheckResult>, CliError> {
    let drift = compute(traj.drift())?;
    let spec = compute(MixedNormSpec::new(opts.space, opts.time))?;
    let r = compute(vrho_l1_bound(traj, &drift, spec))?;
    Ok(vec![CheckResult::new("||V rho||_1 Hölder bound", r.satisfied, Some(r.rhs - r.lhs), serde_json::to_value(&r)?)])
}

/// Seeded self-test of the transport solvers: 1D quantile coupling against the simplex, and the
/// triangle inequality of the exact distance.
pub fn metrics_selftest(seed: u64, pairs: usize, atoms: usize) -> Result<Vec<CheckResult>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_1d = |rng: &mut ChaCha8Rng| {
        let xs: Vec<f64> = (0..atoms).map(|_| rng.gen::<f64>()).collect();
        let mut w: Vec<f64> = (0..atoms).map(|_| rng.gen::<f64>() + 0.01).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        DiscreteMeasure::from_1d(&xs, &w)
    };
    let mut worst_agreement = 0.0f64;
    let mut worst_triangle = f64::INFINITY;
    for _ in 0..pairs {
        let (a, b, c) = (compute(random_1d(&mut rng))?, compute(random_1d(&mut rng))?, compute(random_1d(&mut rng))?);
        let quantile = compute(w2_1d(&a, &b))?;
        let exact = compute(wp_exact(&a, &b, 2.0, 1024))?.0;
        worst_agreement = worst_agreement.max((quantile - exact).abs());
        let ac = compute(wp_exact(&a, &c, 2.0, 1024))?.0;
        let cb = compute(wp_exact(&c, &b, 2.0, 1024))?.0;
        worst_triangle = worst_triangle.min(ac + cb - exact);
    }
    Ok(vec![
        CheckResult::new("quantile coupling equals exact W2", worst_agreement <= 1e-8, Some(1e-8 - worst_agreement), json!({ "max_difference": worst_agreement, "pairs": pairs })),
        CheckResult::new("triangle inequality", worst_triangle >= -1e-9, Some(worst_triangle + 1e-9), json!({ "min_margin": worst_triangle, "triples": pairs })),
    ])
}

/// Runs a named battery; `Refused` errors surface unchanged except inside `all`, where they
/// become skipped checks.
pub fn run_battery(name: &str, traj: &TrajectoryRecord, opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let checks = match name {
        "lemma-A1" => lemma_a1(traj)?,
        "energy-divfree" => energy_divfree(traj)?,
        "energy-budget" => energy(traj, opts)?,
        "speed" => speed(traj)?,
        "holder" => holder(traj)?,
        "metric-speed" => metric(traj)?,
        "weak" => weak(traj, opts)?,
        "splitting-residual" => splitting_residual(traj)?,
        "inequalities" => inequalities(traj)?,
        "vrho" => vrho(traj, opts)?,
        "metrics" => metrics_selftest(opts.seed, 20, 16)?,
        "all" => {
            let mut all = Vec::new();
            for b in BATTERIES.iter().filter(|b| **b != "all") {
                match run_battery(b, traj, opts) {
                    Ok(r) => all.extend(r.checks.into_iter().map(|mut c| {
                        c.name = format!("{b}: {}", c.name);
                        c
                    })),
                    Err(CliError::Compute(e @ (fdlab::Error::Refused(_) | fdlab::Error::InvalidInput(_)))) => all.push(CheckResult::skipped(*b, e.to_string())),
                    Err(e) => return Err(e),
                }
            }
            all
        }
        other => return Err(CliError::Usage(format!("unknown battery `{other}`; expected one of {}", BATTERIES.join(", ")))),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { battery: name.to_string(), passed, checks })
}
