//! Acceptance suite: one line per criterion, nonzero exit when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=3,5` restricts the run to the listed criteria.

use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use fdlab::boussinesq::{boussinesq_energy_check, run_boussinesq, taylor_green, BoussinesqParams};
use fdlab::diagnostics::{speed_bound, verify_interpolation, verify_parabolic_sobolev, weak_solution_residual, interpolation_r2};
use fdlab::diffusion::{diffusion_energy_identity, entropy_dissipation_report, step_diffusion, DiffusionParams};
use fdlab::drift::{Drift, DriftSpec, Potential};
use fdlab::metrics::{delta_distance, delta_holder_exponent, holder_fit, majorant_constant, DiscreteMeasure};
use fdlab::splitting::{cosine_family, max_abs_residual, splitting_energy_report, weak_residual, TrajectoryRecord};
use fdlab::transport::{flow_map, pushforward, pushforward_relations, trace, PushforwardOptions};
use fdlab::field::MixedNormSpec;
use fdlab::{DensityField, Grid};
use fdlab_cli::batteries::{metrics_selftest, w2_pairs};
use fdlab_cli::commands::run_scenario;
use fdlab_cli::scenario::{self, OutputConfig, Scenario};

type Res<T> = Result<T, Box<dyn Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn load(name: &str) -> Res<Scenario> {
    Ok(scenario::load(&scenario_path(name))?)
}

fn run(s: &Scenario) -> Res<TrajectoryRecord> {
    Ok(run_scenario(s)?)
}

fn expansion(grid: &Grid) -> Res<Drift> {
    Ok(Drift::new(DriftSpec::PotentialGradient { potential: Potential::Quadratic { alpha: 0.5, center: [0.5, 0.5] } }, grid)?)
}

fn rotation(grid: &Grid) -> Res<Drift> {
    Ok(Drift::new(DriftSpec::RigidRotation { omega: 2.0 * std::f64::consts::PI, center: [0.5, 0.5], cutoff: Some([0.3, 0.45]) }, grid)?)
}

/// Jacobian from the integrated divergence against the closed form and a centered
/// finite-difference determinant of the traced flow map.
fn criterion_1() -> Res<Verdict> {
    let grid = Grid::unit_square(32)?;
    let (s, t, rk) = (0.0f64, 0.2f64, 200);
    let h = 1e-4;
    let points: Vec<[f64; 2]> = (0..9).flat_map(|i| (0..9).map(move |j| [0.3 + 0.05 * i as f64, 0.3 + 0.05 * j as f64])).collect();
    let mut worst_analytic = 0.0f64;
    let mut worst_fd = 0.0f64;
    for (drift, analytic) in [(expansion(&grid)?, (2.0 * 0.5 * (t - s)).exp()), (rotation(&grid)?, 1.0)] {
        let map = flow_map(&drift, &grid, &points, s, t, rk)?;
        for (x, j) in points.iter().zip(map.jacobian()) {
            let image = |p: [f64; 2]| trace(&drift, p, s, t, rk).0;
            let dx = [image([x[0] + h, x[1]]), image([x[0] - h, x[1]])];
            let dy = [image([x[0], x[1] + h]), image([x[0], x[1] - h])];
            let a = (dx[0][0] - dx[1][0]) / (2.0 * h);
            let b = (dy[0][0] - dy[1][0]) / (2.0 * h);
            let c = (dx[0][1] - dx[1][1]) / (2.0 * h);
            let d = (dy[0][1] - dy[1][1]) / (2.0 * h);
            worst_analytic = worst_analytic.max((j - analytic).abs() / analytic);
            worst_fd = worst_fd.max((j - (a * d - b * c)).abs() / j);
        }
    }
    Ok(Verdict::new(worst_analytic <= 1e-6 && worst_fd <= 1e-6, format!("relative error vs closed form {worst_analytic:.2e}, vs finite-difference determinant {worst_fd:.2e}")))
}

/// Entropy and `L^q` relations of one push-forward on a 256² grid. The bilinear interpolation
/// error is `O(h² s(1-s) ∫|∇ϱ|²/ϱ)` with `s` the displacement in cells, so the rotation uses
/// low-gradient data over a full substep and the expansion a concentrated bump over a short
/// step (`αΔt = 5e-5`) so that no mass reaches the walls.
fn criterion_2() -> Res<Verdict> {
    use std::f64::consts::PI;
    let grid = Grid::unit_square(256)?;
    let smooth = DensityField::from_fn(grid.clone(), |p| 1.0 + 0.3 * (PI * p[0]).cos() * (PI * p[1]).cos())?;
    let bump = DensityField::from_fn(grid.clone(), |p| (-((p[0] - 0.53).powi(2) + (p[1] - 0.47).powi(2)) / (2.0 * 0.09 * 0.09)).exp())?;
    let opts = PushforwardOptions { rk_steps: 16, renormalize: false };
    let mut worst_entropy = 0.0f64;
    let mut worst_slack = f64::INFINITY;
    let mut parts = Vec::new();
    for (name, drift, source, dt) in [("rotation", rotation(&grid)?, &smooth, 0.01), ("expansion", expansion(&grid)?, &bump, 1e-4)] {
        let pushed = pushforward(source, &drift, 0.0, dt, opts)?;
        let r = pushforward_relations(source, &pushed.field, &drift, 0.0, dt, &[1.5, 2.0, 4.0], 16)?;
        let slack = r.lq_slack.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        worst_entropy = worst_entropy.max(r.entropy_residual.abs());
        worst_slack = worst_slack.min(slack);
        parts.push(format!("{name} (dt = {dt}): entropy residual {:.2e}, min L^q slack {slack:.2e}", r.entropy_residual));
    }
    Ok(Verdict::new(worst_entropy <= 1e-6 && worst_slack >= -1e-8, parts.join("; ")))
}

fn smooth_2d(n: usize) -> Res<DensityField> {
    let grid = Grid::unit_square(n)?;
    Ok(DensityField::from_fn(grid, |p| 0.2 + (-((p[0] - 0.4).powi(2) + (p[1] - 0.55).powi(2)) / (2.0 * 0.1 * 0.1)).exp())?)
}

/// Summed residuals of the `L^2` identity and the entropy inequality over a fixed horizon.
fn step_residual_sums(rho0: &DensityField, m: f64, horizon: f64, steps: usize) -> Res<(f64, f64)> {
    let p = DiffusionParams::new(m, 1e-10, horizon / steps as f64)?;
    let mut rho = rho0.clone();
    let (mut lq, mut ent) = (0.0, 0.0);
    for _ in 0..steps {
        let next = step_diffusion(&rho, &p)?.field;
        lq += diffusion_energy_identity(&rho, &next, &p, 2.0)?.residual;
        ent += entropy_dissipation_report(&rho, &next, &p)?.slack;
        rho = next;
    }
    Ok((lq, ent))
}

fn homogeneous_step_order(m: f64) -> Res<Verdict> {
    let rho0 = smooth_2d(48)?;
    let horizon = 0.02;
    let sums: Vec<(f64, f64)> = [8, 16, 32, 64].iter().map(|&k| step_residual_sums(&rho0, m, horizon, k)).collect::<Res<_>>()?;
    let ratios: Vec<(f64, f64)> = sums.windows(2).map(|w| (w[1].0 / w[0].0, w[1].1 / w[0].1)).collect();
    let nonneg = sums.iter().all(|s| s.0 >= 0.0 && s.1 >= -1e-12);
    let pass = nonneg && ratios.iter().all(|r| r.0 <= 0.6 && r.1 <= 0.6);
    let fmt: Vec<String> = ratios.iter().map(|r| format!("({:.3}, {:.3})", r.0, r.1)).collect();
    Ok(Verdict::new(pass, format!("m = {m}: residual ratios (L^2, entropy) per dt halving {}; finest sums ({:.2e}, {:.2e})", fmt.join(" "), sums[3].0, sums[3].1)))
}

fn criterion_3() -> Res<Verdict> {
    homogeneous_step_order(0.75)
}

/// Splitting residual `E_n` against `n` on the one-dimensional S-class scenario.
fn criterion_4() -> Res<Verdict> {
    let base = load("s-class-1d")?;
    let ns = [4usize, 8, 16, 32, 64];
    let mut pts = Vec::new();
    let mut values = Vec::new();
    for &n in &ns {
        let traj = run(&base.with_substeps(n))?;
        let drift = traj.drift()?;
        let r = weak_residual(&traj, &drift, &cosine_family(1, 3, 2, false))?;
        let e = max_abs_residual(&r);
        values.push(e);
        pts.push(((n as f64).ln(), e.ln()));
    }
    let (slope, _, r2, _) = fdlab::metrics::linear_fit(&pts);
    let fmt: Vec<String> = ns.iter().zip(&values).map(|(n, e)| format!("{n}:{e:.2e}")).collect();
    Ok(Verdict::new(slope <= -0.8 && r2 >= 0.95, format!("slope {slope:.3}, R² {r2:.4}; |E_n| {}", fmt.join(" "))))
}

/// Allowed violation `C/n` of the monotone functionals with `C` stable under `n -> 2n`.
fn monotonicity(name: &str, qs: &[f64]) -> Res<Verdict> {
    let base = load(name)?;
    let n = base.schedule.substeps;
    let coarse = run(&base)?;
    let fine = run(&base.with_substeps(2 * n))?;
    let drift = coarse.drift()?;
    let mut pass = true;
    let mut parts = Vec::new();
    for &q in qs {
        let a = splitting_energy_report(&coarse, &drift, q)?;
        let b = splitting_energy_report(&fine, &drift, q)?;
        let scale = 1.0 + a.rows[0].before.abs();
        let tiny = 1e-9 * scale;
        let ok = if a.max_violation <= tiny && b.max_violation <= tiny {
            true
        } else {
            let (lo, hi) = (a.constant.min(b.constant), a.constant.max(b.constant));
            hi <= 1.5 * lo.max(tiny * n as f64)
        };
        pass &= ok;
        parts.push(format!("q={q}: C(n={n}) = {:.2e}, C(n={}) = {:.2e}", a.constant, 2 * n, b.constant));
    }
    Ok(Verdict::new(pass, format!("{name}: {}", parts.join("; "))))
}

fn criterion_5() -> Res<Verdict> {
    monotonicity("divfree-rotation-2d", &[1.0, 2.0])
}

fn speed_check(names: &[&str]) -> Res<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let traj = run(&load(name)?)?;
        let drift = traj.drift()?;
        let r = speed_bound(&traj, &drift)?;
        pass &= r.within_factor_two;
        parts.push(format!("{name}: lhs/rhs = {:.3}", r.ratio));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn criterion_6() -> Res<Verdict> {
    speed_check(&["divfree-rotation-2d", "s-class-1d", "zero-drift-2d"])
}

fn criterion_7() -> Res<Verdict> {
    let checks = metrics_selftest(7, 100, 32)?;
    let pass = checks.iter().all(|c| c.passed);
    let detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    Ok(Verdict::new(pass, detail.join("; ")))
}

fn criterion_8() -> Res<Verdict> {
    let rough = run(&load("rough-diffusion-1d")?)?;
    let fit = holder_fit(&w2_pairs(&rough)?)?;
    let exponent = fit.exponent.unwrap_or(f64::NAN);
    let drifted = run(&load("admissible-drift-1d")?)?;
    let c = majorant_constant(&w2_pairs(&drifted)?, 0.5);
    let pass = (0.45..=1.1).contains(&exponent) && c.is_finite();
    Ok(Verdict::new(pass, format!("rough diffusion W2 exponent {exponent:.3} (R² {:.3}); admissible drift C = {c:.3e}", fit.r_squared.unwrap_or(f64::NAN))))
}

fn criterion_9() -> Res<Verdict> {
    let s = load("dplus-cellular-2d")?;
    let class = s.class.clone().ok_or("scenario has no class")?;
    let traj = run(&s)?;
    let measures: Vec<DiscreteMeasure> = traj.snapshots.iter().map(|x| DiscreteMeasure::from_field(&x.field)).collect::<fdlab::Result<_>>()?;
    let mut pairs = Vec::new();
    for i in 0..measures.len() {
        for j in i + 1..measures.len() {
            let d = delta_distance(&measures[i], &measures[j], traj.grid(), 16)?;
            pairs.push((traj.snapshots[i].time, traj.snapshots[j].time, d.value));
        }
    }
    let spec = MixedNormSpec::new(class.space, class.time)?;
    let a = delta_holder_exponent(2, s.m, class.q, spec);
    let c = majorant_constant(&pairs, a);
    let fit = holder_fit(&pairs)?;
    let exponent = fit.exponent.unwrap_or(f64::NAN);
    Ok(Verdict::new(c.is_finite() && exponent >= a - 0.1, format!("guaranteed exponent {a:.3}, majorant C = {c:.3e}, fitted exponent {exponent:.3}")))
}

fn weak_max(s: &Scenario) -> Res<f64> {
    let traj = run(s)?;
    let drift = traj.drift()?;
    let fns = cosine_family(traj.grid().dim(), 2, 1, true);
    Ok(max_abs_residual(&weak_solution_residual(&traj, &drift, &fns)?))
}

fn criterion_10() -> Res<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut finest_linear = f64::NAN;
    for name in ["linear-oracle-1d", "s-class-1d", "rough-diffusion-1d"] {
        let base = load(name)?;
        let levels: Vec<f64> = (0..3).map(|l| weak_max(&base.refined(l))).collect::<Res<_>>()?;
        let ratios: Vec<f64> = levels.windows(2).map(|w| w[1] / w[0]).collect();
        pass &= ratios.iter().all(|r| *r <= 0.7);
        if name == "linear-oracle-1d" {
            finest_linear = levels[2];
        }
        parts.push(format!("{name}: {:.2e} ratios {:.3} {:.3}", levels[0], ratios[0], ratios[1]));
    }
    pass &= finest_linear <= 1e-4;
    let oracle = load("linear-oracle-1d")?.refined(2);
    let traj = run(&oracle)?;
    let last = traj.last();
    let exact = DensityField::from_fn(traj.grid().clone(), |p| 1.0 + 0.5 * (std::f64::consts::PI * p[0]).cos() * (-std::f64::consts::PI.powi(2) * last.time).exp())?;
    let l1 = last.field.l1_distance(&exact)?;
    Ok(Verdict::new(pass, format!("{}; linear finest {finest_linear:.2e} (L1 distance to the closed form at T: {l1:.2e})", parts.join("; "))))
}

fn criterion_11() -> Res<Verdict> {
    let mut base = load("divfree-rotation-2d")?;
    base.schedule.output = OutputConfig::Named("every-step".into());
    let m = base.m;
    let (r1, p) = (1.5, 1.0);
    let r2 = interpolation_r2(2, p, 1.0, m, r1).ok_or("no admissible r2")?;
    let mut sob = Vec::new();
    let mut interp = Vec::new();
    for level in 0..2 {
        let traj = run(&base.refined(level))?;
        let series = traj.series();
        sob.push(verify_parabolic_sobolev(traj.grid(), &series, p, 1.0)?.constant);
        interp.push(verify_interpolation(traj.grid(), &series, p, 1.0, m, r1, r2)?.constant);
    }
    let stable = |v: &[Option<f64>]| match (v[0], v[1]) {
        (Some(a), Some(b)) => a.is_finite() && b.is_finite() && (a - b).abs() <= 0.1 * a.max(b),
        _ => false,
    };
    let pass = stable(&sob) && stable(&interp);
    Ok(Verdict::new(pass, format!("Sobolev constants {:?}, interpolation constants {:?}", sob, interp)))
}

fn criterion_12() -> Res<Verdict> {
    let s = load("layered-boussinesq")?;
    let (state, params, cfg) = s.fluid()?;
    let coarse = boussinesq_energy_check(&run_boussinesq(&state, &params, cfg.steps)?, s.m)?;
    let mut half = params;
    half.dt /= 2.0;
    let fine = boussinesq_energy_check(&run_boussinesq(&state, &half, 2 * cfg.steps)?, s.m)?;
    let change = (coarse.max_lhs - fine.max_lhs).abs() / coarse.max_lhs;

    let tg = taylor_green(64)?;
    let tg_params = BoussinesqParams::new(0.75, 1e-10, 0.0025)?;
    let states = run_boussinesq(&tg, &tg_params, 200)?;
    let k0 = states[0].velocity.kinetic();
    let worst_tg = states.iter().map(|st| (st.velocity.kinetic() / k0 / (-4.0 * st.time).exp() - 1.0).abs()).fold(0.0, f64::max);

    let pass = coarse.bounded && fine.bounded && change <= 0.1 && coarse.max_heat_drift <= 1e-8 && fine.max_heat_drift <= 1e-8 && worst_tg <= 0.02;
    Ok(Verdict::new(
        pass,
        format!(
            "max lhs {:.4} vs 2 C0 = {:.4}; dt-halving change {:.2}%; heat drift {:.1e}; Taylor-Green max deviation {:.2}%",
            coarse.max_lhs,
            2.0 * coarse.scale,
            100.0 * change,
            coarse.max_heat_drift.max(fine.max_heat_drift),
            100.0 * worst_tg
        ),
    ))
}

fn criterion_13() -> Res<Verdict> {
    let parts = [homogeneous_step_order(2.0)?, monotonicity("pme-rotation-2d", &[2.0])?, speed_check(&["pme-rotation-2d"])?];
    let pass = parts.iter().all(|v| v.pass);
    let detail: Vec<&str> = parts.iter().map(|v| v.detail.as_str()).collect();
    Ok(Verdict::new(pass, detail.join(" | ")))
}

type Criterion = (u32, &'static str, fn() -> Res<Verdict>);

const CRITERIA: &[Criterion] = &[
    (1, "flow-map Jacobian", criterion_1),
    (2, "push-forward relations", criterion_2),
    (3, "homogeneous-step identity order", criterion_3),
    (4, "splitting residual decay", criterion_4),
    (5, "divergence-free monotonicity", criterion_5),
    (6, "speed bound", criterion_6),
    (7, "one-dimensional W2 and triangle inequality", criterion_7),
    (8, "Hölder regularity of W2", criterion_8),
    (9, "Hölder regularity of delta", criterion_9),
    (10, "weak-solution residual", criterion_10),
    (11, "functional inequality constants", criterion_11),
    (12, "fluid energy bound", criterion_12),
    (13, "porous-medium exponent", criterion_13),
];

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failures = 0;
    for (id, name, check) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!("criterion {id:>2}: {} {name}: {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
