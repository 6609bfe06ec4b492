//! Subcommand implementations. Every output is a file written atomically; the returned
//! [`Outcome`] decides the exit status.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fdlab::boussinesq::{boussinesq_energy_check, run_boussinesq, BoussinesqState, FluidEnergyReport};
use fdlab::drift::{classify, ClassReport, Drift, DriftClass};
use fdlab::field::MixedNormSpec;
use fdlab::io::{write_atomic, write_json, write_snapshot, FORMAT_VERSION};
use fdlab::metrics::{delta_distance, delta_holder_exponent, holder_fit, majorant_constant, DiscreteMeasure, HolderFit};
use fdlab::splitting::{convergence_study, read_trajectory, run_splitting, write_trajectory, StudyReport, TrajectoryRecord};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::batteries::{run_battery, w2_pairs, VerifyOptions, VerifyReport};
use crate::scenario::{self, Scenario};
use crate::{CliError, Outcome};

fn output_dir(s: &Scenario, base: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).or_else(|| s.output.clone().map(|o| if o.is_relative() { base.join(o) } else { o })).unwrap_or_else(|| base.join("runs").join(&s.name))
}

/// Runs the splitting scheme for a scenario and stores the trajectory; returns it with the
/// directory used.
pub fn run(scenario_path: &Path, out: Option<&Path>) -> Result<(PathBuf, TrajectoryRecord), CliError> {
    let s = scenario::load(scenario_path)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    let dir = output_dir(&s, base, out);
    let traj = run_scenario(&s)?;
    write_trajectory(&dir, &traj)?;
    write_atomic(&dir.join("scenario.toml"), fs::read(scenario_path)?.as_slice())?;
    Ok((dir, traj))
}

pub fn run_scenario(s: &Scenario) -> Result<TrajectoryRecord, CliError> {
    let p = s.prepare()?;
    Ok(run_splitting(&p.initial, &p.drift, &p.schedule)?)
}

/// Runs one battery on a stored trajectory and writes `verify_<battery>.json` next to it.
pub fn verify(battery: &str, dir: &Path, opts: &VerifyOptions) -> Result<(VerifyReport, Outcome), CliError> {
    if !crate::batteries::BATTERIES.contains(&battery) {
        return Err(CliError::Usage(format!("unknown battery `{battery}`; expected one of {}", crate::batteries::BATTERIES.join(", "))));
    }
    let traj = read_trajectory(dir)?;
    let report = run_battery(battery, &traj, opts)?;
    write_json(&dir.join(format!("verify_{battery}.json")), &report)?;
    let outcome = Outcome::from_pass(report.passed);
    Ok((report, outcome))
}

/// `n,l1_error,w2_error,l1_ratio` rows plus the JSON report.
pub fn convergence_csv(r: &StudyReport) -> String {
    let mut out = String::from("n,l1_error,w2_error,l1_ratio\n");
    for row in &r.rows {
        let ratio = row.l1_ratio.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(out, "{},{},{},{}", row.n, row.l1_error, row.w2_error, ratio);
    }
    out
}

pub fn converge(scenario_path: &Path, n_list: &[usize], out: Option<&Path>) -> Result<(StudyReport, PathBuf), CliError> {
    let s = scenario::load(scenario_path)?;
    let p = s.prepare()?;
    let report = convergence_study(&p.initial, &p.drift, &p.schedule, n_list)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    let dir = output_dir(&s, base, out);
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("convergence.csv"), convergence_csv(&report).as_bytes())?;
    write_json(&dir.join("convergence.json"), &report)?;
    Ok((report, dir))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub s: f64,
    pub t: f64,
    pub w2: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub terms: usize,
    pub tail_bound: f64,
    pub w2_fit: Option<HolderFit>,
    pub delta_fit: Option<HolderFit>,
    /// Smallest `C` with `W2 <= C |t-s|^(1/2)`.
    pub w2_half_majorant: f64,
    /// Exponent guaranteed for `δ` by the class exponents, when given.
    pub delta_exponent: Option<f64>,
    pub delta_majorant: Option<f64>,
    pub notes: Vec<String>,
}

/// `W2` and `δ` for every ordered pair of snapshots.
pub fn distance_rows(traj: &TrajectoryRecord, terms: usize) -> Result<(Vec<DistanceRow>, f64), CliError> {
    let w2 = w2_pairs(traj)?;
    let grid = traj.grid().clone();
    let measures: Vec<DiscreteMeasure> = traj.snapshots.iter().map(|s| DiscreteMeasure::from_field(&s.field)).collect::<fdlab::Result<_>>()?;
    let times = traj.times();
    let idx: Vec<(usize, usize)> = (0..measures.len()).flat_map(|i| (i + 1..measures.len()).map(move |j| (i, j))).collect();
    let deltas: Vec<_> = idx.par_iter().map(|&(i, j)| delta_distance(&measures[i], &measures[j], &grid, terms)).collect::<fdlab::Result<_>>()?;
    let tail = deltas.iter().map(|d| d.tail_bound).fold(0.0, f64::max);
    let rows = w2
        .iter()
        .zip(&deltas)
        .zip(&idx)
        .map(|((&(s, t, w), d), &(i, j))| {
            debug_assert!(times[i] == s && times[j] == t);
            DistanceRow { s, t, w2: w, delta: d.value }
        })
        .collect();
    Ok((rows, tail))
}

pub fn distance_report(rows: &[DistanceRow], terms: usize, tail_bound: f64, exponent: Option<f64>) -> DistanceReport {
    let w2: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.s, r.t, r.w2)).collect();
    let delta: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.s, r.t, r.delta)).collect();
    let mut notes = Vec::new();
    let mut fit = |pairs: &[(f64, f64, f64)], label: &str| match holder_fit(pairs) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("{label} fit unavailable: {e}"));
            None
        }
    };
    let w2_fit = fit(&w2, "W2");
    let delta_fit = fit(&delta, "delta");
    DistanceReport {
        terms,
        tail_bound,
        w2_fit,
        delta_fit,
        w2_half_majorant: majorant_constant(&w2, 0.5),
        delta_exponent: exponent,
        delta_majorant: exponent.map(|a| majorant_constant(&delta, a)),
        notes,
    }
}

pub fn distances(dir: &Path, terms: usize, class_exponents: Option<(f64, MixedNormSpec)>) -> Result<DistanceReport, CliError> {
    let traj = read_trajectory(dir)?;
    let (rows, tail) = distance_rows(&traj, terms)?;
    let mut csv = String::from("s,t,W2,delta\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.s, r.t, r.w2, r.delta);
    }
    write_atomic(&dir.join("distances.csv"), csv.as_bytes())?;
    let m = traj.schedule().diffusion.m;
    let exponent = class_exponents.map(|(q, spec)| delta_holder_exponent(traj.grid().dim(), m, q, spec));
    let report = distance_report(&rows, terms, tail, exponent);
    write_json(&dir.join("distances_fit.json"), &report)?;
    Ok(report)
}

/// Class report for a scenario's drift.
pub fn classify_drift(s: &Scenario, class: DriftClass, q: f64, spec: MixedNormSpec, horizon: Option<f64>) -> Result<ClassReport, CliError> {
    let grid = s.grid.build().map_err(|e| CliError::Validation(vec![e]))?;
    let drift_spec = s.drift.spec(grid.dim()).map_err(|e| CliError::Validation(vec![e]))?;
    let drift = Drift::new(drift_spec, &grid)?;
    Ok(classify(&drift, s.m, q, spec, class, horizon.unwrap_or(s.schedule.horizon))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FluidEntry {
    time: f64,
    theta: String,
    u: String,
    v: String,
}

fn energy_csv(r: &FluidEnergyReport) -> String {
    let mut out = String::from("time,heat,entropy,kinetic,heat_dissipation,viscous_dissipation,buoyancy_work,lhs\n");
    for row in &r.rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{},{}", row.time, row.heat, row.entropy, row.kinetic, row.heat_dissipation, row.viscous_dissipation, row.buoyancy_work, row.lhs);
    }
    out
}

fn write_fluid(dir: &Path, states: &[BoussinesqState], every: usize, report: &FluidEnergyReport, s: &Scenario) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (k, st) in states.iter().enumerate().filter(|(k, _)| k % every == 0 || *k + 1 == states.len()) {
        let g = st.theta.grid();
        let theta = format!("theta_{k:05}");
        write_snapshot(dir, &theta, st.time, "temperature", g, st.theta.values())?;
        let vel = &st.velocity;
        let u: Vec<f64> = (0..g.ny()).flat_map(|j| (0..=g.nx()).map(move |i| (i, j))).map(|(i, j)| vel.u(i, j)).collect();
        let v: Vec<f64> = (0..=g.ny()).flat_map(|j| (0..g.nx()).map(move |i| (i, j))).map(|(i, j)| vel.v(i, j)).collect();
        let (un, vn) = (format!("u_{k:05}"), format!("v_{k:05}"));
        write_snapshot(dir, &un, st.time, "velocity x-faces ((nx+1) x ny, x fastest)", g, &u)?;
        write_snapshot(dir, &vn, st.time, "velocity y-faces (nx x (ny+1), x fastest)", g, &v)?;
        entries.push(FluidEntry { time: st.time, theta: format!("{theta}.json"), u: format!("{un}.json"), v: format!("{vn}.json") });
    }
    write_atomic(&dir.join("energy.csv"), energy_csv(report).as_bytes())?;
    write_json(&dir.join("energy_report.json"), report)?;
    write_json(&dir.join("manifest.json"), &json!({ "format_version": FORMAT_VERSION, "kind": "boussinesq", "scenario": s, "snapshots": entries }))?;
    Ok(())
}

/// Runs the fluid model, stores paired snapshots and the energy report.
pub fn boussinesq(scenario_path: &Path, out: Option<&Path>) -> Result<(FluidEnergyReport, Outcome, PathBuf), CliError> {
    let s = scenario::load(scenario_path)?;
    let (state, params, cfg) = s.fluid()?;
    let states = run_boussinesq(&state, &params, cfg.steps)?;
    let report = boussinesq_energy_check(&states, s.m)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    let dir = output_dir(&s, base, out);
    write_fluid(&dir, &states, cfg.output_every, &report, &s)?;
    let pass = report.bounded && report.max_heat_drift <= 1e-8;
    Ok((report, Outcome::from_pass(pass), dir))
}
