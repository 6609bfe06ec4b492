//! Scenario files: TOML documents describing the grid, drift, initial data, schedule and the
//! checks to run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use fdlab::boussinesq::{taylor_green, BoussinesqParams, BoussinesqState, MacVelocity};
use fdlab::diffusion::DiffusionParams;
use fdlab::drift::{Drift, DriftClass, DriftSpec, Modulation, Potential};
use fdlab::field::MixedNormSpec;
use fdlab::grid::{Boundary, Grid, Point};
use fdlab::splitting::SplittingSchedule;
use fdlab::DensityField;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Sections and keys every scenario must define.
const REQUIRED: &[(&str, &[&str])] = &[
    ("", &["name", "m", "grid", "drift", "initial", "schedule"]),
    ("grid", &["lo", "hi", "cells"]),
    ("schedule", &["horizon", "substeps", "dt"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    #[serde(default)]
    pub periodic: bool,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, String> {
        let n = self.cells.len();
        if self.lo.len() != n || self.hi.len() != n {
            return Err("grid.lo, grid.hi and grid.cells must have the same length".into());
        }
        let grid = match n {
            1 => Grid::new_1d(self.lo[0], self.hi[0], self.cells[0]),
            2 => Grid::new_2d([self.lo[0], self.lo[1]], [self.hi[0], self.hi[1]], [self.cells[0], self.cells[1]]),
            _ => return Err(format!("grid.cells has {n} entries; dimension must be 1 or 2")),
        }
        .map_err(|e| format!("grid: {e}"))?;
        Ok(if self.periodic { grid.with_boundary(Boundary::Periodic) } else { grid })
    }
}

/// A drift given either by a named preset or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftConfig {
    Preset { preset: String },
    Spec(DriftSpec),
}

/// Names accepted by `[drift] preset = ...`.
pub const DRIFT_PRESETS: &[&str] = &["zero", "rotation", "expansion", "shear", "cosine-potential", "cellular", "pulsing-rotation"];

/// Looks up a named drift preset on the unit box of the given dimension.
pub fn drift_preset(name: &str, dim: usize) -> Result<DriftSpec, String> {
    let spec = match name {
        "zero" => DriftSpec::Zero,
        "rotation" => DriftSpec::RigidRotation { omega: 2.0 * PI, center: [0.5, 0.5], cutoff: Some([0.3, 0.45]) },
        "expansion" => DriftSpec::PotentialGradient { potential: Potential::Quadratic { alpha: 0.5, center: [0.5, 0.5] } },
        "shear" => DriftSpec::Shear { rate: 1.0, center: 0.5, tapered: true },
        "cosine-potential" => DriftSpec::PotentialGradient { potential: Potential::Cosine { amplitude: 0.1, modes: [2, if dim == 1 { 0 } else { 1 }] } },
        "cellular" => DriftSpec::StreamFunction { amplitude: 0.2, modes: [1, 1] },
        "pulsing-rotation" => DriftSpec::TimeModulated {
            base: Box::new(DriftSpec::RigidRotation { omega: 2.0 * PI, center: [0.5, 0.5], cutoff: Some([0.3, 0.45]) }),
            modulation: Modulation::Sine { mean: 1.0, amplitude: 0.5, frequency: 1.0 },
        },
        other => return Err(format!("drift.preset `{other}` is not one of {}", DRIFT_PRESETS.join(", "))),
    };
    Ok(spec)
}

impl DriftConfig {
    pub fn spec(&self, dim: usize) -> Result<DriftSpec, String> {
        match self {
            Self::Preset { preset } => drift_preset(preset, dim),
            Self::Spec(s) => Ok(s.clone()),
        }
    }
}

/// Initial-data presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Constant density with the given mass.
    Uniform { mass: f64 },
    /// `low` for `x_axis < lo + split L`, `high` beyond.
    TwoBlock {
        low: f64,
        high: f64,
        #[serde(default = "half")]
        split: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `floor + exp(-|x-center|²/(2 width²))` inside `radius`, `floor` outside.
    TruncatedGaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        floor: f64,
        #[serde(default)]
        radius: Option<f64>,
    },
    /// `mean + amplitude Π cos(k_i π x_i')` in relative coordinates; an eigenfunction of the
    /// no-flux Laplacian, so the linear heat flow has a closed form.
    CosineMode {
        mean: f64,
        amplitude: f64,
        modes: Vec<u32>,
    },
    /// Smoothed step in the last coordinate: `low` below the interface, `high` above, with the
    /// interface displaced by `perturbation cos(π x')`.
    Layered {
        low: f64,
        high: f64,
        #[serde(default = "half")]
        interface: f64,
        thickness: f64,
        #[serde(default)]
        perturbation: f64,
    },
}

fn half() -> f64 {
    0.5
}

impl InitialConfig {
    pub fn problems(&self, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut nonneg = |name: &str, v: f64| {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("initial.{name} = {v} must be finite and nonnegative"));
            }
        };
        match self {
            Self::Uniform { mass } => nonneg("mass", *mass),
            Self::TwoBlock { low, high, split, axis } => {
                nonneg("low", *low);
                nonneg("high", *high);
                if !(*split > 0.0 && *split < 1.0) {
                    out.push(format!("initial.split = {split} must lie in (0, 1)"));
                }
                if *axis >= dim {
                    out.push(format!("initial.axis = {axis} exceeds the dimension {dim}"));
                }
            }
            Self::TruncatedGaussian { center, width, floor, radius } => {
                nonneg("floor", *floor);
                if center.len() != dim {
                    out.push(format!("initial.center has {} entries, expected {dim}", center.len()));
                }
                if !(*width > 0.0) {
                    out.push(format!("initial.width = {width} must be positive"));
                }
                if let Some(r) = radius {
                    if !(*r > 0.0) {
                        out.push(format!("initial.radius = {r} must be positive"));
                    }
                }
            }
            Self::CosineMode { mean, amplitude, modes } => {
                if !(amplitude.abs() <= *mean) {
                    out.push(format!("initial.amplitude = {amplitude} must not exceed mean = {mean} in absolute value"));
                }
                if modes.len() != dim {
                    out.push(format!("initial.modes has {} entries, expected {dim}", modes.len()));
                }
            }
            Self::Layered { low, high, thickness, .. } => {
                nonneg("low", *low);
                nonneg("high", *high);
                if !(*thickness > 0.0) {
                    out.push(format!("initial.thickness = {thickness} must be positive"));
                }
            }
        }
        out
    }

    pub fn build(&self, grid: &Grid) -> fdlab::Result<DensityField> {
        let (lo, hi) = (grid.lo(), grid.hi());
        let d = grid.dim();
        let rel = |p: Point, a: usize| (p[a] - lo[a]) / (hi[a] - lo[a]);
        let grid = grid.clone().with_boundary(Boundary::NoFlux);
        match self {
            Self::Uniform { mass } => DensityField::uniform(grid, *mass),
            Self::TwoBlock { low, high, split, axis } => DensityField::from_fn(grid, |p| if rel(p, *axis) < *split { *low } else { *high }),
            Self::TruncatedGaussian { center, width, floor, radius } => DensityField::from_fn(grid, |p| {
                let r2: f64 = (0..d).map(|a| (p[a] - center[a]).powi(2)).sum();
                let inside = radius.is_none_or(|r| r2 <= r * r);
                floor + if inside { (-r2 / (2.0 * width * width)).exp() } else { 0.0 }
            }),
            Self::CosineMode { mean, amplitude, modes } => {
                DensityField::from_fn(grid, |p| mean + amplitude * modes.iter().enumerate().map(|(a, &k)| (k as f64 * PI * rel(p, a)).cos()).product::<f64>())
            }
            Self::Layered { low, high, interface, thickness, perturbation } => DensityField::from_fn(grid, |p| {
                let a = d - 1;
                let level = interface + if d == 2 { perturbation * (PI * rel(p, 0)).cos() } else { 0.0 };
                let s = ((rel(p, a) - level) / thickness).tanh();
                0.5 * (low + high) + 0.5 * (high - low) * s
            }),
        }
    }
}

/// When snapshots are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputConfig {
    /// `"boundaries"` (every subinterval end) or `"every-step"`.
    Named(String),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub horizon: f64,
    pub substeps: usize,
    pub dt: f64,
    #[serde(default = "default_rk")]
    pub rk_steps: usize,
    #[serde(default = "default_output")]
    pub output: OutputConfig,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    #[serde(default)]
    pub epsilon_sequence: Option<Vec<f64>>,
}

fn default_rk() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_output() -> OutputConfig {
    OutputConfig::Named("boundaries".into())
}

/// Exponents and class used by checks that need a class report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub name: String,
    #[serde(default = "one")]
    pub q: f64,
    /// Spatial exponent `q1`; `inf` allowed.
    pub space: f64,
    /// Temporal exponent `q2`; `inf` allowed.
    pub time: f64,
}

fn one() -> f64 {
    1.0
}

impl ClassConfig {
    pub fn class(&self) -> Result<DriftClass, String> {
        DriftClass::parse(&self.name).map_err(|e| format!("class.name: {e}"))
    }
    pub fn exponents(&self) -> Result<MixedNormSpec, String> {
        MixedNormSpec::new(self.space, self.time).map_err(|e| format!("class exponents: {e}"))
    }
}

/// Velocity initial condition of the fluid model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityPreset {
    Rest,
    /// Taylor–Green vortex on `[0, 2π]²` (forces a periodic box and zero temperature).
    TaylorGreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    pub steps: usize,
    pub dt: f64,
    #[serde(default = "velocity_rest")]
    pub velocity: VelocityPreset,
    /// Store every `output_every`-th state.
    #[serde(default = "one_usize")]
    pub output_every: usize,
}

fn velocity_rest() -> VelocityPreset {
    VelocityPreset::Rest
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub m: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_exponents")]
    pub diagnostic_exponents: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub batteries: Vec<String>,
    pub grid: GridConfig,
    pub drift: DriftConfig,
    pub initial: InitialConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub class: Option<ClassConfig>,
    #[serde(default)]
    pub boussinesq: Option<FluidConfig>,
    /// Free-form numeric parameters for checks (for example `weak_tolerance`).
    #[serde(default)]
    pub checks: BTreeMap<String, f64>,
}

fn default_epsilon() -> f64 {
    1e-10
}
fn default_exponents() -> Vec<f64> {
    vec![2.0]
}

/// Fully built inputs of a splitting run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Grid,
    pub drift: Drift,
    pub initial: DensityField,
    pub schedule: SplittingSchedule,
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Parses a scenario, reporting every missing required key before any type error.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Validation(vec![format!("syntax: {}", e.message())]))?;
    let mut missing = Vec::new();
    for (section, keys) in REQUIRED {
        let table = if section.is_empty() { Some(&value) } else { value.get(*section).and_then(|v| v.as_table()) };
        let Some(table) = table else { continue };
        for key in *keys {
            if !table.contains_key(*key) {
                let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
                missing.push(format!("missing required key `{path}`"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Validation(missing));
    }
    let scenario: Scenario = toml::from_str(text).map_err(|e| CliError::Validation(vec![e.message().to_string()]))?;
    scenario.problems().map_or(Ok(scenario), |p| Err(CliError::Validation(p)))
}

impl Scenario {
    /// Every violated precondition, or `None`.
    pub fn problems(&self) -> Option<Vec<String>> {
        let mut out = Vec::new();
        let grid = match self.grid.build() {
            Ok(g) => Some(g),
            Err(e) => {
                out.push(e);
                None
            }
        };
        let dim = grid.as_ref().map_or(self.grid.cells.len(), |g| g.dim());
        let params = DiffusionParams::new(self.m, self.epsilon, self.schedule.dt);
        if let Err(e) = &params {
            out.push(format!("m/epsilon/dt: {e}"));
        }
        if self.diagnostic_exponents.iter().any(|q| !(*q >= 1.0)) {
            out.push("diagnostic_exponents must all be >= 1".into());
        }
        out.extend(self.initial.problems(dim));
        match (self.drift.spec(dim), &grid) {
            (Err(e), _) => out.push(e),
            (Ok(spec), Some(g)) if self.boussinesq.is_none() => match Drift::new(spec, g) {
                Ok(d) => {
                    if let Err(e) = d.check_declarations(self.schedule.horizon.max(0.0)) {
                        out.push(format!("drift: {e}"));
                    }
                }
                Err(e) => out.push(format!("drift: {e}")),
            },
            _ => {}
        }
        if self.boussinesq.is_none() {
            // The schedule shape depends only on dt, so check it even when m or epsilon are invalid.
            if let Ok(p) = params.or_else(|_| DiffusionParams::new(1.0, 0.0, self.schedule.dt)) {
                if let Err(e) = self.schedule_from(p) {
                    out.push(e);
                }
            }
        }
        if let Some(c) = &self.class {
            out.extend(c.class().err());
            out.extend(c.exponents().err());
        }
        if let Some(f) = &self.boussinesq {
            if dim != 2 {
                out.push("boussinesq needs a two-dimensional grid".into());
            }
            if !(f.dt > 0.0) || f.steps == 0 || f.output_every == 0 {
                out.push("boussinesq.dt, boussinesq.steps and boussinesq.output_every must be positive".into());
            }
        }
        if self.grid.periodic && self.boussinesq.is_none() {
            out.push("grid.periodic is only available for the fluid model".into());
        }
        (!out.is_empty()).then_some(out)
    }

    fn schedule_from(&self, p: DiffusionParams) -> Result<SplittingSchedule, String> {
        let s = &self.schedule;
        let outputs = match &s.output {
            OutputConfig::Times(t) => t.clone(),
            OutputConfig::Named(n) if n == "boundaries" => (0..=s.substeps).map(|i| s.horizon * i as f64 / s.substeps as f64).collect(),
            OutputConfig::Named(n) if n == "every-step" => {
                let total = (s.horizon / p.dt).round() as usize;
                (0..=total).map(|k| s.horizon * k as f64 / total as f64).collect()
            }
            OutputConfig::Named(n) => return Err(format!("schedule.output `{n}` must be \"boundaries\", \"every-step\" or a list of times")),
        };
        let sched = SplittingSchedule {
            horizon: s.horizon,
            substeps: s.substeps,
            diffusion: p,
            rk_steps: s.rk_steps,
            output_times: outputs,
            renormalize: s.renormalize,
            diagnostic_exponents: self.diagnostic_exponents.clone(),
            epsilon_sequence: s.epsilon_sequence.clone(),
        };
        let problems = sched.problems();
        if problems.is_empty() {
            Ok(sched)
        } else {
            Err(format!("schedule: {}", problems.join("; ")))
        }
    }

    /// Builds the grid, drift, initial data and schedule.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        if let Some(p) = self.problems() {
            return Err(CliError::Validation(p));
        }
        let grid = self.grid.build().map_err(|e| CliError::Validation(vec![e]))?;
        let spec = self.drift.spec(grid.dim()).map_err(|e| CliError::Validation(vec![e]))?;
        let drift = Drift::new(spec, &grid)?;
        let initial = self.initial.build(&grid)?;
        let params = DiffusionParams::new(self.m, self.epsilon, self.schedule.dt)?;
        let schedule = self.schedule_from(params).map_err(|e| CliError::Validation(vec![e]))?;
        Ok(Prepared { grid, drift, initial, schedule })
    }

    /// The same scenario with `2^level` times more cells per axis and substeps, `dt / 2^level`
    /// and `epsilon / 2^level`.
    pub fn refined(&self, level: u32) -> Scenario {
        let f = 1usize << level;
        let mut s = self.clone();
        s.grid.cells.iter_mut().for_each(|c| *c *= f);
        s.schedule.substeps *= f;
        s.schedule.dt /= f as f64;
        s.epsilon /= f as f64;
        s.name = format!("{}-refined{level}", self.name);
        s
    }

    /// Same scenario with `n` subintervals.
    pub fn with_substeps(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        s.schedule.substeps = n;
        s
    }

    pub fn check(&self, key: &str, default: f64) -> f64 {
        self.checks.get(key).copied().unwrap_or(default)
    }

    /// Initial state and parameters of the fluid model.
    pub fn fluid(&self) -> Result<(BoussinesqState, BoussinesqParams, FluidConfig), CliError> {
        if let Some(p) = self.problems() {
            return Err(CliError::Validation(p));
        }
        let cfg = self.boussinesq.clone().ok_or_else(|| CliError::Validation(vec!["scenario has no [boussinesq] section".into()]))?;
        let grid = self.grid.build().map_err(|e| CliError::Validation(vec![e]))?;
        let state = match cfg.velocity {
            VelocityPreset::TaylorGreen => taylor_green(grid.nx())?,
            VelocityPreset::Rest => BoussinesqState::new(self.initial.build(&grid)?, MacVelocity::zeros(&grid)?)?,
        };
        let mut params = BoussinesqParams::new(self.m, self.epsilon, cfg.dt)?;
        params.rk_steps = self.schedule.rk_steps;
        Ok((state, params, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
m = 0.7
[grid]
lo = [0.0]
hi = [1.0]
cells = [16]
[drift]
preset = "zero"
[initial]
preset = "uniform"
mass = 1.0
[schedule]
horizon = 0.1
substeps = 2
dt = 0.01
"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = parse(MINIMAL).unwrap();
        let p = s.prepare().unwrap();
        assert_eq!(p.schedule.output_times.len(), 3);
    }

    #[test]
    fn missing_m_is_named() {
        let text = MINIMAL.replace("m = 0.7\n", "");
        match parse(&text) {
            Err(CliError::Validation(v)) => assert!(v.iter().any(|e| e.contains("`m`"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_problem_is_listed() {
        let text = MINIMAL.replace("m = 0.7", "m = -1.0").replace("substeps = 2", "substeps = 3").replace("preset = \"zero\"", "preset = \"nope\"");
        match parse(&text) {
            Err(CliError::Validation(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }
}
