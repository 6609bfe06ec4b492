//! Diffusion-then-transport splitting on `n` subintervals of `[0, T]`.
//!
//! On `(t_i, t_{i+1}]` the homogeneous equation is advanced by backward Euler from
//! `ρ_n(t_i)`, giving `ϱ_n(t)`; the output is `ρ_n(t) = Ψ(t; t_i, ·)_# ϱ_n(t)` and the
//! endpoint value seeds the next subinterval.

mod energy;
mod persist;
mod residual;
mod study;

pub use energy::{splitting_energy_report, SplittingEnergyReport, SubintervalEnergy};
pub use persist::{read_trajectory, write_trajectory, Manifest, SnapshotEntry};
pub use residual::{cosine_family, max_abs as max_abs_residual, weak_residual, TestFunction, WeakResidual};
pub use study::{convergence_study, fitted_order, EpsilonRow, StudyReport, StudyRow};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{diagnostics_row, DiagnosticsRow};
use crate::diffusion::{step_diffusion, DiffusionParams};
use crate::drift::{Drift, DriftSpec, VelocityField};
use crate::error::{invalid, Error, Result};
use crate::field::{DensityField, Sample};
use crate::grid::Grid;
use crate::io::sha256_hex;
use crate::transport::{pushforward, PushforwardOptions};

/// Relative mass drift tolerated before a state is rescaled to the initial mass.
const RENORMALIZE_THRESHOLD: f64 = 1e-12;

fn default_rk_steps() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_exponents() -> Vec<f64> {
    vec![2.0]
}

/// Time grid and solver settings of a splitting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingSchedule {
    pub horizon: f64,
    /// Number of subintervals `n`.
    pub substeps: usize,
    /// Inner backward-Euler parameters; `dt` must divide `horizon / substeps`.
    pub diffusion: DiffusionParams,
    /// RK4 steps per full subinterval.
    #[serde(default = "default_rk_steps")]
    pub rk_steps: usize,
    /// Times at which snapshots are stored; each must lie on the inner `dt` grid.
    pub output_times: Vec<f64>,
    /// Rescale to the initial mass whenever the relative drift exceeds `1e-12`.
    #[serde(default = "default_true")]
    pub renormalize: bool,
    /// Exponents `q` for the `L^q` diagnostics columns.
    #[serde(default = "default_exponents")]
    pub diagnostic_exponents: Vec<f64>,
    #[serde(default)]
    pub epsilon_sequence: Option<Vec<f64>>,
}

impl SplittingSchedule {
    /// Schedule with outputs at every subinterval boundary.
    pub fn new(horizon: f64, substeps: usize, diffusion: DiffusionParams) -> Result<Self> {
        let s = Self {
            horizon,
            substeps,
            diffusion,
            rk_steps: default_rk_steps(),
            output_times: (0..=substeps).map(|i| horizon * i as f64 / substeps as f64).collect(),
            renormalize: true,
            diagnostic_exponents: default_exponents(),
            epsilon_sequence: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Replaces the outputs by every inner step.
    pub fn with_every_step_output(mut self) -> Self {
        let total = self.total_steps();
        self.output_times = (0..=total).map(|k| self.horizon * k as f64 / total as f64).collect();
        self
    }

    pub fn with_outputs(mut self, times: Vec<f64>) -> Result<Self> {
        self.output_times = times;
        self.validate()?;
        Ok(self)
    }

    pub fn subinterval(&self) -> f64 {
        self.horizon / self.substeps as f64
    }

    /// Inner steps per subinterval.
    pub fn steps_per_subinterval(&self) -> usize {
        (self.subinterval() / self.diffusion.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_subinterval() * self.substeps
    }

    pub fn step_time(&self, step: usize) -> f64 {
        self.horizon * step as f64 / self.total_steps() as f64
    }

    pub fn boundary_times(&self) -> Vec<f64> {
        (0..=self.substeps).map(|i| self.horizon * i as f64 / self.substeps as f64).collect()
    }

    /// Collects every violated precondition.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            out.push(format!("horizon T = {} must be positive and finite", self.horizon));
        }
        if self.substeps == 0 {
            out.push("substep count n must be at least 1".into());
        }
        if self.rk_steps == 0 {
            out.push("rk_steps must be at least 1".into());
        }
        if let Err(e) = self.diffusion.validate() {
            out.push(e.to_string());
        }
        if !out.is_empty() {
            return out;
        }
        let ratio = self.subinterval() / self.diffusion.dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            out.push(format!("dt = {} does not divide T/n = {}", self.diffusion.dt, self.subinterval()));
            return out;
        }
        let total = self.total_steps() as f64;
        for w in self.output_times.windows(2) {
            if !(w[1] > w[0]) {
                out.push(format!("output times must increase strictly ({} then {})", w[0], w[1]));
            }
        }
        for &t in &self.output_times {
            let k = t / self.horizon * total;
            if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
                out.push(format!("output time {t} outside [0, {}]", self.horizon));
            } else if (k - k.round()).abs() > 1e-6 {
                out.push(format!("output time {t} is not on the inner dt grid"));
            }
        }
        for &q in &self.diagnostic_exponents {
            if !(q >= 1.0 && q.is_finite()) {
                out.push(format!("diagnostic exponent q = {q} must be finite and >= 1"));
            }
        }
        if let Some(seq) = &self.epsilon_sequence {
            if seq.iter().any(|e| !(*e > 0.0)) {
                out.push("epsilon_sequence entries must be positive".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    fn output_steps(&self) -> Vec<usize> {
        let total = self.total_steps() as f64;
        self.output_times.iter().map(|t| (t / self.horizon * total).round() as usize).collect()
    }
}

/// One stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: DensityField,
}

/// Inputs that determine a trajectory, with content hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schedule: SplittingSchedule,
    pub drift: DriftSpec,
    pub grid: Grid,
    pub initial_hash: String,
    pub drift_hash: String,
    pub schedule_hash: String,
}

/// Solver counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub diffusion_steps: usize,
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    pub clipped_mass: f64,
    /// Largest relative mass change of a push-forward before rescaling.
    pub max_mass_defect: f64,
    pub renormalizations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub provenance: Provenance,
    pub stats: RunStats,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].field.grid()
    }

    pub fn schedule(&self) -> &SplittingSchedule {
        &self.provenance.schedule
    }

    pub fn series(&self) -> Vec<Sample<'_>> {
        self.snapshots.iter().map(|s| (s.time, s.field.values())).collect()
    }

    /// Rebuilds the drift from the stored description.
    pub fn drift(&self) -> Result<Drift> {
        Drift::new(self.provenance.drift.clone(), self.grid())
    }

    pub fn initial(&self) -> &DensityField {
        &self.snapshots[0].field
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory is nonempty")
    }

    /// Snapshot stored at `t` (to within `1e-9 T`).
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 1e-9 * self.schedule().horizon;
        self.snapshots.iter().find(|s| (s.time - t).abs() <= tol)
    }

    /// Snapshots truncated to times `<= t`.
    pub fn truncated(&self, t: f64) -> Self {
        let keep = self.snapshots.iter().filter(|s| s.time <= t * (1.0 + 1e-12)).count();
        Self {
            snapshots: self.snapshots[..keep].to_vec(),
            diagnostics: self.diagnostics[..keep.min(self.diagnostics.len())].to_vec(),
            provenance: self.provenance.clone(),
            stats: self.stats,
        }
    }
}

fn hash_json<T: Serialize>(v: &T) -> String {
    sha256_hex(&serde_json::to_vec(v).expect("serializable"))
}

fn field_hash(f: &DensityField) -> String {
    let bytes: Vec<u8> = f.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

fn renormalized(field: DensityField, target: f64, renormalize: bool, stats: &mut RunStats) -> DensityField {
    let mass = field.mass();
    if !renormalize || mass <= 0.0 || (mass - target).abs() <= RENORMALIZE_THRESHOLD * target {
        return field;
    }
    stats.renormalizations += 1;
    field.scaled(target / mass)
}

/// Runs the splitting scheme and records snapshots with diagnostics at the output times.
pub fn run_splitting(rho0: &DensityField, drift: &Drift, schedule: &SplittingSchedule) -> Result<TrajectoryRecord> {
    schedule.validate()?;
    if drift.dim() != rho0.grid().dim() {
        return Err(invalid("drift and initial data have different dimensions"));
    }
    let mass0 = rho0.mass();
    if !(mass0 > 0.0) {
        return Err(invalid("initial data must have positive mass"));
    }
    let p = &schedule.diffusion;
    let k = schedule.steps_per_subinterval();
    let outputs = schedule.output_steps();
    let mut next_output = 0;
    let mut stats = RunStats::default();
    let mut snapshots = Vec::with_capacity(outputs.len());
    if outputs.first() == Some(&0) {
        snapshots.push(Snapshot { time: 0.0, field: rho0.clone() });
        next_output = 1;
    }

    let mut rho = rho0.clone();
    for i in 0..schedule.substeps {
        let t0 = schedule.step_time(i * k);
        let annotate = |e: Error| Error::Substep { index: i, source: Box::new(e) };
        let mut state = rho.clone();
        let mut pushed_end = None;
        for s in 1..=k {
            let step = step_diffusion(&state, p).map_err(annotate)?;
            stats.diffusion_steps += 1;
            stats.newton_iterations += step.newton_iterations;
            stats.picard_iterations += step.picard_iterations;
            stats.clipped_mass += step.clipped_mass;
            state = step.field;
            let global = i * k + s;
            let is_output = next_output < outputs.len() && outputs[next_output] == global;
            if !is_output && s < k {
                continue;
            }
            let t = schedule.step_time(global);
            let rk = ((schedule.rk_steps as f64 * s as f64 / k as f64).ceil() as usize).max(1);
            let opts = PushforwardOptions { rk_steps: rk, renormalize: false };
            let pushed = pushforward(&state, drift, t0, t, opts).map_err(annotate)?;
            let source_mass = state.mass();
            if source_mass > 0.0 {
                stats.max_mass_defect = stats.max_mass_defect.max((pushed.mass_defect / source_mass).abs());
            }
            let field = renormalized(pushed.field, mass0, schedule.renormalize, &mut stats);
            if is_output {
                snapshots.push(Snapshot { time: t, field: field.clone() });
                next_output += 1;
            }
            if s == k {
                pushed_end = Some(field);
            }
        }
        rho = pushed_end.expect("last inner step always pushes");
    }

    let eps = p.epsilon;
    let diagnostics = snapshots.iter().map(|s| diagnostics_row(&s.field, drift, s.time, p.m, eps, &schedule.diagnostic_exponents)).collect();
    let provenance = Provenance {
        schedule: schedule.clone(),
        drift: drift.spec().clone(),
        grid: rho0.grid().clone(),
        initial_hash: field_hash(rho0),
        drift_hash: hash_json(drift.spec()),
        schedule_hash: hash_json(schedule),
    };
    Ok(TrajectoryRecord { snapshots, diagnostics, provenance, stats })
}

/// Whether the stored drift may be treated as divergence-free.
pub fn is_divergence_free(traj: &TrajectoryRecord) -> Result<bool> {
    Ok(traj.drift()?.is_divergence_free())
}
