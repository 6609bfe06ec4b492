//! Entropy and `L^q` energy across subinterval boundaries of a splitting run.

use serde::{Deserialize, Serialize};

use super::TrajectoryRecord;
use crate::diagnostics::entropy;
use crate::drift::Drift;
use crate::error::{invalid, Result};
use crate::field::{power_integral, DensityField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubintervalEnergy {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    /// Functional at the start: `∫ρ log ρ` for `q = 1`, `∫(ε+ρ)^q` otherwise.
    pub before: f64,
    pub after: f64,
    /// `∫ ||div V||_∞` over the subinterval.
    pub divergence_integral: f64,
    /// Allowed value at the end: `before + M A` for `q = 1`, `before e^{(q-1) A}` otherwise.
    pub bound: f64,
    /// `bound - after`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingEnergyReport {
    pub q: f64,
    pub substeps: usize,
    pub rows: Vec<SubintervalEnergy>,
    /// `max(0, -min slack)`.
    pub max_violation: f64,
    /// `n * max_violation`: the constant `C` in the `C/n` allowance.
    pub constant: f64,
}

impl SplittingEnergyReport {
    /// Rows whose violation exceeds `tolerance`.
    pub fn flagged(&self, tolerance: f64) -> Vec<usize> {
        self.rows.iter().filter(|r| -r.slack > tolerance).map(|r| r.index).collect()
    }
}

fn functional(field: &DensityField, q: f64, eps: f64) -> f64 {
    if q == 1.0 {
        entropy(field, 0.0)
    } else {
        let shifted: Vec<f64> = field.values().iter().map(|v| v + eps).collect();
        power_integral(field.grid(), &shifted, q)
    }
}

/// Evaluates the energy inequality between consecutive subinterval boundaries.
/// The trajectory must store snapshots at every boundary `iT/n`.
pub fn splitting_energy_report(traj: &TrajectoryRecord, drift: &Drift, q: f64) -> Result<SplittingEnergyReport> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid(format!("q = {q} must be finite and >= 1")));
    }
    let sched = traj.schedule();
    let eps = sched.diffusion.epsilon;
    let boundaries = sched.boundary_times();
    let states: Vec<&DensityField> = boundaries
        .iter()
        .map(|&t| traj.at(t).map(|s| &s.field).ok_or_else(|| invalid(format!("no snapshot at subinterval boundary t = {t}"))))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = states.iter().map(|f| functional(f, q, eps)).collect();
    let mut rows = Vec::with_capacity(sched.substeps);
    for i in 0..sched.substeps {
        let (start, end) = (boundaries[i], boundaries[i + 1]);
        let a = drift.divergence_sup_between(start, end);
        let bound = if q == 1.0 { values[i] + states[i].mass() * a } else { values[i] * ((q - 1.0) * a).exp() };
        rows.push(SubintervalEnergy { index: i, start, end, before: values[i], after: values[i + 1], divergence_integral: a, bound, slack: bound - values[i + 1] });
    }
    let max_violation = rows.iter().map(|r| -r.slack).fold(0.0, f64::max);
    Ok(SplittingEnergyReport { q, substeps: sched.substeps, rows, max_violation, constant: max_violation * sched.substeps as f64 })
}
