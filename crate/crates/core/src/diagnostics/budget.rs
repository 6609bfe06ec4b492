//! A priori bounds along a trajectory: the energy budget, the speed bound and the
//! `L¹` bound on the drift flux.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::{abs_entropy, drift_speed, entropy, fisher_speed};
use crate::diffusion::lq_dissipation_coefficient;
use crate::drift::{ClassReport, Drift, VelocityField};
use crate::error::{invalid, Error, Result};
use crate::field::{dirichlet_energy, mixed_norm, power_integral, trapezoid_weights, DensityField, MixedNormSpec, Sample};
use crate::splitting::TrajectoryRecord;

/// What the budget's right side depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetDependence {
    /// `∫ρ₀ log ρ₀` for `q = 1`, `∫ρ₀^q` otherwise.
    pub initial_functional: f64,
    pub initial_mass: f64,
    /// Mixed norm of the drift from the class report.
    pub drift_norm: f64,
    pub class: String,
    pub critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub q: f64,
    pub m: f64,
    /// `sup_t ∫ρ|log ρ|` (reported for `q = 1`).
    pub sup_entropy: Option<f64>,
    /// `sup_t ∫ρ^q` (reported for `q > 1`).
    pub sup_lq: Option<f64>,
    /// `∫∫|∇ρ^{(q+m-1)/2}|^2`.
    pub dissipation: f64,
    /// `∫∫|∇ρ^m/ρ|^2 ρ`.
    pub fisher_speed: f64,
    /// `∫∫|V|^2 ρ`.
    pub drift_speed: f64,
    /// `∫_0^T ||div V||_∞`.
    pub divergence_integral: f64,
    /// `sup_t [F(t) + K ∫_0^t ∫|∇ρ^{(q+m-1)/2}|^2]` with `F` the entropy or `∫ρ^q`.
    pub lhs: f64,
    /// `F(0) e^{(q-1) A}` for `q > 1`, `F(0) + M A` for `q = 1`, with `A` the divergence integral.
    pub rhs_constant: f64,
    /// `(|F(0)| + 1)/n`.
    pub tolerance: f64,
    pub satisfied: bool,
    pub dependence: BudgetDependence,
}

fn functional(field: &DensityField, q: f64) -> f64 {
    if q == 1.0 {
        entropy(field, 0.0)
    } else {
        power_integral(field.grid(), field.values(), q)
    }
}

/// Cumulative trapezoid integrals of `values` sampled at `times`.
fn cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; times.len()];
    for k in 1..times.len() {
        out[k] = out[k - 1] + 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
    }
    out
}

/// Evaluates the energy estimate on a trajectory. Refuses when the class report does not
/// certify membership, or when the drift sits on the critical line without the smallness
/// condition `||V|| c < 1` (with interpolation constant `c = 1`).
pub fn energy_budget(traj: &TrajectoryRecord, drift: &Drift, q: f64, class: &ClassReport) -> Result<EnergyBudget> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid(format!("q = {q} must be finite and >= 1")));
    }
    if !class.member {
        return Err(Error::Refused(format!("drift is not in class {:?}: {}; the estimate is not claimed", class.class, class.notes.join("; "))));
    }
    if class.critical && class.norm >= 1.0 {
        return Err(Error::Refused(format!("critical drift with norm {} fails the smallness condition", class.norm)));
    }
    let sched = traj.schedule();
    let m = sched.diffusion.m;
    let times = traj.times();
    let fields: Vec<&DensityField> = traj.snapshots.iter().map(|s| &s.field).collect();
    let e = 0.5 * (q + m - 1.0);
    let dissip: Vec<f64> = fields
        .iter()
        .map(|f| {
            let powered: Vec<f64> = f.values().iter().map(|r| r.powf(e)).collect();
            dirichlet_energy(f.grid(), &powered)
        })
        .collect();
    let k = if q == 1.0 { 4.0 / m } else { lq_dissipation_coefficient(m, q) };
    let running = cumulative(&times, &dissip);
    let values: Vec<f64> = fields.iter().map(|f| functional(f, q)).collect();
    let lhs = values.iter().zip(&running).map(|(f, d)| f + k * d).fold(f64::NEG_INFINITY, f64::max);
    let fisher: Vec<f64> = fields.iter().map(|f| fisher_speed(f, m, sched.diffusion.epsilon)).collect();
    let speeds: Vec<f64> = traj.snapshots.iter().map(|s| drift_speed(&s.field, drift, s.time)).collect();
    let a = drift.divergence_sup_integral(sched.horizon);
    let mass0 = fields[0].mass();
    let f0 = values[0];
    let rhs_constant = if q == 1.0 { f0 + mass0 * a } else { f0 * ((q - 1.0) * a).exp() };
    let tolerance = (f0.abs() + 1.0) / sched.substeps as f64;
    let (sup_entropy, sup_lq) = if q == 1.0 {
        (Some(fields.iter().map(|f| abs_entropy(f, 0.0)).fold(0.0, f64::max)), None)
    } else {
        (None, Some(values.iter().copied().fold(0.0, f64::max)))
    };
    Ok(EnergyBudget {
        q,
        m,
        sup_entropy,
        sup_lq,
        dissipation: *running.last().expect("nonempty"),
        fisher_speed: *cumulative(&times, &fisher).last().expect("nonempty"),
        drift_speed: *cumulative(&times, &speeds).last().expect("nonempty"),
        divergence_integral: a,
        lhs,
        rhs_constant,
        tolerance,
        satisfied: lhs <= rhs_constant + tolerance,
        dependence: BudgetDependence {
            initial_functional: f0,
            initial_mass: mass0,
            drift_norm: class.norm,
            class: format!("{:?}", class.class),
            critical: class.critical,
        },
    })
}

/// Upper bound on `∫ρ|log ρ|` implied by a signed-entropy bound `H`: `H + 2|Ω|/e`.
pub fn abs_entropy_allowance(signed_bound: f64, volume: f64) -> f64 {
    signed_bound + 2.0 * volume / E
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedBoundReport {
    pub m: f64,
    /// `∫∫|∇ρ^m/ρ|^2 ρ`.
    pub fisher_speed: f64,
    /// `∫∫|V|^2 ρ`.
    pub drift_speed: f64,
    /// `fisher_speed + drift_speed`.
    pub lhs: f64,
    /// `2(Φ(ρ₀) - Φ(ρ(T)))` with `Φ = ∫ρ^m/(m-1)` (`∫ρ log ρ` at `m = 1`).
    pub initial_term: f64,
    /// `initial_term + 4 ∫∫|V|^2 ρ + ∫∫|V|^2 ρ`.
    pub rhs: f64,
    /// `lhs / rhs`.
    pub ratio: f64,
    /// `lhs <= 2 rhs`.
    pub within_factor_two: bool,
}

fn speed_potential(field: &DensityField, m: f64) -> f64 {
    if (m - 1.0).abs() < 1e-14 {
        entropy(field, 0.0)
    } else {
        power_integral(field.grid(), field.values(), m) / (m - 1.0)
    }
}

/// Speed estimate: testing the equation with `Φ'(ρ)` and Young's inequality gives
/// `∫∫|∇ρ^m/ρ|^2 ρ <= 2(Φ(ρ₀) - Φ(ρ(T))) + 4∫∫|V|^2 ρ`.
pub fn speed_bound(traj: &TrajectoryRecord, drift: &dyn VelocityField) -> Result<SpeedBoundReport> {
    let sched = traj.schedule();
    let (m, eps) = (sched.diffusion.m, sched.diffusion.epsilon);
    let times = traj.times();
    if times.len() < 2 {
        return Err(invalid("speed bound needs at least two snapshots"));
    }
    let fisher: Vec<f64> = traj.snapshots.iter().map(|s| fisher_speed(&s.field, m, eps)).collect();
    let speeds: Vec<f64> = traj.snapshots.iter().map(|s| drift_speed(&s.field, drift, s.time)).collect();
    let w = trapezoid_weights(&times);
    let fisher_speed: f64 = w.iter().zip(&fisher).map(|(a, b)| a * b).sum();
    let drift_speed: f64 = w.iter().zip(&speeds).map(|(a, b)| a * b).sum();
    let initial_term = 2.0 * (speed_potential(traj.initial(), m) - speed_potential(&traj.last().field, m));
    let rhs = initial_term + 5.0 * drift_speed;
    let lhs = fisher_speed + drift_speed;
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(SpeedBoundReport { m, fisher_speed, drift_speed, lhs, initial_term, rhs, ratio, within_factor_two: lhs.is_finite() && lhs <= 2.0 * rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrhoReport {
    pub drift_exponents: MixedNormSpec,
    pub density_exponents: MixedNormSpec,
    /// `∫∫|V|ρ`.
    pub lhs: f64,
    pub drift_norm: f64,
    pub density_norm: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub satisfied: bool,
}

/// Hölder's inequality `||Vρ||_{L¹} <= ||V||_{L^{q1,q2}} ||ρ||_{L^{r1,r2}}` with conjugate
/// exponents, all evaluated with the same space and time quadrature.
pub fn vrho_l1_bound(traj: &TrajectoryRecord, drift: &dyn VelocityField, spec: MixedNormSpec) -> Result<VrhoReport> {
    let grid = traj.grid();
    let dual = MixedNormSpec { space: spec.space.conjugate(), time: spec.time.conjugate() };
    let speeds: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| {
            grid.centers()
                .map(|p| {
                    let v = drift.velocity(p, s.time);
                    if grid.dim() == 1 {
                        v[0].abs()
                    } else {
                        v[0].hypot(v[1])
                    }
                })
                .collect()
        })
        .collect();
    let v_series: Vec<Sample> = traj.snapshots.iter().zip(&speeds).map(|(s, v)| (s.time, v.as_slice())).collect();
    let drift_norm = mixed_norm(grid, &v_series, spec)?;
    let density_norm = mixed_norm(grid, &traj.series(), dual)?;
    let times = traj.times();
    let w = trapezoid_weights(&times);
    let vol = grid.cell_volume();
    let lhs: f64 = traj
        .snapshots
        .iter()
        .zip(&speeds)
        .zip(&w)
        .map(|((s, v), wt)| wt * s.field.values().iter().zip(v).map(|(r, a)| r * a).sum::<f64>() * vol)
        .sum();
    let rhs = drift_norm * density_norm;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(VrhoReport { drift_exponents: spec, density_exponents: dual, lhs, drift_norm, density_norm, rhs, ratio, satisfied: lhs <= rhs * (1.0 + 1e-12) })
}
