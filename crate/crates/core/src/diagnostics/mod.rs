//! Entropy, energies, speed integrals and the functional inequalities checked on
//! computed trajectories.

mod budget;
mod inequalities;
mod weak;

pub use budget::{abs_entropy_allowance, energy_budget, speed_bound, vrho_l1_bound, BudgetDependence, EnergyBudget, SpeedBoundReport, VrhoReport};
pub use inequalities::{cell_gradient_magnitude, interpolation_r2, verify_interpolation, verify_parabolic_sobolev, InterpolationReport, SobolevReport};
pub use weak::weak_solution_residual;

use serde::{Deserialize, Serialize};

use crate::drift::VelocityField;
use crate::field::{dirichlet_energy, lq_norm, DensityField, Exponent};

/// `∫ρ log max(ρ, floor)` with `0 log 0 = 0`.
pub fn entropy(field: &DensityField, floor: f64) -> f64 {
    field.values().iter().map(|&r| if r > 0.0 { r * r.max(floor).ln() } else { 0.0 }).sum::<f64>() * field.grid().cell_volume()
}

/// `∫ρ |log max(ρ, floor)|`.
pub fn abs_entropy(field: &DensityField, floor: f64) -> f64 {
    field.values().iter().map(|&r| if r > 0.0 { r * r.max(floor).ln().abs() } else { 0.0 }).sum::<f64>() * field.grid().cell_volume()
}

/// `∫|∇ρ^m/ρ|^2 ρ`. For `m > 1/2` this is `(m/(m-1/2))^2 ∫|∇ max(ρ,eps)^{m-1/2}|^2`;
/// otherwise the face-wise ratio form of [`fisher_speed_direct`].
pub fn fisher_speed(field: &DensityField, m: f64, eps: f64) -> f64 {
    if m > 0.5 {
        let a = m - 0.5;
        let powered: Vec<f64> = field.values().iter().map(|r| r.max(eps).powf(a)).collect();
        (m / a).powi(2) * dirichlet_energy(field.grid(), &powered)
    } else {
        fisher_speed_direct(field, m, eps)
    }
}

/// Face-wise `(Δ max(ρ,eps)^m / h)^2 / max(mean ρ, eps)`.
pub fn fisher_speed_direct(field: &DensityField, m: f64, eps: f64) -> f64 {
    let g = field.grid();
    let r = field.values();
    let w: Vec<f64> = r.iter().map(|v| v.max(eps).powf(m)).collect();
    g.interior_faces()
        .map(|(a, b, axis)| {
            let d = (w[b] - w[a]) / g.spacing(axis);
            let rf = (0.5 * (r[a] + r[b])).max(eps);
            if d == 0.0 {
                0.0
            } else {
                d * d / rf
            }
        })
        .sum::<f64>()
        * g.face_volume()
}

/// `∫|V(t)|^2 ρ` with the drift sampled at cell centers.
pub fn drift_speed(field: &DensityField, drift: &dyn VelocityField, t: f64) -> f64 {
    let g = field.grid();
    g.centers()
        .zip(field.values())
        .map(|(p, r)| {
            let v = drift.velocity(p, t);
            let v2 = if g.dim() == 1 { v[0] * v[0] } else { v[0] * v[0] + v[1] * v[1] };
            v2 * r
        })
        .sum::<f64>()
        * g.cell_volume()
}

/// `∫|∇(ε+ρ)^{(q+m-1)/2}|^2`.
pub fn grad_energy(field: &DensityField, m: f64, q: f64, eps: f64) -> f64 {
    let e = 0.5 * (q + m - 1.0);
    let powered: Vec<f64> = field.values().iter().map(|r| (eps + r).powf(e)).collect();
    dirichlet_energy(field.grid(), &powered)
}

/// One line of the diagnostics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub mass: f64,
    pub entropy: f64,
    /// `||ρ||_{L^q}` for each diagnostic exponent, in order.
    pub lq_norms: Vec<f64>,
    /// `∫|∇(ε+ρ)^{(q+m-1)/2}|^2` for the first diagnostic exponent (`q = 1` if none).
    pub grad_energy: f64,
    pub speed_fisher: f64,
    pub speed_drift: f64,
}

pub fn diagnostics_row(field: &DensityField, drift: &dyn VelocityField, t: f64, m: f64, eps: f64, qs: &[f64]) -> DiagnosticsRow {
    let g = field.grid();
    let lq_norms = qs.iter().map(|&q| Exponent::new(q).map(|e| lq_norm(g, field.values(), e)).unwrap_or(f64::NAN)).collect();
    let q0 = qs.first().copied().unwrap_or(1.0);
    DiagnosticsRow {
        time: t,
        mass: field.mass(),
        entropy: entropy(field, 0.0),
        lq_norms,
        grad_energy: grad_energy(field, m, q0, eps),
        speed_fisher: fisher_speed(field, m, eps),
        speed_drift: drift_speed(field, drift, t),
    }
}

/// Columns `time,mass,entropy,lq_norm(<q>)...,grad_energy,speed_fisher,speed_drift`.
pub fn diagnostics_csv(rows: &[DiagnosticsRow], qs: &[f64]) -> String {
    let mut out = String::from("time,mass,entropy");
    for q in qs {
        out.push_str(&format!(",lq_norm({q})"));
    }
    out.push_str(",grad_energy,speed_fisher,speed_drift\n");
    for r in rows {
        out.push_str(&format!("{},{},{}", r.time, r.mass, r.entropy));
        for v in &r.lq_norms {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{},{}\n", r.grad_energy, r.speed_fisher, r.speed_drift));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn uniform_entropy() {
        let g = Grid::new_2d([0.0, 0.0], [2.0, 1.0], [8, 8]).unwrap();
        let f = DensityField::uniform(g, 1.0).unwrap();
        assert!((entropy(&f, 0.0) - (0.5f64).ln()).abs() < 1e-14);
        assert_eq!(fisher_speed(&f, 0.7, 1e-9), 0.0);
        assert_eq!(fisher_speed_direct(&f, 0.3, 1e-9), 0.0);
    }

    #[test]
    fn csv_header() {
        let s = diagnostics_csv(&[], &[2.0]);
        assert_eq!(s, "time,mass,entropy,lq_norm(2),grad_energy,speed_fisher,speed_drift\n");
    }
}
