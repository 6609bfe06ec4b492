//! Weak-form residual of a computed trajectory against test functions vanishing at `T`.

use rayon::prelude::*;

use crate::drift::VelocityField;
use crate::error::{invalid, Result};
use crate::field::{dirichlet_pairing, trapezoid_weights};
use crate::splitting::{TestFunction, TrajectoryRecord, WeakResidual};

/// `R(φ) = ∫∫(ρφ_t - ∇ρ^m·∇φ + ρV·∇φ) + ∫ρ₀φ(0)` with trapezoid quadrature over the stored
/// snapshots, analytic `φ_t` and `∇φ`, and the discrete pairing for the diffusion term.
/// Test functions must vanish at the final time.
pub fn weak_solution_residual(traj: &TrajectoryRecord, drift: &dyn VelocityField, functions: &[TestFunction]) -> Result<Vec<WeakResidual>> {
    if let Some(f) = functions.iter().find(|f| !f.vanishes_at_end) {
        return Err(invalid(format!("test function {} does not vanish at the final time", f.label())));
    }
    if traj.snapshots.len() < 2 {
        return Err(invalid("weak residual needs at least two snapshots"));
    }
    let grid = traj.grid();
    let horizon = traj.schedule().horizon;
    let m = traj.schedule().diffusion.m;
    let vol = grid.cell_volume();
    let weights = trapezoid_weights(&traj.times());
    let out = functions
        .par_iter()
        .map(|f| {
            let mut total = 0.0;
            for (k, (s, w)) in traj.snapshots.iter().zip(&weights).enumerate() {
                let (phi, phi_t, grad) = f.sample(grid, s.time, horizon);
                let rho = s.field.values();
                let pressure: Vec<f64> = rho.iter().map(|r| r.powf(m)).collect();
                let mut integrand = -dirichlet_pairing(grid, &pressure, &phi);
                integrand += grid
                    .centers()
                    .zip(rho.iter().zip(phi_t.iter().zip(&grad)))
                    .map(|(p, (r, (pt, g)))| {
                        let v = drift.velocity(p, s.time);
                        r * (pt + v[0] * g[0] + v[1] * g[1])
                    })
                    .sum::<f64>()
                    * vol;
                total += w * integrand;
                if k == 0 {
                    total += rho.iter().zip(&phi).map(|(r, p)| r * p).sum::<f64>() * vol;
                }
            }
            WeakResidual { function: *f, label: f.label(), value: total }
        })
        .collect();
    Ok(out)
}
