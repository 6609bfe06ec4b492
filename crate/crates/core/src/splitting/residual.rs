//! Test functions and the splitting residual `E_n`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrajectoryRecord;
use crate::drift::VelocityField;
use crate::error::{invalid, Result};
use crate::field::dirichlet_pairing;
use crate::grid::{Grid, Point};

/// `φ(x,t) = Π_a cos(k_a π (x_a - lo_a)/L_a) · τ^j`, `τ = t/T`, optionally times `(1-τ)^2`.
/// The cosine factors have zero normal derivative on the walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFunction {
    pub modes: [u32; 2],
    pub degree: u32,
    pub vanishes_at_end: bool,
}

impl TestFunction {
    pub fn label(&self) -> String {
        let tail = if self.vanishes_at_end { "*(1-t)^2" } else { "" };
        format!("cos({},{})*t^{}{}", self.modes[0], self.modes[1], self.degree, tail)
    }

    fn time_factor(&self, t: f64, horizon: f64) -> (f64, f64) {
        let tau = t / horizon;
        let j = self.degree as i32;
        let (p, dp) = if j == 0 { (1.0, 0.0) } else { (tau.powi(j), j as f64 * tau.powi(j - 1)) };
        if self.vanishes_at_end {
            let r = (1.0 - tau).powi(2);
            (p * r, (dp * r - 2.0 * p * (1.0 - tau)) / horizon)
        } else {
            (p, dp / horizon)
        }
    }

    fn space_factor(&self, grid: &Grid, p: Point) -> (f64, Point) {
        let mut c = [1.0; 2];
        let mut s = [0.0; 2];
        let mut k = [0.0; 2];
        for a in 0..grid.dim() {
            k[a] = self.modes[a] as f64 * PI / grid.length(a);
            let arg = k[a] * (p[a] - grid.lo()[a]);
            c[a] = arg.cos();
            s[a] = arg.sin();
        }
        (c[0] * c[1], [-k[0] * s[0] * c[1], -k[1] * c[0] * s[1]])
    }

    pub fn value(&self, grid: &Grid, p: Point, t: f64, horizon: f64) -> f64 {
        self.space_factor(grid, p).0 * self.time_factor(t, horizon).0
    }

    pub fn time_derivative(&self, grid: &Grid, p: Point, t: f64, horizon: f64) -> f64 {
        self.space_factor(grid, p).0 * self.time_factor(t, horizon).1
    }

    pub fn gradient(&self, grid: &Grid, p: Point, t: f64, horizon: f64) -> Point {
        let g = self.space_factor(grid, p).1;
        let f = self.time_factor(t, horizon).0;
        [g[0] * f, g[1] * f]
    }

    /// Cell-center samples of `(φ, φ_t, ∇φ)` at time `t`.
    pub(crate) fn sample(&self, grid: &Grid, t: f64, horizon: f64) -> (Vec<f64>, Vec<f64>, Vec<Point>) {
        let (a, da) = self.time_factor(t, horizon);
        let mut phi = Vec::with_capacity(grid.len());
        let mut phi_t = Vec::with_capacity(grid.len());
        let mut grad = Vec::with_capacity(grid.len());
        for p in grid.centers() {
            let (s, g) = self.space_factor(grid, p);
            phi.push(s * a);
            phi_t.push(s * da);
            grad.push([g[0] * a, g[1] * a]);
        }
        (phi, phi_t, grad)
    }
}

/// Tensor cosines with modes `0..=max_mode` per axis times `τ^j`, `j <= max_degree`.
pub fn cosine_family(dim: usize, max_mode: u32, max_degree: u32, vanishes_at_end: bool) -> Vec<TestFunction> {
    let ky = if dim == 2 { max_mode } else { 0 };
    let mut out = Vec::new();
    for j in 0..=max_degree {
        for l in 0..=ky {
            for k in 0..=max_mode {
                out.push(TestFunction { modes: [k, l], degree: j, vanishes_at_end });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub function: TestFunction,
    pub label: String,
    pub value: f64,
}

/// `E_n(φ) = ∫φρ_n|_0^T - ∫∫(ρ_n φ_t - ∇(ε+ρ_n)^m·∇φ + ρ_n V·∇φ)` over the stored snapshots.
///
/// The time quadrature is the summation-by-parts form
/// `Σ_k [∫φ_k(ρ_k - ρ_{k-1}) + Δt_k <∇_h w_k, ∇_h φ_k> - (Δt_k/2) ∫(ρ_{k-1}V_{k-1} + ρ_k V_k)·∇φ_k]`,
/// which vanishes identically for backward Euler without drift when snapshots are stored
/// at every inner step; what remains is the splitting defect.
pub fn weak_residual(traj: &TrajectoryRecord, drift: &dyn VelocityField, functions: &[TestFunction]) -> Result<Vec<WeakResidual>> {
    if traj.snapshots.len() < 2 {
        return Err(invalid("weak residual needs at least two snapshots"));
    }
    let grid = traj.grid();
    let horizon = traj.schedule().horizon;
    let p = &traj.schedule().diffusion;
    let vol = grid.cell_volume();
    let flux = |k: usize| -> Vec<Point> {
        let s = &traj.snapshots[k];
        grid.centers().zip(s.field.values()).map(|(x, r)| {
            let v = drift.velocity(x, s.time);
            [r * v[0], r * v[1]]
        }).collect()
    };
    let mut totals = vec![0.0; functions.len()];
    let mut prev_flux = flux(0);
    for k in 1..traj.snapshots.len() {
        let (prev, cur) = (&traj.snapshots[k - 1], &traj.snapshots[k]);
        let dt = cur.time - prev.time;
        let w: Vec<f64> = cur.field.values().iter().map(|r| (p.epsilon + r).powf(p.m)).collect();
        let cur_flux = flux(k);
        let contributions: Vec<f64> = functions
            .par_iter()
            .map(|f| {
                let (phi, _, grad) = f.sample(grid, cur.time, horizon);
                let change: f64 = phi.iter().zip(cur.field.values()).zip(prev.field.values()).map(|((ph, a), b)| ph * (a - b)).sum::<f64>() * vol;
                let diffusion = dt * dirichlet_pairing(grid, &w, &phi);
                let transport: f64 = grad.iter().zip(prev_flux.iter().zip(&cur_flux)).map(|(g, (a, b))| g[0] * (a[0] + b[0]) + g[1] * (a[1] + b[1])).sum::<f64>() * vol;
                change + diffusion - 0.5 * dt * transport
            })
            .collect();
        for (t, c) in totals.iter_mut().zip(contributions) {
            *t += c;
        }
        prev_flux = cur_flux;
    }
    Ok(functions.iter().zip(totals).map(|(f, value)| WeakResidual { function: *f, label: f.label(), value }).collect())
}

/// Largest `|E_n(φ)|` over a residual list.
pub fn max_abs(residuals: &[WeakResidual]) -> f64 {
    residuals.iter().fold(0.0, |m, r| m.max(r.value.abs()))
}
