//! The weighted dual distance `δ(μ,ν) = Σ_k 2^{-k} |∫ f_k d(μ - ν)|` over a fixed
//! family of sine modes normalized in `W^{1,∞}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DiscreteMeasure;
use crate::drift::DriftClass;
use crate::error::{invalid, Result};
use crate::field::MixedNormSpec;
use crate::grid::{Grid, Point};

/// Minimum number of terms kept in the truncated series.
pub const MIN_TERMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaDistance {
    pub value: f64,
    /// Bound on the discarded tail, `2 * 2^{-K}` for unit masses.
    pub tail_bound: f64,
    pub terms: usize,
}

/// Mode indices in enumeration order: `k = 1, 2, ...` in 1D, diagonals `k + l = 2, 3, ...` in 2D.
fn modes(dim: usize, count: usize) -> Vec<[u32; 2]> {
    if dim == 1 {
        return (1..=count as u32).map(|k| [k, 0]).collect();
    }
    let mut out = Vec::with_capacity(count);
    let mut s = 2u32;
    while out.len() < count {
        for k in 1..s {
            if out.len() == count {
                break;
            }
            out.push([k, s - k]);
        }
        s += 1;
    }
    out
}

fn test_function(grid: &Grid, mode: [u32; 2], p: Point) -> f64 {
    let mut value = 1.0;
    let mut grad_sq = 0.0;
    for (a, &k) in mode.iter().enumerate().take(grid.dim()) {
        let kappa = k as f64 * PI / grid.length(a);
        value *= (kappa * (p[a] - grid.lo()[a])).sin();
        grad_sq += kappa * kappa;
    }
    let c = 1.0_f64.min(1.0 / grad_sq.sqrt());
    c * value
}

/// Truncated `δ` with `terms >= 8` modes on the domain of `grid`.
pub fn delta_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, grid: &Grid, terms: usize) -> Result<DeltaDistance> {
    if terms < MIN_TERMS {
        return Err(invalid(format!("delta distance needs at least {MIN_TERMS} terms")));
    }
    if mu.dim() != grid.dim() || nu.dim() != grid.dim() {
        return Err(invalid("measure and domain dimensions differ"));
    }
    let pairing = |m: &DiscreteMeasure, mode: [u32; 2]| -> f64 { m.points().iter().zip(m.weights()).map(|(p, w)| w * test_function(grid, mode, *p)).sum() };
    let mut value = 0.0;
    for (k, mode) in modes(grid.dim(), terms).into_iter().enumerate() {
        let weight = 0.5_f64.powi(k as i32 + 1);
        value += weight * (pairing(mu, mode) - pairing(nu, mode)).abs();
    }
    let mass = mu.mass().max(nu.mass());
    Ok(DeltaDistance { value, tail_bound: 2.0 * mass * 0.5_f64.powi(terms as i32), terms })
}

/// Hölder exponent in time guaranteed for `δ` by the divergence-free theory:
/// `min{c, (2 + d(q+m-2)/q - (d/q1 + (2 + q_{m,d})/q2)) / (2 + q_{m,d})}` with `c = 1/2`
/// for `m < 1` and `c = (2q + d(q-1)) / (2(2q + d(m+q-1)))` for `m > 1`.
pub fn delta_holder_exponent(d: usize, m: f64, q: f64, spec: MixedNormSpec) -> f64 {
    let df = d as f64;
    let (lhs, rhs) = DriftClass::D.exponent_sides(df, m, q, spec);
    let qmd = df * (m - 1.0) / q;
    let second = (rhs - lhs) / (2.0 + qmd);
    let first = if m < 1.0 { 0.5 } else { (2.0 * q + df * (q - 1.0)) / (2.0 * (2.0 * q + df * (m + q - 1.0))) };
    first.min(second)
}
