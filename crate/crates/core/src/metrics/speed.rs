//! Metric speed of a sampled curve: `‖w‖_{L²(ρ)}` with `w = -∇ρ^m/ρ + V`, and the
//! check `W_2(ρ(s),ρ(t)) <= ∫_s^t ‖w‖_{L²(ρ)}` on sampled pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::w2_fields;
use crate::drift::VelocityField;
use crate::error::{invalid, Result};
use crate::field::{time_integral, DensityField, FaceField};

/// `‖w‖_{L²(ρ)}` evaluated on faces. Interior faces use the arithmetic mean density and
/// the difference quotient of `(ε+ρ)^m`; wall faces carry only the drift part with half weight.
pub fn speed_norm(field: &DensityField, drift: &dyn VelocityField, t: f64, m: f64, eps: f64) -> f64 {
    let g = field.grid();
    let rho = field.values();
    let pressure: Vec<f64> = rho.iter().map(|r| (eps + r).powf(m)).collect();
    let faces = FaceField::zeros(g);
    let (nx, ny) = (g.nx(), g.ny());
    let mut sum = 0.0;
    let mut face = |a: Option<usize>, b: Option<usize>, h: f64, vn: f64| {
        match (a, b) {
            (Some(a), Some(b)) => {
                let rf = 0.5 * (rho[a] + rho[b]);
                if rf > 0.0 {
                    let w = -(pressure[b] - pressure[a]) / h / rf + vn;
                    sum += w * w * rf;
                }
            }
            (Some(k), None) | (None, Some(k)) => sum += 0.5 * vn * vn * rho[k],
            (None, None) => {}
        }
    };
    let hx = g.spacing(0);
    for j in 0..ny {
        for i in 0..=nx {
            let vn = drift.velocity(faces.x_face_center(i, j), t)[0];
            let left = (i > 0).then(|| g.index(i - 1, j));
            let right = (i < nx).then(|| g.index(i, j));
            face(left, right, hx, vn);
        }
    }
    if g.dim() == 2 {
        let hy = g.spacing(1);
        for j in 0..=ny {
            for i in 0..nx {
                let vn = drift.velocity(faces.y_face_center(i, j), t)[1];
                let below = (j > 0).then(|| g.index(i, j - 1));
                let above = (j < ny).then(|| g.index(i, j));
                face(below, above, hy, vn);
            }
        }
    }
    (sum * g.face_volume()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPair {
    pub s: f64,
    pub t: f64,
    /// `W_2` between the unnormalized snapshots (`sqrt(M)` times the normalized distance).
    pub distance: f64,
    /// Trapezoid integral of the speed over `[s, t]`.
    pub bound: f64,
    /// `bound - distance`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpeedReport {
    /// `(time, ‖w‖_{L²(ρ)})` per snapshot.
    pub speeds: Vec<(f64, f64)>,
    pub pairs: Vec<SpeedPair>,
    /// Discretization budget: `2 * max cell spacing`.
    pub budget: f64,
    /// Number of pairs with `slack < -budget`.
    pub violations: usize,
    pub min_slack: f64,
}

/// Speeds at every snapshot and the inequality slack on every ordered pair.
pub fn metric_speed(snapshots: &[(f64, &DensityField)], drift: &dyn VelocityField, m: f64, eps: f64) -> Result<MetricSpeedReport> {
    if snapshots.len() < 2 {
        return Err(invalid("metric speed needs at least two snapshots"));
    }
    if snapshots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(invalid("snapshot times must increase strictly"));
    }
    for (_, f) in &snapshots[1..] {
        snapshots[0].1.check_same_grid(f)?;
    }
    let speeds: Vec<(f64, f64)> = snapshots.par_iter().map(|(t, f)| (*t, speed_norm(f, drift, *t, m, eps))).collect();
    let index_pairs: Vec<(usize, usize)> = (0..snapshots.len()).flat_map(|i| (i + 1..snapshots.len()).map(move |j| (i, j))).collect();
    let pairs = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let (s, a) = snapshots[i];
            let (t, b) = snapshots[j];
            let mass = 0.5 * (a.mass() + b.mass());
            let distance = mass.sqrt() * w2_fields(a, b)?;
            let window = &speeds[i..=j];
            let bound = time_integral(&window.iter().map(|p| p.0).collect::<Vec<_>>(), window.iter().map(|p| p.1));
            Ok(SpeedPair { s, t, distance, bound, slack: bound - distance })
        })
        .collect::<Result<Vec<_>>>()?;
    let budget = 2.0 * snapshots[0].1.grid().max_spacing();
    let violations = pairs.iter().filter(|p| p.slack < -budget).count();
    let min_slack = pairs.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
    Ok(MetricSpeedReport { speeds, pairs, budget, violations, min_slack })
}
