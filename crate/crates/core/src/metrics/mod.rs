//! Distances between densities: Wasserstein (exact and entropic), the weighted
//! dual distance `δ`, Hölder-in-time fits and the metric-speed bound.

mod delta;
mod holder;
mod simplex;
mod sinkhorn;
mod speed;

pub use delta::{delta_distance, delta_holder_exponent, DeltaDistance};
pub use holder::{holder_fit, linear_fit, majorant_constant, HolderFit};
pub use simplex::solve_transport;
pub use sinkhorn::{sinkhorn_divergence, EntropicOptions};
pub use speed::{metric_speed, speed_norm, MetricSpeedReport, SpeedPair};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::grid::Point;

/// Default cap on atoms per measure for the exact solver.
pub const DEFAULT_ATOM_CAP: usize = 1024;

/// Relative tolerance for the equal-mass check.
const MASS_TOL: f64 = 1e-9;

/// Weighted point cloud in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("measures live in one or two dimensions"));
        }
        if points.len() != weights.len() || points.is_empty() {
            return Err(invalid("measure needs matching, nonempty points and weights"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(invalid("atom positions must be finite"));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("measure has zero mass"));
        }
        let points = if dim == 1 { points.into_iter().map(|p| [p[0], 0.0]).collect() } else { points };
        Ok(Self { dim, points, weights })
    }

    pub fn from_1d(xs: &[f64], weights: &[f64]) -> Result<Self> {
        Self::new(1, xs.iter().map(|&x| [x, 0.0]).collect(), weights.to_vec())
    }

    /// Atoms at cell centers carrying the cell masses.
    pub fn from_field(field: &DensityField) -> Result<Self> {
        let g = field.grid();
        let vol = g.cell_volume();
        Self::new(g.dim(), g.centers().collect(), field.values().iter().map(|v| v * vol).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn points(&self) -> &[Point] {
        &self.points
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Sparse optimal coupling `(source atom, target atom, mass)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    /// `Σ mass * |x - y|^p` over the entries.
    pub cost: f64,
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim != nu.dim {
        return Err(invalid("measures have different dimensions"));
    }
    let (a, b) = (mu.mass(), nu.mass());
    if (a - b).abs() > MASS_TOL * a.max(b) {
        return Err(Error::MassMismatch(a, b));
    }
    Ok(())
}

fn distance(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Exact 1D quadratic Wasserstein distance by monotone (quantile) coupling.
/// Both measures are normalized to unit mass after the equal-mass check.
pub fn w2_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    if mu.dim != 1 {
        return Err(invalid("w2_1d needs one-dimensional measures"));
    }
    let sorted = |m: &DiscreteMeasure| {
        let total = m.mass();
        let mut atoms: Vec<(f64, f64)> = m.points.iter().zip(&m.weights).filter(|(_, w)| **w > 0.0).map(|(p, w)| (p[0], w / total)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    };
    let (xa, xb) = (sorted(mu), sorted(nu));
    // Walk the merged cumulative distribution functions.
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (xa[0].1, xb[0].1);
    let mut prev = 0.0;
    let mut cost = 0.0;
    loop {
        let next = ca.min(cb);
        let d = xa[i].0 - xb[j].0;
        cost += (next - prev).max(0.0) * d * d;
        prev = next;
        if ca <= cb {
            i += 1;
            if i == xa.len() {
                break;
            }
            ca += xa[i].1;
        } else {
            j += 1;
            if j == xb.len() {
                break;
            }
            cb += xb[j].1;
        }
    }
    Ok(cost.max(0.0).sqrt())
}

/// Exact `W_p` by the transportation simplex; returns the distance and an optimal plan.
pub fn wp_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, cap: usize) -> Result<(f64, TransportPlan)> {
    check_pair(mu, nu)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent p = {p} must be finite and >= 1")));
    }
    for m in [mu, nu] {
        if m.len() > cap {
            return Err(Error::AtomCap { atoms: m.len(), cap });
        }
    }
    let keep = |m: &DiscreteMeasure| -> Vec<usize> { (0..m.len()).filter(|&i| m.weights[i] > 0.0).collect() };
    let (ia, ib) = (keep(mu), keep(nu));
    let a: Vec<f64> = ia.iter().map(|&i| mu.weights[i] / mu.mass()).collect();
    let b: Vec<f64> = ib.iter().map(|&j| nu.weights[j] / nu.mass()).collect();
    let cost: Vec<f64> = ia.iter().flat_map(|&i| ib.iter().map(move |&j| distance(mu.points[i], nu.points[j]).powf(p))).collect();
    let (value, entries) = solve_transport(&a, &b, &cost)?;
    let scale = mu.mass();
    let entries = entries.into_iter().map(|(i, j, x)| (ia[i], ib[j], x * scale)).collect();
    Ok((value.max(0.0).powf(1.0 / p), TransportPlan { entries, cost: value * scale }))
}

/// Debiased entropic estimate of `W_p` (opt-in; never used by default).
pub fn wp_entropic(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, opts: EntropicOptions) -> Result<f64> {
    check_pair(mu, nu)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent p = {p} must be finite and >= 1")));
    }
    for m in [mu, nu] {
        if m.len() > opts.cap {
            return Err(Error::AtomCap { atoms: m.len(), cap: opts.cap });
        }
    }
    let s = sinkhorn_divergence(mu, nu, p, opts)?;
    Ok(s.max(0.0).powf(1.0 / p))
}

/// W2 between two fields: exact quantile coupling in 1D, transportation simplex on a
/// grid coarsened to at most `DEFAULT_ATOM_CAP` cells in 2D.
pub fn w2_fields(a: &DensityField, b: &DensityField) -> Result<f64> {
    a.check_same_grid(b)?;
    if a.grid().dim() == 1 {
        return w2_1d(&DiscreteMeasure::from_field(a)?, &DiscreteMeasure::from_field(b)?);
    }
    let factor = coarsening_factor(a.grid().cells(), DEFAULT_ATOM_CAP)?;
    let (ca, cb) = (a.coarsen(factor)?, b.coarsen(factor)?);
    Ok(wp_exact(&DiscreteMeasure::from_field(&ca)?, &DiscreteMeasure::from_field(&cb)?, 2.0, DEFAULT_ATOM_CAP)?.0)
}

/// Smallest factor dividing both cell counts that brings the cell count under `cap`.
pub fn coarsening_factor(cells: [usize; 2], cap: usize) -> Result<usize> {
    (1..=cells[0].max(cells[1]))
        .find(|f| cells[0].is_multiple_of(*f) && cells[1].is_multiple_of(*f) && (cells[0] / f) * (cells[1] / f) <= cap)
        .ok_or_else(|| invalid(format!("no coarsening of {cells:?} fits {cap} atoms")))
}
