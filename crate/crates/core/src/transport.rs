//! Lagrangian flow maps and the semi-Lagrangian push-forward of densities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::VelocityField;
use crate::error::{invalid, Error, Result};
use crate::field::{lq_norm, DensityField, Exponent};
use crate::grid::{Grid, Point};

/// Tolerance, relative to the domain diameter, for trajectories grazing the boundary.
pub const EXIT_TOLERANCE: f64 = 1e-9;

/// Integrates `dψ/dτ = V(ψ, τ)` from `s` to `t` with classical RK4 and accumulates
/// `∫_s^t div V(ψ(τ), τ) dτ` at the same stage points. Negative direction is allowed.
pub fn trace(v: &dyn VelocityField, x: Point, s: f64, t: f64, steps: usize) -> (Point, f64) {
    let steps = steps.max(1);
    let h = (t - s) / steps as f64;
    let track_div = !v.is_divergence_free();
    let mut p = x;
    let mut acc = 0.0;
    let add = |p: Point, k: Point, c: f64| [p[0] + c * k[0], p[1] + c * k[1]];
    for n in 0..steps {
        let tau = s + n as f64 * h;
        let k1 = v.velocity(p, tau);
        let p2 = add(p, k1, 0.5 * h);
        let k2 = v.velocity(p2, tau + 0.5 * h);
        let p3 = add(p, k2, 0.5 * h);
        let k3 = v.velocity(p3, tau + 0.5 * h);
        let p4 = add(p, k3, h);
        let k4 = v.velocity(p4, tau + h);
        if track_div {
            let d = v.divergence(p, tau) + 2.0 * v.divergence(p2, tau + 0.5 * h) + 2.0 * v.divergence(p3, tau + 0.5 * h) + v.divergence(p4, tau + h);
            acc += h / 6.0 * d;
        }
        for a in 0..2 {
            p[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    (p, acc)
}

/// Images of a set of points together with `log J = ∫_s^t div V` along each trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub points: Vec<Point>,
    pub log_jacobian: Vec<f64>,
}

impl FlowMap {
    pub fn jacobian(&self) -> Vec<f64> {
        self.log_jacobian.iter().map(|l| l.exp()).collect()
    }
}

/// Flow map `ψ(t; s, x)` for each `x`; fails if a trajectory leaves the closed domain.
pub fn flow_map(v: &dyn VelocityField, grid: &Grid, points: &[Point], s: f64, t: f64, steps: usize) -> Result<FlowMap> {
    if steps == 0 {
        return Err(invalid("flow map needs at least one RK step"));
    }
    let tol = EXIT_TOLERANCE * grid.diameter();
    let traced: Vec<(Point, f64)> = points.par_iter().map(|&x| trace(v, x, s, t, steps)).collect();
    let mut out = FlowMap { points: Vec::with_capacity(points.len()), log_jacobian: Vec::with_capacity(points.len()) };
    for (p, lj) in traced {
        let dist = grid.distance_outside(p);
        if dist > tol {
            return Err(Error::LeftDomain { drift: v.label(), x: p[0], y: p[1], distance: dist });
        }
        out.points.push(grid.clamp(p));
        out.log_jacobian.push(lj);
    }
    Ok(out)
}

/// Fractional cell coordinate along one axis, clamped to the center range, with
/// exact snapping to cell centers.
fn axis_coordinate(grid: &Grid, axis: usize, x: f64) -> (usize, f64) {
    let n = grid.cells()[axis];
    let s = (x - grid.lo()[axis]) / grid.spacing(axis) - 0.5;
    let s = s.clamp(0.0, (n - 1) as f64);
    let r = s.round();
    let s = if (s - r).abs() < 1e-12 { r } else { s };
    let i = (s.floor() as usize).min(n - 2);
    (i, s - i as f64)
}

/// Linear (1D) or bilinear (2D) interpolation of cell-centered data with constant
/// extrapolation in the half cell next to each wall.
pub fn interpolate(grid: &Grid, values: &[f64], p: Point) -> f64 {
    let (i, fx) = axis_coordinate(grid, 0, p[0]);
    if grid.dim() == 1 {
        return if fx == 0.0 { values[i] } else { (1.0 - fx) * values[i] + fx * values[i + 1] };
    }
    let (j, fy) = axis_coordinate(grid, 1, p[1]);
    let k = grid.index(i, j);
    let nx = grid.nx();
    let row = |k: usize| if fx == 0.0 { values[k] } else { (1.0 - fx) * values[k] + fx * values[k + 1] };
    if fy == 0.0 {
        row(k)
    } else {
        (1.0 - fy) * row(k) + fy * row(k + nx)
    }
}

/// Options for [`pushforward`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushforwardOptions {
    pub rk_steps: usize,
    /// Rescale the result to the source mass.
    pub renormalize: bool,
}

impl Default for PushforwardOptions {
    fn default() -> Self {
        Self { rk_steps: 8, renormalize: false }
    }
}

/// Pushed-forward density with its mass bookkeeping.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub field: DensityField,
    /// Mass after interpolation minus source mass, before any renormalization.
    pub mass_defect: f64,
}

/// Semi-Lagrangian push-forward `Ψ(t; s, ·)_# ϱ`: each target cell is traced back to
/// time `s`, the source is interpolated there and divided by the Jacobian.
///
/// Back-traced points outside the domain are an error for drifts declared tangential on the
/// boundary; for other drifts they read zero density (nothing flows in from outside).
pub fn pushforward(source: &DensityField, v: &dyn VelocityField, s: f64, t: f64, opts: PushforwardOptions) -> Result<Pushforward> {
    if opts.rk_steps == 0 {
        return Err(invalid("push-forward needs at least one RK step"));
    }
    if v.is_identically_zero() || s == t {
        return Ok(Pushforward { field: source.clone(), mass_defect: 0.0 });
    }
    let grid = source.grid();
    let tol = EXIT_TOLERANCE * grid.diameter();
    let strict = v.is_zero_normal_flux();
    let values = source.values();
    let cells: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let y = grid.center(k);
            let (x, a) = trace(v, y, t, s, opts.rk_steps);
            let dist = grid.distance_outside(x);
            if dist > tol {
                if strict {
                    return Err(Error::LeftDomain { drift: v.label(), x: x[0], y: x[1], distance: dist });
                }
                return Ok(0.0);
            }
            Ok(interpolate(grid, values, x) * a.exp())
        })
        .collect();
    let out: Vec<f64> = cells.into_iter().collect::<Result<_>>()?;
    let field = DensityField::new(grid.clone(), out)?;
    let source_mass = source.mass();
    let mass_defect = field.mass() - source_mass;
    let field = if opts.renormalize && field.mass() > 0.0 {
        let ratio = source_mass / field.mass();
        if ratio == 1.0 {
            field
        } else {
            field.scaled(ratio)
        }
    } else {
        field
    };
    Ok(Pushforward { field, mass_defect })
}

/// Residuals of the change-of-variables relations satisfied by an exact push-forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardRelations {
    /// `∫ρ log ρ - (∫ϱ log ϱ - ∫ϱ log J)`.
    pub entropy_residual: f64,
    /// `∫_s^t ||div V||_∞ dτ` sampled on cell centers.
    pub divergence_integral: f64,
    /// `(q, ||ϱ||_q exp(((q-1)/q) ∫||div V||_∞) - ||ρ||_q)`; nonnegative when the bound holds.
    pub lq_slack: Vec<(f64, f64)>,
}

fn entropy_of(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum::<f64>() * grid.cell_volume()
}

/// Checks the entropy and `L^q` relations between a source and its push-forward.
pub fn pushforward_relations(source: &DensityField, pushed: &DensityField, v: &dyn VelocityField, s: f64, t: f64, qs: &[f64], rk_steps: usize) -> Result<PushforwardRelations> {
    source.check_same_grid(pushed)?;
    let grid = source.grid();
    let log_j: Vec<f64> = if v.is_divergence_free() {
        vec![0.0; grid.len()]
    } else {
        (0..grid.len()).into_par_iter().map(|k| trace(v, grid.center(k), s, t, rk_steps).1).collect()
    };
    let vol = grid.cell_volume();
    let weighted: f64 = source.values().iter().zip(&log_j).map(|(r, l)| r * l).sum::<f64>() * vol;
    let entropy_residual = entropy_of(grid, pushed.values()) - (entropy_of(grid, source.values()) - weighted);

    let divergence_integral = if v.is_divergence_free() {
        0.0
    } else {
        let samples = 64;
        let times: Vec<f64> = (0..=samples).map(|k| s + (t - s) * k as f64 / samples as f64).collect();
        let sups: Vec<f64> = times.iter().map(|&tau| grid.centers().map(|p| v.divergence(p, tau).abs()).fold(0.0, f64::max)).collect();
        crate::field::time_integral(&times, sups).abs()
    };
    let mut lq_slack = Vec::with_capacity(qs.len());
    for &q in qs {
        let e = Exponent::new(q)?;
        let growth = ((1.0 - e.reciprocal()) * divergence_integral).exp();
        let slack = lq_norm(grid, source.values(), e) * growth - lq_norm(grid, pushed.values(), e);
        lq_slack.push((q, slack));
    }
    Ok(PushforwardRelations { entropy_residual, divergence_integral, lq_slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{Drift, DriftSpec, Potential};

    #[test]
    fn interpolation_reproduces_affine_data_away_from_walls() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [10, 20]).unwrap();
        let vals: Vec<f64> = g.centers().map(|p| 1.0 + 2.0 * p[0] - 0.5 * p[1]).collect();
        for p in [[0.3, 0.7], [0.51, 1.33], [0.85, 0.12]] {
            assert!((interpolate(&g, &vals, p) - (1.0 + 2.0 * p[0] - 0.5 * p[1])).abs() < 1e-13);
        }
    }

    #[test]
    fn rotation_trajectory_stays_on_circle() {
        let g = Grid::unit_square(16).unwrap();
        let d = Drift::new(DriftSpec::RigidRotation { omega: 1.0, center: [0.5, 0.5], cutoff: None }, &g).unwrap();
        let (p, lj) = trace(&d, [0.7, 0.5], 0.0, std::f64::consts::FRAC_PI_2, 200);
        assert!((p[0] - 0.5).abs() < 1e-10 && (p[1] - 0.7).abs() < 1e-10);
        assert_eq!(lj, 0.0);
    }

    #[test]
    fn expanding_flow_has_exponential_jacobian() {
        let g = Grid::unit_square(16).unwrap();
        let d = Drift::new(DriftSpec::PotentialGradient { potential: Potential::Quadratic { alpha: 0.3, center: [0.5, 0.5] } }, &g).unwrap();
        let fm = flow_map(&d, &g, &[[0.55, 0.45]], 0.0, 0.5, 50).unwrap();
        assert!((fm.jacobian()[0] - (2.0 * 0.3 * 0.5f64).exp()).abs() < 1e-12);
        assert!(flow_map(&d, &g, &[[0.99, 0.5]], 0.0, 2.0, 50).is_err());
    }

    #[test]
    fn zero_drift_returns_source_exactly() {
        let g = Grid::new_1d(0.0, 1.0, 32).unwrap();
        let f = DensityField::from_fn(g.clone(), |p| 1.0 + p[0]).unwrap();
        let out = pushforward(&f, &Drift::zero(&g), 0.0, 1.0, PushforwardOptions { rk_steps: 4, renormalize: true }).unwrap();
        assert_eq!(out.field, f);
    }
}
