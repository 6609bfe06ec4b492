//! Parabolic Sobolev embedding and the mixed-norm interpolation inequality, evaluated on
//! sampled data with the smallest constant that makes each hold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{dirichlet_energy, integrate, mixed_norm, power_integral, time_integral, MixedNormSpec, Sample};
use crate::grid::Grid;

/// `|∇v|` at cell centers from averaged face differences (walls contribute zero).
pub fn cell_gradient_magnitude(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    for (a, b, axis) in grid.interior_faces() {
        let d = 0.5 * (v[b] - v[a]) / grid.spacing(axis);
        let target = if axis == 0 { &mut gx } else { &mut gy };
        target[a] += d;
        target[b] += d;
    }
    gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect()
}

fn check_series(grid: &Grid, series: &[Sample<'_>]) -> Result<()> {
    if series.len() < 2 {
        return Err(invalid("inequality checks need at least two time samples"));
    }
    if let Some((t, _)) = series.iter().find(|(_, v)| v.len() != grid.len()) {
        return Err(Error::GridMismatch(format!("sample at t = {t} does not match the grid")));
    }
    Ok(())
}

fn empirical_constant(lhs: f64, main: f64, lower: f64) -> Option<f64> {
    if lhs <= lower {
        Some(0.0)
    } else if main > 0.0 {
        Some((lhs - lower) / main)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    /// `∫∫|v|^{p(d+q)/d}`.
    pub lhs: f64,
    /// `(sup_t ∫|v|^q)^{p/d} ∫∫|∇v|^p`.
    pub gradient_term: f64,
    /// `|Ω|^{1 - p(d+q)/d} ∫ ||v||_1^{p(d+q)/d} dt`.
    pub mass_term: f64,
    /// Smallest `c` with `lhs <= c gradient_term + mass_term`; `None` if no `c` works.
    pub constant: Option<f64>,
    /// Every term scales like `λ^{p(d+q)/d}` under `v -> λ v`.
    pub homogeneity: f64,
}

/// Parabolic embedding for `1 <= p < d` and `0 < q < dp/(d-p)`.
pub fn verify_parabolic_sobolev(grid: &Grid, series: &[Sample<'_>], p: f64, q: f64) -> Result<SobolevReport> {
    check_series(grid, series)?;
    let d = grid.dim();
    let df = d as f64;
    if !(p >= 1.0 && p < df) {
        return Err(invalid(format!("need 1 <= p < d, got p = {p}, d = {d}")));
    }
    if !(q > 0.0 && q < df * p / (df - p)) {
        return Err(invalid(format!("need 0 < q < dp/(d-p) = {}, got q = {q}", df * p / (df - p))));
    }
    let s = p * (df + q) / df;
    let times: Vec<f64> = series.iter().map(|x| x.0).collect();
    let abs: Vec<Vec<f64>> = series.iter().map(|(_, v)| v.iter().map(|x| x.abs()).collect()).collect();
    let lhs = time_integral(&times, abs.iter().map(|v| power_integral(grid, v, s)));
    let sup_q = abs.iter().map(|v| power_integral(grid, v, q)).fold(0.0, f64::max);
    let grad = time_integral(&times, series.iter().map(|(_, v)| power_integral(grid, &cell_gradient_magnitude(grid, v), p)));
    let gradient_term = sup_q.powf(p / df) * grad;
    let mass_term = grid.volume().powf(1.0 - s) * time_integral(&times, abs.iter().map(|v| integrate(grid, v).powf(s)));
    Ok(SobolevReport { d, p, q, lhs, gradient_term, mass_term, constant: empirical_constant(lhs, gradient_term, mass_term), homogeneity: s })
}

/// `r2` on the admissible line for a given `r1`; `None` when `d/p <= d/r1`.
pub fn interpolation_r2(d: usize, p: f64, q: f64, m: f64, r1: f64) -> Option<f64> {
    let df = d as f64;
    let denom = df / p - df / r1;
    (denom > 0.0).then(|| (2.0 + df / p * (m + q - 1.0 - p)) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub r1: f64,
    pub r2: f64,
    pub gamma: f64,
    /// `d/r1 + (2 + (d/p)(m+q-1-p))/r2 - d/p`.
    pub relation_residual: f64,
    /// `||ρ||_{L^{r1,r2}}`.
    pub lhs: f64,
    /// `(sup_t ∫ρ^p)^γ ||∇ρ^{(q+m-1)/2}||_{L²}^{2/r2}`.
    pub gradient_term: f64,
    /// `|Ω|^{-(1-1/r1)} (∫ ||ρ||_1^{r1} dt)^{1/r2}`.
    pub mass_term: f64,
    pub constant: Option<f64>,
    /// Scaling exponents of `(lhs, gradient_term, mass_term)` under `ρ -> λρ`.
    pub homogeneity: [f64; 3],
}

/// Mixed-norm interpolation for `0 < m < 1`, `1 <= p <= q` on the admissible line.
pub fn verify_interpolation(grid: &Grid, series: &[Sample<'_>], p: f64, q: f64, m: f64, r1: f64, r2: f64) -> Result<InterpolationReport> {
    check_series(grid, series)?;
    let d = grid.dim();
    let df = d as f64;
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid(format!("interpolation inequality needs 0 < m < 1, got {m}")));
    }
    if !(q >= 1.0 && p >= 1.0 && p <= q) {
        return Err(invalid(format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    if !r1.is_finite() {
        return Err(invalid("r1 = inf is not supported"));
    }
    let inv_r2 = if r2.is_infinite() { 0.0 } else { 1.0 / r2 };
    let relation_residual = df / r1 + (2.0 + df / p * (m + q - 1.0 - p)) * inv_r2 - df / p;
    if relation_residual.abs() > 1e-9 {
        return Err(invalid(format!("(r1, r2) = ({r1}, {r2}) is off the admissible line: residual {relation_residual:e}")));
    }
    let mq = m + q - 1.0;
    let window = match d {
        1 => r1 >= p && r2 >= mq,
        _ => r1 >= p && r2 > mq,
    };
    if !window {
        return Err(invalid(format!("(r1, r2) = ({r1}, {r2}) outside the admissible window")));
    }
    let gamma = df * p * mq / (2.0 * p + df * (mq - p)) * (1.0 / r1 - (df - 2.0) / (df * mq));
    let spec = MixedNormSpec::new(r1, r2)?;
    let lhs = mixed_norm(grid, series, spec)?;
    let times: Vec<f64> = series.iter().map(|x| x.0).collect();
    let sup_p = series.iter().map(|(_, v)| power_integral(grid, v, p)).fold(0.0, f64::max);
    let e = 0.5 * mq;
    let grad_sq = time_integral(
        &times,
        series.iter().map(|(_, v)| {
            let powered: Vec<f64> = v.iter().map(|x| x.max(0.0).powf(e)).collect();
            dirichlet_energy(grid, &powered)
        }),
    );
    let grad_factor = if inv_r2 == 0.0 { 1.0 } else { grad_sq.sqrt().powf(2.0 * inv_r2) };
    let gradient_term = sup_p.powf(gamma) * grad_factor;
    let history = if inv_r2 == 0.0 { 1.0 } else { time_integral(&times, series.iter().map(|(_, v)| integrate(grid, v).powf(r1))).powf(inv_r2) };
    let mass_term = grid.volume().powf(-(1.0 - 1.0 / r1)) * history;
    Ok(InterpolationReport {
        d,
        p,
        q,
        m,
        r1,
        r2,
        gamma,
        relation_residual,
        lhs,
        gradient_term,
        mass_term,
        constant: empirical_constant(lhs, gradient_term, mass_term),
        homogeneity: [1.0, p * gamma + mq * inv_r2, r1 * inv_r2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_is_trivial() {
        let g = Grid::unit_square(8).unwrap();
        let z = vec![0.0; g.len()];
        let series = [(0.0, z.as_slice()), (1.0, z.as_slice())];
        let r = verify_parabolic_sobolev(&g, &series, 1.0, 1.0).unwrap();
        assert_eq!((r.lhs, r.constant), (0.0, Some(0.0)));
    }

    #[test]
    fn r2_solves_the_relation() {
        let (d, p, q, m) = (2, 1.0, 1.0, 0.7);
        let r1 = 1.5;
        let r2 = interpolation_r2(d, p, q, m, r1).unwrap();
        assert!((2.0 / r1 + (2.0 + 2.0 * (m + q - 1.0 - p)) / r2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn off_line_exponents_are_rejected() {
        let g = Grid::unit_square(8).unwrap();
        let one = vec![1.0; g.len()];
        let series = [(0.0, one.as_slice()), (1.0, one.as_slice())];
        assert!(verify_interpolation(&g, &series, 1.0, 1.0, 0.7, 1.5, 3.0).is_err());
    }
}
