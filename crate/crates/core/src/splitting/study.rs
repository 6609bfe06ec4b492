//! Self-convergence studies in the substep count `n` and the regularization `ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_splitting, SplittingSchedule};
use crate::drift::Drift;
use crate::error::{invalid, Result};
use crate::field::DensityField;
use crate::metrics::{linear_fit, w2_fields};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    /// `||ρ_n(T) - ρ_ref(T)||_{L¹}`.
    pub l1_error: f64,
    pub w2_error: f64,
    /// Ratio to the previous row's L¹ error.
    pub l1_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub next_epsilon: f64,
    /// `||ρ^ε(T) - ρ^{ε'}(T)||_{L¹}` at the finest `n`.
    pub l1_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub horizon: f64,
    pub reference_n: usize,
    pub reference_dt: f64,
    pub rows: Vec<StudyRow>,
    /// `-slope` of `log L¹ error` against `log n`.
    pub l1_order: Option<f64>,
    pub w2_order: Option<f64>,
    pub epsilon_rows: Vec<EpsilonRow>,
}

/// `-slope` of the log-log fit of `errors` against `ns`, ignoring zero errors.
pub fn fitted_order(ns: &[usize], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns.iter().zip(errors).filter(|(_, e)| **e > 0.0).map(|(n, e)| ((*n as f64).ln(), e.ln())).collect();
    (pts.len() >= 2).then(|| -linear_fit(&pts).0)
}

fn final_state(rho0: &DensityField, drift: &Drift, base: &SplittingSchedule, n: usize, dt: f64, eps: f64) -> Result<DensityField> {
    let mut s = base.clone();
    s.substeps = n;
    s.diffusion = s.diffusion.with_dt(dt).with_epsilon(eps);
    s.output_times = vec![0.0, s.horizon];
    s.diagnostic_exponents = vec![];
    Ok(run_splitting(rho0, drift, &s)?.last().field.clone())
}

/// Runs the scheme for every `n` in `n_list` at the base inner `dt` and compares the final
/// states with a reference at `4 max(n)` substeps and `dt/4`. When the schedule carries an
/// `epsilon_sequence`, consecutive values are also compared at the finest `n`.
pub fn convergence_study(rho0: &DensityField, drift: &Drift, base: &SplittingSchedule, n_list: &[usize]) -> Result<StudyReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_list must be nonempty and strictly increasing"));
    }
    let n_max = *n_list.last().expect("nonempty");
    let dt = base.diffusion.dt;
    let eps = base.diffusion.epsilon;
    let reference_n = 4 * n_max;
    let reference_dt = dt / 4.0;
    let (reference, finals) = rayon::join(
        || final_state(rho0, drift, base, reference_n, reference_dt, eps),
        || n_list.par_iter().map(|&n| final_state(rho0, drift, base, n, dt, eps)).collect::<Result<Vec<_>>>(),
    );
    let (reference, finals) = (reference?, finals?);
    let mut rows = Vec::with_capacity(n_list.len());
    for (&n, f) in n_list.iter().zip(&finals) {
        let l1_error = f.l1_distance(&reference)?;
        let w2_error = w2_fields(f, &reference)?;
        let l1_ratio = rows.last().map(|r: &StudyRow| l1_error / r.l1_error);
        rows.push(StudyRow { n, l1_error, w2_error, l1_ratio });
    }
    let l1: Vec<f64> = rows.iter().map(|r| r.l1_error).collect();
    let w2: Vec<f64> = rows.iter().map(|r| r.w2_error).collect();

    let mut epsilon_rows = Vec::new();
    if let Some(seq) = &base.epsilon_sequence {
        let states = seq.par_iter().map(|&e| final_state(rho0, drift, base, n_max, dt, e)).collect::<Result<Vec<_>>>()?;
        for k in 1..seq.len() {
            epsilon_rows.push(EpsilonRow { epsilon: seq[k - 1], next_epsilon: seq[k], l1_difference: states[k - 1].l1_distance(&states[k])? });
        }
    }
    Ok(StudyReport {
        horizon: base.horizon,
        reference_n,
        reference_dt,
        l1_order: fitted_order(n_list, &l1),
        w2_order: fitted_order(n_list, &w2),
        rows,
        epsilon_rows,
    })
}
