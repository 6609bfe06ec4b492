//! Log-domain Sinkhorn iterations and the debiased Sinkhorn divergence.

use serde::{Deserialize, Serialize};

use super::{distance, DiscreteMeasure, DEFAULT_ATOM_CAP};
use crate::error::{invalid, Error, Result};

/// Settings for the entropic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicOptions {
    /// Entropic regularization, in units of the cost.
    pub reg: f64,
    /// Stop when the column-marginal L1 error drops below this.
    pub tol: f64,
    pub max_iterations: usize,
    pub cap: usize,
}

impl EntropicOptions {
    pub fn with_reg(reg: f64) -> Self {
        Self { reg, tol: 1e-10, max_iterations: 200_000, cap: DEFAULT_ATOM_CAP }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Dual value `<a, f> + <b, g>` of entropic optimal transport at convergence.
fn entropic_value(a: &[f64], b: &[f64], cost: &[f64], opts: &EntropicOptions, symmetric: bool) -> Result<f64> {
    let (m, n) = (a.len(), b.len());
    let eps = opts.reg;
    let (la, lb): (Vec<f64>, Vec<f64>) = (a.iter().map(|x| x.ln()).collect(), b.iter().map(|x| x.ln()).collect());
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    for it in 0..opts.max_iterations {
        let g_new: Vec<f64> = (0..n).map(|j| -eps * log_sum_exp((0..m).map(|i| la[i] + (f[i] - cost[i * n + j]) / eps))).collect();
        if symmetric {
            for j in 0..n {
                g[j] = 0.5 * (g[j] + g_new[j]);
            }
            f.clone_from(&g);
        } else {
            g = g_new;
            f = (0..m).map(|i| -eps * log_sum_exp((0..n).map(|j| lb[j] + (g[j] - cost[i * n + j]) / eps))).collect();
        }
        if it % 10 == 0 || it + 1 == opts.max_iterations {
            let err: f64 = (0..n)
                .map(|j| {
                    let col: f64 = (0..m).map(|i| (la[i] + lb[j] + (f[i] + g[j] - cost[i * n + j]) / eps).exp()).sum();
                    (col - b[j]).abs()
                })
                .sum();
            if err < opts.tol {
                let v: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum::<f64>() + b.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>();
                return Ok(v);
            }
        }
    }
    Err(Error::NotConverged(format!("Sinkhorn did not reach tolerance {:e} at reg {:e}", opts.tol, eps)))
}

/// `OT_ε(μ,ν) - (OT_ε(μ,μ) + OT_ε(ν,ν))/2` for the cost `|x-y|^p`, both measures normalized.
pub fn sinkhorn_divergence(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, opts: EntropicOptions) -> Result<f64> {
    if !(opts.reg > 0.0) {
        return Err(invalid("entropic regularization must be positive"));
    }
    let weights = |m: &DiscreteMeasure| -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = (0..m.len()).filter(|&i| m.weights()[i] > 0.0).collect();
        let w = idx.iter().map(|&i| m.weights()[i] / m.mass()).collect();
        (idx, w)
    };
    let (ia, a) = weights(mu);
    let (ib, b) = weights(nu);
    let cost = |x: &DiscreteMeasure, ix: &[usize], y: &DiscreteMeasure, iy: &[usize]| -> Vec<f64> {
        ix.iter().flat_map(|&i| iy.iter().map(move |&j| distance(x.points()[i], y.points()[j]).powf(p))).collect()
    };
    let cross = entropic_value(&a, &b, &cost(mu, &ia, nu, &ib), &opts, false)?;
    let self_a = entropic_value(&a, &a, &cost(mu, &ia, mu, &ia), &opts, true)?;
    let self_b = entropic_value(&b, &b, &cost(nu, &ib, nu, &ib), &opts, true)?;
    Ok(cross - 0.5 * (self_a + self_b))
}
