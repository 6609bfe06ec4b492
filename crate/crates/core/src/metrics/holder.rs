//! Hölder-in-time fits `d(s,t) ≈ C |t-s|^a` on the upper envelope of sampled distances.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Minimum number of distinct gaps for a fit.
pub const MIN_GAPS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// Fitted exponent; `None` when every distance vanishes.
    pub exponent: Option<f64>,
    pub constant: Option<f64>,
    pub r_squared: Option<f64>,
    /// Root-mean-square residual of the log-log regression.
    pub residual: Option<f64>,
    /// `(gap, max distance)` pairs used for the fit.
    pub envelope: Vec<(f64, f64)>,
    pub stationary: bool,
}

fn envelope(pairs: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    let mut gaps: Vec<(f64, f64)> = pairs.iter().map(|&(s, t, d)| ((t - s).abs(), d)).filter(|(g, _)| *g > 0.0).collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (g, d) in gaps {
        match out.last_mut() {
            Some(last) if (g - last.0).abs() <= 1e-6 * g => last.1 = last.1.max(d),
            _ => out.push((g, d)),
        }
    }
    out
}

/// Least-squares fit of `log max_d` against `log gap`.
pub fn holder_fit(pairs: &[(f64, f64, f64)]) -> Result<HolderFit> {
    if pairs.iter().any(|p| !(p.0.is_finite() && p.1.is_finite() && p.2.is_finite() && p.2 >= 0.0)) {
        return Err(invalid("distance pairs must be finite with nonnegative distances"));
    }
    let env = envelope(pairs);
    if env.len() < MIN_GAPS {
        return Err(invalid(format!("need at least {MIN_GAPS} distinct gaps, got {}", env.len())));
    }
    let scale = env.iter().fold(0.0_f64, |m, e| m.max(e.1));
    if scale <= 1e-14 {
        return Ok(HolderFit { exponent: None, constant: None, r_squared: None, residual: None, envelope: env, stationary: true });
    }
    let pts: Vec<(f64, f64)> = env.iter().filter(|e| e.1 > 0.0).map(|e| (e.0.ln(), e.1.ln())).collect();
    if pts.len() < 2 {
        return Err(invalid("fewer than two positive distances"));
    }
    let (slope, intercept, r2, rms) = linear_fit(&pts);
    Ok(HolderFit { exponent: Some(slope), constant: Some(intercept.exp()), r_squared: Some(r2), residual: Some(rms), envelope: env, stationary: false })
}

/// Ordinary least squares; returns `(slope, intercept, R^2, rms residual)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2, (ss_res / n).sqrt())
}

/// Smallest `C` with `d(s,t) <= C |t-s|^a` for all sampled pairs.
pub fn majorant_constant(pairs: &[(f64, f64, f64)], exponent: f64) -> f64 {
    pairs.iter().filter(|p| p.1 != p.0).map(|&(s, t, d)| d / (t - s).abs().powf(exponent)).fold(0.0, f64::max)
}
