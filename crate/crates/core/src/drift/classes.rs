//! Membership tests for the integrability classes of drifts.

use serde::{Deserialize, Serialize};

use super::{Drift, VelocityField};
use crate::error::{invalid, Result};
use crate::field::{lq_norm, temporal_norm, MixedNormSpec, Sample};

/// Integrability classes; all but `STilde` constrain `V` itself, `STilde` constrains `∇V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftClass {
    /// Subcritical class for general drifts, `1 - 1/d <= m < 1`.
    #[serde(rename = "S")]
    S,
    /// Class on the velocity gradient, `(1 - 2/d)_+ <= m < 1`.
    #[serde(rename = "S_tilde")]
    STilde,
    /// Scaling-invariant class with exponent `q_{m,d} = d(m-1)/q`.
    #[serde(rename = "S_scaling")]
    ScalingInvariant,
    /// Divergence-free class, closed.
    #[serde(rename = "D")]
    D,
    /// Divergence-free class, strict inequality.
    #[serde(rename = "D_plus")]
    DPlus,
    /// Divergence-free class for the speed estimate.
    #[serde(rename = "D_s")]
    DS,
}

impl DriftClass {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "S" => Self::S,
            "S_tilde" | "Stilde" => Self::STilde,
            "S_scaling" => Self::ScalingInvariant,
            "D" => Self::D,
            "D_plus" | "D+" => Self::DPlus,
            "D_s" | "Ds" => Self::DS,
            other => return Err(invalid(format!("unknown drift class `{other}`"))),
        })
    }

    pub fn requires_divergence_free(self) -> bool {
        matches!(self, Self::D | Self::DPlus | Self::DS)
    }

    fn uses_gradient(self) -> bool {
        matches!(self, Self::STilde)
    }

    /// Left- and right-hand sides of the defining exponent inequality.
    pub fn exponent_sides(self, d: f64, m: f64, q: f64, spec: MixedNormSpec) -> (f64, f64) {
        let (r1, r2) = (spec.space.reciprocal(), spec.time.reciprocal());
        let qmd = d * (m - 1.0) / q;
        match self {
            Self::S => (d * r1 + (2.0 + d * (q + m - 2.0)) * r2, 1.0 + d * (m - 1.0)),
            Self::STilde => (d * r1 + (2.0 + d * (q + m - 2.0)) * r2, 2.0 + d * (m - 1.0)),
            Self::ScalingInvariant => (d * r1 + (2.0 + qmd) * r2, 1.0 + qmd),
            Self::D | Self::DPlus => (d * r1 + (2.0 + qmd) * r2, 2.0 + d * (q + m - 2.0) / q),
            Self::DS => (d * r1 + (2.0 + qmd) * r2, 1.0 + d * (q + m - 2.0) / (2.0 * q)),
        }
    }

    /// Whether `m` lies in the admissible range of the class.
    pub fn m_admissible(self, d: f64, m: f64, q: f64) -> bool {
        if !(m > 0.0) {
            return false;
        }
        match self {
            Self::S => (1.0 - 1.0 / d) <= m && m < 1.0,
            Self::STilde => (1.0 - 2.0 / d).max(0.0) <= m && m < 1.0,
            Self::ScalingInvariant => true,
            Self::D | Self::DPlus | Self::DS => ((1.0 - 2.0 * q / d).max(0.0) <= m && m < 1.0) || m > 1.0,
        }
    }
}

/// Outcome of a class membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: DriftClass,
    pub dim: usize,
    pub m: f64,
    pub q: f64,
    pub exponents: MixedNormSpec,
    /// `||V||` (or `||∇V||`) in the mixed norm over `[0, T]`.
    pub norm: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub m_admissible: bool,
    pub divergence_free: bool,
    pub member: bool,
    /// Equality in the exponent relation.
    pub critical: bool,
    pub notes: Vec<String>,
}

const CRITICAL_TOL: f64 = 1e-12;

/// Computes the mixed norm of the drift on its probe grid and decides class membership.
pub fn classify(drift: &Drift, m: f64, q: f64, spec: MixedNormSpec, class: DriftClass, horizon: f64) -> Result<ClassReport> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(invalid(format!("q = {q} must be finite and >= 1")));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let d = drift.dim() as f64;
    let probe = drift.probe_grid();
    let times: Vec<f64> = (0..=64).map(|k| horizon * k as f64 / 64.0).collect();
    let mags = drift.sampled_magnitudes(&probe, &times, class.uses_gradient());
    let spatial: Vec<f64> = mags.iter().map(|f| lq_norm(&probe, f, spec.space)).collect();
    let series: Vec<Sample> = times.iter().zip(&mags).map(|(t, f)| (*t, f.as_slice())).collect();
    let norm = temporal_norm(&series, &spatial, spec.time);

    let (lhs, rhs) = class.exponent_sides(d, m, q, spec);
    let m_admissible = class.m_admissible(d, m, q);
    let divergence_free = drift.is_divergence_free();
    let critical = (lhs - rhs).abs() <= CRITICAL_TOL * (1.0 + rhs.abs());
    let relation = match class {
        DriftClass::DPlus => lhs < rhs - CRITICAL_TOL * (1.0 + rhs.abs()),
        _ => lhs <= rhs + CRITICAL_TOL * (1.0 + rhs.abs()),
    };
    let mut notes = Vec::new();
    if !m_admissible {
        notes.push(format!("m = {m} outside the admissible range of {class:?}"));
    }
    if !norm.is_finite() {
        notes.push("mixed norm is not finite".into());
    }
    if class.requires_divergence_free() && !divergence_free {
        notes.push(format!("{class:?} requires a divergence-free drift"));
    }
    if !relation {
        notes.push(format!("exponent relation fails: {lhs} vs {rhs}"));
    }
    if critical {
        notes.push("critical: equality in the exponent relation".into());
    }
    let member = m_admissible && norm.is_finite() && relation && (!class.requires_divergence_free() || divergence_free);
    Ok(ClassReport {
        class,
        dim: drift.dim(),
        m,
        q,
        exponents: spec,
        norm,
        lhs,
        rhs,
        m_admissible,
        divergence_free,
        member,
        critical: critical && member,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{DriftSpec, Modulation};
    use crate::grid::Grid;

    #[test]
    fn critical_s_class_example() {
        let g = Grid::unit_square(16).unwrap();
        let d = Drift::new(DriftSpec::Shear { rate: 1.0, center: 0.5, tapered: true }, &g).unwrap();
        let spec = MixedNormSpec::new(f64::INFINITY, 8.0 / 3.0).unwrap();
        let r = classify(&d, 0.8, 1.0, spec, DriftClass::S, 1.0).unwrap();
        assert!((r.lhs - 0.6).abs() < 1e-12 && (r.rhs - 0.6).abs() < 1e-12);
        assert!(r.member && r.critical);
    }

    #[test]
    fn rotation_in_d_class() {
        let g = Grid::unit_square(16).unwrap();
        let d = Drift::new(DriftSpec::RigidRotation { omega: 1.0, center: [0.5, 0.5], cutoff: Some([0.2, 0.4]) }, &g).unwrap();
        let spec = MixedNormSpec::new(f64::INFINITY, f64::INFINITY).unwrap();
        let r = classify(&d, 0.8, 1.0, spec, DriftClass::D, 1.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs - 1.6).abs() < 1e-12);
        assert!(r.member && !r.critical);
    }

    #[test]
    fn d_class_refuses_compressible_drift_and_bad_m() {
        let g = Grid::unit_square(16).unwrap();
        let d = Drift::new(DriftSpec::Shear { rate: 1.0, center: 0.5, tapered: true }, &g).unwrap();
        let spec = MixedNormSpec::new(f64::INFINITY, f64::INFINITY).unwrap();
        assert!(!classify(&d, 0.8, 1.0, spec, DriftClass::D, 1.0).unwrap().member);
        let r = classify(&d, 0.3, 1.0, spec, DriftClass::S, 1.0).unwrap();
        assert!(!r.m_admissible && !r.member);
    }

    #[test]
    fn unit_modulation_classifies_like_base() {
        let g = Grid::unit_square(16).unwrap();
        let base = DriftSpec::StreamFunction { amplitude: 0.5, modes: [1, 1] };
        let a = Drift::new(base.clone(), &g).unwrap();
        let b = Drift::new(
            DriftSpec::TimeModulated { base: Box::new(base), modulation: Modulation::Constant { value: 1.0 } },
            &g,
        )
        .unwrap();
        let spec = MixedNormSpec::new(4.0, 2.0).unwrap();
        let ra = classify(&a, 0.9, 2.0, spec, DriftClass::DPlus, 0.5).unwrap();
        let rb = classify(&b, 0.9, 2.0, spec, DriftClass::DPlus, 0.5).unwrap();
        assert_eq!(ra.member, rb.member);
        assert!((ra.norm - rb.norm).abs() < 1e-14);
    }
}
