//! Closed-form drift fields and their integrability classes.

mod classes;

pub use classes::{classify, ClassReport, DriftClass};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{lq_norm, Exponent};
use crate::grid::{Grid, Point};

/// Time-dependent velocity field on a bounded domain.
pub trait VelocityField: Sync {
    fn velocity(&self, p: Point, t: f64) -> Point;
    fn divergence(&self, p: Point, t: f64) -> f64;
    fn is_divergence_free(&self) -> bool;
    fn is_zero_normal_flux(&self) -> bool;
    /// True only when the field vanishes everywhere for all times.
    fn is_identically_zero(&self) -> bool {
        false
    }
    fn label(&self) -> String;
}

/// Scalar potential whose gradient is used as a drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Potential {
    /// `(alpha/2) |x - center|^2`, giving the expanding field `alpha (x - center)`.
    Quadratic { alpha: f64, center: Point },
    /// `amplitude * prod_i cos(k_i pi (x_i - lo_i) / L_i)`; zero normal derivative on walls.
    Cosine { amplitude: f64, modes: [u32; 2] },
}

/// Scalar amplitude multiplying a base drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Modulation {
    Constant { value: f64 },
    /// `mean + amplitude * sin(2 pi frequency t)`.
    Sine { mean: f64, amplitude: f64, frequency: f64 },
}

impl Modulation {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Sine { mean, amplitude, frequency } => mean + amplitude * (2.0 * PI * frequency * t).sin(),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            Self::Constant { value } => value == 0.0,
            Self::Sine { mean, amplitude, .. } => mean == 0.0 && amplitude == 0.0,
        }
    }
}

/// Serializable description of a drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    Zero,
    Constant {
        velocity: Point,
    },
    /// `rate (y - center) w(x) e_x`, with `w = sin(pi (x - lo)/L)` when tapered
    /// (then the field has zero normal flux but nonzero divergence).
    Shear {
        rate: f64,
        center: f64,
        #[serde(default)]
        tapered: bool,
    },
    /// `omega g(|x-c|) (x-c)^perp` with a smooth radial cutoff `g`
    /// equal to 1 inside `cutoff[0]` and 0 outside `cutoff[1]`.
    RigidRotation {
        omega: f64,
        center: Point,
        #[serde(default)]
        cutoff: Option<[f64; 2]>,
    },
    PotentialGradient {
        potential: Potential,
    },
    /// Perpendicular gradient of `amplitude sin(kx pi x') sin(ky pi y')`.
    StreamFunction {
        amplitude: f64,
        modes: [u32; 2],
    },
    TimeModulated {
        base: Box<DriftSpec>,
        modulation: Modulation,
    },
}

impl DriftSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Constant { .. } => "constant",
            Self::Shear { .. } => "shear",
            Self::RigidRotation { .. } => "rigid_rotation",
            Self::PotentialGradient { .. } => "potential_gradient",
            Self::StreamFunction { .. } => "stream_function",
            Self::TimeModulated { .. } => "time_modulated",
        }
    }
}

/// A [`DriftSpec`] bound to a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    spec: DriftSpec,
    dim: usize,
    lo: Point,
    hi: Point,
    fd_step: f64,
    divergence_free: bool,
    zero_normal_flux: bool,
}

type Matrix2 = [[f64; 2]; 2];

impl Drift {
    pub fn new(spec: DriftSpec, grid: &Grid) -> Result<Self> {
        let dim = grid.dim();
        validate_spec(&spec, dim)?;
        let mut drift = Self {
            spec,
            dim,
            lo: grid.lo(),
            hi: grid.hi(),
            fd_step: 1e-6 * grid.min_spacing(),
            divergence_free: false,
            zero_normal_flux: false,
        };
        drift.divergence_free = drift.declares_divergence_free(&drift.spec);
        drift.zero_normal_flux = drift.declares_zero_flux(&drift.spec);
        Ok(drift)
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::new(DriftSpec::Zero, grid).expect("zero drift is always valid")
    }

    pub fn spec(&self) -> &DriftSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn declares_divergence_free(&self, spec: &DriftSpec) -> bool {
        match spec {
            DriftSpec::Zero | DriftSpec::Constant { .. } => true,
            DriftSpec::Shear { tapered, rate, .. } => !tapered || *rate == 0.0,
            DriftSpec::RigidRotation { .. } | DriftSpec::StreamFunction { .. } => true,
            DriftSpec::PotentialGradient { potential } => match potential {
                Potential::Quadratic { alpha, .. } => *alpha == 0.0,
                Potential::Cosine { amplitude, .. } => *amplitude == 0.0,
            },
            DriftSpec::TimeModulated { base, .. } => self.declares_divergence_free(base),
        }
    }

    fn declares_zero_flux(&self, spec: &DriftSpec) -> bool {
        match spec {
            DriftSpec::Zero | DriftSpec::StreamFunction { .. } => true,
            DriftSpec::Constant { velocity } => velocity[..self.dim].iter().all(|v| *v == 0.0),
            DriftSpec::Shear { tapered, rate, .. } => *tapered || *rate == 0.0,
            DriftSpec::RigidRotation { omega, center, cutoff } => {
                *omega == 0.0
                    || cutoff.is_some_and(|[_, r_out]| {
                        (0..2).all(|a| center[a] - r_out >= self.lo[a] && center[a] + r_out <= self.hi[a])
                    })
            }
            DriftSpec::PotentialGradient { potential } => match potential {
                Potential::Quadratic { alpha, .. } => *alpha == 0.0,
                Potential::Cosine { .. } => true,
            },
            DriftSpec::TimeModulated { base, .. } => self.declares_zero_flux(base),
        }
    }

    fn wavenumber(&self, a: usize, k: u32) -> f64 {
        k as f64 * PI / (self.hi[a] - self.lo[a])
    }

    fn eval(&self, spec: &DriftSpec, p: Point, t: f64) -> (Point, Option<Matrix2>) {
        match spec {
            DriftSpec::Zero => ([0.0; 2], Some([[0.0; 2]; 2])),
            DriftSpec::Constant { velocity } => (*velocity, Some([[0.0; 2]; 2])),
            DriftSpec::Shear { rate, center, tapered } => {
                let dy = p[1] - center;
                let (w, dw) = if *tapered {
                    let k = self.wavenumber(0, 1);
                    let s = k * (p[0] - self.lo[0]);
                    (s.sin(), k * s.cos())
                } else {
                    (1.0, 0.0)
                };
                ([rate * dy * w, 0.0], Some([[rate * dy * dw, rate * w], [0.0, 0.0]]))
            }
            DriftSpec::RigidRotation { omega, center, cutoff } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let r = dx.hypot(dy);
                let (g, dg) = match cutoff {
                    Some([r_in, r_out]) => smooth_cutoff(r, *r_in, *r_out),
                    None => (1.0, 0.0),
                };
                let v = [-omega * g * dy, omega * g * dx];
                let (ux, uy) = if r > 0.0 { (dx / r, dy / r) } else { (0.0, 0.0) };
                let jac = [
                    [-omega * dy * dg * ux, -omega * (g + dy * dg * uy)],
                    [omega * (g + dx * dg * ux), omega * dx * dg * uy],
                ];
                (v, Some(jac))
            }
            DriftSpec::PotentialGradient { potential } => match potential {
                Potential::Quadratic { alpha, center } => {
                    let mut v = [0.0; 2];
                    let mut jac = [[0.0; 2]; 2];
                    for a in 0..self.dim {
                        v[a] = alpha * (p[a] - center[a]);
                        jac[a][a] = *alpha;
                    }
                    (v, Some(jac))
                }
                Potential::Cosine { amplitude, modes } => {
                    let mut kap = [0.0; 2];
                    let mut c = [1.0; 2];
                    let mut s = [0.0; 2];
                    for a in 0..self.dim {
                        kap[a] = self.wavenumber(a, modes[a]);
                        let arg = kap[a] * (p[a] - self.lo[a]);
                        c[a] = arg.cos();
                        s[a] = arg.sin();
                    }
                    let amp = *amplitude;
                    let v = [-amp * kap[0] * s[0] * c[1], -amp * kap[1] * c[0] * s[1]];
                    let jac = [
                        [-amp * kap[0] * kap[0] * c[0] * c[1], amp * kap[0] * kap[1] * s[0] * s[1]],
                        [amp * kap[0] * kap[1] * s[0] * s[1], -amp * kap[1] * kap[1] * c[0] * c[1]],
                    ];
                    (v, Some(jac))
                }
            },
            DriftSpec::StreamFunction { amplitude, modes } => {
                let (kx, ky) = (self.wavenumber(0, modes[0]), self.wavenumber(1, modes[1]));
                let (ax, ay) = (kx * (p[0] - self.lo[0]), ky * (p[1] - self.lo[1]));
                let (sx, cx, sy, cy) = (ax.sin(), ax.cos(), ay.sin(), ay.cos());
                let a = *amplitude;
                let v = [a * ky * sx * cy, -a * kx * cx * sy];
                let jac = [[a * kx * ky * cx * cy, -a * ky * ky * sx * sy], [a * kx * kx * sx * sy, -a * kx * ky * cx * cy]];
                (v, Some(jac))
            }
            DriftSpec::TimeModulated { base, modulation } => {
                let amp = modulation.at(t);
                let (v, jac) = self.eval(base, p, t);
                let jac = jac.map(|j| j.map(|row| row.map(|e| amp * e)));
                ([amp * v[0], amp * v[1]], jac)
            }
        }
    }

    /// Velocity gradient `∂V_i/∂x_j`; analytic when available, central differences otherwise.
    pub fn jacobian(&self, p: Point, t: f64) -> Matrix2 {
        match self.eval(&self.spec, p, t).1 {
            Some(j) => self.mask(j),
            None => self.fd_jacobian(p, t),
        }
    }

    /// Central-difference Jacobian with step `1e-6 * min h`.
    pub fn fd_jacobian(&self, p: Point, t: f64) -> Matrix2 {
        let h = self.fd_step;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..self.dim {
            let (mut a, mut b) = (p, p);
            a[j] += h;
            b[j] -= h;
            let (va, vb) = (self.velocity(a, t), self.velocity(b, t));
            for i in 0..self.dim {
                jac[i][j] = (va[i] - vb[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn mask(&self, mut j: Matrix2) -> Matrix2 {
        if self.dim == 1 {
            j[0][1] = 0.0;
            j[1][0] = 0.0;
            j[1][1] = 0.0;
        }
        j
    }

    /// Frobenius norm of the velocity gradient.
    pub fn gradient_norm(&self, p: Point, t: f64) -> f64 {
        self.jacobian(p, t).iter().flatten().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Samples `|V|` (or `|∇V|`) on a probe grid for a list of times.
    pub fn sampled_magnitudes(&self, probe: &Grid, times: &[f64], gradient: bool) -> Vec<Vec<f64>> {
        times
            .iter()
            .map(|&t| {
                probe
                    .centers()
                    .map(|p| {
                        if gradient {
                            self.gradient_norm(p, t)
                        } else {
                            let v = self.velocity(p, t);
                            v[..self.dim].iter().map(|c| c * c).sum::<f64>().sqrt()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Probe grid with 32 cells per axis over the drift's domain.
    pub fn probe_grid(&self) -> Grid {
        match self.dim {
            1 => Grid::new_1d(self.lo[0], self.hi[0], 32),
            _ => Grid::new_2d(self.lo, self.hi, [32, 32]),
        }
        .expect("drift domain was validated on construction")
    }

    /// `∫_0^T ||div V(t)||_∞ dt` estimated on the probe lattice.
    pub fn divergence_sup_integral(&self, horizon: f64) -> f64 {
        self.divergence_sup_between(0.0, horizon)
    }

    /// `∫_a^b ||div V(t)||_∞ dt`; the supremum is taken over the 33^d lattice of probe-grid
    /// nodes (walls included) and the time integral uses 65 trapezoid samples.
    pub fn divergence_sup_between(&self, a: f64, b: f64) -> f64 {
        if self.divergence_free || a == b {
            return 0.0;
        }
        let n = 32;
        let ny = if self.dim == 2 { n } else { 0 };
        let nodes: Vec<Point> = (0..=ny)
            .flat_map(|j| {
                (0..=n).map(move |i| {
                    let x = self.lo[0] + (self.hi[0] - self.lo[0]) * i as f64 / n as f64;
                    let y = if self.dim == 2 { self.lo[1] + (self.hi[1] - self.lo[1]) * j as f64 / n as f64 } else { 0.0 };
                    [x, y]
                })
            })
            .collect();
        let times: Vec<f64> = (0..=64).map(|k| a + (b - a) * k as f64 / 64.0).collect();
        let sups: Vec<f64> = times.iter().map(|&t| nodes.iter().map(|p| self.divergence(*p, t).abs()).fold(0.0, f64::max)).collect();
        crate::field::time_integral(&times, sups).abs()
    }

    /// Numerically checks the declared flags on the 32^d probe grid.
    pub fn check_declarations(&self, horizon: f64) -> Result<()> {
        let probe = self.probe_grid();
        let times = [0.0, 0.5 * horizon, horizon];
        let scale = 1.0
            + times
                .iter()
                .map(|&t| lq_norm(&probe, &self.sampled_magnitudes(&probe, &[t], true)[0], Exponent::Infinite))
                .fold(0.0, f64::max);
        if self.divergence_free {
            for &t in &times {
                for p in probe.centers() {
                    let j = self.fd_jacobian(p, t);
                    let div = j[0][0] + if self.dim == 2 { j[1][1] } else { 0.0 };
                    if div.abs() > 1e-5 * scale {
                        return Err(invalid(format!(
                            "drift `{}` declared divergence-free but div V = {div:e} at ({:.3}, {:.3})",
                            self.label(),
                            p[0],
                            p[1]
                        )));
                    }
                }
            }
        }
        if self.zero_normal_flux {
            for &t in &times {
                for (axis, side) in [(0, self.lo[0]), (0, self.hi[0]), (1, self.lo[1]), (1, self.hi[1])] {
                    if axis >= self.dim {
                        continue;
                    }
                    for k in 0..=32 {
                        let s = k as f64 / 32.0;
                        let mut p = [0.0; 2];
                        p[axis] = side;
                        let other = 1 - axis;
                        p[other] = self.lo[other] + s * (self.hi[other] - self.lo[other]);
                        let vn = self.velocity(p, t)[axis];
                        if vn.abs() > 1e-9 * scale {
                            return Err(invalid(format!(
                                "drift `{}` declared zero normal flux but V·n = {vn:e} on the boundary",
                                self.label()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn smooth_cutoff(r: f64, r_in: f64, r_out: f64) -> (f64, f64) {
    if r <= r_in {
        return (1.0, 0.0);
    }
    if r >= r_out {
        return (0.0, 0.0);
    }
    let w = r_out - r_in;
    let s = (r - r_in) / w;
    let step = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let dstep = 30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
    (1.0 - step, -dstep)
}

fn validate_spec(spec: &DriftSpec, dim: usize) -> Result<()> {
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    let ok = match spec {
        DriftSpec::Zero => true,
        DriftSpec::Constant { velocity } => finite(velocity),
        DriftSpec::Shear { rate, center, .. } => {
            if dim != 2 {
                return Err(invalid("shear drift needs a 2D domain"));
            }
            finite(&[*rate, *center])
        }
        DriftSpec::RigidRotation { omega, center, cutoff } => {
            if dim != 2 {
                return Err(invalid("rigid rotation needs a 2D domain"));
            }
            if let Some([r_in, r_out]) = cutoff {
                if !(0.0 <= *r_in && r_in < r_out) {
                    return Err(invalid("rotation cutoff needs 0 <= r_in < r_out"));
                }
            }
            finite(&[*omega, center[0], center[1]])
        }
        DriftSpec::PotentialGradient { potential } => match potential {
            Potential::Quadratic { alpha, center } => finite(&[*alpha, center[0], center[1]]),
            Potential::Cosine { amplitude, .. } => amplitude.is_finite(),
        },
        DriftSpec::StreamFunction { amplitude, .. } => {
            if dim != 2 {
                return Err(invalid("stream-function drift needs a 2D domain"));
            }
            amplitude.is_finite()
        }
        DriftSpec::TimeModulated { base, modulation } => {
            validate_spec(base, dim)?;
            match modulation {
                Modulation::Constant { value } => value.is_finite(),
                Modulation::Sine { mean, amplitude, frequency } => finite(&[*mean, *amplitude, *frequency]),
            }
        }
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("non-finite parameter in {} drift", spec.kind_name())))
    }
}

fn spec_is_zero(spec: &DriftSpec) -> bool {
    match spec {
        DriftSpec::Zero => true,
        DriftSpec::TimeModulated { base, modulation } => modulation.is_zero() || spec_is_zero(base),
        _ => false,
    }
}

impl VelocityField for Drift {
    fn velocity(&self, p: Point, t: f64) -> Point {
        let v = self.eval(&self.spec, p, t).0;
        if self.dim == 1 {
            [v[0], 0.0]
        } else {
            v
        }
    }

    fn divergence(&self, p: Point, t: f64) -> f64 {
        if self.divergence_free {
            return 0.0;
        }
        let j = self.jacobian(p, t);
        j[0][0] + j[1][1]
    }

    fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    fn is_zero_normal_flux(&self) -> bool {
        self.zero_normal_flux
    }

    fn is_identically_zero(&self) -> bool {
        spec_is_zero(&self.spec)
    }

    fn label(&self) -> String {
        self.spec.kind_name().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Grid {
        Grid::unit_square(16).unwrap()
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let g = square();
        let specs = vec![
            DriftSpec::Shear { rate: 1.3, center: 0.5, tapered: true },
            DriftSpec::RigidRotation { omega: 2.0, center: [0.5, 0.5], cutoff: Some([0.2, 0.45]) },
            DriftSpec::PotentialGradient { potential: Potential::Cosine { amplitude: 0.7, modes: [2, 1] } },
            DriftSpec::StreamFunction { amplitude: 0.3, modes: [1, 2] },
            DriftSpec::TimeModulated {
                base: Box::new(DriftSpec::StreamFunction { amplitude: 1.0, modes: [1, 1] }),
                modulation: Modulation::Sine { mean: 1.0, amplitude: 0.5, frequency: 2.0 },
            },
        ];
        for spec in specs {
            let d = Drift::new(spec, &g).unwrap();
            for p in [[0.31, 0.62], [0.5, 0.2], [0.77, 0.41]] {
                let (a, f) = (d.jacobian(p, 0.3), d.fd_jacobian(p, 0.3));
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((a[i][j] - f[i][j]).abs() < 1e-5, "{} {a:?} {f:?}", d.label());
                    }
                }
            }
            d.check_declarations(1.0).unwrap();
        }
    }

    #[test]
    fn flags_by_kind() {
        let g = square();
        let rot = Drift::new(DriftSpec::RigidRotation { omega: 1.0, center: [0.5, 0.5], cutoff: None }, &g).unwrap();
        assert!(rot.is_divergence_free() && !rot.is_zero_normal_flux());
        let shear = Drift::new(DriftSpec::Shear { rate: 1.0, center: 0.5, tapered: true }, &g).unwrap();
        assert!(!shear.is_divergence_free() && shear.is_zero_normal_flux());
        let exp = Drift::new(
            DriftSpec::PotentialGradient { potential: Potential::Quadratic { alpha: 0.5, center: [0.5, 0.5] } },
            &g,
        )
        .unwrap();
        assert!((exp.divergence([0.1, 0.9], 0.0) - 1.0).abs() < 1e-14);
        assert!(Drift::new(DriftSpec::Shear { rate: 1.0, center: 0.0, tapered: false }, &Grid::new_1d(0.0, 1.0, 8).unwrap()).is_err());
    }

    #[test]
    fn zero_detection_through_modulation() {
        let g = square();
        let d = Drift::new(
            DriftSpec::TimeModulated {
                base: Box::new(DriftSpec::StreamFunction { amplitude: 1.0, modes: [1, 1] }),
                modulation: Modulation::Constant { value: 0.0 },
            },
            &g,
        )
        .unwrap();
        assert!(d.is_identically_zero());
    }
}
