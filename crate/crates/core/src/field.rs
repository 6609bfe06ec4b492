//! Density fields, quadrature and the discrete norms used throughout.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, Point};

/// Nonnegative cell-averaged density on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        for (cell, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { cell });
            }
            if v < 0.0 {
                return Err(Error::NegativeDensity { cell, value: v });
            }
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = grid.centers().map(f).collect();
        Self::new(grid, values)
    }

    /// Constant density carrying `mass`.
    pub fn uniform(grid: Grid, mass: f64) -> Result<Self> {
        let v = mass / grid.volume();
        Self::new(grid.clone(), vec![v; grid.len()])
    }

    /// Trusted constructor for values produced by positivity-preserving kernels.
    pub(crate) fn from_trusted(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| *v >= 0.0 && v.is_finite()));
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.grid, &self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rescales to the given total mass.
    pub fn normalized(&self, mass: f64) -> Result<Self> {
        let current = self.mass();
        if current <= 0.0 {
            return Err(invalid("cannot normalize a field with zero mass"));
        }
        Ok(self.scaled(mass / current))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite());
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::from_trusted(self.grid.clone(), values)
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        let diff: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect();
        Ok(integrate(&self.grid, &diff))
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    /// Conservative block aggregation onto a coarser grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let coarse = self.grid.coarsen(factor)?;
        let mut values = vec![0.0; coarse.len()];
        let ratio = self.grid.cell_volume() / coarse.cell_volume();
        for (k, v) in self.values.iter().enumerate() {
            let (i, j) = self.grid.coords(k);
            let jc = if self.grid.dim() == 2 { j / factor } else { 0 };
            values[coarse.index(i / factor, jc)] += v * ratio;
        }
        Ok(Self::from_trusted(coarse, values))
    }

    /// Piecewise-linear interpolation of this field onto another grid over the same domain.
    pub fn resample(&self, target: &Grid) -> Result<Self> {
        if target.dim() != self.grid.dim() {
            return Err(Error::GridMismatch("dimension differs".into()));
        }
        let values = target.centers().map(|p| crate::transport::interpolate(&self.grid, &self.values, p)).collect();
        Ok(Self::from_trusted(target.clone(), values))
    }
}

/// Midpoint-rule integral of cell values.
pub fn integrate(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

/// Integrability exponent in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(Self::Infinite)
        } else if q.is_finite() && q >= 1.0 {
            Ok(Self::Finite(q))
        } else {
            Err(invalid(format!("exponent {q} outside [1, inf]")))
        }
    }

    /// `1/q`, zero for the infinite exponent.
    pub fn reciprocal(self) -> f64 {
        match self {
            Self::Finite(q) => 1.0 / q,
            Self::Infinite => 0.0,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Finite(q) => q,
            Self::Infinite => f64::INFINITY,
        }
    }

    /// Hölder conjugate `q/(q-1)`.
    pub fn conjugate(self) -> Self {
        match self {
            Self::Infinite => Self::Finite(1.0),
            Self::Finite(1.0) => Self::Infinite,
            Self::Finite(q) => Self::Finite(q / (q - 1.0)),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(q) => write!(f, "{q}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(q) => s.serialize_f64(*q),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let q = match Raw::deserialize(d)? {
            Raw::Num(q) => q,
            Raw::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => f64::INFINITY,
                other => other.parse::<f64>().map_err(serde::de::Error::custom)?,
            },
        };
        Exponent::new(q).map_err(serde::de::Error::custom)
    }
}

/// Spatial `L^q` norm of cell values; `Infinite` gives the discrete maximum.
pub fn lq_norm(grid: &Grid, values: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinite => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(q) => {
            let s: f64 = values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * grid.cell_volume();
            s.powf(1.0 / q)
        }
    }
}

/// `∫ |f|^q`, the unrooted power integral.
pub fn power_integral(grid: &Grid, values: &[f64], q: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * grid.cell_volume()
}

/// Face-centered vector data: x-faces are `(nx+1) * ny`, y-faces `nx * (ny+1)`.
/// Boundary faces carry zero (no-flux walls).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let y = if grid.dim() == 2 { vec![0.0; nx * (ny + 1)] } else { Vec::new() };
        Self { grid: grid.clone(), x: vec![0.0; (nx + 1) * ny], y }
    }

    /// Index of the x-face left of cell `(i, j)`; `i` ranges over `0..=nx`.
    pub fn x_index(&self, i: usize, j: usize) -> usize {
        i + (self.grid.nx() + 1) * j
    }

    /// Index of the y-face below cell `(i, j)`; `j` ranges over `0..=ny`.
    pub fn y_index(&self, i: usize, j: usize) -> usize {
        i + self.grid.nx() * j
    }

    pub fn x_face_center(&self, i: usize, j: usize) -> Point {
        let g = &self.grid;
        let y = if g.dim() == 2 { g.center_1(1, j) } else { 0.0 };
        [g.lo()[0] + i as f64 * g.spacing(0), y]
    }

    pub fn y_face_center(&self, i: usize, j: usize) -> Point {
        let g = &self.grid;
        [g.center_1(0, i), g.lo()[1] + j as f64 * g.spacing(1)]
    }

    /// `Σ |face value|^2` weighted by the face control volume.
    pub fn energy(&self) -> f64 {
        let s: f64 = self.x.iter().chain(&self.y).map(|v| v * v).sum();
        s * self.grid.face_volume()
    }
}

/// Face-centered difference quotients of `ρ^a` with zero boundary flux.
pub fn grad_power(field: &DensityField, a: f64) -> FaceField {
    let powered: Vec<f64> = field.values().iter().map(|v| v.powf(a)).collect();
    grad_cells(field.grid(), &powered)
}

/// Face-centered difference quotients of arbitrary cell data.
pub fn grad_cells(grid: &Grid, f: &[f64]) -> FaceField {
    let mut out = FaceField::zeros(grid);
    let (nx, ny) = (grid.nx(), grid.ny());
    let hx = grid.spacing(0);
    for j in 0..ny {
        for i in 1..nx {
            let k = grid.index(i, j);
            let idx = out.x_index(i, j);
            out.x[idx] = (f[k] - f[k - 1]) / hx;
        }
    }
    if grid.dim() == 2 {
        let hy = grid.spacing(1);
        for j in 1..ny {
            for i in 0..nx {
                let k = grid.index(i, j);
                let idx = out.y_index(i, j);
                out.y[idx] = (f[k] - f[k - nx]) / hy;
            }
        }
    }
    out
}

/// `∫ |∇_h f|^2` over interior faces.
pub fn dirichlet_energy(grid: &Grid, f: &[f64]) -> f64 {
    let vol = grid.face_volume();
    grid.interior_faces()
        .map(|(a, b, axis)| {
            let d = (f[b] - f[a]) / grid.spacing(axis);
            d * d
        })
        .sum::<f64>()
        * vol
}

/// `Σ_faces (Δf/h)(Δg/h)` times the face volume: the discrete `∫ ∇f·∇g`.
pub fn dirichlet_pairing(grid: &Grid, f: &[f64], g: &[f64]) -> f64 {
    let vol = grid.face_volume();
    grid.interior_faces()
        .map(|(a, b, axis)| {
            let h2 = grid.spacing(axis).powi(2);
            (f[b] - f[a]) * (g[b] - g[a]) / h2
        })
        .sum::<f64>()
        * vol
}

/// Applies the no-flux discrete Laplacian `div_h grad_h`.
pub fn laplacian(grid: &Grid, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for (a, b, axis) in grid.interior_faces() {
        let flux = (w[b] - w[a]) / grid.spacing(axis).powi(2);
        out[a] += flux;
        out[b] -= flux;
    }
    out
}

/// Composite trapezoid weights for (strictly increasing) sample times.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let half = 0.5 * (times[k] - times[k - 1]);
        w[k - 1] += half;
        w[k] += half;
    }
    w
}

/// Pair of integrability exponents `(space, time)` for `L^{q1,q2}_{x,t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub space: Exponent,
    pub time: Exponent,
}

impl MixedNormSpec {
    pub fn new(space: f64, time: f64) -> Result<Self> {
        Ok(Self { space: Exponent::new(space)?, time: Exponent::new(time)? })
    }
}

/// One time sample of cell data.
pub type Sample<'a> = (f64, &'a [f64]);

fn check_series(grid: &Grid, series: &[Sample<'_>], need_two: bool) -> Result<()> {
    if series.is_empty() || (need_two && series.len() < 2) {
        return Err(invalid("time series needs at least two samples"));
    }
    for w in series.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(invalid("sample times must be strictly increasing"));
        }
    }
    if let Some((t, s)) = series.iter().find(|(_, s)| s.len() != grid.len()) {
        return Err(Error::GridMismatch(format!("sample at t={t} has {} values", s.len())));
    }
    Ok(())
}

/// `(∫_0^T ||f(t)||_{q1}^{q2} dt)^{1/q2}` with trapezoid quadrature in time.
pub fn mixed_norm(grid: &Grid, series: &[Sample<'_>], spec: MixedNormSpec) -> Result<f64> {
    check_series(grid, series, spec.time != Exponent::Infinite)?;
    let spatial: Vec<f64> = series.iter().map(|(_, f)| lq_norm(grid, f, spec.space)).collect();
    Ok(temporal_norm(series, &spatial, spec.time))
}

/// Temporal `L^q` norm of a scalar time series sampled at the series times.
pub fn temporal_norm(series: &[Sample<'_>], values: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinite => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(q) => {
            let times: Vec<f64> = series.iter().map(|s| s.0).collect();
            time_integral(&times, values.iter().map(|v| v.abs().powf(q))).powf(1.0 / q)
        }
    }
}

/// Trapezoid integral of sampled values.
pub fn time_integral(times: &[f64], values: impl IntoIterator<Item = f64>) -> f64 {
    trapezoid_weights(times).iter().zip(values).map(|(w, v)| w * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_density_norms() {
        let g = Grid::new_2d([0.0, 0.0], [2.0, 1.0], [8, 4]).unwrap();
        let f = DensityField::uniform(g.clone(), 1.0).unwrap();
        assert_relative_eq!(f.mass(), 1.0, epsilon = 1e-14);
        let c = 0.5_f64;
        assert_relative_eq!(lq_norm(&g, f.values(), Exponent::new(3.0).unwrap()), c * 2f64.powf(1.0 / 3.0), epsilon = 1e-14);
        assert_eq!(lq_norm(&g, f.values(), Exponent::Infinite), c);
    }

    #[test]
    fn grad_power_of_sine_squared() {
        let n = 256;
        let g = Grid::new_1d(0.0, 1.0, n).unwrap();
        let pi = std::f64::consts::PI;
        let f = DensityField::from_fn(g.clone(), |p| (pi * p[0]).sin().max(0.0)).unwrap();
        let grad = grad_power(&f, 2.0);
        let h = g.spacing(0);
        let err = (1..n)
            .map(|i| {
                let x = i as f64 * h;
                (grad.x[i] - pi * (2.0 * pi * x).sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 10.0 * h * h, "err {err}");
        assert_eq!(grad.x[0], 0.0);
        assert_eq!(grad.x[n], 0.0);
    }

    #[test]
    fn mixed_norm_linear_in_time() {
        let g = Grid::new_1d(0.0, 1.0, 8).unwrap();
        let times: Vec<f64> = (0..64).map(|k| k as f64 / 63.0).collect();
        let data: Vec<Vec<f64>> = times.iter().map(|t| vec![*t; 8]).collect();
        let series: Vec<Sample> = times.iter().zip(&data).map(|(t, d)| (*t, d.as_slice())).collect();
        let v = mixed_norm(&g, &series, MixedNormSpec::new(1.0, 2.0).unwrap()).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() <= 2e-3 * (1.0 / 3f64.sqrt()));
    }

    #[test]
    fn exponent_round_trip() {
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(e, Exponent::Infinite);
        assert_eq!(serde_json::to_string(&Exponent::Finite(2.5)).unwrap(), "2.5");
        assert!(Exponent::new(0.5).is_err());
        assert_eq!(Exponent::Finite(2.0).conjugate(), Exponent::Finite(2.0));
    }

    #[test]
    fn laplacian_is_negative_semidefinite_and_conservative() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [6, 5]).unwrap();
        let w: Vec<f64> = (0..g.len()).map(|k| ((k * 37) % 11) as f64).collect();
        let lw = laplacian(&g, &w);
        assert!(lw.iter().sum::<f64>().abs() < 1e-9);
        let pairing: f64 = w.iter().zip(&lw).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
        assert_relative_eq!(pairing, -dirichlet_energy(&g, &w), max_relative = 1e-12);
    }
}
