//! Two-dimensional viscous Boussinesq system with fast diffusion of the temperature,
//! `θ_t - Δθ^m + u·∇θ = 0`, `u_t - Δu + (u·∇)u + ∇π = -θ e_2`, `div u = 0`.
//!
//! The velocity lives on a staggered (MAC) grid and is advanced by a first-order projection
//! method: explicit advection, implicit viscosity, buoyancy, then a pressure projection. The
//! temperature is advanced by one diffusion step followed by a push-forward along the
//! cell-centered velocity.

use serde::{Deserialize, Serialize};

use crate::diffusion::{step_diffusion, DiffusionParams};
use crate::drift::VelocityField;
use crate::error::{invalid, Error, Result};
use crate::field::{dirichlet_energy, integrate, DensityField};
use crate::grid::{Boundary, Grid, Point};
use crate::linalg::conjugate_gradient;
use crate::transport::{pushforward, PushforwardOptions};

/// Relative tolerance of the viscosity and pressure solves.
const SOLVE_TOLERANCE: f64 = 1e-13;
/// Allowed discrete divergence after projection, relative to `||u||_∞ / h`.
pub const DIVERGENCE_GATE: f64 = 1e-8;
/// Largest admissible `dt ||u||_∞ / h`.
pub const MAX_CFL: f64 = 0.5;

/// Shape of one staggered component: `faces` positions along its own axis (including the two
/// walls) times `cells` positions across.
#[derive(Debug, Clone, Copy)]
struct Layout {
    faces: usize,
    cells: usize,
    h_along: f64,
    h_across: f64,
    periodic: bool,
}

impl Layout {
    fn index(&self, a: usize, b: usize) -> usize {
        b * self.faces + a
    }

    fn len(&self) -> usize {
        self.faces * self.cells
    }

    /// Faces carrying unknowns; the rest are walls (zero) or the periodic duplicate.
    fn is_unknown(&self, a: usize) -> bool {
        if self.periodic {
            a + 1 < self.faces
        } else {
            a > 0 && a + 1 < self.faces
        }
    }

    /// Value at `(a, b)` with periodic wrap or the no-slip ghost `-c` across walls.
    fn at(&self, data: &[f64], a: isize, b: isize) -> f64 {
        if self.periodic {
            let na = (self.faces - 1) as isize;
            let nb = self.cells as isize;
            return data[self.index(a.rem_euclid(na) as usize, b.rem_euclid(nb) as usize)];
        }
        let a = a.clamp(0, self.faces as isize - 1) as usize;
        if b < 0 {
            -data[self.index(a, 0)]
        } else if b >= self.cells as isize {
            -data[self.index(a, self.cells - 1)]
        } else {
            data[self.index(a, b as usize)]
        }
    }

    fn laplacian(&self, data: &[f64], out: &mut [f64]) {
        let (ha, hb) = (self.h_along * self.h_along, self.h_across * self.h_across);
        for b in 0..self.cells {
            for a in 0..self.faces {
                let k = self.index(a, b);
                if !self.is_unknown(a) {
                    out[k] = 0.0;
                    continue;
                }
                let (ai, bi) = (a as isize, b as isize);
                let c = data[k];
                out[k] = (self.at(data, ai + 1, bi) - 2.0 * c + self.at(data, ai - 1, bi)) / ha
                    + (self.at(data, ai, bi + 1) - 2.0 * c + self.at(data, ai, bi - 1)) / hb;
            }
        }
    }

    /// Copies the periodic duplicate column from its partner.
    fn sync(&self, data: &mut [f64]) {
        if self.periodic {
            for b in 0..self.cells {
                data[self.index(self.faces - 1, b)] = data[self.index(0, b)];
            }
        }
    }
}

/// Staggered velocity: `u` on x-faces (`(nx+1) × ny`, x fastest) and `v` on y-faces stored
/// along-axis fastest (`(ny+1) × nx`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacVelocity {
    grid: Grid,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl MacVelocity {
    pub fn zeros(grid: &Grid) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(invalid("the fluid model is two-dimensional"));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        Ok(Self { grid: grid.clone(), u: vec![0.0; (nx + 1) * ny], v: vec![0.0; (ny + 1) * nx] })
    }

    /// Samples `f` at face centers; wall faces are zero unless the grid is periodic.
    pub fn from_fn(grid: &Grid, f: impl Fn(Point) -> Point) -> Result<Self> {
        let mut out = Self::zeros(grid)?;
        let (lu, lv) = out.layouts();
        let (lo, hx, hy) = (grid.lo(), grid.spacing(0), grid.spacing(1));
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                out.u[lu.index(i, j)] = f([lo[0] + i as f64 * hx, lo[1] + (j as f64 + 0.5) * hy])[0];
            }
        }
        for i in 0..grid.nx() {
            for j in 0..=grid.ny() {
                out.v[lv.index(j, i)] = f([lo[0] + (i as f64 + 0.5) * hx, lo[1] + j as f64 * hy])[1];
            }
        }
        out.enforce_boundary();
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn periodic(&self) -> bool {
        self.grid.boundary() == Boundary::Periodic
    }

    /// `u` at x-face `i` (`0..=nx`) in row `j`.
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[j * (self.grid.nx() + 1) + i]
    }

    /// `v` at y-face `j` (`0..=ny`) in column `i`.
    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.v[i * (self.grid.ny() + 1) + j]
    }

    fn layouts(&self) -> (Layout, Layout) {
        let g = &self.grid;
        let periodic = self.periodic();
        let (hx, hy) = (g.spacing(0), g.spacing(1));
        (
            Layout { faces: g.nx() + 1, cells: g.ny(), h_along: hx, h_across: hy, periodic },
            Layout { faces: g.ny() + 1, cells: g.nx(), h_along: hy, h_across: hx, periodic },
        )
    }

    fn enforce_boundary(&mut self) {
        let (lu, lv) = self.layouts();
        for (l, data) in [(lu, &mut self.u), (lv, &mut self.v)] {
            if l.periodic {
                l.sync(data);
            } else {
                for b in 0..l.cells {
                    data[l.index(0, b)] = 0.0;
                    data[l.index(l.faces - 1, b)] = 0.0;
                }
            }
        }
    }

    /// Faces counted once (walls and the periodic duplicate excluded).
    fn unknown_values(&self) -> impl Iterator<Item = f64> + '_ {
        fn pick(l: Layout, data: &[f64]) -> impl Iterator<Item = f64> + '_ {
            (0..l.len()).filter(move |k| l.is_unknown(k % l.faces)).map(move |k| data[k])
        }
        let (lu, lv) = self.layouts();
        pick(lu, &self.u).chain(pick(lv, &self.v))
    }

    pub fn max_abs(&self) -> f64 {
        self.unknown_values().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// `∫|u|²`.
    pub fn kinetic(&self) -> f64 {
        self.unknown_values().map(|x| x * x).sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫|∇u|² = -⟨u, Δ_h u⟩`.
    pub fn gradient_energy(&self) -> f64 {
        let (lu, lv) = self.layouts();
        let mut total = 0.0;
        for (l, data) in [(lu, &self.u), (lv, &self.v)] {
            let mut lap = vec![0.0; l.len()];
            l.laplacian(data, &mut lap);
            total -= data.iter().zip(&lap).map(|(a, b)| a * b).sum::<f64>();
        }
        total * self.grid.cell_volume()
    }

    /// `∫|u - other|²` over the unknown faces.
    pub fn distance_squared(&self, other: &MacVelocity) -> f64 {
        let mut diff = self.clone();
        diff.u.iter_mut().zip(&other.u).for_each(|(a, b)| *a -= b);
        diff.v.iter_mut().zip(&other.v).for_each(|(a, b)| *a -= b);
        diff.kinetic()
    }

    /// Cell-wise discrete divergence.
    pub fn divergence(&self) -> Vec<f64> {
        let g = &self.grid;
        let (hx, hy) = (g.spacing(0), g.spacing(1));
        (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                (self.u(i + 1, j) - self.u(i, j)) / hx + (self.v(i, j + 1) - self.v(i, j)) / hy
            })
            .collect()
    }

    /// Averages of the two faces bounding each cell.
    pub fn cell_centered(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                (0.5 * (self.u(i, j) + self.u(i + 1, j)), 0.5 * (self.v(i, j) + self.v(i, j + 1)))
            })
            .unzip()
    }

    /// `∫θ v` with `θ` averaged onto y-faces.
    pub fn buoyancy_work(&self, theta: &DensityField) -> f64 {
        let g = &self.grid;
        let t = theta.values();
        let ny = g.ny();
        let mut total = 0.0;
        for i in 0..g.nx() {
            for j in 0..=ny {
                let (lo, hi) = (j.checked_sub(1), (j < ny).then_some(j));
                let avg = match (lo, hi) {
                    (Some(a), Some(b)) => 0.5 * (t[g.index(i, a)] + t[g.index(i, b)]),
                    _ if self.periodic() && j == 0 => 0.5 * (t[g.index(i, ny - 1)] + t[g.index(i, 0)]),
                    _ => continue,
                };
                total += avg * self.v(i, j);
            }
        }
        total * g.cell_volume()
    }
}

/// Bilinear interpolant of the cell-centered velocity, vanishing on no-slip walls.
#[derive(Debug, Clone)]
pub struct CellVelocity {
    grid: Grid,
    u: Vec<f64>,
    v: Vec<f64>,
    divergence_free: bool,
    zero: bool,
}

/// Position along one axis among the nodes `wall, c_0, ..., c_{n-1}, wall`; returns the two
/// bracketing cell indices (`None` for a wall), the interpolation weight and the node gap.
fn bracket(s: f64, n: usize) -> (Option<usize>, Option<usize>, f64, f64) {
    let s = s.clamp(-0.5, n as f64 - 0.5);
    if s < 0.0 {
        (None, Some(0), (s + 0.5) / 0.5, 0.5)
    } else if s >= (n - 1) as f64 {
        (Some(n - 1), None, (s - (n - 1) as f64) / 0.5, 0.5)
    } else {
        let i = s.floor() as usize;
        (Some(i), Some(i + 1), s - i as f64, 1.0)
    }
}

impl CellVelocity {
    pub fn from_mac(vel: &MacVelocity) -> Self {
        let (u, v) = vel.cell_centered();
        let grid = vel.grid.clone().with_boundary(Boundary::NoFlux);
        let zero = u.iter().chain(&v).all(|x| *x == 0.0);
        let mut out = Self { grid, u, v, divergence_free: false, zero };
        let scale = out.u.iter().chain(&out.v).fold(0.0f64, |a, x| a.max(x.abs())) / out.grid.min_spacing();
        out.divergence_free = out.max_center_divergence() <= DIVERGENCE_GATE * scale;
        out
    }

    /// Largest centered-difference divergence over cell centers.
    pub fn max_center_divergence(&self) -> f64 {
        self.grid.centers().map(|p| self.divergence(p, 0.0).abs()).fold(0.0, f64::max)
    }

    fn sample(&self, values: &[f64], p: Point) -> (f64, [f64; 2]) {
        let g = &self.grid;
        let (hx, hy) = (g.spacing(0), g.spacing(1));
        let sx = (p[0] - g.lo()[0]) / hx - 0.5;
        let sy = (p[1] - g.lo()[1]) / hy - 0.5;
        let (x0, x1, tx, dx) = bracket(sx, g.nx());
        let (y0, y1, ty, dy) = bracket(sy, g.ny());
        let at = |i: Option<usize>, j: Option<usize>| match (i, j) {
            (Some(i), Some(j)) => values[g.index(i, j)],
            _ => 0.0,
        };
        let (f00, f10, f01, f11) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        let value = (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11);
        let ddx = ((1.0 - ty) * (f10 - f00) + ty * (f11 - f01)) / (dx * hx);
        let ddy = ((1.0 - tx) * (f01 - f00) + tx * (f11 - f10)) / (dy * hy);
        (value, [ddx, ddy])
    }
}

impl VelocityField for CellVelocity {
    fn velocity(&self, p: Point, _t: f64) -> Point {
        [self.sample(&self.u, p).0, self.sample(&self.v, p).0]
    }
    fn divergence(&self, p: Point, _t: f64) -> f64 {
        self.sample(&self.u, p).1[0] + self.sample(&self.v, p).1[1]
    }
    fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }
    fn is_zero_normal_flux(&self) -> bool {
        true
    }
    fn is_identically_zero(&self) -> bool {
        self.zero
    }
    fn label(&self) -> String {
        "fluid-velocity".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoussinesqState {
    pub theta: DensityField,
    pub velocity: MacVelocity,
    /// Cell-centered pressure with zero mean.
    pub pressure: Vec<f64>,
    pub time: f64,
}

impl BoussinesqState {
    pub fn new(theta: DensityField, velocity: MacVelocity) -> Result<Self> {
        let s = Self { pressure: vec![0.0; theta.grid().len()], theta, velocity, time: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.velocity.grid();
        if !self.theta.grid().same_shape(g) || g.dim() != 2 {
            return Err(Error::GridMismatch("temperature and velocity grids differ".into()));
        }
        if self.velocity.periodic() {
            let t = self.theta.values();
            if t.iter().any(|x| *x != t[0]) {
                return Err(invalid("periodic mode requires a uniform temperature"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoussinesqParams {
    pub m: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub rk_steps: usize,
}

impl BoussinesqParams {
    pub fn new(m: f64, epsilon: f64, dt: f64) -> Result<Self> {
        let p = Self { m, epsilon, dt, rk_steps: 8 };
        DiffusionParams::new(m, epsilon, dt)?;
        Ok(p)
    }
}

fn mean_free(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Explicit centered advection `(u·∇)c` for one component; `other` is the cross component.
fn advection(l: Layout, data: &[f64], lo: Layout, other: &[f64], out: &mut [f64]) {
    for b in 0..l.cells {
        for a in 0..l.faces {
            let k = l.index(a, b);
            if !l.is_unknown(a) {
                out[k] = 0.0;
                continue;
            }
            let (ai, bi) = (a as isize, b as isize);
            let cross = 0.25 * (lo.at(other, bi, ai - 1) + lo.at(other, bi, ai) + lo.at(other, bi + 1, ai - 1) + lo.at(other, bi + 1, ai));
            let d_along = (l.at(data, ai + 1, bi) - l.at(data, ai - 1, bi)) / (2.0 * l.h_along);
            let d_across = (l.at(data, ai, bi + 1) - l.at(data, ai, bi - 1)) / (2.0 * l.h_across);
            out[k] = data[k] * d_along + cross * d_across;
        }
    }
}

fn implicit_viscosity(l: Layout, rhs: &[f64], guess: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut diag = vec![1.0; l.len()];
    for (k, d) in diag.iter_mut().enumerate() {
        if l.is_unknown(k % l.faces) {
            *d += dt * (2.0 / l.h_along.powi(2) + 2.0 / l.h_across.powi(2));
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        l.laplacian(x, out);
        for k in 0..l.len() {
            out[k] = if l.is_unknown(k % l.faces) { x[k] - dt * out[k] } else { x[k] };
        }
    };
    let (mut x, _) = conjugate_gradient(apply, &diag, rhs, guess, SOLVE_TOLERANCE, 1e-300, 20 * l.len(), false)?;
    l.sync(&mut x);
    Ok(x)
}

/// Removes the gradient part of `vel`; returns `φ` with `vel <- vel - ∇φ`.
fn project(vel: &mut MacVelocity, guess: &[f64]) -> Result<Vec<f64>> {
    let g = vel.grid.clone();
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    let (lu, lv) = vel.layouts();
    let (nx, ny) = (g.nx(), g.ny());
    let periodic = vel.periodic();
    let grad = |p: &[f64], gu: &mut [f64], gv: &mut [f64]| {
        for j in 0..ny {
            for i in 0..=nx {
                let k = lu.index(i, j);
                gu[k] = if !lu.is_unknown(i) {
                    0.0
                } else {
                    let left = if i == 0 { nx - 1 } else { i - 1 };
                    (p[g.index(i % nx, j)] - p[g.index(left, j)]) / hx
                };
            }
        }
        for i in 0..nx {
            for j in 0..=ny {
                let k = lv.index(j, i);
                gv[k] = if !lv.is_unknown(j) {
                    0.0
                } else {
                    let below = if j == 0 { ny - 1 } else { j - 1 };
                    (p[g.index(i, j % ny)] - p[g.index(i, below)]) / hy
                };
            }
        }
        if periodic {
            lu.sync(gu);
            lv.sync(gv);
        }
    };
    let div = |gu: &[f64], gv: &[f64], out: &mut [f64]| {
        for (k, o) in out.iter_mut().enumerate() {
            let (i, j) = g.coords(k);
            *o = (gu[lu.index(i + 1, j)] - gu[lu.index(i, j)]) / hx + (gv[lv.index(j + 1, i)] - gv[lv.index(j, i)]) / hy;
        }
    };
    let mut gu = vec![0.0; lu.len()];
    let mut gv = vec![0.0; lv.len()];
    let apply = |p: &[f64], out: &mut [f64]| {
        let mut gu = vec![0.0; lu.len()];
        let mut gv = vec![0.0; lv.len()];
        grad(p, &mut gu, &mut gv);
        div(&gu, &gv, out);
        out.iter_mut().for_each(|x| *x = -*x);
    };
    let mut rhs = vel.divergence();
    rhs.iter_mut().for_each(|x| *x = -*x);
    let diag = vec![2.0 / (hx * hx) + 2.0 / (hy * hy); g.len()];
    let scale = vel.max_abs().max(f64::MIN_POSITIVE);
    let (mut phi, _) = conjugate_gradient(apply, &diag, &rhs, guess, SOLVE_TOLERANCE, 0.0, 20 * g.len(), true)
        .map_err(|e| Error::NotConverged(format!("pressure solve: {e}")))?;
    mean_free(&mut phi);
    grad(&phi, &mut gu, &mut gv);
    vel.u.iter_mut().zip(&gu).for_each(|(a, b)| *a -= b);
    vel.v.iter_mut().zip(&gv).for_each(|(a, b)| *a -= b);
    vel.enforce_boundary();
    let residual = vel.divergence().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let allowed = DIVERGENCE_GATE * scale.max(vel.max_abs()) / g.min_spacing();
    if residual > allowed {
        return Err(Error::NotConverged(format!("divergence {residual:e} after projection exceeds {allowed:e}")));
    }
    Ok(phi)
}

/// One coupled step: temperature by diffusion and push-forward along the current velocity,
/// then velocity by advection, implicit viscosity, buoyancy `-θ e_2` and projection. Buoyancy
/// enters after the viscous solve so that a hydrostatic force is removed exactly by the projection.
pub fn step_boussinesq(state: &BoussinesqState, p: &BoussinesqParams) -> Result<BoussinesqState> {
    state.validate()?;
    let g = state.velocity.grid().clone();
    let dt = p.dt;
    let umax = state.velocity.max_abs();
    let cfl = dt * umax / g.min_spacing();
    if cfl > MAX_CFL {
        return Err(Error::Cfl(format!("dt |u|/h = {cfl:.3} exceeds {MAX_CFL}")));
    }
    let t0 = state.time;

    let theta = if state.velocity.periodic() {
        state.theta.clone()
    } else {
        let mass0 = state.theta.mass();
        let params = DiffusionParams::new(p.m, p.epsilon, dt)?;
        let diffused = step_diffusion(&state.theta, &params)?.field;
        let drift = CellVelocity::from_mac(&state.velocity);
        let pushed = pushforward(&diffused, &drift, t0, t0 + dt, PushforwardOptions { rk_steps: p.rk_steps, renormalize: false })?.field;
        let mass = pushed.mass();
        if mass > 0.0 && ((mass - mass0) / mass0).abs() > 1e-12 {
            pushed.scaled(mass0 / mass)
        } else {
            pushed
        }
    };

    let vel = &state.velocity;
    let (lu, lv) = vel.layouts();
    let mut adv_u = vec![0.0; lu.len()];
    let mut adv_v = vec![0.0; lv.len()];
    advection(lu, &vel.u, lv, &vel.v, &mut adv_u);
    advection(lv, &vel.v, lu, &vel.u, &mut adv_v);
    let rhs_u: Vec<f64> = vel.u.iter().zip(&adv_u).map(|(u, a)| u - dt * a).collect();
    let rhs_v: Vec<f64> = vel.v.iter().zip(&adv_v).map(|(v, a)| v - dt * a).collect();
    let mut next = MacVelocity {
        grid: g.clone(),
        u: implicit_viscosity(lu, &rhs_u, &vel.u, dt)?,
        v: implicit_viscosity(lv, &rhs_v, &vel.v, dt)?,
    };
    let t = theta.values();
    let reference = if vel.periodic() { integrate(&g, t) / g.volume() } else { 0.0 };
    let ny = g.ny();
    for i in 0..g.nx() {
        for j in 0..=ny {
            if !lv.is_unknown(j) {
                continue;
            }
            let below = if j == 0 { ny - 1 } else { j - 1 };
            let avg = 0.5 * (t[g.index(i, below)] + t[g.index(i, j % ny)]);
            next.v[lv.index(j, i)] -= dt * (avg - reference);
        }
    }
    next.enforce_boundary();
    let guess: Vec<f64> = state.pressure.iter().map(|x| x * dt).collect();
    let phi = project(&mut next, &guess)?;
    Ok(BoussinesqState { theta, velocity: next, pressure: phi.iter().map(|x| x / dt).collect(), time: t0 + dt })
}

/// Runs `steps` coupled steps and returns every state, the initial one included.
pub fn run_boussinesq(initial: &BoussinesqState, p: &BoussinesqParams, steps: usize) -> Result<Vec<BoussinesqState>> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial.clone());
    for k in 0..steps {
        let next = step_boussinesq(&states[k], p).map_err(|e| Error::Substep { index: k, source: Box::new(e) })?;
        states.push(next);
    }
    Ok(states)
}

/// Per-state quantities entering the energy bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidEnergyRow {
    pub time: f64,
    pub heat: f64,
    pub entropy: f64,
    /// `∫|u|²`.
    pub kinetic: f64,
    /// `∫|∇θ^{m/2}|²`.
    pub heat_dissipation: f64,
    /// `∫|∇u|²`.
    pub viscous_dissipation: f64,
    /// `∫θ v`.
    pub buoyancy_work: f64,
    /// `sup_{s<=t} ∫(θ + |u|²)(s) + ∫_0^t ∫(|∇θ^{m/2}|² + |∇u|²)`.
    pub lhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidEnergyReport {
    pub m: f64,
    pub rows: Vec<FluidEnergyRow>,
    pub initial_entropy: f64,
    pub initial_heat: f64,
    pub initial_kinetic: f64,
    /// Initial-data scale `C₀` (see [`boussinesq_energy_check`]).
    pub scale: f64,
    pub max_lhs: f64,
    /// `max_lhs <= 2 C₀`.
    pub bounded: bool,
    /// Largest relative change of `∫θ` over one step.
    pub max_heat_drift: f64,
    /// Defect of the backward-Euler kinetic energy balance
    /// `½∫|u(T)|² - ½∫|u₀|² + Σ_k [Δt∫|∇u_k|² + Δt∫θ_k v_k + ½∫|u_k - u_{k-1}|²]`,
    /// relative to `max(½∫|u₀|², Σ Δt∫|∇u_k|²)`.
    pub kinetic_identity_residual: f64,
}

/// Evaluates the energy quantity along a trajectory and compares it with the scale
/// `C₀ = M + (m/4)(H₀ - M log(M/|Ω|)) + 3(½∫|u₀|² + M L_y + T L_x sup θ₀^m)`, which bounds the
/// quantity for the continuous problem.
pub fn boussinesq_energy_check(states: &[BoussinesqState], m: f64) -> Result<FluidEnergyReport> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Refused(format!("the energy bound is claimed for 0 < m < 1, got m = {m}")));
    }
    let first = states.first().ok_or_else(|| invalid("empty trajectory"))?;
    let g = first.velocity.grid().clone();
    let horizon = states.last().expect("nonempty").time - first.time;
    let mut rows: Vec<FluidEnergyRow> = Vec::with_capacity(states.len());
    let mut running_sup = f64::NEG_INFINITY;
    let mut dissipated = 0.0;
    let mut viscous = 0.0;
    let mut work = 0.0;
    let mut max_heat_drift = 0.0f64;
    let mut increments = 0.0;
    for (k, s) in states.iter().enumerate() {
        let theta = &s.theta;
        let powered: Vec<f64> = theta.values().iter().map(|x| x.powf(0.5 * m)).collect();
        let mut row = FluidEnergyRow {
            time: s.time,
            heat: theta.mass(),
            entropy: crate::diagnostics::entropy(theta, 0.0),
            kinetic: s.velocity.kinetic(),
            heat_dissipation: dirichlet_energy(&g, &powered),
            viscous_dissipation: s.velocity.gradient_energy(),
            buoyancy_work: s.velocity.buoyancy_work(theta),
            lhs: 0.0,
        };
        if let Some(prev) = rows.last() {
            let h = row.time - prev.time;
            dissipated += 0.5 * h * (prev.heat_dissipation + prev.viscous_dissipation + row.heat_dissipation + row.viscous_dissipation);
            viscous += h * row.viscous_dissipation;
            work += h * row.buoyancy_work;
            increments += 0.5 * s.velocity.distance_squared(&states[k - 1].velocity);
            max_heat_drift = max_heat_drift.max(((row.heat - prev.heat) / prev.heat).abs());
        }
        running_sup = running_sup.max(row.heat + row.kinetic);
        row.lhs = running_sup + dissipated;
        rows.push(row);
    }
    let r0 = rows[0];
    let volume = g.volume();
    let mass = r0.heat;
    let entropy_floor = if mass > 0.0 { mass * (mass / volume).ln() } else { 0.0 };
    let sup_power = first.theta.max().powf(m);
    let fluid = 0.5 * r0.kinetic + mass * g.length(1) + horizon * g.length(0) * sup_power;
    let scale = mass + 0.25 * m * (r0.entropy - entropy_floor) + 3.0 * fluid;
    let max_lhs = rows.iter().map(|r| r.lhs).fold(f64::NEG_INFINITY, f64::max);
    let last = rows.last().expect("nonempty");
    let imbalance = 0.5 * last.kinetic - 0.5 * r0.kinetic + viscous + work + increments;
    let kinetic_identity_residual = imbalance.abs() / (0.5 * r0.kinetic).max(viscous).max(f64::MIN_POSITIVE);
    Ok(FluidEnergyReport {
        m,
        initial_entropy: r0.entropy,
        initial_heat: mass,
        initial_kinetic: r0.kinetic,
        scale,
        max_lhs,
        bounded: max_lhs <= 2.0 * scale,
        max_heat_drift,
        kinetic_identity_residual,
        rows,
    })
}

/// Taylor–Green vortex `(sin x cos y, -cos x sin y)` on the periodic box `[0, 2π]²`; its
/// kinetic energy decays like `e^{-4t}` under unit viscosity.
pub fn taylor_green(n: usize) -> Result<BoussinesqState> {
    let tau = 2.0 * std::f64::consts::PI;
    let grid = Grid::new_2d([0.0, 0.0], [tau, tau], [n, n])?.with_boundary(Boundary::Periodic);
    let vel = MacVelocity::from_fn(&grid, |p| [p[0].sin() * p[1].cos(), -p[0].cos() * p[1].sin()])?;
    BoussinesqState::new(DensityField::new(grid.clone(), vec![0.0; grid.len()])?, vel)
}
