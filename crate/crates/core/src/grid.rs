//! Uniform cell-centered grids on intervals and rectangles.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point in the plane; one-dimensional problems use only the first entry.
pub type Point = [f64; 2];

/// Boundary treatment. Densities always use no-flux walls; periodic is
/// reserved for the velocity in the coupled fluid model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    NoFlux,
    Periodic,
}

/// Cell-centered uniform grid on `[lo, hi]` (1D) or `[lo0, hi0] x [lo1, hi1]` (2D).
///
/// Cells are stored row-major with the x index running fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: Point,
    hi: Point,
    cells: [usize; 2],
    #[serde(default)]
    boundary: Boundary,
}

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

impl Grid {
    pub fn new_1d(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::build(1, [a, 0.0], [b, 1.0], [n, 1], Boundary::NoFlux)
    }

    pub fn new_2d(lo: Point, hi: Point, cells: [usize; 2]) -> Result<Self> {
        Self::build(2, lo, hi, cells, Boundary::NoFlux)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new_2d([0.0, 0.0], [1.0, 1.0], [n, n])
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    fn build(dim: usize, lo: Point, hi: Point, cells: [usize; 2], boundary: Boundary) -> Result<Self> {
        for axis in 0..dim {
            if !(lo[axis].is_finite() && hi[axis].is_finite()) {
                return Err(invalid(format!("non-finite extent on axis {axis}")));
            }
            if hi[axis] <= lo[axis] {
                return Err(invalid(format!(
                    "empty extent on axis {axis}: [{}, {}]",
                    lo[axis], hi[axis]
                )));
            }
            if cells[axis] < MIN_CELLS {
                return Err(invalid(format!(
                    "axis {axis} has {} cells, need at least {MIN_CELLS}",
                    cells[axis]
                )));
            }
        }
        Ok(Self { dim, lo, hi, cells, boundary })
    }

    /// Re-checks invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(invalid(format!("dimension {} not supported", self.dim)));
        }
        Self::build(self.dim, self.lo, self.hi, self.cells, self.boundary).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lo(&self) -> Point {
        self.lo
    }
    pub fn hi(&self) -> Point {
        self.hi
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn nx(&self) -> usize {
        self.cells[0]
    }
    pub fn ny(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.cells[1]
        }
    }
    pub fn cells(&self) -> [usize; 2] {
        [self.nx(), self.ny()]
    }
    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length(axis) / self.cells[axis] as f64
    }

    /// Smallest spacing over active axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Largest spacing over active axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    /// Lebesgue measure of a cell (length in 1D, area in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Measure of the whole domain.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.length(a)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim).map(|a| self.length(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx() * j
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx(), k / self.nx())
    }

    pub fn center_1(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn center(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        if self.dim == 1 {
            [self.center_1(0, i), 0.0]
        } else {
            [self.center_1(0, i), self.center_1(1, j)]
        }
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |k| self.center(k))
    }

    /// Euclidean distance from `p` to the closed domain (zero inside).
    pub fn distance_outside(&self, p: Point) -> f64 {
        let mut acc = 0.0;
        for (axis, &x) in p.iter().enumerate().take(self.dim) {
            let excess = (self.lo[axis] - x).max(x - self.hi[axis]).max(0.0);
            acc += excess * excess;
        }
        acc.sqrt()
    }

    /// Projects `p` onto the closed domain.
    pub fn clamp(&self, p: Point) -> Point {
        let mut q = p;
        for (axis, x) in q.iter_mut().enumerate().take(self.dim) {
            *x = x.clamp(self.lo[axis], self.hi[axis]);
        }
        q
    }

    /// Grid with every axis coarsened by `factor` (which must divide the cell counts).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(invalid("coarsening factor must be positive"));
        }
        let mut cells = self.cells;
        for (axis, c) in cells.iter_mut().enumerate().take(self.dim) {
            if *c % factor != 0 {
                return Err(invalid(format!(
                    "factor {factor} does not divide {} cells on axis {axis}",
                    *c
                )));
            }
            *c /= factor;
        }
        Self::build(self.dim, self.lo, self.hi, cells, self.boundary)
    }

    /// Same extents, each active axis refined by `factor`.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        let mut cells = self.cells;
        for c in cells.iter_mut().take(self.dim) {
            *c *= factor;
        }
        Self::build(self.dim, self.lo, self.hi, cells, self.boundary)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.cells() == other.cells()
            && (0..self.dim).all(|a| {
                (self.lo[a] - other.lo[a]).abs() <= 1e-12 * self.length(a)
                    && (self.hi[a] - other.hi[a]).abs() <= 1e-12 * self.length(a)
            })
    }

    /// Visits every interior face as `(left_cell, right_cell, axis)`.
    pub fn interior_faces(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (nx, ny) = (self.nx(), self.ny());
        let xs = (0..ny).flat_map(move |j| (0..nx - 1).map(move |i| (i + nx * j, i + 1 + nx * j, 0)));
        let ys = (0..if self.dim == 2 { ny - 1 } else { 0 })
            .flat_map(move |j| (0..nx).map(move |i| (i + nx * j, i + nx * (j + 1), 1)));
        xs.chain(ys)
    }

    /// Control volume attached to a face on `axis` (the cell volume).
    pub fn face_volume(&self) -> f64 {
        self.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_or_empty_grids() {
        assert!(Grid::new_1d(0.0, 1.0, 3).is_err());
        assert!(Grid::new_1d(1.0, 1.0, 8).is_err());
        assert!(Grid::new_2d([0.0, 0.0], [1.0, -1.0], [8, 8]).is_err());
    }

    #[test]
    fn face_count_matches_topology() {
        let g = Grid::new_2d([0.0, 0.0], [2.0, 1.0], [5, 4]).unwrap();
        assert_eq!(g.interior_faces().count(), 4 * 4 + 5 * 3);
        let g1 = Grid::new_1d(0.0, 1.0, 7).unwrap();
        assert_eq!(g1.interior_faces().count(), 6);
    }

    #[test]
    fn volumes_and_centers() {
        let g = Grid::new_2d([0.0, -1.0], [2.0, 1.0], [4, 8]).unwrap();
        assert!((g.cell_volume() * g.len() as f64 - g.volume()).abs() < 1e-14);
        assert_eq!(g.center(g.index(0, 0)), [0.25, -0.875]);
        assert_eq!(g.distance_outside([3.0, 0.0]), 1.0);
        assert_eq!(g.distance_outside([1.0, 0.5]), 0.0);
    }
}
