//! Small direct and iterative solvers for the discrete operators.

// Index loops mirror the textbook elimination formulas.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i` to `i-1` (ignored for `i = 0`), `upper[i]` couples
/// row `i` to `i+1` (ignored for the last row). Stable for diagonally dominant rows or columns.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::LinearSolve("tridiagonal dimensions disagree".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::LinearSolve("zero pivot in row 0".into()));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Square band matrix with equal lower and upper bandwidth, factored without pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// LU factorization (Doolittle, no pivoting) followed by substitution.
    /// Intended for column diagonally dominant matrices.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * width + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!("zero pivot at {k}")));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let ik = i * width + (k + bw - i);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                let (head, tail) = self.data.split_at_mut(i * width);
                let row_k = &head[k * width..k * width + width];
                let row_i = &mut tail[..width];
                for j in k + 1..=last {
                    row_i[j + bw - i] -= l * row_k[j + bw - k];
                }
            }
        }
        let mut x = rhs.to_vec();
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().take(i).skip(first) {
                s -= self.data[i * width + (j + bw - i)] * xj;
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=last {
                s -= self.data[i * width + (j + bw - i)] * x[j];
            }
            x[i] = s / self.data[i * width + bw];
        }
        Ok(x)
    }
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive (semi)definite operator.
///
/// Stops when `||r|| <= tol * max(||b||, floor)`. When `project_mean` is set, iterates are kept
/// orthogonal to constants (for singular Neumann or periodic Laplacians).
#[allow(clippy::too_many_arguments)]
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: &[f64],
    tol: f64,
    floor: f64,
    max_iter: usize,
    project_mean: bool,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let remove_mean = |v: &mut [f64]| {
        if project_mean {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0.to_vec();
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    let target = tol * dot(&rhs, &rhs).sqrt().max(floor);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    remove_mean(&mut r);
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    remove_mean(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= target {
            return Ok((x, it));
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolve("operator is not positive on the search direction".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        remove_mean(&mut r);
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        remove_mean(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if dot(&r, &r).sqrt() <= target {
        Ok((x, max_iter))
    } else {
        Err(Error::NotConverged(format!("CG stalled after {max_iter} iterations")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let l = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= l * a[k][j];
                }
                b[i] -= l * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn band_solver_matches_dense_elimination() {
        let (n, bw) = (30, 5);
        let mut band = BandMatrix::zeros(n, bw);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                if i.abs_diff(j) == 1 || i.abs_diff(j) == bw || i == j {
                    let v = if i == j { 10.0 + i as f64 * 0.1 } else { -1.0 - 0.01 * ((i * 7 + j) % 5) as f64 };
                    band.add(i, j, v);
                    dense[i][j] = v;
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = band.solve(&b).unwrap();
        let y = dense_solve(dense, b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn thomas_solves_laplacian_like_system() {
        let n = 50;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.5; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 2.5 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 40;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 3.0 * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                y[i] = s;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (x, _) = conjugate_gradient(apply, &vec![3.0; n], &b, &vec![0.0; n], 1e-13, 0.0, 500, false).unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for (a, b) in ax.iter().zip(&b) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
