//! Transportation simplex on the complete bipartite graph.
//!
//! The basis is a spanning tree of `m + n - 1` cells. Each iteration recomputes the
//! dual potentials and the rooted tree by a traversal, prices cells in blocks, and
//! pivots around the cycle closed by the entering cell. After a long run of degenerate
//! pivots the pricing switches to Bland's rule, which cannot cycle.

use crate::error::{invalid, Error, Result};

struct Basis {
    rows: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Basic cell ids incident to each node; rows are `0..rows`, columns `rows..rows+cols`.
    adjacency: Vec<Vec<usize>>,
}

impl Basis {
    fn attach(&mut self, id: usize) {
        let (i, j) = self.cells[id];
        self.adjacency[i].push(id);
        self.adjacency[self.rows + j].push(id);
    }

    fn detach(&mut self, id: usize) {
        let (i, j) = self.cells[id];
        let rows = self.rows;
        for node in [i, rows + j] {
            let list = &mut self.adjacency[node];
            let pos = list.iter().position(|&c| c == id).expect("basic cell is attached");
            list.swap_remove(pos);
        }
    }

    fn other(&self, id: usize, node: usize) -> usize {
        let (i, j) = self.cells[id];
        if node == i {
            self.rows + j
        } else {
            i
        }
    }
}

/// Nonzero entries `(row, column, amount)` of a transport plan.
pub type Plan = Vec<(usize, usize, f64)>;

/// Solves `min Σ c_ij x_ij` subject to row sums `a`, column sums `b`, `x >= 0`.
/// `cost` is row-major `a.len() x b.len()`. Returns the optimal value and the nonzero flows.
pub fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Result<(f64, Plan)> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(invalid("transport problem dimensions disagree"));
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if (sa - sb).abs() > 1e-9 * sa.max(sb) {
        return Err(Error::MassMismatch(sa, sb));
    }
    let b: Vec<f64> = b.iter().map(|x| x * sa / sb).collect();

    let mut basis = Basis { rows: m, cells: Vec::with_capacity(m + n - 1), flow: Vec::with_capacity(m + n - 1), adjacency: vec![Vec::new(); m + n] };
    // North-west corner start; degenerate zero cells keep the tree spanning.
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    loop {
        let x;
        if ra <= rb {
            x = ra;
            rb -= ra;
            ra = 0.0;
        } else {
            x = rb;
            ra -= rb;
            rb = 0.0;
        }
        basis.cells.push((i, j));
        basis.flow.push(x);
        let id = basis.cells.len() - 1;
        basis.attach(id);
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (ra == 0.0 && i < m - 1) || j == n - 1 {
            i += 1;
            ra = a[i];
        } else {
            j += 1;
            rb = b[j];
        }
    }
    debug_assert_eq!(basis.cells.len(), m + n - 1);

    let scale = cost.iter().fold(0.0_f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let nodes = m + n;
    let mut pot = vec![0.0; nodes];
    let mut parent_cell = vec![usize::MAX; nodes];
    let mut depth = vec![0usize; nodes];
    let mut order = Vec::with_capacity(nodes);
    let total = m * n;
    let block = ((total as f64).sqrt() as usize).max(32).min(total);
    let mut cursor = 0usize;
    let mut degenerate_streak = 0usize;
    let bland_after = 4 * nodes;
    let max_iterations = 200 * nodes + 10_000;

    for _ in 0..max_iterations {
        // Potentials with u_0 = 0 and rooted-tree bookkeeping.
        order.clear();
        order.push(0);
        parent_cell[0] = usize::MAX;
        depth[0] = 0;
        pot[0] = 0.0;
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            head += 1;
            for &id in &basis.adjacency[node] {
                if id == parent_cell[node] {
                    continue;
                }
                let next = basis.other(id, node);
                let (ci, cj) = basis.cells[id];
                parent_cell[next] = id;
                depth[next] = depth[node] + 1;
                pot[next] = cost[ci * n + cj] - pot[node];
                order.push(next);
            }
        }
        if order.len() != nodes {
            return Err(Error::NotConverged("simplex basis lost connectivity".into()));
        }
        let reduced = |k: usize| {
            let (ci, cj) = (k / n, k % n);
            cost[k] - pot[ci] - pot[m + cj]
        };

        // Pricing.
        let bland = degenerate_streak > bland_after;
        let mut entering = None;
        if bland {
            entering = (0..total).find(|&k| reduced(k) < -tol);
        } else {
            let mut scanned = 0;
            while scanned < total && entering.is_none() {
                let mut best = -tol;
                let end = (scanned + block).min(total);
                for _ in scanned..end {
                    let k = cursor;
                    cursor = if cursor + 1 == total { 0 } else { cursor + 1 };
                    let r = reduced(k);
                    if r < best {
                        best = r;
                        entering = Some(k);
                    }
                }
                scanned = end;
            }
        }
        let Some(k) = entering else {
            let value = basis.cells.iter().zip(&basis.flow).map(|(&(i, j), x)| x * cost[i * n + j]).sum();
            let entries = basis.cells.iter().zip(&basis.flow).filter(|(_, x)| **x > 0.0).map(|(&(i, j), &x)| (i, j, x)).collect();
            return Ok((value, entries));
        };
        let (p, q) = (k / n, k % n);

        // Tree path from row p to column q through their common ancestor.
        let (mut u, mut w) = (p, m + q);
        let mut from_p = Vec::new();
        let mut from_q = Vec::new();
        while depth[u] > depth[w] {
            from_p.push(parent_cell[u]);
            u = basis.other(parent_cell[u], u);
        }
        while depth[w] > depth[u] {
            from_q.push(parent_cell[w]);
            w = basis.other(parent_cell[w], w);
        }
        while u != w {
            from_p.push(parent_cell[u]);
            u = basis.other(parent_cell[u], u);
            from_q.push(parent_cell[w]);
            w = basis.other(parent_cell[w], w);
        }
        from_q.reverse();
        let path: Vec<usize> = from_p.into_iter().chain(from_q).collect();

        // Cells at even positions lose flow.
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for &id in path.iter().step_by(2) {
            let x = basis.flow[id];
            let better = x < theta || (bland && x == theta && cell_key(&basis, id, n) < cell_key(&basis, leaving, n));
            if better {
                theta = x;
                leaving = id;
            }
        }
        degenerate_streak = if theta <= 0.0 { degenerate_streak + 1 } else { 0 };
        for (pos, &id) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[id] = (basis.flow[id] - theta).max(0.0);
            } else {
                basis.flow[id] += theta;
            }
        }
        basis.detach(leaving);
        basis.cells[leaving] = (p, q);
        basis.flow[leaving] = theta;
        basis.attach(leaving);
    }
    Err(Error::NotConverged(format!("transportation simplex exceeded {max_iterations} pivots")))
}

fn cell_key(basis: &Basis, id: usize, n: usize) -> usize {
    if id == usize::MAX {
        return usize::MAX;
    }
    let (i, j) = basis.cells[id];
    i * n + j
}
