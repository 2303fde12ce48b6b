//! Transportation simplex for the balanced transport problem
//! `min Σ c_ij π_ij` subject to row sums `a` and column sums `b`.
//!
//! The basis is a spanning tree on the bipartite graph of rows and columns.
//! Potentials are read off the tree, the entering cell is chosen by
//! Dantzig's rule, and after a run of degenerate pivots the solver switches
//! to Bland's rule, which cannot cycle.

use std::collections::VecDeque;

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    /// Basic cells `(row, column, mass)`; some may carry zero mass.
    pub cells: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub pivots: usize,
}

const NONE: usize = usize::MAX;

struct Tableau {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    basis: Vec<(usize, usize)>,
    flow: Vec<f64>,
    slot: Vec<usize>,
}

impl Tableau {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.basis.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &adj[node] {
                let (i, j) = self.basis[k];
                let c = self.cost[i * n + j];
                if next >= m && v[j].is_nan() {
                    v[j] = c - u[i];
                    queue.push_back(next);
                } else if next < m && u[i].is_nan() {
                    u[i] = c - v[j];
                    queue.push_back(next);
                }
            }
        }
        (u, v)
    }

    /// Basis indices along the tree path from row `i` to column `j`.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let target = self.m + j;
        let mut parent = vec![(NONE, NONE); self.m + self.n];
        parent[i] = (i, NONE);
        let mut queue = VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, k) in &adj[node] {
                if parent[next].0 == NONE {
                    parent[next] = (node, k);
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let (prev, k) = parent[node];
            cells.push(k);
            node = prev;
        }
        cells.reverse();
        cells
    }

    fn total_cost(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.flow)
            .map(|(&(i, j), x)| x * self.cost[i * self.n + j])
            .sum()
    }
}

/// Solves the transport problem exactly. Column masses are rescaled to the
/// row total to absorb round-off imbalance.
pub fn transportation_simplex(
    a: &[f64],
    b: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<SimplexOutcome> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return param("transport marginals must be nonempty");
    }
    if a.iter().chain(b).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return param("transport marginals must be nonnegative and finite");
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(1.0) {
        return param(format!("unbalanced marginals: {sa} vs {sb}"));
    }
    let b: Vec<f64> = b.iter().map(|v| v * sa / sb).collect();
    let costs: Vec<f64> = (0..m * n).map(|k| cost(k / n, k % n)).collect();
    let cmax = costs.iter().fold(0.0f64, |acc, c| acc.max(c.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-11 * cmax;

    // north-west corner start: every step advances exactly one index, so the
    // basis has m + n - 1 cells and forms a spanning tree
    let mut tab = Tableau { m, n, cost: costs, basis: Vec::new(), flow: Vec::new(), slot: vec![NONE; m * n] };
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    loop {
        let x = ra.min(rb);
        tab.slot[i * n + j] = tab.basis.len();
        tab.basis.push((i, j));
        tab.flow.push(x);
        ra -= x;
        rb -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (ra <= rb && i < m - 1) || j == n - 1 {
            i += 1;
            ra = a[i];
        } else {
            j += 1;
            rb = b[j];
        }
    }

    let cap = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    for pivot in 0..cap {
        let adj = tab.adjacency();
        let (u, v) = tab.potentials(&adj);
        let mut entering = None;
        let mut best = -tol;
        'scan: for r in 0..m {
            for c in 0..n {
                if tab.slot[r * n + c] != NONE {
                    continue;
                }
                let reduced = tab.cost[r * n + c] - u[r] - v[c];
                if reduced < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = reduced;
                }
            }
        }
        let Some((r, c)) = entering else {
            let cells = tab.basis.iter().zip(&tab.flow).map(|(&(i, j), &x)| (i, j, x)).collect();
            return Ok(SimplexOutcome { cells, cost: tab.total_cost(), pivots: pivot });
        };

        let path = tab.path(&adj, r, c);
        let mut leave = NONE;
        for &k in path.iter().step_by(2) {
            let better = leave == NONE
                || tab.flow[k] < tab.flow[leave]
                || (tab.flow[k] == tab.flow[leave] && tab.basis[k] < tab.basis[leave]);
            if better {
                leave = k;
            }
        }
        let theta = tab.flow[leave];
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                tab.flow[k] = (tab.flow[k] - theta).max(0.0);
            } else {
                tab.flow[k] += theta;
            }
        }
        let (li, lj) = tab.basis[leave];
        tab.slot[li * n + lj] = NONE;
        tab.slot[r * n + c] = leave;
        tab.basis[leave] = (r, c);
        tab.flow[leave] = theta;

        if theta == 0.0 {
            degenerate_run += 1;
            if degenerate_run > m + n {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
    }
    Err(Error::Solver {
        message: format!("transportation simplex hit the pivot cap of {cap}"),
        best: tab.total_cost(),
    })
}
