//! Dense two-phase primal simplex with Bland's rule.

use alloc::vec;
use alloc::vec::Vec;

const TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// reduced costs; the last entry is minus the objective value
    z: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.z.len() - 1
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for v in &mut self.rows[r] {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r && row[e] != 0.0 {
                let f = row[e];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[e] = 0.0;
            }
        }
        let f = self.z[e];
        if f != 0.0 {
            for (v, &pv) in self.z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.z[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Runs to optimality over columns `0..allowed`. `false` when unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(e) = (0..allowed).find(|&j| self.z[j] < -TOL) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[e] > TOL {
                    let ratio = row[rhs] / row[e];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - TOL || (ratio <= br + TOL && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, e),
            }
        }
    }
}

/// Minimizes `c·x` subject to `A x = b`, `x >= 0`.
pub(crate) fn minimize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for (i, (ai, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for (v, &x) in row.iter_mut().zip(ai) {
            *v = sign * x;
        }
        row[n + i] = 1.0;
        row[width - 1] = sign * bi;
        rows.push(row);
    }
    let mut z = vec![0.0; width];
    for row in &rows {
        for j in 0..n {
            z[j] -= row[j];
        }
        z[width - 1] -= row[width - 1];
    }
    let mut t = Tableau { rows, z, basis: (n..n + m).collect() };
    t.optimize(n);
    if -t.z[width - 1] > 1e-9 {
        return LpOutcome::Infeasible;
    }
    // drive artificials out of the basis where possible
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                t.pivot(i, j);
            }
        }
    }
    let mut z = vec![0.0; width];
    z[..n].copy_from_slice(c);
    for (i, row) in t.rows.iter().enumerate() {
        let cb = if t.basis[i] < n { c[t.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for (v, &x) in z.iter_mut().zip(row) {
                *v -= cb * x;
            }
        }
    }
    for &bj in &t.basis {
        if bj < n {
            z[bj] = 0.0;
        }
    }
    t.z = z;
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.rows[i][width - 1].max(0.0);
        }
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, value }
}
