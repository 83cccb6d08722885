//! Dense two-phase simplex for small equality-form programs
//! `min c·x  s.t.  A x = b, x ≥ 0`.
//!
//! Pivoting follows Bland's rule, so degenerate vertices (the polytope
//! problems here are full of them) cannot cycle. Several objectives can be
//! optimized in sequence: after each one, every nonbasic column with a
//! strictly positive reduced cost is frozen at zero, which confines later
//! objectives to the optimal face of the earlier ones.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-11;
const FREEZE_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 10_000;

struct Tableau {
    /// Each row holds `n_total` coefficients followed by the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    frozen: Vec<bool>,
    n_total: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_total]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= pv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= f * p;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, t) in d.iter_mut().zip(row.iter()) {
                    *dj -= cb * t;
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let d = self.reduced_costs(cost);
            let entering = (0..self.n_total)
                .find(|&j| !self.frozen[j] && d[j] < -COST_EPS && !self.basis.contains(&j));
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let t = self.rows[i][col];
                if t <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / t;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-13
                            || ((ratio - br).abs() <= 1e-13 && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(Error::Domain("linear program is unbounded".into())),
            }
        }
        Err(Error::Domain("simplex pivot limit reached".into()))
    }

    fn freeze_suboptimal(&mut self, cost: &[f64]) {
        let d = self.reduced_costs(cost);
        for j in 0..self.n_total {
            if !self.basis.contains(&j) && d[j] > FREEZE_EPS {
                self.frozen[j] = true;
            }
        }
    }
}

/// Solves `A x = b, x ≥ 0`, minimizing each objective in turn over the
/// optimal face of the previous ones. Returns the final point.
///
/// `feas_tol` bounds the phase-one residual accepted as feasible.
pub fn solve_lexicographic(
    a: &[Vec<f64>],
    b: &[f64],
    objectives: &[Vec<f64>],
    feas_tol: f64,
) -> Result<Vec<f64>> {
    let m = a.len();
    assert_eq!(b.len(), m, "row count mismatch");
    let n = a.first().map_or(0, Vec::len);
    let n_total = n + m;

    let mut rows = Vec::with_capacity(m);
    for (i, (ai, &bi)) in a.iter().zip(b).enumerate() {
        assert_eq!(ai.len(), n, "ragged constraint matrix");
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; n_total + 1];
        for (dst, &src) in row.iter_mut().zip(ai) {
            *dst = sign * src;
        }
        row[n + i] = 1.0;
        row[n_total] = sign * bi;
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n_total).collect(),
        frozen: vec![false; n_total],
        n_total,
    };

    // Phase one: drive the artificials to zero.
    let mut phase_one = vec![0.0; n_total];
    phase_one[n..].iter_mut().for_each(|c| *c = 1.0);
    t.optimize(&phase_one)?;
    let residual: f64 = (0..m)
        .filter(|&i| t.basis[i] >= n)
        .map(|i| t.rhs(i).abs())
        .sum();
    if residual > feas_tol {
        return Err(Error::Infeasible { residual });
    }

    // Pivot remaining artificials out; rows where that is impossible are
    // linearly dependent and get dropped.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            let col = (0..n)
                .filter(|&j| t.rows[i][j].abs() > 1e-9)
                .max_by(|&x, &y| t.rows[i][x].abs().total_cmp(&t.rows[i][y].abs()));
            match col {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    t.frozen[n..].iter_mut().for_each(|f| *f = true);

    for obj in objectives {
        assert_eq!(obj.len(), n, "objective length mismatch");
        let mut cost = obj.clone();
        cost.resize(n_total, 0.0);
        t.optimize(&cost)?;
        t.freeze_suboptimal(&cost);
    }

    let mut x = vec![0.0; n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rhs(i).max(0.0);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_textbook_program() {
        // min -x0 - x1  s.t. x0 + 2x1 + s0 = 4, 3x0 + x1 + s1 = 6
        let a = vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]];
        let b = vec![4.0, 6.0];
        let x = solve_lexicographic(&a, &b, &[vec![-1.0, -1.0, 0.0, 0.0]], 1e-9).unwrap();
        assert!((x[0] - 1.6).abs() < 1e-12);
        assert!((x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        // x0 + x1 = 1 and x0 + x1 = 2
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let r = solve_lexicographic(&a, &[1.0, 2.0], &[vec![0.0, 0.0]], 1e-9);
        assert!(matches!(r, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn redundant_rows_and_lexicographic_ties() {
        // x0 + x1 + x2 = 1 stated twice; every point is optimal for the
        // zero objective, lexicographic minimization picks x = (0, 0, 1).
        let a = vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]];
        let objs = vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let x = solve_lexicographic(&a, &[1.0, 2.0], &objs, 1e-9).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        let a = vec![vec![-1.0, -1.0]];
        let x = solve_lexicographic(&a, &[-2.0], &[vec![1.0, 2.0]], 1e-9).unwrap();
        assert_eq!(x, vec![2.0, 0.0]);
    }
}
