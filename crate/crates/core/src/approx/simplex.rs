//! Dense two-phase tableau simplex with Bland's rule as the anti-cycling
//! fallback.
//!
//! Solves `min c.x` subject to `A x <= b`, `x >= 0`, where `b` may have any
//! sign.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("constraint row {row} has {got} coefficients, expected {expected}")]
    Shape { row: usize, expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const EPS: f64 = 1e-11;

struct Tableau {
    /// Constraint rows followed by the objective row; last column is the rhs.
    rows: Vec<Vec<f64>>,
    /// Constraint rows as first built, for refinement.
    original: Vec<Vec<f64>>,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn rhs(&self, r: usize) -> f64 {
        *self.rows[r].last().expect("nonempty row")
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Minimises the objective row over the columns in `allowed`.
    ///
    /// Prices by most negative reduced cost with a largest-pivot ratio test,
    /// switching to Bland's rule while a run of degenerate pivots lasts so
    /// that cycling cannot occur.
    fn optimise(&mut self, allowed: usize) -> Result<(), LpError> {
        const STALL: usize = 50;
        let obj = self.m();
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= STALL;
            let entering = if bland {
                (0..allowed).find(|&j| self.rows[obj][j] < -EPS)
            } else {
                (0..allowed)
                    .filter(|&j| self.rows[obj][j] < -EPS)
                    .min_by(|&x, &y| self.rows[obj][x].total_cmp(&self.rows[obj][y]))
            };
            let Some(c) = entering else {
                return Ok(());
            };
            let mut min_ratio = f64::INFINITY;
            for r in 0..self.m() {
                let a = self.rows[r][c];
                if a > EPS {
                    min_ratio = min_ratio.min(self.rhs(r).max(0.0) / a);
                }
            }
            if min_ratio == f64::INFINITY {
                return Err(LpError::Unbounded);
            }
            let mut leave: Option<usize> = None;
            for r in 0..self.m() {
                let a = self.rows[r][c];
                if a > EPS && self.rhs(r).max(0.0) / a <= min_ratio + EPS {
                    let better = match leave {
                        None => true,
                        Some(l) if bland => self.basis[r] < self.basis[l],
                        Some(l) => a > self.rows[l][c],
                    };
                    if better {
                        leave = Some(r);
                    }
                }
            }
            let r = leave.expect("a row attains the minimum ratio");
            if self.pivots >= self.max_pivots {
                return Err(LpError::IterationLimit(self.max_pivots));
            }
            degenerate_run = if min_ratio <= EPS { degenerate_run + 1 } else { 0 };
            self.pivot(r, c);
        }
    }

    /// Basic values recomputed from the original rows, removing the drift
    /// accumulated over many pivots. Falls back to the tableau on a singular
    /// basis.
    fn refined_basic_values(&self) -> Vec<f64> {
        let m = self.m();
        let width = self.original.first().map_or(0, Vec::len);
        let mut sys: Vec<Vec<f64>> = self
            .original
            .iter()
            .map(|row| {
                let mut r: Vec<f64> = self.basis.iter().map(|&c| row[c]).collect();
                r.push(row[width - 1]);
                r
            })
            .collect();
        for col in 0..m {
            let Some(p) = (col..m).max_by(|&a, &b| sys[a][col].abs().total_cmp(&sys[b][col].abs())) else {
                break;
            };
            if sys[p][col].abs() < 1e-14 {
                return (0..m).map(|r| self.rhs(r)).collect();
            }
            sys.swap(col, p);
            let pivot_row = sys[col].clone();
            for (r, row) in sys.iter_mut().enumerate() {
                if r != col && row[col] != 0.0 {
                    let f = row[col] / pivot_row[col];
                    row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        (0..m).map(|r| sys[r][m] / sys[r][r]).collect()
    }

    /// Sets the objective row to reduced costs of `cost`.
    fn set_objective(&mut self, cost: &[f64]) {
        let obj = self.m();
        let width = self.rows[obj].len();
        let mut row = vec![0.0; width];
        row[..cost.len()].copy_from_slice(cost);
        for r in 0..self.m() {
            let cb = cost.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                row.iter_mut().zip(&self.rows[r]).for_each(|(v, a)| *v -= cb * a);
            }
        }
        self.rows[obj] = row;
    }
}

fn check_shape(n: usize, a: &[Vec<f64>]) -> Result<(), LpError> {
    for (row, r) in a.iter().enumerate() {
        if r.len() != n {
            return Err(LpError::Shape {
                row,
                expected: n,
                got: r.len(),
            });
        }
    }
    Ok(())
}

/// Runs both phases and leaves the optimal tableau.
fn optimal_tableau(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Tableau, LpError> {
    let n = c.len();
    let m = a.len();
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let art_start = n + m;
    let width = art_start + negative.len() + 1;
    let mut rows = Vec::with_capacity(m + 1);
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; width];
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = sign;
        row[width - 1] = sign * b[i];
        match negative.iter().position(|&k| k == i) {
            Some(k) => {
                row[art_start + k] = 1.0;
                basis.push(art_start + k);
            }
            None => basis.push(n + i),
        }
        rows.push(row);
    }
    let original = rows.clone();
    rows.push(vec![0.0; width]);
    let mut t = Tableau {
        rows,
        original,
        basis,
        pivots: 0,
        max_pivots: 50 * (m + n + 10),
    };

    if !negative.is_empty() {
        let mut phase1 = vec![0.0; width - 1];
        phase1[art_start..].iter_mut().for_each(|v| *v = 1.0);
        t.set_objective(&phase1);
        t.optimise(width - 1)?;
        let infeasibility = -t.rhs(m);
        if infeasibility > 1e-9 {
            return Err(LpError::Infeasible);
        }
        // Drive zero-valued artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| t.rows[r][j].abs() > EPS) {
                    t.pivot(r, c);
                }
            }
        }
    }

    t.set_objective(c);
    t.optimise(art_start)?;
    Ok(t)
}

fn solve_primal(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let t = optimal_tableau(c, a, b)?;
    let basic = t.refined_basic_values();
    let mut x = vec![0.0; n];
    for (r, &v) in t.basis.iter().enumerate() {
        if v < n {
            x[v] = basic[r].max(0.0);
        }
    }
    Ok(LpSolution {
        objective: c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum(),
        x,
        pivots: t.pivots,
    })
}

/// Solves `A[rows, cols] z = rhs` by elimination with partial pivoting.
fn solve_square(a: &[Vec<f64>], rows: &[usize], cols: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = rows.len();
    let mut sys: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .map(|(&r, &v)| {
            let mut row: Vec<f64> = cols.iter().map(|&c| a[r][c]).collect();
            row.push(v);
            row
        })
        .collect();
    for col in 0..k {
        let p = (col..k).max_by(|&x, &y| sys[x][col].abs().total_cmp(&sys[y][col].abs()))?;
        if sys[p][col].abs() < 1e-14 {
            return None;
        }
        sys.swap(col, p);
        let pivot_row = sys[col].clone();
        for (r, row) in sys.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col] / pivot_row[col];
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    Some((0..k).map(|r| sys[r][k] / sys[r][r]).collect())
}

/// For `c >= 0` the dual `min b.w` s.t. `-A^T w <= c`, `w >= 0` starts
/// feasible at `w = 0` and has one row per primal variable. The primal
/// optimum is the vertex where the constraints with basic `w` are tight.
fn solve_via_dual(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let (n, m) = (c.len(), a.len());
    let at: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| -a[i][j]).collect()).collect();
    let t = match optimal_tableau(b, &at, c) {
        Ok(t) => t,
        Err(LpError::Unbounded) => return Err(LpError::Infeasible),
        Err(e) => return Err(e),
    };
    let obj = t.m();
    // Reduced costs of the dual slacks are the primal values.
    let mut x: Vec<f64> = (0..n).map(|j| t.rows[obj][m + j].max(0.0)).collect();
    let tight: Vec<usize> = t.basis.iter().copied().filter(|&v| v < m).collect();
    let free: Vec<usize> = (0..n).filter(|&j| !t.basis.contains(&(m + j))).collect();
    if tight.len() == free.len() {
        let rhs: Vec<f64> = tight.iter().map(|&i| b[i]).collect();
        if let Some(z) = solve_square(a, &tight, &free, &rhs) {
            x = vec![0.0; n];
            for (&j, v) in free.iter().zip(z) {
                x[j] = v.max(0.0);
            }
        }
    }
    Ok(LpSolution {
        objective: c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum(),
        x,
        pivots: t.pivots,
    })
}

/// `min c.x` s.t. `A x <= b`, `x >= 0`. Nonnegative costs go through the
/// dual, which needs no phase one and has far fewer rows for tall systems.
pub fn solve_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    check_shape(c.len(), a)?;
    if c.iter().all(|&v| v >= 0.0) {
        solve_via_dual(c, a, b)
    } else {
        solve_primal(c, a, b)
    }
}
