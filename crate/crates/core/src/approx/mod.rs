//! Polynomial approximation of connectives with minimal coefficient mass.
//!
//! `A_g(eta)` is the least `sum_{d>=1} |a_d|` over polynomials `p` with
//! `|g - p| <= eta` on `[-1, 1]`. It is computed here for a fixed degree and
//! on a finite Chebyshev grid, as a linear program.

mod simplex;

pub use simplex::{solve_lp, LpError, LpSolution};

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{inner_product, materialize_tensor_power, norm_squared, BasisLabel, LinalgError, SparseVector};
use crate::scalar::{parse_rational, rational_to_f64};

pub const MAX_DEGREE: usize = 30;
/// Entry cap for explicit tensor powers in [`block_embedding_check`].
pub const BLOCK_DIM_CAP: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no polynomial of degree {degree} is within {eta} of g on the grid")]
    DegreeTooLow { degree: usize, eta: f64 },
    #[error("result was computed with eta = {got}, expected epsilon/4 = {expected}")]
    EtaMismatch { expected: f64, got: f64 },
    #[error("cannot parse connective {0:?}")]
    Parse(String),
    #[error("cannot read table {path}: {reason}")]
    Table { path: PathBuf, reason: String },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A function `g: [-1, 1] -> R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Connective {
    /// `sum_k c_k t^k`.
    Poly(Vec<f64>),
    Abs,
    /// `max(t - c, 0)`.
    ReluShift(f64),
    /// Piecewise-linear through sorted `(t, g(t))` points, constant outside.
    Tabulated(Vec<(f64, f64)>),
}

impl Connective {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Connective::Poly(c) => c.iter().rev().fold(0.0, |acc, a| acc * t + a),
            Connective::Abs => t.abs(),
            Connective::ReluShift(c) => (t - c).max(0.0),
            Connective::Tabulated(points) => interpolate(points, t),
        }
    }

    /// A Lipschitz constant on `[-1, 1]`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Connective::Poly(c) => c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a.abs()).sum(),
            Connective::Abs | Connective::ReluShift(_) => 1.0,
            Connective::Tabulated(p) => p
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn tabulated(mut points: Vec<(f64, f64)>) -> Result<Self, ApproxError> {
        if points.is_empty() || points.iter().any(|(t, g)| !t.is_finite() || !g.is_finite()) {
            return Err(ApproxError::InvalidParameter("table needs finite points".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ApproxError::InvalidParameter("table has repeated abscissae".into()));
        }
        Ok(Connective::Tabulated(points))
    }

    /// Reads a two-column `t,g(t)` CSV; a non-numeric first row is a header.
    pub fn from_csv(path: &Path) -> Result<Self, ApproxError> {
        let fail = |reason: String| ApproxError::Table {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| fail(e.to_string()))?;
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| fail(e.to_string()))?;
            if record.len() != 2 {
                return Err(fail(format!("row {} has {} columns", i + 1, record.len())));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(t), Ok(g)) => points.push((t, g)),
                _ if i == 0 => continue,
                _ => return Err(fail(format!("row {} is not numeric", i + 1))),
            }
        }
        Connective::tabulated(points).map_err(|e| fail(e.to_string()))
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let k = points.partition_point(|p| p.0 <= t);
    if k == 0 {
        return points[0].1;
    }
    if k == points.len() {
        return points[k - 1].1;
    }
    let ((t0, g0), (t1, g1)) = (points[k - 1], points[k]);
    g0 + (g1 - g0) * (t - t0) / (t1 - t0)
}

impl fmt::Display for Connective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connective::Poly(c) => {
                let parts: Vec<String> = c.iter().map(f64::to_string).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Connective::Abs => write!(f, "abs"),
            Connective::ReluShift(c) => write!(f, "relu:{c}"),
            Connective::Tabulated(p) => write!(f, "table[{} points]", p.len()),
        }
    }
}

impl FromStr for Connective {
    type Err = ApproxError;

    /// `poly:<c0>,<c1>,...`, `abs`, `relu:<c>`, or `table:<file.csv>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ApproxError::Parse(s.to_string());
        let num = |x: &str| parse_rational(x.trim()).map(|r| rational_to_f64(&r)).map_err(|_| bad());
        match s.split_once(':') {
            None if s.trim() == "abs" => Ok(Connective::Abs),
            Some(("poly", a)) => Ok(Connective::Poly(a.split(',').map(num).collect::<Result<_, _>>()?)),
            Some(("relu", a)) => Ok(Connective::ReluShift(num(a)?)),
            Some(("table", path)) => Connective::from_csv(Path::new(path.trim())),
            _ => Err(bad()),
        }
    }
}

/// `n` Chebyshev-Lobatto points `cos(pi k / (n-1))`, ascending. The grid of
/// size `2n - 1` contains the grid of size `n`.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let mut t: Vec<f64> = (0..n)
        .map(|k| {
            // Symmetric evaluation keeps nested grids bit-identical.
            let theta = PI * k as f64 / (n - 1) as f64;
            if 2 * k == n - 1 {
                0.0
            } else {
                theta.cos()
            }
        })
        .collect();
    t.reverse();
    t
}

fn powers(t: f64, degree: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(degree + 1);
    let mut acc = 1.0;
    for _ in 0..=degree {
        p.push(acc);
        acc *= t;
    }
    p
}

pub fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

/// Degree-capped, grid-relaxed estimate of `A_g(eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyApproxResult {
    pub degree: usize,
    /// `a_0..a_D` in the monomial basis.
    pub coefficients: Vec<f64>,
    /// `sum_{d>=1} |a_d|`.
    pub a_estimate: f64,
    pub eta: f64,
    pub grid_size: usize,
    pub sup_error_on_grid: f64,
    /// Sup error on all of `[-1, 1]` implied by the grid error and Lipschitz
    /// constants of `g` and `p`.
    pub sup_error_bound: f64,
    pub pivots: usize,
}

impl PolyApproxResult {
    /// `g` is approximated by a constant.
    pub fn is_degenerate(&self) -> bool {
        self.a_estimate == 0.0
    }
}

/// Minimises `sum_{d=1}^D |a_d|` subject to `|g(t_k) - p(t_k)| <= eta` on a
/// Chebyshev grid of `grid` points. `a_0` is free and costs nothing.
pub fn compute_ag(g: &Connective, eta: f64, degree: usize, grid: usize) -> Result<PolyApproxResult, ApproxError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(ApproxError::InvalidParameter(format!("eta {eta} must be positive")));
    }
    if degree > MAX_DEGREE {
        return Err(ApproxError::InvalidParameter(format!("degree {degree} exceeds {MAX_DEGREE}")));
    }
    if grid < 2 * degree + 1 || grid < 2 {
        return Err(ApproxError::InvalidParameter(format!(
            "grid {grid} must be at least 2 * degree + 1 = {}",
            2 * degree + 1
        )));
    }
    let ts = chebyshev_grid(grid);
    // Variables: a_0 = w+ - w-, a_d = u_d - v_d.
    let nvars = 2 * (degree + 1);
    let mut cost = vec![1.0; nvars];
    cost[0] = 0.0;
    cost[1] = 0.0;
    let mut rows = Vec::with_capacity(2 * grid);
    let mut rhs = Vec::with_capacity(2 * grid);
    for &t in &ts {
        let pw = powers(t, degree);
        let row: Vec<f64> = pw.iter().flat_map(|&p| [p, -p]).collect();
        let gt = g.eval(t);
        rows.push(row.clone());
        rhs.push(eta + gt);
        rows.push(row.into_iter().map(|v| -v).collect());
        rhs.push(eta - gt);
    }
    let sol = match solve_lp(&cost, &rows, &rhs) {
        Ok(s) => s,
        Err(LpError::Infeasible) => return Err(ApproxError::DegreeTooLow { degree, eta }),
        Err(e) => return Err(e.into()),
    };
    let coefficients: Vec<f64> = sol.x.chunks(2).map(|c| c[0] - c[1]).collect();
    let a_estimate = coefficients[1..].iter().map(|a| a.abs()).sum();
    let sup_error_on_grid = ts
        .iter()
        .map(|&t| (g.eval(t) - poly_eval(&coefficients, t)).abs())
        .fold(0.0, f64::max);
    let p_lipschitz: f64 = coefficients.iter().enumerate().skip(1).map(|(d, a)| d as f64 * a.abs()).sum();
    let spacing = PI / (grid - 1) as f64;
    Ok(PolyApproxResult {
        degree,
        coefficients,
        a_estimate,
        eta,
        grid_size: grid,
        sup_error_on_grid,
        sup_error_bound: sup_error_on_grid + (g.lipschitz() + p_lipschitz) * spacing / 2.0,
        pivots: sol.pivots,
    })
}

/// Monomial coefficients of the degree-`degree` interpolant of `g` at the
/// Chebyshev points of the first kind.
pub fn chebyshev_interpolant(g: &Connective, degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n).map(|k| (PI * (k as f64 + 0.5) / n as f64).cos()).collect();
    let values: Vec<f64> = nodes.iter().map(|&t| g.eval(t)).collect();
    // Chebyshev coefficients c_j = (2/n) sum_k g(t_k) T_j(t_k), c_0 halved.
    let cheb: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = (0..n)
                .map(|k| values[k] * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                .sum();
            let c = 2.0 * s / n as f64;
            if j == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect();
    // T_{j+1} = 2t T_j - T_{j-1}, tracked in the monomial basis.
    let mut out = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    for (j, c) in cheb.iter().enumerate() {
        if j > 0 {
            let mut next = vec![0.0; n];
            for d in 0..n {
                if d + 1 < n {
                    next[d + 1] += if j == 1 { cur[d] } else { 2.0 * cur[d] };
                }
                if j > 1 {
                    next[d] -= prev[d];
                }
            }
            prev = std::mem::replace(&mut cur, next);
        }
        out.iter_mut().zip(&cur).for_each(|(o, t)| *o += c * t);
    }
    out
}

/// `exp(2 pi A / epsilon)`, valid when `res` was computed at `eta = epsilon/4`.
pub fn connective_upper_bound(res: &PolyApproxResult, epsilon: f64) -> Result<f64, ApproxError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ApproxError::InvalidParameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let expected = epsilon / 4.0;
    if (res.eta - expected).abs() > 1e-12 {
        return Err(ApproxError::EtaMismatch { expected, got: res.eta });
    }
    Ok((2.0 * PI * res.a_estimate / epsilon).exp())
}

/// Outcome of [`block_embedding_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCheck {
    /// `<X(x), Y(y)>` over the direct sum.
    pub lhs: f64,
    /// `p(<x, y>) - a_0`.
    pub rhs: f64,
    pub x_norm_sq: f64,
    pub y_norm_sq: f64,
    /// `sum_{d>=1} |a_d|`.
    pub budget: f64,
}

impl BlockCheck {
    pub fn holds(&self, tol: f64) -> bool {
        (self.lhs - self.rhs).abs() <= tol && self.x_norm_sq <= self.budget + tol
    }
}

fn block_sum(
    v: &SparseVector,
    coeffs: &[f64],
    weight: impl Fn(f64) -> f64,
) -> Result<SparseVector, LinalgError> {
    let mut entries = Vec::new();
    for (d, &a) in coeffs.iter().enumerate().skip(1) {
        if a == 0.0 {
            continue;
        }
        let w = weight(a);
        let t = materialize_tensor_power(v, d as u32, BLOCK_DIM_CAP)?;
        for (label, c) in t.float_entries() {
            entries.push((BasisLabel::Tuple(vec![BasisLabel::Key(d as u64), label.clone()]), w * c));
        }
    }
    Ok(SparseVector::from_float(entries))
}

/// Builds `X(x) = (+) |a_d|^(1/2) x^(x)d` and `Y(y) = (+) sgn(a_d) |a_d|^(1/2) y^(x)d`
/// explicitly and compares `<X(x), Y(y)>` with `p(<x, y>) - a_0`.
pub fn block_embedding_check(coeffs: &[f64], x: &SparseVector, y: &SparseVector) -> Result<BlockCheck, ApproxError> {
    let budget: f64 = coeffs.iter().skip(1).map(|a| a.abs()).sum();
    if !(budget > 0.0) {
        return Err(ApproxError::InvalidParameter("polynomial has no non-constant part".into()));
    }
    let (xf, yf) = (x.to_float(), y.to_float());
    let big_x = block_sum(&xf, coeffs, |a| a.abs().sqrt())?;
    let big_y = block_sum(&yf, coeffs, |a| a.signum() * a.abs().sqrt())?;
    let t = inner_product(&xf, &yf)?.to_f64();
    Ok(BlockCheck {
        lhs: inner_product(&big_x, &big_y)?.to_f64(),
        rhs: poly_eval(coeffs, t) - coeffs[0],
        x_norm_sq: norm_squared(&big_x).to_f64(),
        y_norm_sq: norm_squared(&big_y).to_f64(),
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_nested_and_sorted() {
        let a = chebyshev_grid(9);
        let b = chebyshev_grid(17);
        assert_eq!(a.first(), Some(&-1.0));
        assert_eq!(a.last(), Some(&1.0));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        for t in &a {
            assert!(b.contains(t), "{t}");
        }
    }

    #[test]
    fn identity_and_square() {
        let r = compute_ag(&Connective::Poly(vec![0.0, 1.0]), 0.05, 3, 21).unwrap();
        assert!(r.a_estimate <= 1.0 + 1e-9);
        assert!(r.sup_error_on_grid <= 0.05 + 1e-9);
        let r = compute_ag(&Connective::Poly(vec![0.0, 0.0, 1.0]), 0.01, 4, 21).unwrap();
        assert!(r.a_estimate <= 1.0 + 1e-9);
        // t^2 - 0.01 shifted by the free constant still needs the quadratic.
        assert!(r.a_estimate > 0.9);
    }

    #[test]
    fn constants_are_free() {
        let r = compute_ag(&Connective::Poly(vec![0.7]), 0.01, 4, 21).unwrap();
        assert_eq!(r.a_estimate, 0.0);
        assert!(r.is_degenerate());
        assert_eq!(connective_upper_bound(&compute_ag(&Connective::Poly(vec![0.3]), 0.1, 2, 9).unwrap(), 0.4).unwrap(), 1.0);
    }

    #[test]
    fn abs_needs_degree() {
        assert_eq!(
            compute_ag(&Connective::Abs, 0.01, 1, 21),
            Err(ApproxError::DegreeTooLow { degree: 1, eta: 0.01 })
        );
        let r = compute_ag(&Connective::Abs, 0.05, 12, 61).unwrap();
        assert!(r.sup_error_on_grid <= 0.05 + 1e-9);
    }

    #[test]
    fn precondition_errors() {
        let g = Connective::Abs;
        assert!(compute_ag(&g, 0.0, 2, 9).is_err());
        assert!(compute_ag(&g, 0.1, 31, 100).is_err());
        assert!(compute_ag(&g, 0.1, 4, 8).is_err());
    }

    #[test]
    fn upper_bound_eta_check() {
        let r = compute_ag(&Connective::Poly(vec![0.0, 1.0]), 0.125, 2, 9).unwrap();
        let b = connective_upper_bound(&r, 0.5).unwrap();
        assert_eq!(b, (2.0 * PI * r.a_estimate / 0.5).exp());
        assert!(matches!(connective_upper_bound(&r, 0.4), Err(ApproxError::EtaMismatch { .. })));
    }

    #[test]
    fn interpolant_reproduces_polynomials() {
        let c = chebyshev_interpolant(&Connective::Poly(vec![0.5, -1.0, 0.0, 2.0]), 3);
        for (a, b) in c.iter().zip([0.5, -1.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }
        let c = chebyshev_interpolant(&Connective::Poly(vec![0.0, 0.0, 1.0]), 4);
        assert!((c[2] - 1.0).abs() < 1e-12 && c[4].abs() < 1e-12);
    }

    #[test]
    fn parse_connectives() {
        assert_eq!("abs".parse::<Connective>().unwrap(), Connective::Abs);
        assert_eq!("relu:1/4".parse::<Connective>().unwrap(), Connective::ReluShift(0.25));
        assert_eq!("poly:0,0,1".parse::<Connective>().unwrap(), Connective::Poly(vec![0.0, 0.0, 1.0]));
        assert!("sin".parse::<Connective>().is_err());
        let r = Connective::ReluShift(0.25);
        assert_eq!(r.eval(0.0), 0.0);
        assert_eq!(r.eval(1.0), 0.75);
    }

    #[test]
    fn table_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        std::fs::write(&path, "t,g\n1,1\n-1,1\n0,0\n").unwrap();
        let g: Connective = format!("table:{}", path.display()).parse().unwrap();
        assert_eq!(g.eval(-0.5), 0.5);
        assert_eq!(g.eval(2.0), 1.0);
        assert_eq!(g.lipschitz(), 1.0);
        std::fs::write(&path, "1,2,3\n").unwrap();
        assert!(Connective::from_csv(&path).is_err());
    }

    #[test]
    fn block_examples() {
        let x = SparseVector::from_dense(&[0.6, 0.8]);
        let y = SparseVector::from_dense(&[0.8, 0.6]);
        let r = block_embedding_check(&[0.0, 1.0], &x, &y).unwrap();
        assert!((r.lhs - 0.96).abs() < 1e-15 && (r.rhs - 0.96).abs() < 1e-15);
        let r = block_embedding_check(&[0.0, 1.0, 1.0], &x, &y).unwrap();
        assert!((r.lhs - 1.8816).abs() < 1e-12);
        assert!(r.holds(1e-10));
        let e = SparseVector::from_dense(&[1.0]);
        let r = block_embedding_check(&[0.5, 0.0, -1.0], &e, &e).unwrap();
        assert!((r.lhs + 1.0).abs() < 1e-15 && (r.rhs + 1.0).abs() < 1e-15);
        assert!(block_embedding_check(&[1.0, 0.0], &e, &e).is_err());
    }
}
