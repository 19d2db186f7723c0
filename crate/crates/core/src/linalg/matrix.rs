//! Dense square matrices and power-iteration operator-norm estimates.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::LinalgError;

/// Below this size a Toeplitz matrix is applied densely.
const FFT_THRESHOLD: usize = 64;

/// Circulant embedding of a Toeplitz matrix, for O(n log n) products.
struct ToeplitzPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
    spectrum_t: Vec<Complex64>,
}

impl ToeplitzPlan {
    /// `diag[k + n - 1]` is the entry on diagonal `i - j = k`.
    fn new(n: usize, diag: &[f64]) -> Self {
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let column = |transpose: bool| {
            let mut c = vec![Complex64::new(0.0, 0.0); len];
            for k in 0..n {
                let (lower, upper) = (diag[n - 1 + k], diag[n - 1 - k]);
                let (down, up) = if transpose { (upper, lower) } else { (lower, upper) };
                c[k] = Complex64::new(down, 0.0);
                if k > 0 {
                    c[len - k] = Complex64::new(up, 0.0);
                }
            }
            forward.process(&mut c);
            c
        };
        let spectrum = column(false);
        let spectrum_t = column(true);
        ToeplitzPlan {
            len,
            forward,
            inverse,
            spectrum,
            spectrum_t,
        }
    }

    fn apply(&self, v: &[f64], transpose: bool) -> Vec<f64> {
        let n = v.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (b, &x) in buf.iter_mut().zip(v) {
            b.re = x;
        }
        self.forward.process(&mut buf);
        let eigs = if transpose { &self.spectrum_t } else { &self.spectrum };
        for (b, s) in buf.iter_mut().zip(eigs) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[..n].iter().map(|c| c.re * scale).collect()
    }
}

/// Square matrix of floats, row-major.
///
/// A matrix built with [`DenseMatrix::toeplitz`] keeps its diagonal
/// generator and multiplies vectors through an FFT; the stored entries stay
/// authoritative for element access.
#[derive(Clone)]
pub struct DenseMatrix {
    n: usize,
    entries: Vec<f64>,
    skew: bool,
    diagonals: Option<Arc<Vec<f64>>>,
    plan: Option<Arc<ToeplitzPlan>>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseMatrix")
            .field("n", &self.n)
            .field("skew", &self.skew)
            .field("toeplitz", &self.diagonals.is_some())
            .finish()
    }
}

impl PartialEq for DenseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

impl DenseMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::InvalidArgument("matrix size must be positive".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Ok(DenseMatrix {
            n,
            entries,
            skew: false,
            diagonals: None,
            plan: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn identity(n: usize) -> Result<Self, LinalgError> {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Toeplitz matrix with entry `diag(i - j)` at `(i, j)`.
    pub fn toeplitz(n: usize, diag: impl Fn(i64) -> f64) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::InvalidArgument("matrix size must be positive".into()));
        }
        let diagonals: Vec<f64> = (-(n as i64 - 1)..=(n as i64 - 1)).map(diag).collect();
        Ok(Self::from_diagonals(n, Arc::new(diagonals)))
    }

    fn from_diagonals(n: usize, diagonals: Arc<Vec<f64>>) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(diagonals[n - 1 + i - j]);
            }
        }
        let plan = (n >= FFT_THRESHOLD).then(|| Arc::new(ToeplitzPlan::new(n, &diagonals)));
        DenseMatrix {
            n,
            entries,
            skew: false,
            diagonals: Some(diagonals),
            plan,
        }
    }

    /// Marks the matrix skew-symmetric after checking `a_ij = -a_ji` and a
    /// zero diagonal exactly.
    pub fn into_skew(mut self) -> Result<Self, LinalgError> {
        for i in 0..self.n {
            for j in i..self.n {
                if self.get(i, j) != -self.get(j, i) {
                    return Err(LinalgError::NotSkew(i, j));
                }
            }
        }
        self.skew = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    pub fn is_toeplitz(&self) -> bool {
        self.diagonals.is_some()
    }

    /// Top-left `k x k` block; keeps skew and Toeplitz structure.
    pub fn leading_principal(&self, k: usize) -> Result<Self, LinalgError> {
        if k == 0 || k > self.n {
            return Err(LinalgError::InvalidArgument(format!(
                "principal block size {k} outside 1..={}",
                self.n
            )));
        }
        let mut sub = match &self.diagonals {
            Some(d) => {
                let off = self.n - k;
                Self::from_diagonals(k, Arc::new(d[off..d.len() - off].to_vec()))
            }
            None => Self::from_fn(k, |i, j| self.get(i, j))?,
        };
        sub.skew = self.skew;
        Ok(sub)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix size");
        if let Some(plan) = &self.plan {
            return plan.apply(v, false);
        }
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix size");
        if let Some(plan) = &self.plan {
            return plan.apply(v, true);
        }
        if self.skew {
            return self.matvec(v).into_iter().map(|x| -x).collect();
        }
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }
}

/// Power-iteration estimate of `||A||_op`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    /// `sqrt(v^T A^T A v)` for a unit `v`; never exceeds the true norm
    /// beyond rounding.
    pub value: f64,
    /// `|| A^T A v - mu v ||`: some eigenvalue of `A^T A` lies within this
    /// distance of `value^2`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the perturbed fallback seed was used.
    pub restarted: bool,
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn fallback_seed(n: usize) -> Vec<f64> {
    // frac(i * golden ratio): deterministic and not aligned with ones.
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * phi;
            1.0 + (t - t.floor()) - 0.5
        })
        .collect()
}

/// Estimates `||A||_op` by power iteration on `A^T A`.
///
/// Starts from the normalised all-ones vector. If the Rayleigh quotient
/// collapses to zero on a nonzero matrix, or makes no progress for a long
/// stretch while the residual is still above `tol`, the iteration restarts
/// once from a fixed perturbed seed. Progress means the estimate grew or the
/// residual shrank by a tenth.
pub fn operator_norm(a: &DenseMatrix, tol: f64, max_iters: usize) -> Result<NormEstimate, LinalgError> {
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidArgument("tolerance must be positive".into()));
    }
    const STAGNATION_WINDOW: usize = 200;
    let n = a.n();
    let nonzero = a.entries.iter().any(|&x| x != 0.0);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut restarted = false;
    let mut best = 0.0f64;
    let mut last_gain = 0usize;
    let mut reference_residual = f64::INFINITY;
    let mut residual = f64::INFINITY;

    for it in 1..=max_iters {
        let u = a.matvec(&v);
        let w = a.matvec_transpose(&u);
        let mu: f64 = u.iter().map(|x| x * x).sum();
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - mu * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let estimate = mu.max(0.0).sqrt();
        if estimate > best * (1.0 + 1e-15) || residual < 0.9 * reference_residual {
            last_gain = it;
            reference_residual = residual;
        }
        best = best.max(estimate);

        let collapsed = nonzero && mu == 0.0;
        if residual <= tol && !collapsed {
            return Ok(NormEstimate {
                value: best,
                residual,
                iterations: it,
                converged: true,
                restarted,
            });
        }
        if !restarted && (collapsed || it - last_gain > STAGNATION_WINDOW) {
            restarted = true;
            last_gain = it;
            reference_residual = f64::INFINITY;
            v = fallback_seed(n);
            normalize(&mut v);
            continue;
        }
        v = w;
        if normalize(&mut v) == 0.0 {
            // A^T A v = 0 with a nonzero matrix and the fallback used.
            v = fallback_seed(n);
            normalize(&mut v);
        }
    }
    Err(LinalgError::NotConverged {
        max_iters,
        estimate: best,
        residual,
    })
}
