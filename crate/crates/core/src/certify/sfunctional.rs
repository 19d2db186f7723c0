use std::collections::HashMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use super::{CertifyError, Kahan};
use crate::constructions::WitnessFamily;
use crate::linalg::{norm_squared, operator_norm, BasisLabel, DenseMatrix, PairKernel, SparseVector};
use crate::scalar::Value;

/// The skew-symmetric matrix `a_ij = 1/(i - j)`, zero on the diagonal.
pub fn hilbert_matrix(n: usize) -> Result<DenseMatrix, CertifyError> {
    if n < 2 {
        return Err(CertifyError::NOutOfRange(n));
    }
    let m = DenseMatrix::toeplitz(n, |k| if k == 0 { 0.0 } else { 1.0 / k as f64 })?;
    Ok(m.into_skew()?)
}

/// `S = sum_{i != j} b_ij <x_i, y_j>` with `b_ij = 1/(j - i)`, so that a
/// half-graph in stored order gives `S >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SFunctionalReport {
    pub n: usize,
    /// Exact for exact families, otherwise a compensated float sum.
    pub s: Value,
    pub pi_n: f64,
    /// `sum_{i<j} 1/(j-i)`, summed pair by pair.
    pub harmonic_pairs: f64,
    /// The same sum as `sum_t (n-t)/t`.
    pub harmonic_closed: f64,
    /// `n ln n - n`.
    pub n_log_n: f64,
    /// `S / sum_{i<j} 1/(j-i)`: the largest margin the family could carry.
    pub epsilon_certified: f64,
    /// `sum_i <x_i, z_i>` with `z_i = sum_{j != i} b_ij y_j`.
    pub linearized_s: f64,
    pub x_norm_sq_sum: f64,
    pub y_norm_sq_sum: f64,
    /// `sum_i ||z_i||^2`.
    pub z_norm_sq_sum: f64,
    /// `(sum ||x_i||^2)^(1/2) (sum ||z_i||^2)^(1/2)`, an upper bound on `|S|`.
    pub cauchy_schwarz_bound: f64,
}

impl SFunctionalReport {
    pub fn s_f64(&self) -> f64 {
        self.s.to_f64()
    }
}

fn harmonic_pairs(n: usize) -> f64 {
    let rows: Vec<Kahan> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| 1.0 / (j - i) as f64).sum())
        .collect();
    rows.into_iter().map(Kahan::value).sum::<Kahan>().value()
}

fn harmonic_closed(n: usize) -> f64 {
    (1..n).map(|t| (n - t) as f64 / t as f64).sum::<Kahan>().value()
}

/// Exact `S` as `sum_t (1/t) sum_i margin(i, i+t)`.
fn exact_s(kernel: &PairKernel, n: usize) -> Result<Option<BigRational>, CertifyError> {
    let Some(scale) = kernel.lattice_scale() else {
        return Ok(None);
    };
    let diagonals: Vec<Option<i128>> = (1..n)
        .into_par_iter()
        .map(|t| {
            let mut acc: i128 = 0;
            for i in 0..n - t {
                let (Some(f), Some(b)) = (kernel.lattice_dot(i, i + t), kernel.lattice_dot(i + t, i)) else {
                    return Ok(None);
                };
                let (f, b) = (f?, b?);
                let Some(next) = f.checked_sub(b).and_then(|m| acc.checked_add(m)) else {
                    return Ok(None);
                };
                acc = next;
            }
            Ok(Some(acc))
        })
        .collect::<Result<_, CertifyError>>()?;
    let Some(diagonals) = diagonals.into_iter().collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let mut total = BigRational::zero();
    for (t, sum) in (1..n).zip(diagonals) {
        if sum != 0 {
            total += BigRational::new(BigInt::from(sum), BigInt::from(t));
        }
    }
    Ok(Some(total / BigRational::from_integer(scale.clone())))
}

fn generic_s(kernel: &PairKernel, n: usize) -> Result<Value, CertifyError> {
    let diagonals: Vec<(Value, Kahan)> = (1..n)
        .into_par_iter()
        .map(|t| {
            let mut exact = Some(BigRational::zero());
            let mut float = Kahan::default();
            for i in 0..n - t {
                let m = kernel.dot(i, i + t)?.sub(&kernel.dot(i + t, i)?);
                float.add(m.to_f64());
                exact = match (exact, m) {
                    (Some(acc), Value::Exact(r)) => Some(acc + r),
                    _ => None,
                };
            }
            let exact = exact.map_or(Value::Float(float.value()), Value::Exact);
            Ok((exact, float))
        })
        .collect::<Result<_, CertifyError>>()?;
    if diagonals.iter().all(|(v, _)| v.is_exact()) {
        let mut total = BigRational::zero();
        for (t, (v, _)) in (1..n).zip(&diagonals) {
            total += v.as_exact().expect("exact") / BigRational::from_integer(t.into());
        }
        return Ok(Value::Exact(total));
    }
    let s = (1..n).zip(diagonals).map(|(t, (_, k))| k.value() / t as f64).sum::<Kahan>();
    Ok(Value::Float(s.value()))
}

/// Dense float copies of the vectors over a shared index.
fn densify(vectors: &[SparseVector], index: &HashMap<BasisLabel, usize>) -> Vec<Vec<(usize, f64)>> {
    vectors
        .iter()
        .map(|v| v.float_entries().into_iter().map(|(k, c)| (index[k], c)).collect())
        .collect()
}

fn label_index(vectors: &[&[SparseVector]]) -> HashMap<BasisLabel, usize> {
    let mut index = HashMap::new();
    for v in vectors.iter().flat_map(|s| s.iter()) {
        for l in v.labels() {
            let next = index.len();
            index.entry(l.clone()).or_insert(next);
        }
    }
    index
}

/// For each `i`: `(<x_i, z_i>, ||z_i||^2)` with `z_i = sum_j coeff(i, j) y_j`.
fn linearized(
    xs: &[SparseVector],
    ys: &[SparseVector],
    coeff: impl Fn(usize, usize) -> f64 + Sync,
) -> Vec<(f64, f64)> {
    let index = label_index(&[xs, ys]);
    let (xd, yd) = (densify(xs, &index), densify(ys, &index));
    let dim = index.len();
    (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let mut z = vec![0.0; dim];
            for (j, y) in yd.iter().enumerate() {
                let a = coeff(i, j);
                if a != 0.0 {
                    for &(k, c) in y {
                        z[k] += a * c;
                    }
                }
            }
            let xz = xd[i].iter().map(|&(k, c)| c * z[k]).sum::<Kahan>().value();
            let zz = z.iter().map(|c| c * c).sum::<Kahan>().value();
            (xz, zz)
        })
        .collect()
}

/// Evaluates the S-functional certificate on `w` in its stored order.
pub fn s_functional(w: &WitnessFamily) -> Result<SFunctionalReport, CertifyError> {
    let n = w.len();
    if n < 2 {
        return Err(CertifyError::NOutOfRange(n));
    }
    let (xs, ys) = (w.xs(), w.ys());
    let kernel = PairKernel::new(&xs, &ys);
    let s = match exact_s(&kernel, n)? {
        Some(r) => Value::Exact(r),
        None => generic_s(&kernel, n)?,
    };
    let b = |i: usize, j: usize| if i == j { 0.0 } else { 1.0 / (j as f64 - i as f64) };
    let lin = linearized(&xs, &ys, b);
    let linearized_s = lin.iter().map(|p| p.0).sum::<Kahan>().value();
    let z_norm_sq_sum = lin.iter().map(|p| p.1).sum::<Kahan>().value();
    let x_norm_sq_sum = xs.iter().map(|x| norm_squared(x).to_f64()).sum::<Kahan>().value();
    let y_norm_sq_sum = ys.iter().map(|y| norm_squared(y).to_f64()).sum::<Kahan>().value();
    let harmonic = harmonic_pairs(n);
    let s_f = s.to_f64();
    Ok(SFunctionalReport {
        n,
        pi_n: PI * n as f64,
        harmonic_pairs: harmonic,
        harmonic_closed: harmonic_closed(n),
        n_log_n: n as f64 * (n as f64).ln() - n as f64,
        epsilon_certified: s_f / harmonic,
        linearized_s,
        x_norm_sq_sum,
        y_norm_sq_sum,
        z_norm_sq_sum,
        cauchy_schwarz_bound: (x_norm_sq_sum * z_norm_sq_sum).sqrt(),
        s,
    })
}

/// `(sum_i ||sum_j a_ij y_j||^2, ||A||_op^2 sum_j ||y_j||^2)`.
pub fn vector_valued_bound_check(a: &DenseMatrix, ys: &[SparseVector]) -> Result<(f64, f64), CertifyError> {
    if ys.len() != a.n() {
        return Err(CertifyError::DimensionMismatch {
            expected: a.n(),
            got: ys.len(),
        });
    }
    let lhs = linearized(ys, ys, |i, j| a.get(i, j))
        .into_iter()
        .map(|p| p.1)
        .sum::<Kahan>()
        .value();
    let norm = operator_norm(a, 1e-10, 200_000)?.value;
    let y_sq = ys.iter().map(|y| norm_squared(y).to_f64()).sum::<Kahan>().value();
    Ok((lhs, norm * norm * y_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_tree_witness;
    use crate::linalg::Mode;

    #[test]
    fn small_hilbert_matrices() {
        let a = hilbert_matrix(2).unwrap();
        assert_eq!(a.row(0), &[0.0, -1.0]);
        assert_eq!(a.row(1), &[1.0, 0.0]);
        let a = hilbert_matrix(3).unwrap();
        assert_eq!(a.get(0, 2), -0.5);
        assert_eq!(a.get(2, 0), 0.5);
        assert!(a.is_skew());
        assert!(hilbert_matrix(1).is_err());
    }

    #[test]
    fn depth_one_s() {
        let w = build_tree_witness(1, Mode::Exact).unwrap();
        let r = s_functional(&w).unwrap();
        assert_eq!(r.s, Value::Exact(BigRational::from_integer(1.into())));
        assert_eq!(r.epsilon_certified, 1.0);
        assert_eq!(r.pi_n, 2.0 * PI);
        assert!((r.linearized_s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_and_float_agree() {
        let e = s_functional(&build_tree_witness(4, Mode::Exact).unwrap()).unwrap();
        let f = s_functional(&build_tree_witness(4, Mode::Float).unwrap()).unwrap();
        assert!(f.s.is_float());
        assert!((e.s_f64() - f.s_f64()).abs() < 1e-12);
        assert!((e.s_f64() - e.linearized_s).abs() < 1e-10);
        assert!(e.s_f64().abs() <= e.cauchy_schwarz_bound + 1e-9);
        assert!((e.harmonic_pairs - e.harmonic_closed).abs() < 1e-12);
    }

    #[test]
    fn zero_ys_give_zero() {
        let w = build_tree_witness(3, Mode::Exact)
            .unwrap()
            .scale_ys(&BigRational::zero())
            .unwrap();
        assert_eq!(s_functional(&w).unwrap().s, Value::zero());
    }

    #[test]
    fn vector_bound_identity() {
        let ys: Vec<SparseVector> = (0..3).map(|k| SparseVector::from_dense(&[k as f64 * 0.2, 0.1])).collect();
        let (lhs, rhs) = vector_valued_bound_check(&DenseMatrix::identity(3).unwrap(), &ys).unwrap();
        let direct: f64 = ys.iter().map(|y| norm_squared(y).to_f64()).sum();
        assert!((lhs - direct).abs() < 1e-15 && (rhs - direct).abs() < 1e-12);
        assert!(vector_valued_bound_check(&DenseMatrix::identity(2).unwrap(), &ys).is_err());
    }
}
