//! Margin-shattering of point sets by unit-ball linear functionals.
//!
//! A set `x_1..x_d` is shattered at threshold `s` with margin `eps` when every
//! subset `S` has some `||y|| <= 1` with `<x_i, y> >= s` on `S` and
//! `<x_i, y> <= s - eps` off `S`.

pub mod qp;

pub use qp::{least_norm, QpOutcome};

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::certify::Kahan;
use crate::constructions::MAX_VC_POINTS;
use crate::linalg::{in_unit_ball, inner_product, norm_squared, BasisLabel, LinalgError, SparseVector};
use crate::scalar::{rational_to_f64, Value};

/// Largest point set handed to the least-norm solver.
pub const MAX_QP_POINTS: usize = 16;
/// Largest point set averaged over every sign pattern.
pub const MAX_EXHAUSTIVE_SIGNS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VcError {
    #[error("no realizer supplied for subset mask {0:#x}")]
    MissingRealizer(u64),
    #[error("{got} points exceed the cap of {cap}")]
    TooManyPoints { got: usize, cap: usize },
    #[error("margin must lie in (0, 1], got {0}")]
    InvalidEpsilon(String),
    #[error("least-norm solver stopped after {0} iterations")]
    NotConverged(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcReport {
    pub d: usize,
    pub epsilon: BigRational,
    pub threshold: BigRational,
    pub realized_patterns: u64,
    pub total_patterns: u64,
    pub shattered: bool,
    /// Number of distinct basis labels carried by the points.
    pub upper_bound_dim: usize,
    /// `4 / eps^2`.
    pub upper_bound_margin: f64,
    /// Up to sixteen subset masks that were not realized.
    pub failures: Vec<u64>,
    /// Every comparison was decided in exact arithmetic.
    pub exact: bool,
}

fn check_epsilon(epsilon: &BigRational) -> Result<(), VcError> {
    if !epsilon.is_positive() || epsilon > &BigRational::one() {
        return Err(VcError::InvalidEpsilon(epsilon.to_string()));
    }
    Ok(())
}

fn distinct_labels(points: &[SparseVector]) -> usize {
    let mut labels: Vec<&BasisLabel> = points.iter().flat_map(|p| p.labels()).collect();
    labels.sort();
    labels.dedup();
    labels.len()
}

/// Checks every subset mask against its supplied realizer. Bit `i` of a mask
/// selects `points[i]`. With no points the empty subset is realized
/// vacuously.
pub fn check_vc_graph(
    points: &[SparseVector],
    realizers: &BTreeMap<u64, SparseVector>,
    threshold: &BigRational,
    epsilon: &BigRational,
    tol: f64,
) -> Result<VcReport, VcError> {
    check_epsilon(epsilon)?;
    let d = points.len();
    if d > MAX_VC_POINTS as usize {
        return Err(VcError::TooManyPoints {
            got: d,
            cap: MAX_VC_POINTS as usize,
        });
    }
    let total = 1u64 << d;
    let hi = Value::Exact(threshold.clone());
    let lo = Value::Exact(threshold - epsilon);
    let outcomes: Vec<(bool, bool)> = if d == 0 {
        vec![(true, true)]
    } else {
        (0..total)
            .into_par_iter()
            .map(|mask| {
                let y = realizers.get(&mask).ok_or(VcError::MissingRealizer(mask))?;
                let mut exact = matches!(norm_squared(y), Value::Exact(_));
                let mut ok = in_unit_ball(y, tol);
                for (i, x) in points.iter().enumerate() {
                    if !ok {
                        break;
                    }
                    let v = inner_product(x, y)?;
                    exact &= v.is_exact();
                    ok = if mask >> i & 1 == 1 {
                        v.at_least(&hi, tol)
                    } else {
                        lo.at_least(&v, tol)
                    };
                }
                Ok((ok, exact))
            })
            .collect::<Result<_, VcError>>()?
    };
    let realized = outcomes.iter().filter(|o| o.0).count() as u64;
    let failures = (0..total).filter(|&m| !outcomes[m as usize].0).take(16).collect();
    Ok(VcReport {
        d,
        epsilon: epsilon.clone(),
        threshold: threshold.clone(),
        realized_patterns: realized,
        total_patterns: total,
        shattered: realized == total,
        upper_bound_dim: distinct_labels(points),
        upper_bound_margin: 4.0 / rational_to_f64(&(epsilon * epsilon)),
        failures,
        exact: outcomes.iter().all(|o| o.1),
    })
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `sum_{j <= min(r, d)} C(d, j)`: an upper bound on the number of sign
/// patterns linear threshold functionals induce on `d` points of rank `r`.
pub fn zaslavsky_cells(d: u64, r: u64) -> BigUint {
    (0..=r.min(d)).map(|j| binomial(d, j)).sum()
}

/// Whether `d` points spanning rank `r` have too few sign cells to be
/// shattered by linear functionals.
pub fn shattering_impossible(d: u64, r: u64) -> bool {
    zaslavsky_cells(d, r) < BigUint::one() << d
}

/// `min(dim, floor(4 / eps^2))`.
pub fn vc_dimension_formula(dim: u64, epsilon: &BigRational) -> Result<u64, VcError> {
    check_epsilon(epsilon)?;
    let (n, d) = (epsilon.numer(), epsilon.denom());
    let bound = (d * d * 4u32).div_floor(&(n * n));
    Ok(bound.to_u64().map_or(dim, |b| b.min(dim)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMethod {
    Exhaustive,
    MonteCarlo { trials: usize, seed: u64 },
}

/// The averaging argument bounding a shattered set: over uniform signs,
/// `E ||sum sigma_i x_i||^2 = sum ||x_i||^2 <= d`, while shattering with
/// margin `eps` forces `E ||sum sigma_i x_i||^2 >= (d eps / 2)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingReport {
    pub d: usize,
    pub sum_norm_sq: f64,
    /// Mean of `||sum sigma_i x_i||^2` over the sign patterns visited.
    pub mean_sq: f64,
    /// `d^2 eps^2 / 4`.
    pub lower_bound: f64,
    pub method: AveragingMethod,
}

impl AveragingReport {
    /// Whether the shattering lower bound is compatible with the mean.
    pub fn consistent(&self, tol: f64) -> bool {
        self.lower_bound <= self.mean_sq + tol
    }
}

pub fn averaging_upper_check(
    points: &[SparseVector],
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> AveragingReport {
    let d = points.len();
    let mut index: HashMap<&BasisLabel, usize> = HashMap::new();
    let dense: Vec<Vec<(usize, f64)>> = points
        .iter()
        .map(|p| {
            p.float_entries()
                .into_iter()
                .map(|(k, c)| {
                    let next = index.len();
                    (*index.entry(k).or_insert(next), c)
                })
                .collect()
        })
        .collect();
    let dim = index.len();
    let sum_norm_sq = dense
        .iter()
        .flat_map(|p| p.iter().map(|&(_, c)| c * c))
        .sum::<Kahan>()
        .value();

    let (mean_sq, method) = if d <= MAX_EXHAUSTIVE_SIGNS {
        // Gray code: flip one sign per step and update ||sum||^2 in place.
        let mut sum = vec![0.0; dim];
        let mut sign = vec![1.0; d];
        for p in &dense {
            for &(k, c) in p {
                sum[k] += c;
            }
        }
        let mut sq: f64 = sum.iter().map(|c| c * c).sum();
        let mut acc = Kahan::default();
        acc.add(sq);
        for step in 1u64..(1 << d) {
            let i = step.trailing_zeros() as usize;
            let f = -2.0 * sign[i];
            sign[i] = -sign[i];
            for &(k, c) in &dense[i] {
                let old = sum[k];
                sum[k] += f * c;
                sq += sum[k] * sum[k] - old * old;
            }
            if step % 4096 == 0 {
                sq = sum.iter().map(|c| c * c).sum();
            }
            acc.add(sq);
        }
        (acc.value() / (1u64 << d) as f64, AveragingMethod::Exhaustive)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = Kahan::default();
        let trials = trials.max(1);
        for _ in 0..trials {
            let mut sum = vec![0.0; dim];
            for p in &dense {
                let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                for &(k, c) in p {
                    sum[k] += s * c;
                }
            }
            acc.add(sum.iter().map(|c| c * c).sum());
        }
        (acc.value() / trials as f64, AveragingMethod::MonteCarlo { trials, seed })
    };

    AveragingReport {
        d,
        sum_norm_sq,
        mean_sq,
        lower_bound: (d as f64 * epsilon).powi(2) / 4.0,
        method,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinNorm {
    Feasible {
        y: SparseVector,
        norm_sq: Value,
        /// Multiplier of each point constraint; nonzero only on tight ones.
        multipliers: Vec<f64>,
    },
    Infeasible,
}

impl MinNorm {
    /// Whether the least-norm realizer lies in the unit ball.
    pub fn realizable(&self, tol: f64) -> bool {
        match self {
            MinNorm::Feasible { norm_sq, .. } => norm_sq.at_least(&Value::Exact(BigRational::zero()), 0.0)
                && Value::Exact(BigRational::one()).at_least(norm_sq, tol),
            MinNorm::Infeasible => false,
        }
    }
}

/// Least-norm `y` with `<x_i, y> >= s` for `i` in `pattern` and
/// `<x_i, y> <= s - eps` otherwise. Exact when every point is exact.
pub fn min_norm_realizer(
    points: &[SparseVector],
    pattern: u64,
    threshold: &BigRational,
    epsilon: &BigRational,
) -> Result<MinNorm, VcError> {
    check_epsilon(epsilon)?;
    let d = points.len();
    if d > MAX_QP_POINTS {
        return Err(VcError::TooManyPoints {
            got: d,
            cap: MAX_QP_POINTS,
        });
    }
    let inside = |i: usize| pattern >> i & 1 == 1;
    // Constraint i reads <sigma_i x_i, y> >= b_i.
    let sigma: Vec<BigRational> = (0..d)
        .map(|i| BigRational::from_integer(if inside(i) { 1 } else { -1 }.into()))
        .collect();
    let b: Vec<BigRational> = (0..d)
        .map(|i| if inside(i) { threshold.clone() } else { epsilon - threshold })
        .collect();
    let mut gram = vec![vec![Value::zero(); d]; d];
    for i in 0..d {
        for j in i..d {
            let g = inner_product(&points[i], &points[j])?.scale(&(&sigma[i] * &sigma[j]));
            gram[i][j] = g.clone();
            gram[j][i] = g;
        }
    }
    let max_iters = 50 * (d + 1) * (d + 1);
    let exact_gram: Option<Vec<Vec<BigRational>>> = gram
        .iter()
        .map(|row| row.iter().map(|v| v.as_exact().cloned()).collect())
        .collect();

    let multipliers: Vec<BigRational> = match exact_gram {
        Some(g) => match least_norm(&g, &b, max_iters) {
            QpOutcome::Optimal(l) => l,
            QpOutcome::Infeasible => return Ok(MinNorm::Infeasible),
            QpOutcome::NotConverged(n) => return Err(VcError::NotConverged(n)),
        },
        None => {
            let g: Vec<Vec<f64>> = gram.iter().map(|r| r.iter().map(Value::to_f64).collect()).collect();
            let bf: Vec<f64> = b.iter().map(rational_to_f64).collect();
            match least_norm(&g, &bf, max_iters) {
                QpOutcome::Optimal(l) => l
                    .into_iter()
                    .map(|x| BigRational::from_float(x).unwrap_or_else(BigRational::zero))
                    .collect(),
                QpOutcome::Infeasible => return Ok(MinNorm::Infeasible),
                QpOutcome::NotConverged(n) => return Err(VcError::NotConverged(n)),
            }
        }
    };

    let mode = points.first().map_or(crate::linalg::Mode::Exact, SparseVector::mode);
    let mut y = SparseVector::zero(mode);
    for (i, l) in multipliers.iter().enumerate() {
        if !l.is_zero() {
            y = y.combine(&BigRational::one(), &points[i], &(l * &sigma[i]))?;
        }
    }
    let norm_sq = norm_squared(&y);
    Ok(MinNorm::Feasible {
        y,
        norm_sq,
        multipliers: multipliers.iter().map(rational_to_f64).collect(),
    })
}

/// Number of subsets realizable in the unit ball, by the least-norm solver.
pub fn realizable_patterns(
    points: &[SparseVector],
    threshold: &BigRational,
    epsilon: &BigRational,
    tol: f64,
) -> Result<u64, VcError> {
    if points.len() > MAX_QP_POINTS {
        return Err(VcError::TooManyPoints {
            got: points.len(),
            cap: MAX_QP_POINTS,
        });
    }
    let counts: Vec<bool> = (0..1u64 << points.len())
        .into_par_iter()
        .map(|mask| Ok(min_norm_realizer(points, mask, threshold, epsilon)?.realizable(tol)))
        .collect::<Result<_, VcError>>()?;
    Ok(counts.into_iter().filter(|&r| r).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_vc_witness;
    use crate::linalg::Mode;
    use crate::scalar::ExactScalar;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn witness_is_shattered() {
        for (d, eps) in [(1, q(1, 2)), (2, q(1, 2)), (4, q(1, 1)), (5, q(1, 3))] {
            let w = build_vc_witness(d, &eps).unwrap();
            let r = check_vc_graph(&w.points, &w.realizers, &w.threshold, &w.epsilon, 0.0).unwrap();
            assert!(r.shattered, "d={d}");
            assert!(r.exact);
            assert_eq!(r.realized_patterns, 1 << d);
            assert_eq!(r.upper_bound_dim, d as usize);
        }
    }

    #[test]
    fn empty_set_is_shattered() {
        let r = check_vc_graph(&[], &BTreeMap::new(), &q(1, 4), &q(1, 2), 0.0).unwrap();
        assert!(r.shattered);
        assert_eq!(r.realized_patterns, 1);
    }

    #[test]
    fn missing_and_broken_realizers() {
        let mut w = build_vc_witness(2, &q(1, 2)).unwrap();
        w.realizers.remove(&3);
        assert_eq!(
            check_vc_graph(&w.points, &w.realizers, &w.threshold, &w.epsilon, 0.0),
            Err(VcError::MissingRealizer(3))
        );
        w.realizers.insert(3, SparseVector::zero(Mode::Exact));
        let r = check_vc_graph(&w.points, &w.realizers, &w.threshold, &w.epsilon, 0.0).unwrap();
        assert_eq!((r.realized_patterns, r.failures.clone()), (3, vec![3]));
    }

    #[test]
    fn cell_counts() {
        assert_eq!(zaslavsky_cells(3, 2), BigUint::from(7u32));
        assert_eq!(zaslavsky_cells(3, 3), BigUint::from(8u32));
        assert_eq!(zaslavsky_cells(10, 0), BigUint::from(1u32));
        assert!(shattering_impossible(3, 2));
        assert!(!shattering_impossible(2, 2));
        assert!(shattering_impossible(17, 16));
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(vc_dimension_formula(100, &q(1, 2)).unwrap(), 16);
        assert_eq!(vc_dimension_formula(2, &q(1, 2)).unwrap(), 2);
        assert_eq!(vc_dimension_formula(100, &q(1, 1)).unwrap(), 4);
        assert_eq!(vc_dimension_formula(100, &q(2, 3)).unwrap(), 9);
        assert_eq!(vc_dimension_formula(100, &q(3, 5)).unwrap(), 11);
        assert!(vc_dimension_formula(3, &q(0, 1)).is_err());
        assert!(vc_dimension_formula(3, &q(3, 2)).is_err());
    }

    #[test]
    fn averaging_identity() {
        let w = build_vc_witness(6, &q(1, 2)).unwrap();
        let r = averaging_upper_check(&w.points, 0.5, 0, 1);
        assert_eq!(r.method, AveragingMethod::Exhaustive);
        assert!((r.mean_sq - 6.0).abs() < 1e-12 && r.sum_norm_sq == 6.0);
        assert!(r.consistent(0.0));
        // Non-orthogonal points: the cross terms average out.
        let pts = vec![SparseVector::from_dense(&[0.6, 0.8]), SparseVector::from_dense(&[1.0, 0.0])];
        let r = averaging_upper_check(&pts, 0.5, 0, 1);
        assert!((r.mean_sq - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let pts: Vec<SparseVector> = (1..=24u64).map(|i| SparseVector::basis(i, Mode::Float)).collect();
        let a = averaging_upper_check(&pts, 0.1, 200, 7);
        let b = averaging_upper_check(&pts, 0.1, 200, 7);
        assert_eq!(a, b);
        // Orthonormal points give ||sum||^2 = d for every sign pattern.
        assert!((a.mean_sq - 24.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_matches_witness() {
        let w = build_vc_witness(3, &q(1, 2)).unwrap();
        for mask in 0..8 {
            let r = min_norm_realizer(&w.points, mask, &w.threshold, &w.epsilon).unwrap();
            let MinNorm::Feasible { y, norm_sq, .. } = &r else {
                panic!("infeasible")
            };
            assert_eq!(y, &w.realizers[&mask]);
            assert_eq!(norm_sq, &Value::Exact(q(3, 16)));
            assert!(r.realizable(0.0));
        }
        assert_eq!(realizable_patterns(&w.points, &w.threshold, &w.epsilon, 0.0).unwrap(), 8);
    }

    #[test]
    fn extra_point_breaks_shattering() {
        // Three points in the plane: the pattern {1, 2} forces the third
        // inner product above the threshold.
        let mut pts: Vec<SparseVector> = (1..=2u64).map(|i| SparseVector::basis(i, Mode::Exact)).collect();
        pts.push(SparseVector::from_exact([
            (BasisLabel::Key(1), ExactScalar::rational(q(3, 5))),
            (BasisLabel::Key(2), ExactScalar::rational(q(4, 5))),
        ]));
        let (s, eps) = (q(1, 4), q(1, 2));
        assert_eq!(min_norm_realizer(&pts, 0b011, &s, &eps).unwrap(), MinNorm::Infeasible);
        assert!(realizable_patterns(&pts, &s, &eps, 0.0).unwrap() < 8);
    }

    #[test]
    fn float_points_use_float_solver() {
        let pts: Vec<SparseVector> = (1..=3u64).map(|i| SparseVector::basis(i, Mode::Float)).collect();
        let r = min_norm_realizer(&pts, 0b101, &q(1, 4), &q(1, 2)).unwrap();
        let MinNorm::Feasible { norm_sq, .. } = r else {
            panic!("infeasible")
        };
        assert!((norm_sq.to_f64() - 3.0 / 16.0).abs() < 1e-12);
    }
}
