//! Least-norm point under linear inequalities, by the dual active-set method
//! of Goldfarb and Idnani with identity Hessian.
//!
//! Minimises `||y||^2 / 2` subject to `<a_i, y> >= b_i`. Every iterate has
//! the form `y = sum_k lambda_k a_k`, so the whole method runs on the Gram
//! matrix `G_ij = <a_i, a_j>`.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Ordered field operations needed by the solver.
pub trait Field: Clone + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    /// Sign with a tolerance for inexact fields.
    fn sign(&self) -> Ordering;
    fn less(&self, o: &Self) -> bool;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn sign(&self) -> Ordering {
        if self.abs() <= 1e-12 {
            Ordering::Equal
        } else {
            self.total_cmp(&0.0)
        }
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn sign(&self) -> Ordering {
        if self.is_zero() {
            Ordering::Equal
        } else if self.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome<F> {
    /// Multipliers `lambda` with `y = sum_i lambda_i a_i`.
    Optimal(Vec<F>),
    Infeasible,
    NotConverged(usize),
}

/// Solves `A x = rhs` for the symmetric positive definite `A`; `None` when
/// it is singular.
fn solve<F: Field>(mut a: Vec<Vec<F>>, mut rhs: Vec<F>) -> Option<Vec<F>> {
    let n = rhs.len();
    for col in 0..n {
        let p = (col..n).find(|&r| a[r][col].sign() != Ordering::Equal)?;
        a.swap(col, p);
        rhs.swap(col, p);
        for r in 0..n {
            if r != col && a[r][col].sign() != Ordering::Equal {
                let f = a[r][col].div(&a[col][col]);
                for c in col..n {
                    let v = a[r][c].sub(&f.mul(&a[col][c]));
                    a[r][c] = v;
                }
                rhs[r] = rhs[r].sub(&f.mul(&rhs[col]));
            }
        }
    }
    Some((0..n).map(|i| rhs[i].div(&a[i][i])).collect())
}

/// `min ||y||^2/2` s.t. `(G lambda)_i >= b_i`, over `y = sum lambda_k a_k`.
pub fn least_norm<F: Field>(gram: &[Vec<F>], b: &[F], max_iters: usize) -> QpOutcome<F> {
    let d = b.len();
    let mut lambda = vec![F::zero(); d];
    let mut active: Vec<usize> = Vec::new();
    let slack = |lambda: &[F], i: usize| -> F {
        let mut s = F::zero();
        for (k, l) in lambda.iter().enumerate() {
            if l.sign() != Ordering::Equal {
                s = s.add(&gram[i][k].mul(l));
            }
        }
        s.sub(&b[i])
    };

    let mut iters = 0;
    loop {
        // Most violated constraint, lowest index on ties.
        let mut worst: Option<(usize, F)> = None;
        for i in (0..d).filter(|i| !active.contains(i)) {
            let s = slack(&lambda, i);
            if s.sign() == Ordering::Less && worst.as_ref().is_none_or(|(_, w)| s.less(w)) {
                worst = Some((i, s));
            }
        }
        let Some((p, _)) = worst else {
            return QpOutcome::Optimal(lambda);
        };

        loop {
            iters += 1;
            if iters > max_iters {
                return QpOutcome::NotConverged(max_iters);
            }
            // r = G_AA^{-1} G_Ap; step direction z = a_p - sum_k r_k a_k.
            let g_aa: Vec<Vec<F>> = active
                .iter()
                .map(|&i| active.iter().map(|&j| gram[i][j].clone()).collect())
                .collect();
            let g_ap: Vec<F> = active.iter().map(|&i| gram[i][p].clone()).collect();
            let Some(r) = solve(g_aa, g_ap.clone()) else {
                return QpOutcome::NotConverged(iters);
            };
            let mut z_ap = gram[p][p].clone();
            for (rk, gk) in r.iter().zip(&g_ap) {
                z_ap = z_ap.sub(&rk.mul(gk));
            }

            // Partial step: largest move keeping active multipliers >= 0.
            let mut t1: Option<(F, usize)> = None;
            for (idx, rk) in r.iter().enumerate() {
                if rk.sign() == Ordering::Greater {
                    let ratio = lambda[active[idx]].div(rk);
                    if t1.as_ref().is_none_or(|(t, _)| ratio.less(t)) {
                        t1 = Some((ratio, idx));
                    }
                }
            }
            // Full step: makes constraint p tight.
            let t2 = (z_ap.sign() == Ordering::Greater).then(|| {
                let s = slack(&lambda, p);
                F::zero().sub(&s).div(&z_ap)
            });

            let (t, full) = match (&t1, &t2) {
                (None, None) => return QpOutcome::Infeasible,
                (Some((a, _)), Some(b)) => {
                    if b.less(a) || b.sub(a).sign() == Ordering::Equal {
                        (b.clone(), true)
                    } else {
                        (a.clone(), false)
                    }
                }
                (Some((a, _)), None) => (a.clone(), false),
                (None, Some(b)) => (b.clone(), true),
            };
            for (idx, rk) in r.iter().enumerate() {
                let k = active[idx];
                lambda[k] = lambda[k].sub(&t.mul(rk));
            }
            lambda[p] = lambda[p].add(&t);
            if full {
                active.push(p);
                break;
            }
            let (_, drop) = t1.expect("partial step has a blocking constraint");
            let k = active.remove(drop);
            lambda[k] = F::zero();
        }
    }
}
