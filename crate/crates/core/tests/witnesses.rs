//! Exact identities of the constructions, checked against independent
//! closed forms.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use stability_core::approx::{chebyshev_grid, chebyshev_interpolant, compute_ag, poly_eval, Connective};
use stability_core::certify::{hilbert_matrix, s_functional};
use stability_core::constructions::{
    build_shifted_witness, build_tree_witness, build_vc_witness, used_dimension, WitnessFamily,
};
use stability_core::linalg::{inner_product, norm_squared, operator_norm, BasisLabel, Mode, SparseVector};
use stability_core::predicates::{
    c_alpha_value, holder_gap_transfer, lipschitz_gap_transfer, shifted_gap, stability_bounds, Predicate,
};
use stability_core::scalar::{ExactScalar, Value};
use stability_core::vc::{
    check_vc_graph, min_norm_realizer, shattering_impossible, vc_dimension_formula, MinNorm,
};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact(v: Value) -> BigRational {
    v.as_exact().expect("exact value").clone()
}

fn all_pairs(w: &WitnessFamily, mut f: impl FnMut(usize, usize, BigRational, BigRational)) {
    let n = w.len();
    let p = w.pairs();
    for i in 0..n {
        for j in i + 1..n {
            let fwd = exact(inner_product(&p[i].0, &p[j].1).unwrap());
            let bwd = exact(inner_product(&p[j].0, &p[i].1).unwrap());
            f(i, j, fwd, bwd);
        }
    }
}

#[test]
fn tree_claims_hold_exactly() {
    for m in 1..=6 {
        let w = build_tree_witness(m, Mode::Exact).unwrap();
        assert_eq!(w.len(), 1 << m);
        let inv_m = q(1, m as i64);
        all_pairs(&w, |i, j, fwd, bwd| {
            assert_eq!(fwd, inv_m, "m={m} ({i},{j})");
            assert!(bwd.is_zero(), "m={m} ({i},{j})");
        });
    }
}

#[test]
fn shifted_claims_hold_exactly() {
    for m in 1..=5 {
        let w = build_shifted_witness(m, Mode::Exact).unwrap();
        let hi = q(1, 2) + q(1, 2 * m as i64);
        all_pairs(&w, |_, _, fwd, bwd| {
            assert_eq!(fwd, hi);
            assert_eq!(bwd, q(1, 2));
        });
    }
}

#[test]
fn inner_products_have_small_denominators() {
    for m in 1..=5u32 {
        for (w, modulus) in [
            (build_tree_witness(m, Mode::Exact).unwrap(), 2 * m as i64),
            (build_shifted_witness(m, Mode::Exact).unwrap(), 2 * m as i64),
        ] {
            let p = w.pairs();
            for (x, _) in p {
                for (_, y) in p {
                    let r = exact(inner_product(x, y).unwrap());
                    assert!((BigInt::from(modulus) % r.denom()).is_zero(), "{r}");
                }
            }
        }
    }
}

#[test]
fn vectors_lie_in_the_unit_ball_and_obey_cauchy_schwarz() {
    for m in 1..=5 {
        for w in [build_tree_witness(m, Mode::Exact).unwrap(), build_shifted_witness(m, Mode::Exact).unwrap()] {
            for (x, y) in w.pairs() {
                let (nx, ny) = (exact(norm_squared(x)), exact(norm_squared(y)));
                assert!(nx <= BigRational::one() && ny <= BigRational::one());
                let ip = exact(inner_product(x, y).unwrap());
                assert!(&ip * &ip <= nx * ny);
            }
        }
    }
}

#[test]
fn tree_uses_every_edge() {
    for m in 1..=10u32 {
        let w = build_tree_witness(m, Mode::Exact).unwrap();
        let expected = (1usize << (m + 1)) - 2;
        assert_eq!(used_dimension(&w), expected);
        assert_eq!(w.basis().len(), expected);
    }
}

#[test]
fn vc_witness_margins_are_exact() {
    for (d, eps) in [(3u32, q(1, 2)), (4, q(1, 1)), (9, q(2, 3))] {
        let w = build_vc_witness(d, &eps).unwrap();
        let half = &eps / BigRational::from_integer(2.into());
        for (mask, y) in &w.realizers {
            for (i, x) in w.points.iter().enumerate() {
                let v = exact(inner_product(x, y).unwrap());
                let expected = if mask >> i & 1 == 1 { half.clone() } else { -half.clone() };
                assert_eq!(v, expected);
            }
        }
    }
}

#[test]
fn vc_formula_is_two_sided_for_small_dimensions() {
    for dim in 1..=4u64 {
        for eps in [q(1, 2), q(1, 1)] {
            let d = vc_dimension_formula(dim, &eps).unwrap();
            let w = build_vc_witness(d as u32, &eps).unwrap();
            let r = check_vc_graph(&w.points, &w.realizers, &w.threshold, &w.epsilon, 0.0).unwrap();
            assert!(r.shattered && r.exact, "dim={dim} eps={eps}");
            if d + 1 > dim {
                assert!(shattering_impossible(d + 1, dim));
                // e_1..e_dim plus their average: the pattern taking every
                // basis point forces the average above the threshold.
                let mut points: Vec<SparseVector> = (1..=dim).map(|i| SparseVector::basis(i, Mode::Exact)).collect();
                points.push(SparseVector::from_exact(
                    (1..=dim).map(|i| (BasisLabel::Key(i), ExactScalar::rational(q(1, dim as i64)))),
                ));
                let all_basis = (1u64 << dim) - 1;
                assert_eq!(
                    min_norm_realizer(&points, all_basis, &w.threshold, &eps).unwrap(),
                    MinNorm::Infeasible
                );
            }
        }
    }
}

#[test]
fn shattering_impossible_above_rank() {
    for d in 1..=30u64 {
        for r in 0..d {
            assert!(shattering_impossible(d, r), "d={d} r={r}");
        }
        assert!(!shattering_impossible(d, d));
    }
}

#[test]
fn hilbert_norm_closed_forms() {
    // n = 2: [[0,-1],[1,0]] has norm 1.
    let e = operator_norm(&hilbert_matrix(2).unwrap(), 1e-12, 10_000).unwrap();
    assert!((e.value - 1.0).abs() < 1e-12);
    // n = 3: a skew 3x3 matrix has singular value sqrt(sum of squared entries above the diagonal).
    let e = operator_norm(&hilbert_matrix(3).unwrap(), 1e-12, 10_000).unwrap();
    assert!((e.value - 1.5).abs() < 1e-10);
    // n = 4: singular values s1, s2 with s1^2 + s2^2 = sum a_ij^2 (i<j) and s1 s2 = |Pf(A)|.
    let a = hilbert_matrix(4).unwrap();
    let sum: f64 = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).map(|(i, j)| a.get(i, j).powi(2)).sum();
    let pf = a.get(0, 1) * a.get(2, 3) - a.get(0, 2) * a.get(1, 3) + a.get(0, 3) * a.get(1, 2);
    let top = ((sum + (sum * sum - 4.0 * pf * pf).sqrt()) / 2.0).sqrt();
    let e = operator_norm(&a, 1e-12, 10_000).unwrap();
    assert!((e.value - top).abs() < 1e-9, "{} vs {top}", e.value);
}

#[test]
fn s_functional_squeeze_small_depths() {
    for m in 2..=6u32 {
        let w = build_tree_witness(m, Mode::Exact).unwrap();
        let r = s_functional(&w).unwrap();
        let s = r.s_f64();
        assert!(s >= r.harmonic_pairs / m as f64 - 1e-9);
        assert!(s <= r.pi_n + 1e-9);
        assert!((s - r.linearized_s).abs() < 1e-9);
        // Every margin is exactly 1/m, so S equals the harmonic pair sum over m.
        let n = w.len() as i64;
        let mut harmonic = BigRational::zero();
        for t in 1..n {
            harmonic += q(n - t, t);
        }
        assert_eq!(r.s, Value::Exact(harmonic / BigRational::from_integer(m.into())));
    }
}

#[test]
fn convexity_gap_beats_c_alpha_over_m() {
    for alpha in [1.5, 2.0, 3.0, 5.0] {
        for m in 1..=64u32 {
            let gap = shifted_gap(&Predicate::PowerPlus(alpha), m);
            assert!(!gap.is_float(), "alpha={alpha} not decided rigorously");
            let bound = c_alpha_value(alpha).scale(&q(1, m as i64));
            assert!(gap.at_least(&bound, 0.0), "alpha={alpha} m={m}: {gap} < {bound}");
        }
    }
}

#[test]
fn gap_transfers_hold_on_a_grid() {
    let n = 100;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    for beta in [0.25, 0.5, 0.75, 1.0] {
        for eps in [0.05, 0.2, 0.5] {
            let need = holder_gap_transfer(eps, beta).unwrap();
            for &s in &grid {
                for &t in grid.iter().filter(|&&t| t >= s) {
                    if t.powf(beta) - s.powf(beta) >= eps {
                        assert!(t - s >= need - 1e-12, "beta={beta} s={s} t={t}");
                    }
                }
            }
        }
    }
    for alpha in [1.0, 1.5, 2.0, 3.0] {
        assert_eq!(lipschitz_gap_transfer(0.3, alpha).unwrap(), 0.3 / alpha);
        for &s in &grid {
            for &t in &grid {
                assert!((t.powf(alpha) - s.powf(alpha)).abs() <= alpha * (t - s).abs() + 1e-12);
            }
        }
    }
}

#[test]
fn stability_bounds_are_ordered() {
    let predicates = [
        Predicate::Inner,
        Predicate::PowerPlus(0.5),
        Predicate::PowerPlus(1.0),
        Predicate::PowerPlus(2.0),
        Predicate::PowerPlus(3.0),
        Predicate::IntPower(2),
        Predicate::IntPower(3),
    ];
    for p in &predicates {
        for k in 1..=8 {
            let eps = 0.5f64.powi(k);
            let b = stability_bounds(p, eps).unwrap();
            assert!(b.ln_k_lower <= b.ln_k_upper, "{p} eps={eps}");
        }
    }
}

#[test]
fn lp_beats_the_chebyshev_interpolant() {
    for (g, degree, eta) in [
        (Connective::Abs, 16, 0.05),
        (Connective::ReluShift(0.25), 16, 0.05),
        (Connective::Poly(vec![0.1, 0.0, 0.0, 1.0]), 3, 0.01),
    ] {
        let grid = 129;
        let interp = chebyshev_interpolant(&g, degree);
        let pts = chebyshev_grid(grid);
        let interp_err = pts.iter().map(|&t| (g.eval(t) - poly_eval(&interp, t)).abs()).fold(0.0, f64::max);
        let r = compute_ag(&g, eta, degree, grid).unwrap();
        assert!(r.sup_error_on_grid <= eta + 1e-9);
        for &t in &pts {
            assert!((g.eval(t) - poly_eval(&r.coefficients, t)).abs() <= eta + 1e-9);
        }
        if interp_err <= eta {
            let interp_mass: f64 = interp[1..].iter().map(|c| c.abs()).sum();
            assert!(r.a_estimate <= interp_mass + 1e-9, "{g}: {} > {interp_mass}", r.a_estimate);
        }
    }
}
