use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use stability_core::approx::{block_embedding_check, compute_ag, Connective};
use stability_core::certify::{
    check_pairs, hilbert_matrix, max_half_graph, s_functional, CheckOptions, SearchMethod,
};
use stability_core::constructions::build_tree_witness;
use stability_core::linalg::{
    inner_product, materialize_tensor_power, norm_squared, operator_norm, BasisLabel, Mode, SparseVector,
};
use stability_core::predicates::{evaluate, Predicate};
use stability_core::scalar::{ExactScalar, Value};
use stability_core::vc::{averaging_upper_check, min_norm_realizer, MinNorm};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact_vector() -> impl Strategy<Value = SparseVector> {
    prop::collection::btree_map(1u64..8, (-6i64..=6, 1i64..=6), 0..5).prop_map(|m| {
        SparseVector::from_exact(m.into_iter().map(|(k, (n, d))| (BasisLabel::Key(k), ExactScalar::rational(q(n, d)))))
    })
}

/// Float vector with at most `nnz` nonzeros, scaled into the unit ball.
fn unit_ball_vector(dim: u64, nnz: usize) -> impl Strategy<Value = SparseVector> {
    (prop::collection::btree_map(1..=dim, -1.0f64..1.0, 1..=nnz), 0.0f64..=1.0).prop_map(|(m, r)| {
        let norm = m.values().map(|c| c * c).sum::<f64>().sqrt();
        let s = if norm > 0.0 { r / norm } else { 0.0 };
        SparseVector::from_float(m.into_iter().map(|(k, c)| (BasisLabel::Key(k), c * s)))
    })
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-8i64..=8, 1i64..=8).prop_map(|(n, d)| q(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bilinearity(x in exact_vector(), y in exact_vector(), z in exact_vector(), a in rational(), b in rational()) {
        let lhs = inner_product(&x.combine(&a, &y, &b).unwrap(), &z).unwrap();
        let ix = inner_product(&x, &z).unwrap().as_exact().unwrap().clone();
        let iy = inner_product(&y, &z).unwrap().as_exact().unwrap().clone();
        prop_assert_eq!(lhs, Value::Exact(a * ix + b * iy));
    }

    #[test]
    fn cauchy_schwarz_exact(x in exact_vector(), y in exact_vector()) {
        let ip = inner_product(&x, &y).unwrap().as_exact().unwrap().clone();
        let nx = norm_squared(&x).as_exact().unwrap().clone();
        let ny = norm_squared(&y).as_exact().unwrap().clone();
        prop_assert!(&ip * &ip <= nx * ny);
    }

    #[test]
    fn tensor_identity(x in unit_ball_vector(6, 4), y in unit_ball_vector(6, 4), d in 1u32..=5) {
        let implicit = stability_core::linalg::tensor_power_inner(&x, &y, d).unwrap();
        let tx = materialize_tensor_power(&x, d, 1 << 12).unwrap();
        let ty = materialize_tensor_power(&y, d, 1 << 12).unwrap();
        let explicit = inner_product(&tx, &ty).unwrap().to_f64();
        prop_assert!((implicit - explicit).abs() <= 1e-12);
    }

    #[test]
    fn int_power_matches_tensor_inner(x in unit_ball_vector(5, 4), y in unit_ball_vector(5, 4), d in 1u32..=6) {
        let via_predicate = evaluate(&Predicate::IntPower(d), &x, &y).unwrap().to_f64();
        let via_tensor = stability_core::linalg::tensor_power_inner(&x, &y, d).unwrap();
        prop_assert_eq!(via_predicate.to_bits(), via_tensor.to_bits());
    }

    #[test]
    fn principal_submatrix_norm_is_smaller(n in 2usize..48, k in 1usize..48) {
        let k = k.min(n);
        let a = hilbert_matrix(n).unwrap();
        let full = operator_norm(&a, 1e-10, 100_000).unwrap();
        let sub = operator_norm(&a.leading_principal(k).unwrap(), 1e-10, 100_000).unwrap();
        prop_assert!(sub.value <= full.value + 1e-8, "{} > {}", sub.value, full.value);
    }

    #[test]
    fn margins_negate_under_swap(
        a in (unit_ball_vector(4, 4), unit_ball_vector(4, 4)),
        b in (unit_ball_vector(4, 4), unit_ball_vector(4, 4)),
        eps in 0.001f64..0.5,
    ) {
        let eps = Value::Float(eps);
        let opts = CheckOptions::default();
        let ab = check_pairs(&[a.clone(), b.clone()], &Predicate::Inner, &eps, opts).unwrap();
        let ba = check_pairs(&[b, a], &Predicate::Inner, &eps, opts).unwrap();
        let (m1, m2) = (ab.margin_min.unwrap().to_f64(), ba.margin_min.unwrap().to_f64());
        prop_assert!((m1 + m2).abs() < 1e-15);
        prop_assert!(!(ab.is_half_graph && ba.is_half_graph));
    }

    #[test]
    fn s_functional_scales_linearly(m in 2u32..=5, num in 0i64..=6, den in 1i64..=6) {
        let lambda = q(num.min(den), den);
        let w = build_tree_witness(m, Mode::Exact).unwrap();
        let base = s_functional(&w).unwrap().s.as_exact().unwrap().clone();
        let scaled = s_functional(&w.scale_ys(&lambda).unwrap()).unwrap().s;
        prop_assert_eq!(scaled, Value::Exact(base * lambda));
    }

    #[test]
    fn block_embedding_identity(
        coeffs in prop::collection::vec(-1.0f64..1.0, 2..=5),
        x in unit_ball_vector(3, 3),
        y in unit_ball_vector(3, 3),
    ) {
        prop_assume!(coeffs[1..].iter().any(|c| *c != 0.0));
        let r = block_embedding_check(&coeffs, &x, &y).unwrap();
        prop_assert!((r.lhs - r.rhs).abs() <= 1e-10);
        prop_assert!(r.x_norm_sq <= r.budget + 1e-12);
        prop_assert!(r.y_norm_sq <= r.budget + 1e-12);
    }

    #[test]
    fn exhaustive_averaging_cancels_cross_terms(points in prop::collection::vec(unit_ball_vector(6, 4), 1..=12)) {
        let r = averaging_upper_check(&points, 0.5, 0, 0);
        prop_assert!((r.mean_sq - r.sum_norm_sq).abs() <= 1e-12, "{} vs {}", r.mean_sq, r.sum_norm_sq);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn brute_force_dominates_greedy(
        pairs in prop::collection::vec((unit_ball_vector(3, 3), unit_ball_vector(3, 3)), 2..=8),
        eps in 0.01f64..0.3,
    ) {
        let eps = Value::Float(eps);
        let opts = CheckOptions::default();
        let brute = max_half_graph(&pairs, &Predicate::Inner, &eps, SearchMethod::BruteForce, opts).unwrap();
        let greedy = max_half_graph(&pairs, &Predicate::Inner, &eps, SearchMethod::Greedy, opts).unwrap();
        prop_assert!(brute.k >= greedy.k);
        for r in [brute, greedy] {
            let chosen: Vec<_> = r.ordering.iter().map(|&i| pairs[i].clone()).collect();
            prop_assert!(check_pairs(&chosen, &Predicate::Inner, &eps, opts).unwrap().is_half_graph);
        }
    }

    #[test]
    fn orthonormal_patterns_have_equal_norm(d in 1usize..=8, den in 1i64..=4) {
        // eps = 1/den, kept within d eps^2 <= 4.
        let eps = q(1, den);
        prop_assume!(BigRational::from_integer(d.into()) * &eps * &eps <= q(4, 1));
        let points: Vec<SparseVector> = (1..=d as u64).map(|i| SparseVector::basis(i, Mode::Exact)).collect();
        let s = &eps / BigRational::from_integer(2.into());
        let expected = BigRational::from_integer(d.into()) * &eps * &eps / BigRational::from_integer(4.into());
        for mask in 0..(1u64 << d) {
            let MinNorm::Feasible { norm_sq, .. } = min_norm_realizer(&points, mask, &s, &eps).unwrap() else {
                return Err(TestCaseError::fail("infeasible pattern"));
            };
            prop_assert_eq!(norm_sq, Value::Exact(expected.clone()));
        }
    }
}

#[test]
fn grid_refinement_never_lowers_the_estimate() {
    for g in [Connective::Abs, Connective::ReluShift(0.25), Connective::Poly(vec![0.0, 0.5, 0.0, -0.5])] {
        let mut last = 0.0;
        for grid in [21, 41, 81, 161] {
            let r = compute_ag(&g, 0.05, 10, grid).unwrap();
            assert!(r.a_estimate >= last - 1e-9, "{g}: grid {grid} gave {} < {last}", r.a_estimate);
            last = r.a_estimate;
        }
    }
}
