//! Connectives applied to the inner product.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Signed;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::linalg::{inner_product, LinalgError, SparseVector};
use crate::scalar::{f64_to_rational, parse_rational, rational_pow_ratio, rational_to_f64, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("predicate {0} has no closed-form stability bounds")]
    UnsupportedPredicate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse predicate {0:?}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Inner,
    /// `max(t, 0)^exp`.
    PowerPlus(f64),
    /// `t^d`.
    IntPower(u32),
    /// `sum_k a_k t^k`.
    PolyOfInner(Vec<f64>),
}

/// Small rational `p/q` (q <= 64) whose float is exactly `x`.
pub fn rational_exponent(x: f64) -> Option<(u32, u32)> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    (1u32..=64).find_map(|q| {
        let p = (x * q as f64).round();
        (p >= 1.0 && p <= u32::MAX as f64 && p / q as f64 == x).then_some((p as u32, q))
    })
}

impl Predicate {
    pub fn validate(&self) -> Result<(), PredicateError> {
        match self {
            Predicate::PowerPlus(e) if !(e.is_finite() && *e > 0.0) => {
                Err(PredicateError::InvalidParameter(format!("exponent {e} must be positive")))
            }
            Predicate::IntPower(0) => Err(PredicateError::InvalidParameter("degree must be >= 1".into())),
            Predicate::PolyOfInner(c) if c.is_empty() || c.iter().any(|a| !a.is_finite()) => {
                Err(PredicateError::InvalidParameter("polynomial needs finite coefficients".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether exact inner products yield exact values or rational enclosures.
    pub fn supports_exact(&self) -> bool {
        match self {
            Predicate::Inner | Predicate::IntPower(_) => true,
            Predicate::PowerPlus(e) => rational_exponent(*e).is_some(),
            Predicate::PolyOfInner(_) => false,
        }
    }

    /// Applies the connective to an inner-product value.
    pub fn apply(&self, t: &Value) -> Value {
        match (self, t) {
            (Predicate::Inner, _) => t.clone(),
            (Predicate::IntPower(d), Value::Exact(r)) => Value::Exact(num_traits::pow(r.clone(), *d as usize)),
            (Predicate::IntPower(d), _) => Value::Float(t.to_f64().powi(*d as i32)),
            (Predicate::PowerPlus(e), Value::Exact(r)) => {
                if !r.is_positive() {
                    return Value::zero();
                }
                match rational_exponent(*e) {
                    Some((p, q)) => rational_pow_ratio(r, p, q),
                    None => Value::Float(rational_to_f64(r).powf(*e)),
                }
            }
            (Predicate::PowerPlus(e), _) => Value::Float(t.to_f64().max(0.0).powf(*e)),
            (Predicate::PolyOfInner(c), _) => Value::Float(horner(c, t.to_f64())),
        }
    }

    /// The scalar connective on floats.
    pub fn apply_f64(&self, t: f64) -> f64 {
        match self {
            Predicate::Inner => t,
            Predicate::IntPower(d) => t.powi(*d as i32),
            Predicate::PowerPlus(e) => t.max(0.0).powf(*e),
            Predicate::PolyOfInner(c) => horner(c, t),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Predicate::Inner => json!({"tag": "inner"}),
            Predicate::PowerPlus(e) => json!({"tag": "power_plus", "exp": e}),
            Predicate::IntPower(d) => json!({"tag": "int_power", "d": d}),
            Predicate::PolyOfInner(c) => json!({"tag": "poly", "coeffs": c}),
        }
    }

    pub fn from_json(v: &Json) -> Result<Self, PredicateError> {
        let bad = || PredicateError::Parse(v.to_string());
        let p = match v.get("tag").and_then(Json::as_str).ok_or_else(bad)? {
            "inner" => Predicate::Inner,
            "power_plus" => Predicate::PowerPlus(v.get("exp").and_then(Json::as_f64).ok_or_else(bad)?),
            "int_power" => Predicate::IntPower(
                v.get("d")
                    .and_then(Json::as_u64)
                    .and_then(|d| u32::try_from(d).ok())
                    .ok_or_else(bad)?,
            ),
            "poly" => Predicate::PolyOfInner(
                v.get("coeffs")
                    .and_then(Json::as_array)
                    .ok_or_else(bad)?
                    .iter()
                    .map(|c| c.as_f64().ok_or_else(bad))
                    .collect::<Result<_, _>>()?,
            ),
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Inner => write!(f, "inner"),
            Predicate::PowerPlus(e) => write!(f, "pow:{e}"),
            Predicate::IntPower(d) => write!(f, "ipow:{d}"),
            Predicate::PolyOfInner(c) => {
                let parts: Vec<String> = c.iter().map(f64::to_string).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    parse_rational(s.trim()).ok().map(|r| rational_to_f64(&r))
}

impl FromStr for Predicate {
    type Err = PredicateError;

    /// `inner`, `pow:<e>`, `ipow:<d>`, `poly:<a0>,<a1>,...`; numbers may be
    /// fractions such as `1/2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PredicateError::Parse(s.to_string());
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let p = match (head.trim(), arg) {
            ("inner", None) => Predicate::Inner,
            ("pow", Some(a)) => Predicate::PowerPlus(parse_number(a).ok_or_else(bad)?),
            ("ipow", Some(a)) => Predicate::IntPower(a.trim().parse().map_err(|_| bad())?),
            ("poly", Some(a)) => Predicate::PolyOfInner(
                a.split(',').map(|c| parse_number(c).ok_or_else(bad)).collect::<Result<_, _>>()?,
            ),
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

/// `p(<x, y>)`.
pub fn evaluate(p: &Predicate, x: &SparseVector, y: &SparseVector) -> Result<Value, PredicateError> {
    Ok(p.apply(&inner_product(x, y)?))
}

fn check_epsilon(epsilon: f64, closed: bool) -> Result<(), PredicateError> {
    let ok = epsilon > 0.0 && (epsilon < 1.0 || (closed && epsilon == 1.0));
    if ok {
        Ok(())
    } else {
        Err(PredicateError::InvalidParameter(format!("epsilon {epsilon} out of range")))
    }
}

/// Inner-product gap guaranteed by an `f_beta` gap of `epsilon`: `epsilon^(1/beta)`.
pub fn holder_gap_transfer(epsilon: f64, beta: f64) -> Result<f64, PredicateError> {
    check_epsilon(epsilon, true)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(PredicateError::InvalidParameter(format!("beta {beta} outside (0, 1]")));
    }
    Ok(epsilon.powf(1.0 / beta))
}

/// Inner-product gap guaranteed by an `f_alpha` gap of `epsilon`: `epsilon / alpha`.
pub fn lipschitz_gap_transfer(epsilon: f64, alpha: f64) -> Result<f64, PredicateError> {
    check_epsilon(epsilon, true)?;
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(PredicateError::InvalidParameter(format!("alpha {alpha} must be >= 1")));
    }
    Ok(epsilon / alpha)
}

/// `alpha / 2^alpha`.
pub fn c_alpha(alpha: f64) -> f64 {
    alpha / alpha.exp2()
}

/// `alpha / 2^alpha` as an exact value or rational enclosure when `alpha`
/// is a small rational.
pub fn c_alpha_value(alpha: f64) -> Value {
    match (rational_exponent(alpha), f64_to_rational(alpha)) {
        (Some((p, q)), Some(a)) => {
            let half = BigRational::new(1.into(), 2.into());
            rational_pow_ratio(&half, p, q).scale(&a)
        }
        _ => Value::Float(c_alpha(alpha)),
    }
}

/// Two-sided size bounds at margin `epsilon`: stable for every
/// `k >= k_upper`, and a half-graph of size `k_lower` exists. Log values are
/// carried alongside because the bounds overflow `f64` for small `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBounds {
    pub k_upper: f64,
    pub k_lower: f64,
    pub ln_k_upper: f64,
    pub ln_k_lower: f64,
    /// Exponent `m` of `k_lower = 2^m`.
    pub lower_exponent: u64,
}

/// Floor with a small slack so that `1/0.25` style quotients land on the integer.
fn slack_floor(x: f64) -> u64 {
    (x + 1e-9).floor().max(0.0) as u64
}

pub fn stability_bounds(p: &Predicate, epsilon: f64) -> Result<StabilityBounds, PredicateError> {
    check_epsilon(epsilon, false)?;
    p.validate()?;
    let (ln_upper, m) = match p {
        Predicate::Inner => (PI / epsilon, slack_floor(1.0 / epsilon)),
        Predicate::PowerPlus(beta) if *beta <= 1.0 => {
            let scale = epsilon.powf(-1.0 / beta);
            (PI * scale, slack_floor(scale))
        }
        Predicate::PowerPlus(alpha) => (alpha * PI / epsilon, slack_floor(c_alpha(*alpha) / epsilon)),
        Predicate::IntPower(d) => (PI / epsilon, slack_floor(c_alpha(*d as f64) / epsilon)),
        Predicate::PolyOfInner(_) => return Err(PredicateError::UnsupportedPredicate(p.to_string())),
    };
    let ln_lower = m as f64 * LN_2;
    Ok(StabilityBounds {
        k_upper: ln_upper.exp(),
        k_lower: (m as f64).exp2(),
        ln_k_upper: ln_upper,
        ln_k_lower: ln_lower,
        lower_exponent: m,
    })
}

/// Exact `(1/2 + 1/(2m))^alpha - (1/2)^alpha` (or an enclosure of it).
pub fn shifted_gap(p: &Predicate, m: u32) -> Value {
    let half = BigRational::new(1.into(), 2.into());
    let forward = &half + BigRational::new(1.into(), (2 * m as i64).into());
    p.apply(&Value::Exact(forward)).sub(&p.apply(&Value::Exact(half)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{tensor_power_inner, Mode};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("inner".parse::<Predicate>().unwrap(), Predicate::Inner);
        assert_eq!("pow:1/2".parse::<Predicate>().unwrap(), Predicate::PowerPlus(0.5));
        assert_eq!("ipow:3".parse::<Predicate>().unwrap(), Predicate::IntPower(3));
        assert_eq!(
            "poly:0,0.5,-1".parse::<Predicate>().unwrap(),
            Predicate::PolyOfInner(vec![0.0, 0.5, -1.0])
        );
        for s in ["pow:0", "ipow:0", "pow", "cube", "poly:"] {
            assert!(s.parse::<Predicate>().is_err(), "{s}");
        }
        let p = Predicate::PolyOfInner(vec![1.0, -2.5]);
        assert_eq!(p.to_string().parse::<Predicate>().unwrap(), p);
    }

    #[test]
    fn json_roundtrip() {
        for p in [
            Predicate::Inner,
            Predicate::PowerPlus(1.5),
            Predicate::IntPower(2),
            Predicate::PolyOfInner(vec![0.0, 1.0]),
        ] {
            assert_eq!(Predicate::from_json(&p.to_json()).unwrap(), p);
        }
        assert_eq!(Predicate::IntPower(3).to_json()["d"], 3);
    }

    #[test]
    fn exponent_recognition() {
        assert_eq!(rational_exponent(0.5), Some((1, 2)));
        assert_eq!(rational_exponent(1.5), Some((3, 2)));
        assert_eq!(rational_exponent(1.0 / 3.0), Some((1, 3)));
        assert_eq!(rational_exponent(std::f64::consts::E), None);
        assert!(!Predicate::PowerPlus(std::f64::consts::SQRT_2).supports_exact());
    }

    #[test]
    fn apply_values() {
        let p = Predicate::PowerPlus(0.5);
        assert_eq!(p.apply(&Value::Exact(q(1, 4))), Value::Exact(q(1, 2)));
        assert_eq!(p.apply(&Value::Exact(q(-1, 4))), Value::zero());
        assert_eq!(Predicate::IntPower(3).apply(&Value::Exact(q(-1, 2))), Value::Exact(q(-1, 8)));
        match p.apply(&Value::Exact(q(1, 2))) {
            Value::Bounds { lo, hi } => {
                assert!(&lo * &lo < q(1, 2) && &hi * &hi > q(1, 2));
            }
            v => panic!("expected enclosure, got {v:?}"),
        }
        assert_eq!(Predicate::PolyOfInner(vec![0.5, 0.0, -1.0]).apply_f64(1.0), -0.5);
    }

    #[test]
    fn shifted_power_example() {
        let gap = shifted_gap(&Predicate::PowerPlus(2.0), 2);
        assert_eq!(gap, Value::Exact(q(5, 16)));
        assert!(gap.at_least(&c_alpha_value(2.0).scale(&q(1, 2)), 0.0));
    }

    #[test]
    fn int_power_matches_tensor_inner() {
        let x = SparseVector::from_dense(&[0.6, 0.8]);
        let y = SparseVector::from_dense(&[0.8, 0.6]);
        for d in 1..=5 {
            let v = evaluate(&Predicate::IntPower(d), &x, &y).unwrap().to_f64();
            assert_eq!(v.to_bits(), tensor_power_inner(&x, &y, d).unwrap().to_bits());
        }
        let e = SparseVector::basis(1u64, Mode::Exact);
        let v = evaluate(&Predicate::IntPower(4), &e, &e.scale(&q(1, 3))).unwrap();
        assert_eq!(v.to_f64().to_bits(), tensor_power_inner(&e, &e.scale(&q(1, 3)), 4).unwrap().to_bits());
    }

    #[test]
    fn gap_transfers() {
        assert_eq!(holder_gap_transfer(0.25, 0.5).unwrap(), 0.0625);
        assert_eq!(holder_gap_transfer(0.3, 1.0).unwrap(), 0.3);
        assert_eq!(holder_gap_transfer(1.0, 0.2).unwrap(), 1.0);
        assert!(holder_gap_transfer(0.5, 1.5).is_err());
        assert!((lipschitz_gap_transfer(0.3, 3.0).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(lipschitz_gap_transfer(0.5, 2.0).unwrap(), 0.25);
        assert_eq!(lipschitz_gap_transfer(0.7, 1.0).unwrap(), 0.7);
    }

    #[test]
    fn bounds_examples() {
        let b = stability_bounds(&Predicate::Inner, 0.25).unwrap();
        assert!((b.k_upper - (4.0 * PI).exp()).abs() < 1e-6);
        assert!((b.k_upper - 286751.31).abs() < 0.01);
        assert_eq!(b.k_lower, 16.0);
        let b = stability_bounds(&Predicate::PowerPlus(0.5), 0.5).unwrap();
        assert!((b.ln_k_upper - 4.0 * PI).abs() < 1e-12);
        assert_eq!(b.k_lower, 16.0);
        let inner = stability_bounds(&Predicate::Inner, 0.1).unwrap();
        let one = stability_bounds(&Predicate::IntPower(1), 0.1).unwrap();
        assert_eq!(inner.k_upper, one.k_upper);
        assert_eq!(one.lower_exponent, 5);
        assert!(matches!(
            stability_bounds(&Predicate::PolyOfInner(vec![1.0]), 0.5),
            Err(PredicateError::UnsupportedPredicate(_))
        ));
        assert!(stability_bounds(&Predicate::Inner, 1.0).is_err());
    }
}
