//! Exact scalars with a shared irrational scale, rational parsing, and the
//! three-way `Value` returned by every evaluation in the crate.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Bits of precision used when an exact root does not exist and a rational
/// enclosure is returned instead.
pub const ENCLOSURE_BITS: u64 = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("cannot parse {0:?} as a rational number")]
    Parse(String),
    #[error("scale tags 1/sqrt({0}) and 1/sqrt({1}) cannot be added")]
    TagMismatch(u64, u64),
    #[error("scale tag radicand must be positive")]
    ZeroRadicand,
}

/// Irrational factor `1/sqrt(k)` with `k` squarefree. `k = 1` is the
/// rational tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScaleTag(u64);

impl ScaleTag {
    pub const ONE: ScaleTag = ScaleTag(1);
    /// `sin(pi/4) = cos(pi/4) = 1/sqrt(2)`.
    pub const HALF: ScaleTag = ScaleTag(2);

    /// Squarefree radicand `k` of `1/sqrt(k)`.
    pub fn radicand(self) -> u64 {
        self.0
    }

    pub fn is_one(self) -> bool {
        self.0 == 1
    }

    /// `1/sqrt(radicand)` as a float.
    pub fn factor(self) -> f64 {
        if self.0 == 1 {
            1.0
        } else {
            1.0 / (self.0 as f64).sqrt()
        }
    }

    /// Parses `"1"` or `"1/sqrt(k)"`. The radicand is canonicalised, so the
    /// returned rational cofactor must be folded into the coefficient.
    pub fn parse(s: &str) -> Result<(BigRational, ScaleTag), ScalarError> {
        let t = s.trim();
        if t == "1" || t.eq_ignore_ascii_case("one") {
            return Ok((BigRational::one(), ScaleTag::ONE));
        }
        let inner = t
            .strip_prefix("1/sqrt(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| ScalarError::Parse(s.to_string()))?;
        let k: u64 = inner
            .trim()
            .parse()
            .map_err(|_| ScalarError::Parse(s.to_string()))?;
        canonical_inv_sqrt(k)
    }
}

impl fmt::Display for ScaleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 1 {
            write!(f, "1")
        } else {
            write!(f, "1/sqrt({})", self.0)
        }
    }
}

/// Splits `k = a^2 * b` with `b` squarefree.
fn square_split(mut k: u64) -> (u64, u64) {
    let mut square_root = 1u64;
    let mut free = 1u64;
    let mut p = 2u64;
    while p.saturating_mul(p) <= k {
        let mut e = 0;
        while k.is_multiple_of(p) {
            k /= p;
            e += 1;
        }
        square_root *= p.pow(e / 2);
        if e % 2 == 1 {
            free *= p;
        }
        p += 1;
    }
    (square_root, free * k)
}

/// `1/sqrt(k)` written as `(1/a) * 1/sqrt(b)`.
fn canonical_inv_sqrt(k: u64) -> Result<(BigRational, ScaleTag), ScalarError> {
    if k == 0 {
        return Err(ScalarError::ZeroRadicand);
    }
    let (a, b) = square_split(k);
    Ok((
        BigRational::new(BigInt::one(), BigInt::from(a)),
        ScaleTag(b),
    ))
}

/// `value / sqrt(tag)`: a rational times a shared irrational factor.
///
/// Stored in lowest terms with a squarefree radicand; zero always carries
/// the rational tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactScalar {
    value: BigRational,
    tag: ScaleTag,
}

impl ExactScalar {
    pub fn rational(value: BigRational) -> Self {
        ExactScalar {
            value,
            tag: ScaleTag::ONE,
        }
    }

    pub fn from_integer(n: i64) -> Self {
        Self::rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Self::rational(BigRational::zero())
    }

    /// `value / sqrt(radicand)`, canonicalised.
    pub fn new(value: BigRational, radicand: u64) -> Result<Self, ScalarError> {
        let (cofactor, tag) = canonical_inv_sqrt(radicand)?;
        Ok(Self::tagged(value * cofactor, tag))
    }

    /// `1/sqrt(m)`.
    pub fn inv_sqrt(m: u64) -> Result<Self, ScalarError> {
        Self::new(BigRational::one(), m)
    }

    fn tagged(value: BigRational, tag: ScaleTag) -> Self {
        if value.is_zero() {
            Self::zero()
        } else {
            ExactScalar { value, tag }
        }
    }

    pub fn numerator(&self) -> &BigInt {
        self.value.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.value.denom()
    }

    pub fn tag(&self) -> ScaleTag {
        self.tag
    }

    /// Rational cofactor (the coefficient without its irrational tag).
    pub fn cofactor(&self) -> &BigRational {
        &self.value
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        self.tag.is_one().then_some(&self.value)
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.value) * self.tag.factor()
    }

    /// Product; closed because the product of two squarefree radicands is
    /// again a square times a squarefree number.
    pub fn mul(&self, other: &ExactScalar) -> ExactScalar {
        let g = self.tag.0.gcd(&other.tag.0);
        let tag = ScaleTag((self.tag.0 / g) * (other.tag.0 / g));
        let value = &self.value * &other.value / BigRational::from_integer(BigInt::from(g));
        Self::tagged(value, tag)
    }

    pub fn scale(&self, factor: &BigRational) -> ExactScalar {
        Self::tagged(&self.value * factor, self.tag)
    }

    pub fn add(&self, other: &ExactScalar) -> Result<ExactScalar, ScalarError> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.tag != other.tag {
            return Err(ScalarError::TagMismatch(self.tag.0, other.tag.0));
        }
        Ok(Self::tagged(&self.value + &other.value, self.tag))
    }

    /// Square, always rational.
    pub fn square(&self) -> BigRational {
        &self.value * &self.value / BigRational::from_integer(BigInt::from(self.tag.0))
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tag.is_one() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{}*{}", self.value, self.tag)
        }
    }
}

/// Float conversion that survives numerators and denominators beyond the
/// f64 range.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let (n, d) = (r.numer(), r.denom());
    let shift = n.bits().max(d.bits()).saturating_sub(1000) as usize;
    let ns = n >> shift;
    let ds = d >> shift;
    match (ns.to_f64(), ds.to_f64()) {
        (Some(a), Some(b)) if b != 0.0 => a / b,
        _ => {
            if n.sign() == Sign::Minus {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Parses `"1/3"`, `"-2"`, `"0.25"`, `"1e-3"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, ScalarError> {
    let err = || ScalarError::Parse(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = t[pos + 1..].parse().map_err(|_| err())?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(all_digits.parse::<BigInt>().map_err(|_| err())?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// Exact float to rational (every finite f64 is a dyadic rational).
pub fn f64_to_rational(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Result of an evaluation: exact, certified rational enclosure, or float.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(BigRational),
    /// `lo <= true value <= hi`, both rational.
    Bounds {
        lo: BigRational,
        hi: BigRational,
    },
    Float(f64),
}

impl Value {
    pub fn zero() -> Value {
        Value::Exact(BigRational::zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn is_float(&self) -> bool {
        matches!(self, Value::Float(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Value::Exact(r) => Some(r),
            _ => None,
        }
    }

    /// Best float approximation (enclosure midpoint for `Bounds`).
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => rational_to_f64(r),
            Value::Bounds { lo, hi } => 0.5 * (rational_to_f64(lo) + rational_to_f64(hi)),
            Value::Float(x) => *x,
        }
    }

    fn interval(&self) -> Option<(BigRational, BigRational)> {
        match self {
            Value::Exact(r) => Some((r.clone(), r.clone())),
            Value::Bounds { lo, hi } => Some((lo.clone(), hi.clone())),
            Value::Float(_) => None,
        }
    }

    fn from_interval(lo: BigRational, hi: BigRational) -> Value {
        if lo == hi {
            Value::Exact(lo)
        } else {
            Value::Bounds { lo, hi }
        }
    }

    pub fn sub(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a - b),
            _ => match (self.interval(), other.interval()) {
                (Some((a, b)), Some((c, d))) => Value::from_interval(a - d, b - c),
                _ => Value::Float(self.to_f64() - other.to_f64()),
            },
        }
    }

    pub fn abs(&self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(r.abs()),
            Value::Float(x) => Value::Float(x.abs()),
            Value::Bounds { lo, hi } => {
                if !lo.is_negative() {
                    self.clone()
                } else if !hi.is_positive() {
                    Value::from_interval(-hi, -lo)
                } else {
                    Value::from_interval(BigRational::zero(), (-lo).max(hi.clone()))
                }
            }
        }
    }

    /// Pointwise minimum. Intervals take the minimum of each endpoint.
    pub fn min(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a.min(b).clone()),
            _ => match (self.interval(), other.interval()) {
                (Some((a, b)), Some((c, d))) => Value::from_interval(a.min(c), b.min(d)),
                _ => Value::Float(self.to_f64().min(other.to_f64())),
            },
        }
    }

    /// Pointwise maximum. Intervals take the maximum of each endpoint.
    pub fn max(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a.max(b).clone()),
            _ => match (self.interval(), other.interval()) {
                (Some((a, b)), Some((c, d))) => Value::from_interval(a.max(c), b.max(d)),
                _ => Value::Float(self.to_f64().max(other.to_f64())),
            },
        }
    }

    /// Whether `self >= threshold` is established. Exact and enclosure
    /// comparisons are decided without tolerance (lower end of `self` against
    /// upper end of `threshold`); anything involving a float compares with
    /// slack `tol`.
    pub fn at_least(&self, threshold: &Value, tol: f64) -> bool {
        match (self.interval(), threshold.interval()) {
            (Some((lo, _)), Some((_, t_hi))) => lo >= t_hi,
            _ => self.to_f64() >= threshold.to_f64() - tol,
        }
    }

    /// `factor * self`, keeping enclosures ordered.
    pub fn scale(&self, factor: &BigRational) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(r * factor),
            Value::Float(x) => Value::Float(x * rational_to_f64(factor)),
            Value::Bounds { lo, hi } => {
                let (a, b) = (lo * factor, hi * factor);
                if a <= b {
                    Value::from_interval(a, b)
                } else {
                    Value::from_interval(b, a)
                }
            }
        }
    }

    /// Enclosure endpoints, `None` for floats.
    pub fn bounds(&self) -> Option<(BigRational, BigRational)> {
        self.interval()
    }

    /// Ordering used for argmin bookkeeping: exact where possible, otherwise
    /// by lower endpoint or float value.
    pub fn cmp_lower(&self, other: &Value) -> Ordering {
        match (self.interval(), other.interval()) {
            (Some((a, _)), Some((c, _))) => a.cmp(&c),
            _ => self
                .to_f64()
                .partial_cmp(&other.to_f64())
                .unwrap_or(Ordering::Equal),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{r}"),
            Value::Bounds { lo, hi } => write!(f, "[{}, {}]", rational_to_f64(lo), rational_to_f64(hi)),
            Value::Float(x) => write!(f, "{x}"),
        }
    }
}

/// `r^(p/q)` for `r >= 0`: exact when the root is rational, otherwise a
/// rational enclosure of width `2^-ENCLOSURE_BITS / den`.
pub fn rational_pow_ratio(r: &BigRational, p: u32, q: u32) -> Value {
    assert!(q >= 1, "root index must be positive");
    if r.is_zero() {
        return Value::zero();
    }
    debug_assert!(r.is_positive());
    let powered = num_traits::pow(r.clone(), p as usize);
    if q == 1 {
        return Value::Exact(powered);
    }
    let num = powered.numer().clone();
    let den = powered.denom().clone();
    // (num/den)^(1/q) = (num * den^(q-1))^(1/q) / den
    let radicand = &num * num_traits::pow(den.clone(), (q - 1) as usize);
    let root = radicand.nth_root(q);
    if num_traits::pow(root.clone(), q as usize) == radicand {
        return Value::Exact(BigRational::new(root, den));
    }
    let shift = ENCLOSURE_BITS as usize;
    let scaled = radicand << (shift * q as usize);
    let low = scaled.nth_root(q);
    let scale = den << shift;
    Value::Bounds {
        lo: BigRational::new(low.clone(), scale.clone()),
        hi: BigRational::new(low + BigInt::one(), scale),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn inv_sqrt_canonicalises_square_factors() {
        let s = ExactScalar::inv_sqrt(12).unwrap();
        assert_eq!(s.tag().radicand(), 3);
        assert_eq!(s.cofactor(), &q(1, 2));
        let four = ExactScalar::inv_sqrt(4).unwrap();
        assert_eq!(four.as_rational(), Some(&q(1, 2)));
    }

    #[test]
    fn like_tags_multiply_to_rationals() {
        let a = ExactScalar::inv_sqrt(6).unwrap();
        assert_eq!(a.mul(&a).as_rational(), Some(&q(1, 6)));
        let half = ExactScalar::inv_sqrt(2).unwrap();
        let third = ExactScalar::inv_sqrt(3).unwrap();
        let prod = half.mul(&third);
        assert_eq!(prod.tag().radicand(), 6);
        assert_eq!(prod.mul(&ExactScalar::inv_sqrt(6).unwrap()).as_rational(), Some(&q(1, 6)));
    }

    #[test]
    fn adding_unlike_tags_fails() {
        let a = ExactScalar::inv_sqrt(2).unwrap();
        let b = ExactScalar::inv_sqrt(3).unwrap();
        assert!(matches!(a.add(&b), Err(ScalarError::TagMismatch(2, 3))));
        assert_eq!(a.add(&ExactScalar::zero()).unwrap(), a);
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_rational("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_rational("-1.5e-1").unwrap(), q(-3, 20));
        assert_eq!(parse_rational("7").unwrap(), q(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn tag_parse_roundtrip() {
        let (c, t) = ScaleTag::parse("1/sqrt(8)").unwrap();
        assert_eq!(t.radicand(), 2);
        assert_eq!(c, q(1, 2));
        assert_eq!(ScaleTag::parse(&ScaleTag(6).to_string()).unwrap().1, ScaleTag(6));
        assert!(ScaleTag::parse("sqrt(2)").is_err());
    }

    #[test]
    fn rational_roots_exact_and_enclosed() {
        assert_eq!(rational_pow_ratio(&q(1, 4), 1, 2), Value::Exact(q(1, 2)));
        assert_eq!(rational_pow_ratio(&q(9, 16), 3, 2), Value::Exact(q(27, 64)));
        match rational_pow_ratio(&q(1, 2), 1, 2) {
            Value::Bounds { lo, hi } => {
                let two = q(2, 1);
                assert!(&lo * &lo * &two < q(1, 1));
                assert!(&hi * &hi * &two > q(1, 1));
                assert!(rational_to_f64(&(hi - lo)) < 1e-30);
            }
            other => panic!("expected enclosure, got {other:?}"),
        }
    }

    #[test]
    fn value_interval_arithmetic() {
        let a = Value::Bounds { lo: q(1, 3), hi: q(1, 2) };
        let b = Value::Exact(q(1, 4));
        let d = a.sub(&b);
        assert_eq!(d, Value::Bounds { lo: q(1, 12), hi: q(1, 4) });
        assert!(d.at_least(&Value::Exact(q(1, 12)), 0.0));
        assert!(!d.at_least(&Value::Exact(q(1, 10)), 0.0));
        let neg = Value::Bounds { lo: q(-1, 2), hi: q(1, 3) }.abs();
        assert_eq!(neg, Value::Bounds { lo: q(0, 1), hi: q(1, 2) });
    }

    #[test]
    fn huge_rationals_convert() {
        let big = BigRational::new(BigInt::one() << 3000u32, (BigInt::one() << 2999u32) * 3);
        assert!((rational_to_f64(&big) - 2.0 / 3.0).abs() < 1e-15);
    }
}
