//! Sparse vectors over labelled orthonormal bases, exact or float.

mod kernel;
mod matrix;

pub use kernel::PairKernel;
pub use matrix::{operator_norm, DenseMatrix, NormEstimate};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::{ExactScalar, ScalarError, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("inner product of coefficients tagged {0} and {1} is irrational")]
    IncompatibleScaleTags(String, String),
    #[error("explicit tensor power would have {needed} entries, cap is {cap}")]
    CapExceeded { needed: u128, cap: usize },
    #[error("power iteration did not reach tolerance in {max_iters} iterations (estimate {estimate}, residual {residual})")]
    NotConverged {
        max_iters: usize,
        estimate: f64,
        residual: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not skew-symmetric at ({0}, {1})")]
    NotSkew(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Arithmetic mode of a vector or family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Float,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Mode::Exact),
            "float" => Ok(Mode::Float),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Key of an orthonormal basis vector.
///
/// Integer keys are heap-indexed tree edges or coordinate indices; tuples
/// index tensor powers and direct-sum blocks. Textual form: `17`, `name`,
/// `(a,b,c)`. Names made only of digits read back as keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisLabel {
    Key(u64),
    Name(String),
    Tuple(Vec<BasisLabel>),
}

impl From<u64> for BasisLabel {
    fn from(k: u64) -> Self {
        BasisLabel::Key(k)
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Key(k) => write!(f, "{k}"),
            BasisLabel::Name(s) => write!(f, "{s}"),
            BasisLabel::Tuple(parts) => {
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for BasisLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        fn parse(s: &str) -> Result<(BasisLabel, &str), String> {
            if let Some(mut rest) = s.strip_prefix('(') {
                let mut parts = Vec::new();
                if let Some(r) = rest.strip_prefix(')') {
                    return Ok((BasisLabel::Tuple(parts), r));
                }
                loop {
                    let (p, r) = parse(rest)?;
                    parts.push(p);
                    if let Some(r) = r.strip_prefix(',') {
                        rest = r;
                    } else if let Some(r) = r.strip_prefix(')') {
                        return Ok((BasisLabel::Tuple(parts), r));
                    } else {
                        return Err(format!("unterminated tuple label near {r:?}"));
                    }
                }
            }
            let end = s.find([',', ')', '(']).unwrap_or(s.len());
            let atom = &s[..end];
            if atom.is_empty() {
                return Err("empty basis label".into());
            }
            let label = match atom.parse::<u64>() {
                Ok(k) => BasisLabel::Key(k),
                Err(_) => BasisLabel::Name(atom.to_string()),
            };
            Ok((label, &s[end..]))
        }
        let (label, rest) = parse(s.trim())?;
        if !rest.is_empty() {
            return Err(format!("trailing characters in label {s:?}"));
        }
        Ok(label)
    }
}

/// Finitely supported vector; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseVector {
    Exact(BTreeMap<BasisLabel, ExactScalar>),
    Float(BTreeMap<BasisLabel, f64>),
}

impl SparseVector {
    pub fn zero(mode: Mode) -> Self {
        match mode {
            Mode::Exact => SparseVector::Exact(BTreeMap::new()),
            Mode::Float => SparseVector::Float(BTreeMap::new()),
        }
    }

    /// Basis vector `e_label`.
    pub fn basis(label: impl Into<BasisLabel>, mode: Mode) -> Self {
        match mode {
            Mode::Exact => {
                SparseVector::Exact(BTreeMap::from([(label.into(), ExactScalar::from_integer(1))]))
            }
            Mode::Float => SparseVector::Float(BTreeMap::from([(label.into(), 1.0)])),
        }
    }

    pub fn from_exact<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (BasisLabel, ExactScalar)>,
    {
        SparseVector::Exact(entries.into_iter().filter(|(_, c)| !c.is_zero()).collect())
    }

    pub fn from_float<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (BasisLabel, f64)>,
    {
        SparseVector::Float(entries.into_iter().filter(|(_, c)| *c != 0.0).collect())
    }

    /// Dense float vector on keys `1..=len`.
    pub fn from_dense(coords: &[f64]) -> Self {
        Self::from_float(
            coords
                .iter()
                .enumerate()
                .map(|(i, &c)| (BasisLabel::Key(i as u64 + 1), c)),
        )
    }

    pub fn mode(&self) -> Mode {
        match self {
            SparseVector::Exact(_) => Mode::Exact,
            SparseVector::Float(_) => Mode::Float,
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            SparseVector::Exact(m) => m.len(),
            SparseVector::Float(m) => m.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    pub fn labels(&self) -> Vec<&BasisLabel> {
        match self {
            SparseVector::Exact(m) => m.keys().collect(),
            SparseVector::Float(m) => m.keys().collect(),
        }
    }

    /// Coefficients as floats, in label order.
    pub fn float_entries(&self) -> Vec<(&BasisLabel, f64)> {
        match self {
            SparseVector::Exact(m) => m.iter().map(|(k, c)| (k, c.to_f64())).collect(),
            SparseVector::Float(m) => m.iter().map(|(k, c)| (k, *c)).collect(),
        }
    }

    pub fn to_float(&self) -> SparseVector {
        match self {
            SparseVector::Float(_) => self.clone(),
            SparseVector::Exact(m) => {
                SparseVector::from_float(m.iter().map(|(k, c)| (k.clone(), c.to_f64())))
            }
        }
    }

    /// `lambda * self` for rational `lambda`.
    pub fn scale(&self, lambda: &BigRational) -> SparseVector {
        match self {
            SparseVector::Exact(m) => {
                SparseVector::from_exact(m.iter().map(|(k, c)| (k.clone(), c.scale(lambda))))
            }
            SparseVector::Float(m) => {
                let f = lambda.to_f64().unwrap_or(f64::NAN);
                SparseVector::from_float(m.iter().map(|(k, c)| (k.clone(), c * f)))
            }
        }
    }

    /// `a * self + b * other`. Exact when both are exact and every shared
    /// label carries like-tagged coefficients.
    pub fn combine(
        &self,
        a: &BigRational,
        other: &SparseVector,
        b: &BigRational,
    ) -> Result<SparseVector, LinalgError> {
        match (self.scale(a), other.scale(b)) {
            (SparseVector::Exact(mut left), SparseVector::Exact(right)) => {
                for (k, c) in right {
                    let sum = match left.remove(&k) {
                        Some(prev) => prev.add(&c)?,
                        None => c,
                    };
                    if !sum.is_zero() {
                        left.insert(k, sum);
                    }
                }
                Ok(SparseVector::Exact(left))
            }
            (l, r) => {
                let mut out: BTreeMap<BasisLabel, f64> = BTreeMap::new();
                for (k, c) in l.float_entries().into_iter().chain(r.float_entries()) {
                    *out.entry(k.clone()).or_insert(0.0) += c;
                }
                Ok(SparseVector::from_float(out))
            }
        }
    }
}

/// Coefficient pairs on shared labels, in label order.
fn ordered_overlap<'a, A, B>(
    x: &'a BTreeMap<BasisLabel, A>,
    y: &'a BTreeMap<BasisLabel, B>,
) -> Vec<(&'a A, &'a B)> {
    if x.len() <= y.len() {
        x.iter().filter_map(|(k, a)| y.get(k).map(|b| (a, b))).collect()
    } else {
        y.iter().filter_map(|(k, b)| x.get(k).map(|a| (a, b))).collect()
    }
}

/// `<x, y>`: an exact rational when both vectors are exact, otherwise a float.
pub fn inner_product(x: &SparseVector, y: &SparseVector) -> Result<Value, LinalgError> {
    match (x, y) {
        (SparseVector::Exact(a), SparseVector::Exact(b)) => {
            let mut sum = BigRational::zero();
            for (ca, cb) in ordered_overlap(a, b) {
                let prod = ca.mul(cb);
                match prod.as_rational() {
                    Some(r) => sum += r,
                    None => {
                        return Err(LinalgError::IncompatibleScaleTags(
                            ca.tag().to_string(),
                            cb.tag().to_string(),
                        ))
                    }
                }
            }
            Ok(Value::Exact(sum))
        }
        _ => {
            let xf = x.to_float();
            let yf = y.to_float();
            let (SparseVector::Float(a), SparseVector::Float(b)) = (&xf, &yf) else {
                unreachable!()
            };
            Ok(Value::Float(ordered_overlap(a, b).into_iter().map(|(p, q)| p * q).sum()))
        }
    }
}

/// `||x||^2`; exact vectors always have a rational squared norm.
pub fn norm_squared(x: &SparseVector) -> Value {
    match x {
        SparseVector::Exact(m) => Value::Exact(m.values().map(ExactScalar::square).sum()),
        SparseVector::Float(m) => Value::Float(m.values().map(|c| c * c).sum()),
    }
}

/// Whether `||x|| <= 1`, decided exactly for exact vectors and with slack
/// `tol` for float vectors.
pub fn in_unit_ball(x: &SparseVector, tol: f64) -> bool {
    match norm_squared(x) {
        Value::Exact(r) => r <= BigRational::from_integer(1.into()),
        v => v.to_f64() <= 1.0 + tol,
    }
}

/// `<x, y>^d`, evaluated without materialising tensors.
pub fn tensor_power_inner(x: &SparseVector, y: &SparseVector, d: u32) -> Result<f64, LinalgError> {
    if d == 0 {
        return Err(LinalgError::InvalidArgument("tensor degree must be >= 1".into()));
    }
    Ok(match inner_product(x, y)? {
        Value::Exact(r) => crate::scalar::rational_to_f64(&num_traits::pow(r, d as usize)),
        v => v.to_f64().powi(d as i32),
    })
}

/// Explicit `x^{(x) d}` indexed by `d`-tuples of labels.
pub fn materialize_tensor_power(
    x: &SparseVector,
    d: u32,
    dim_cap: usize,
) -> Result<SparseVector, LinalgError> {
    if d == 0 {
        return Err(LinalgError::InvalidArgument("tensor degree must be >= 1".into()));
    }
    let needed = (x.nnz() as u128).checked_pow(d).unwrap_or(u128::MAX);
    if needed > dim_cap as u128 {
        return Err(LinalgError::CapExceeded { needed, cap: dim_cap });
    }
    fn expand<C: Clone>(
        entries: &[(BasisLabel, C)],
        d: u32,
        mul: impl Fn(&C, &C) -> C,
    ) -> Vec<(BasisLabel, C)> {
        let mut acc: Vec<(Vec<BasisLabel>, C)> =
            entries.iter().map(|(k, c)| (vec![k.clone()], c.clone())).collect();
        for _ in 1..d {
            let mut next = Vec::with_capacity(acc.len() * entries.len());
            for (labels, c) in &acc {
                for (k, ck) in entries {
                    let mut l = labels.clone();
                    l.push(k.clone());
                    next.push((l, mul(c, ck)));
                }
            }
            acc = next;
        }
        acc.into_iter().map(|(l, c)| (BasisLabel::Tuple(l), c)).collect()
    }
    Ok(match x {
        SparseVector::Exact(m) => {
            let entries: Vec<_> = m.iter().map(|(k, c)| (k.clone(), c.clone())).collect();
            SparseVector::from_exact(expand(&entries, d, |a, b| a.mul(b)))
        }
        SparseVector::Float(m) => {
            let entries: Vec<_> = m.iter().map(|(k, c)| (k.clone(), *c)).collect();
            SparseVector::from_float(expand(&entries, d, |a, b| a * b))
        }
    })
}
