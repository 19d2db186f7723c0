use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use super::CertifyError;
use crate::constructions::WitnessFamily;
use crate::linalg::{LinalgError, PairKernel, SparseVector};
use crate::predicates::Predicate;
use crate::scalar::Value;

/// Margin matrices are stored only up to this many pairs.
pub const MARGIN_MATRIX_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginMode {
    /// `f(x_i, y_j) - f(x_j, y_i)`.
    Signed,
    /// `|f(x_i, y_j) - f(x_j, y_i)|`.
    AbsoluteValue,
}

impl MarginMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MarginMode::Signed => "signed",
            MarginMode::AbsoluteValue => "absolute",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub mode: MarginMode,
    /// Slack for comparisons involving floats.
    pub tol: f64,
    /// Fail instead of silently falling back to floats.
    pub require_exact: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            mode: MarginMode::Signed,
            tol: 1e-10,
            require_exact: false,
        }
    }
}

/// Margins `f(x_i, y_j) - f(x_j, y_i)` over all `i < j` in stored order.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfGraphReport {
    pub n: usize,
    pub predicate: Predicate,
    pub epsilon: Value,
    pub mode: MarginMode,
    pub tol: f64,
    /// `None` stands for `+inf` (fewer than two pairs).
    pub margin_min: Option<Value>,
    pub argmin: Option<(usize, usize)>,
    /// Row `i` holds the margins for `j = i+1..n`; omitted above
    /// [`MARGIN_MATRIX_CAP`].
    pub margin_matrix: Option<Vec<Vec<Value>>>,
    /// Range of `f(x_i, y_j)` over `i < j`.
    pub forward_range: Option<(Value, Value)>,
    /// Range of `f(x_j, y_i)` over `i < j`.
    pub backward_range: Option<(Value, Value)>,
    /// Whether every margin is exact or a rational enclosure.
    pub exact: bool,
    pub is_half_graph: bool,
}

impl HalfGraphReport {
    pub fn is_half_graph_at(&self, epsilon: &Value) -> bool {
        self.margin_min.as_ref().is_none_or(|m| m.at_least(epsilon, self.tol))
    }

    pub fn margin(&self, i: usize, j: usize) -> Option<&Value> {
        let rows = self.margin_matrix.as_ref()?;
        (i < j && j < self.n).then(|| &rows[i][j - i - 1])
    }
}

/// Values usable as margin statistics.
trait Stat: Clone + Send {
    fn less(&self, other: &Self) -> bool;
    fn lower(&self, other: &Self) -> Self;
    fn upper(&self, other: &Self) -> Self;
}

impl Stat for i128 {
    fn less(&self, other: &Self) -> bool {
        self < other
    }
    fn lower(&self, other: &Self) -> Self {
        *self.min(other)
    }
    fn upper(&self, other: &Self) -> Self {
        *self.max(other)
    }
}

impl Stat for Value {
    fn less(&self, other: &Self) -> bool {
        self.cmp_lower(other).is_lt()
    }
    fn lower(&self, other: &Self) -> Self {
        self.min(other)
    }
    fn upper(&self, other: &Self) -> Self {
        self.max(other)
    }
}

#[derive(Clone)]
struct Stats<T> {
    min: Option<(T, usize, usize)>,
    forward: Option<(T, T)>,
    backward: Option<(T, T)>,
    rows: Vec<Vec<T>>,
}

fn widen<T: Stat>(range: &mut Option<(T, T)>, lo: &T, hi: &T) {
    *range = Some(match range.take() {
        None => (lo.clone(), hi.clone()),
        Some((a, b)) => (a.lower(lo), b.upper(hi)),
    });
}

impl<T: Stat> Stats<T> {
    fn empty() -> Self {
        Stats {
            min: None,
            forward: None,
            backward: None,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, i: usize, j: usize, f: &T, b: &T, margin: T) {
        widen(&mut self.forward, f, f);
        widen(&mut self.backward, b, b);
        if self.min.as_ref().is_none_or(|(m, _, _)| margin.less(m)) {
            self.min = Some((margin, i, j));
        }
    }

    /// Folds a later row into `self`; earlier minima win ties.
    fn merge(mut self, other: Stats<T>) -> Self {
        if let Some((m, i, j)) = other.min {
            if self.min.as_ref().is_none_or(|(cur, _, _)| m.less(cur)) {
                self.min = Some((m, i, j));
            }
        }
        if let Some((lo, hi)) = other.forward {
            widen(&mut self.forward, &lo, &hi);
        }
        if let Some((lo, hi)) = other.backward {
            widen(&mut self.backward, &lo, &hi);
        }
        self.rows.extend(other.rows);
        self
    }

    fn map<U>(self, f: impl Fn(T) -> U) -> Stats<U> {
        Stats {
            min: self.min.map(|(m, i, j)| (f(m), i, j)),
            forward: self.forward.map(|(a, b)| (f(a), f(b))),
            backward: self.backward.map(|(a, b)| (f(a), f(b))),
            rows: self.rows.into_iter().map(|r| r.into_iter().map(&f).collect()).collect(),
        }
    }
}

/// Predicate values on the kernel's pairs, memoised per exact inner product.
pub(crate) struct Engine<'a> {
    kernel: PairKernel,
    predicate: &'a Predicate,
    n: usize,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(pairs: &[(SparseVector, SparseVector)], predicate: &'a Predicate) -> Self {
        let xs: Vec<SparseVector> = pairs.iter().map(|(x, _)| x.clone()).collect();
        let ys: Vec<SparseVector> = pairs.iter().map(|(_, y)| y.clone()).collect();
        Engine {
            kernel: PairKernel::new(&xs, &ys),
            predicate,
            n: pairs.len(),
        }
    }

    pub(crate) fn kernel(&self) -> &PairKernel {
        &self.kernel
    }

    pub(crate) fn exact(&self) -> bool {
        self.kernel.is_exact() && self.predicate.supports_exact()
    }

    /// `f(x_i, y_j)`.
    pub(crate) fn value(&self, i: usize, j: usize, memo: &mut HashMap<i128, Value>) -> Result<Value, LinalgError> {
        if let (Some(scale), Some(dot)) = (self.kernel.lattice_scale(), self.kernel.lattice_dot(i, j)) {
            let key = dot?;
            if let Some(v) = memo.get(&key) {
                return Ok(v.clone());
            }
            let v = self
                .predicate
                .apply(&Value::Exact(BigRational::new(BigInt::from(key), scale.clone())));
            memo.insert(key, v.clone());
            return Ok(v);
        }
        Ok(self.predicate.apply(&self.kernel.dot(i, j)?))
    }

    /// `(f(x_i, y_j), f(x_j, y_i))` for `j = i+1..n`.
    pub(crate) fn row(&self, i: usize) -> Result<Vec<(Value, Value)>, LinalgError> {
        let mut memo = HashMap::new();
        (i + 1..self.n)
            .map(|j| Ok((self.value(i, j, &mut memo)?, self.value(j, i, &mut memo)?)))
            .collect()
    }

    /// Integer path: `K^d f` for `Inner` (`d = 1`) and `IntPower(d)`.
    fn int_value(&self, i: usize, j: usize, d: u32) -> Option<Result<i128, LinalgError>> {
        match self.kernel.lattice_dot(i, j)? {
            Ok(k) => k.checked_pow(d).map(Ok),
            Err(e) => Some(Err(e)),
        }
    }
}

fn margin_of<T>(mode: MarginMode, f: &T, b: &T, sub: impl Fn(&T, &T) -> Option<T>, abs: impl Fn(T) -> Option<T>) -> Option<T> {
    let m = sub(f, b)?;
    match mode {
        MarginMode::Signed => Some(m),
        MarginMode::AbsoluteValue => abs(m),
    }
}

fn collect_rows<T: Stat>(rows: Vec<Stats<T>>) -> Stats<T> {
    rows.into_iter().fold(Stats::empty(), Stats::merge)
}

fn int_stats(engine: &Engine, d: u32, mode: MarginMode, store: bool) -> Result<Option<Stats<i128>>, CertifyError> {
    let n = engine.n;
    let rows: Vec<Option<Stats<i128>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = Stats::empty();
            let mut row = Vec::new();
            for j in i + 1..n {
                let f = match engine.int_value(i, j, d) {
                    Some(r) => r?,
                    None => return Ok(None),
                };
                let b = match engine.int_value(j, i, d) {
                    Some(r) => r?,
                    None => return Ok(None),
                };
                let Some(m) = margin_of(mode, &f, &b, |a, b| a.checked_sub(*b), |m| m.checked_abs()) else {
                    return Ok(None);
                };
                if store {
                    row.push(m);
                }
                s.push(i, j, &f, &b, m);
            }
            if store {
                s.rows.push(row);
            }
            Ok(Some(s))
        })
        .collect::<Result<_, CertifyError>>()?;
    Ok(rows.into_iter().collect::<Option<Vec<_>>>().map(collect_rows))
}

fn value_stats(engine: &Engine, mode: MarginMode, store: bool) -> Result<Stats<Value>, CertifyError> {
    let rows: Vec<Stats<Value>> = (0..engine.n)
        .into_par_iter()
        .map(|i| {
            let mut s = Stats::empty();
            let mut row = Vec::new();
            for (k, (f, b)) in engine.row(i)?.into_iter().enumerate() {
                let m = margin_of(mode, &f, &b, |a, b| Some(a.sub(b)), |m| Some(m.abs())).expect("total");
                if store {
                    row.push(m.clone());
                }
                s.push(i, i + 1 + k, &f, &b, m);
            }
            if store {
                s.rows.push(row);
            }
            Ok(s)
        })
        .collect::<Result<_, CertifyError>>()?;
    Ok(collect_rows(rows))
}

fn check_epsilon(epsilon: &Value) -> Result<(), CertifyError> {
    if epsilon.to_f64() > 0.0 {
        Ok(())
    } else {
        Err(CertifyError::InvalidEpsilon(epsilon.to_string()))
    }
}

/// Checks the half-graph condition on raw pairs in their given order.
pub fn check_pairs(
    pairs: &[(SparseVector, SparseVector)],
    predicate: &Predicate,
    epsilon: &Value,
    opts: CheckOptions,
) -> Result<HalfGraphReport, CertifyError> {
    if pairs.is_empty() {
        return Err(CertifyError::EmptyFamily);
    }
    check_epsilon(epsilon)?;
    predicate.validate()?;
    let n = pairs.len();
    let engine = Engine::new(pairs, predicate);
    if opts.require_exact && !engine.exact() {
        return Err(CertifyError::PredicateModeMismatch(predicate.to_string()));
    }
    let store = n <= MARGIN_MATRIX_CAP;

    let int_degree = match predicate {
        Predicate::Inner => Some(1),
        Predicate::IntPower(d) => Some(*d),
        _ => None,
    };
    let fast = match (engine.kernel().lattice_scale(), int_degree) {
        (Some(scale), Some(d)) => int_stats(&engine, d, opts.mode, store)?.map(|s| {
            let denom = num_traits::pow(scale.clone(), d as usize);
            s.map(|v| Value::Exact(BigRational::new(BigInt::from(v), denom.clone())))
        }),
        _ => None,
    };
    let stats = match fast {
        Some(s) => s,
        None => value_stats(&engine, opts.mode, store)?,
    };

    let margin_min = stats.min.as_ref().map(|(m, _, _)| m.clone());
    let mut report = HalfGraphReport {
        n,
        predicate: predicate.clone(),
        epsilon: epsilon.clone(),
        mode: opts.mode,
        tol: opts.tol,
        margin_min,
        argmin: stats.min.map(|(_, i, j)| (i, j)),
        margin_matrix: store.then_some(stats.rows),
        forward_range: stats.forward,
        backward_range: stats.backward,
        exact: engine.exact(),
        is_half_graph: false,
    };
    report.is_half_graph = report.is_half_graph_at(epsilon);
    Ok(report)
}

/// Checks that `w`, in its stored order, is a half-graph for `predicate` at
/// margin `epsilon`.
pub fn check_half_graph(
    w: &WitnessFamily,
    predicate: &Predicate,
    epsilon: &Value,
    opts: CheckOptions,
) -> Result<HalfGraphReport, CertifyError> {
    check_pairs(w.pairs(), predicate, epsilon, opts)
}
