//! Half-graph margins, the discrete Hilbert transform certificate, and
//! search for large half-graphs.

mod halfgraph;
mod search;
mod sfunctional;

pub use halfgraph::{check_half_graph, check_pairs, CheckOptions, HalfGraphReport, MarginMode, MARGIN_MATRIX_CAP};
pub use search::{max_half_graph, SearchMethod, SearchResult, BRUTE_FORCE_MAX};
pub use sfunctional::{hilbert_matrix, s_functional, vector_valued_bound_check, SFunctionalReport};

use thiserror::Error;

use crate::constructions::ConstructionError;
use crate::linalg::LinalgError;
use crate::predicates::PredicateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("exact arithmetic requested but {0} cannot be evaluated exactly")]
    PredicateModeMismatch(String),
    #[error("witness family is empty")]
    EmptyFamily,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(String),
    #[error("n = {0} is out of range")]
    NOutOfRange(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("brute force supports at most {BRUTE_FORCE_MAX} pairs, got {0}")]
    TooLargeForBruteForce(usize),
    #[error("search returned an ordering that failed re-verification")]
    VerificationFailed,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum
    }
}

impl std::iter::Sum<f64> for Kahan {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut k = Kahan::default();
        iter.for_each(|x| k.add(x));
        k
    }
}
