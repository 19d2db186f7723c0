use rayon::prelude::*;

use super::halfgraph::Engine;
use super::{check_pairs, CertifyError, CheckOptions, HalfGraphReport};
use crate::linalg::SparseVector;
use crate::predicates::Predicate;
use crate::scalar::Value;

/// Largest family searched exhaustively.
pub const BRUTE_FORCE_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    BruteForce,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub k: usize,
    /// Indices into the input, in half-graph order.
    pub ordering: Vec<usize>,
    /// Re-verification of the ordering.
    pub report: HalfGraphReport,
}

/// Bitset rows of the relation `i -> j` iff `f(x_i,y_j) - f(x_j,y_i) >= eps`.
struct Relation {
    words: usize,
    out: Vec<Vec<u64>>,
}

impl Relation {
    fn has(&self, i: usize, j: usize) -> bool {
        self.out[i][j / 64] >> (j % 64) & 1 == 1
    }
}

fn build_relation(
    pairs: &[(SparseVector, SparseVector)],
    predicate: &Predicate,
    epsilon: &Value,
    tol: f64,
) -> Result<Relation, CertifyError> {
    let n = pairs.len();
    let words = n.div_ceil(64);
    let engine = Engine::new(pairs, predicate);
    let rows: Vec<Vec<(usize, bool, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            Ok(engine
                .row(i)?
                .into_iter()
                .enumerate()
                .map(|(k, (f, b))| {
                    let forward = f.sub(&b).at_least(epsilon, tol);
                    let backward = b.sub(&f).at_least(epsilon, tol);
                    (i + 1 + k, forward, backward)
                })
                .collect())
        })
        .collect::<Result<_, CertifyError>>()?;
    let mut out = vec![vec![0u64; words]; n];
    for (i, row) in rows.into_iter().enumerate() {
        for (j, forward, backward) in row {
            if forward {
                out[i][j / 64] |= 1 << (j % 64);
            }
            if backward {
                out[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    Ok(Relation { words, out })
}

/// Largest subset whose members can be ordered so each beats every later one.
fn brute_force(rel: &Relation, n: usize) -> Vec<usize> {
    let out: Vec<u32> = rel.out.iter().map(|r| r.first().copied().unwrap_or(0) as u32).collect();
    // first[S] = the vertex leading an ordering of S, or NONE.
    const NONE: u8 = u8::MAX;
    let mut first = vec![NONE; 1 << n];
    let mut best = 0u32;
    for set in 1u32..(1 << n) {
        let mut rest = set;
        while rest != 0 {
            let v = rest.trailing_zeros();
            rest &= rest - 1;
            let others = set & !(1 << v);
            if others & !out[v as usize] == 0 && (others == 0 || first[others as usize] != NONE) {
                first[set as usize] = v as u8;
                break;
            }
        }
        if first[set as usize] != NONE && set.count_ones() > best.count_ones() {
            best = set;
        }
    }
    let mut order = Vec::new();
    let mut set = best;
    while set != 0 {
        let v = first[set as usize];
        order.push(v as usize);
        set &= !(1 << v);
    }
    order
}

/// Repeatedly take the candidate with the most successors among the
/// candidates (lowest index on ties) and keep only its successors.
fn greedy(rel: &Relation, n: usize) -> Vec<usize> {
    let mut cand = vec![0u64; rel.words];
    for v in 0..n {
        cand[v / 64] |= 1 << (v % 64);
    }
    let members = |c: &[u64]| -> Vec<usize> { (0..n).filter(|&v| c[v / 64] >> (v % 64) & 1 == 1).collect() };
    let mut order = Vec::new();
    loop {
        let live = members(&cand);
        let Some(&pick) = live.iter().max_by_key(|&&v| {
            let deg: u32 = rel.out[v].iter().zip(&cand).map(|(a, b)| (a & b).count_ones()).sum();
            (deg, std::cmp::Reverse(v))
        }) else {
            break;
        };
        order.push(pick);
        for (c, o) in cand.iter_mut().zip(&rel.out[pick]) {
            *c &= o;
        }
    }
    order
}

/// Finds a large half-graph among `pairs`: exactly for
/// [`SearchMethod::BruteForce`], heuristically for [`SearchMethod::Greedy`].
/// The returned ordering is re-checked before it is returned.
pub fn max_half_graph(
    pairs: &[(SparseVector, SparseVector)],
    predicate: &Predicate,
    epsilon: &Value,
    method: SearchMethod,
    opts: CheckOptions,
) -> Result<SearchResult, CertifyError> {
    let n = pairs.len();
    if n == 0 {
        return Err(CertifyError::EmptyFamily);
    }
    if method == SearchMethod::BruteForce && n > BRUTE_FORCE_MAX {
        return Err(CertifyError::TooLargeForBruteForce(n));
    }
    if epsilon.to_f64() <= 0.0 {
        return Err(CertifyError::InvalidEpsilon(epsilon.to_string()));
    }
    let rel = build_relation(pairs, predicate, epsilon, opts.tol)?;
    let ordering = match method {
        SearchMethod::BruteForce => brute_force(&rel, n),
        SearchMethod::Greedy => greedy(&rel, n),
    };
    for (a, &i) in ordering.iter().enumerate() {
        if ordering[a + 1..].iter().any(|&j| !rel.has(i, j)) {
            return Err(CertifyError::VerificationFailed);
        }
    }
    let selected: Vec<_> = ordering.iter().map(|&i| pairs[i].clone()).collect();
    let report = check_pairs(&selected, predicate, epsilon, opts)?;
    if !report.is_half_graph {
        return Err(CertifyError::VerificationFailed);
    }
    Ok(SearchResult {
        k: ordering.len(),
        ordering,
        report,
    })
}
