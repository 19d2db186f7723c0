//! Explicit witness families: the binary-tree half-graph, its shifted variant
//! for power connectives, and the orthonormal VC configuration.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{in_unit_ball, BasisLabel, LinalgError, Mode, SparseVector};
use crate::scalar::{ExactScalar, ScalarError};

/// Largest tree depth that is materialised.
pub const MAX_TREE_DEPTH: u32 = 20;
/// Largest VC configuration that is materialised (2^d realizers).
pub const MAX_VC_POINTS: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("depth m = {0} outside 1..={MAX_TREE_DEPTH}")]
    MOutOfRange(u32),
    #[error("point count d = {0} outside 1..={MAX_VC_POINTS}")]
    DOutOfRange(u32),
    #[error("epsilon {0} outside (0, 1]")]
    EpsilonOutOfRange(BigRational),
    #[error("d * epsilon^2 = {0} exceeds 4")]
    MarginTooLargeForDimension(BigRational),
    #[error("duplicate string {0:?}")]
    DuplicateString(String),
    #[error("invalid binary string {0:?}")]
    InvalidString(String),
    #[error("{side} vector of pair {index} lies outside the unit ball")]
    NotInUnitBall { index: usize, side: &'static str },
    #[error("pair {0} mixes exact and float vectors")]
    MixedModes(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Directed tree edge `v -> 2v + b` in heap numbering (root = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeEdge {
    pub parent_node: u64,
    pub child_bit: u8,
}

impl TreeEdge {
    pub fn new(parent_node: u64, child_bit: u8) -> Self {
        debug_assert!(parent_node >= 1 && child_bit <= 1);
        TreeEdge { parent_node, child_bit }
    }

    /// The child's heap index, used as the basis label.
    pub fn edge_key(self) -> u64 {
        2 * self.parent_node + self.child_bit as u64
    }

    pub fn from_key(key: u64) -> Option<Self> {
        (key >= 2).then(|| TreeEdge::new(key / 2, (key % 2) as u8))
    }

    pub fn label(self) -> BasisLabel {
        BasisLabel::Key(self.edge_key())
    }

    /// All `2^(m+1) - 2` edges of the depth-`m` tree, by key.
    pub fn all(m: u32) -> impl Iterator<Item = TreeEdge> {
        (2u64..(1u64 << (m + 1))).filter_map(TreeEdge::from_key)
    }
}

/// Heap index of the node reached by following `bits` from the root.
pub fn prefix_node(bits: impl IntoIterator<Item = u8>) -> u64 {
    bits.into_iter().fold(1, |v, b| 2 * v + b as u64)
}

/// Bits of the `i`-th string of length `m` in lexicographic order.
pub fn string_bits(i: u64, m: u32) -> impl Iterator<Item = u8> {
    (0..m).map(move |r| ((i >> (m - 1 - r)) & 1) as u8)
}

pub fn string_of(i: u64, m: u32) -> String {
    string_bits(i, m).map(|b| if b == 1 { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessKind {
    Tree { m: u32 },
    Shifted { m: u32, alpha: Option<f64> },
    Vc { d: u32, epsilon: BigRational },
    Custom,
}

impl WitnessKind {
    pub fn name(&self) -> &'static str {
        match self {
            WitnessKind::Tree { .. } => "tree",
            WitnessKind::Shifted { .. } => "shifted",
            WitnessKind::Vc { .. } => "vc",
            WitnessKind::Custom => "custom",
        }
    }
}

/// Ordered pairs `(x_i, y_i)` with every vector in the closed unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFamily {
    kind: WitnessKind,
    mode: Mode,
    basis: Vec<BasisLabel>,
    pairs: Vec<(SparseVector, SparseVector)>,
}

impl WitnessFamily {
    /// Validates modes and norms. An empty `basis` is replaced by the labels
    /// actually used.
    pub fn new(
        kind: WitnessKind,
        mode: Mode,
        basis: Vec<BasisLabel>,
        pairs: Vec<(SparseVector, SparseVector)>,
    ) -> Result<Self, ConstructionError> {
        pairs
            .par_iter()
            .enumerate()
            .try_for_each(|(index, (x, y))| {
                if x.mode() != mode || y.mode() != mode {
                    return Err(ConstructionError::MixedModes(index));
                }
                for (side, v) in [("x", x), ("y", y)] {
                    if !in_unit_ball(v, 1e-10) {
                        return Err(ConstructionError::NotInUnitBall { index, side });
                    }
                }
                Ok(())
            })?;
        let basis = if basis.is_empty() {
            let used: BTreeSet<&BasisLabel> =
                pairs.iter().flat_map(|(x, y)| x.labels().into_iter().chain(y.labels())).collect();
            used.into_iter().cloned().collect()
        } else {
            basis
        };
        Ok(WitnessFamily { kind, mode, basis, pairs })
    }

    pub fn kind(&self) -> &WitnessKind {
        &self.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn pairs(&self) -> &[(SparseVector, SparseVector)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn xs(&self) -> Vec<SparseVector> {
        self.pairs.iter().map(|(x, _)| x.clone()).collect()
    }

    pub fn ys(&self) -> Vec<SparseVector> {
        self.pairs.iter().map(|(_, y)| y.clone()).collect()
    }

    /// Same family with every `y_i` scaled by `lambda`.
    pub fn scale_ys(&self, lambda: &BigRational) -> Result<Self, ConstructionError> {
        let pairs = self.pairs.iter().map(|(x, y)| (x.clone(), y.scale(lambda))).collect();
        WitnessFamily::new(self.kind.clone(), self.mode, self.basis.clone(), pairs)
    }

    /// Sub-family in the given order.
    pub fn select(&self, order: &[usize]) -> Result<Self, ConstructionError> {
        let pairs = order.iter().map(|&i| self.pairs[i].clone()).collect();
        WitnessFamily::new(WitnessKind::Custom, self.mode, self.basis.clone(), pairs)
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        if let WitnessKind::Shifted { alpha: a, .. } = &mut self.kind {
            *a = Some(alpha);
        }
    }
}

/// Coefficient `c / sqrt(radicand)` in the requested mode.
#[derive(Clone)]
enum Coeff {
    Exact(ExactScalar),
    Float(f64),
}

impl Coeff {
    fn inv_sqrt(radicand: u64, mode: Mode) -> Result<Self, ScalarError> {
        Ok(match mode {
            Mode::Exact => Coeff::Exact(ExactScalar::inv_sqrt(radicand)?),
            Mode::Float => Coeff::Float(1.0 / (radicand as f64).sqrt()),
        })
    }

    fn vector(&self, labels: impl IntoIterator<Item = BasisLabel>) -> SparseVector {
        match self {
            Coeff::Exact(c) => SparseVector::from_exact(labels.into_iter().map(|l| (l, c.clone()))),
            Coeff::Float(c) => SparseVector::from_float(labels.into_iter().map(|l| (l, *c))),
        }
    }
}

fn check_depth(m: u32) -> Result<(), ConstructionError> {
    if (1..=MAX_TREE_DEPTH).contains(&m) {
        Ok(())
    } else {
        Err(ConstructionError::MOutOfRange(m))
    }
}

/// Root-to-leaf edges of string `i` and the left edges at its 1-positions.
fn tree_supports(i: u64, m: u32) -> (Vec<BasisLabel>, Vec<BasisLabel>) {
    let mut path = Vec::with_capacity(m as usize);
    let mut left = Vec::new();
    let mut node = 1u64;
    for b in string_bits(i, m) {
        if b == 1 {
            left.push(TreeEdge::new(node, 0).label());
        }
        node = 2 * node + b as u64;
        path.push(BasisLabel::Key(node));
    }
    (path, left)
}

fn tree_pairs(m: u32, edge_coeff: &Coeff, extra: Option<(BasisLabel, Coeff)>) -> Vec<(SparseVector, SparseVector)> {
    (0..1u64 << m)
        .into_par_iter()
        .map(|i| {
            let (path, left) = tree_supports(i, m);
            let (x, y) = (edge_coeff.vector(path), edge_coeff.vector(left));
            match &extra {
                None => (x, y),
                Some((label, c)) => {
                    let e = c.vector([label.clone()]);
                    let one = BigRational::one();
                    (
                        x.combine(&one, &e, &one).expect("disjoint supports"),
                        y.combine(&one, &e, &one).expect("disjoint supports"),
                    )
                }
            }
        })
        .collect()
}

/// The depth-`m` tree witness: `2^m` pairs in lexicographic order, with
/// `x_s` on the path of `s` and `y_s` on the left edges where `s_r = 1`, all
/// coefficients `m^(-1/2)`.
pub fn build_tree_witness(m: u32, mode: Mode) -> Result<WitnessFamily, ConstructionError> {
    check_depth(m)?;
    let coeff = Coeff::inv_sqrt(m as u64, mode)?;
    let basis = TreeEdge::all(m).map(TreeEdge::label).collect();
    WitnessFamily::new(WitnessKind::Tree { m }, mode, basis, tree_pairs(m, &coeff, None))
}

/// Label of the direction orthogonal to every tree edge.
pub fn shift_label() -> BasisLabel {
    BasisLabel::Key(0)
}

/// Tree witness rotated by `pi/4` towards `e_0`:
/// `x_s = 2^(-1/2) e_0 + 2^(-1/2) x'_s`, likewise for `y_s`.
pub fn build_shifted_witness(m: u32, mode: Mode) -> Result<WitnessFamily, ConstructionError> {
    check_depth(m)?;
    let coeff = Coeff::inv_sqrt(2 * m as u64, mode)?;
    let e0 = Coeff::inv_sqrt(2, mode)?;
    let basis = std::iter::once(shift_label())
        .chain(TreeEdge::all(m).map(TreeEdge::label))
        .collect();
    let pairs = tree_pairs(m, &coeff, Some((shift_label(), e0)));
    WitnessFamily::new(WitnessKind::Shifted { m, alpha: None }, mode, basis, pairs)
}

/// Orthonormal points with a realizer for every sign pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct VcWitness {
    pub d: u32,
    pub epsilon: BigRational,
    pub threshold: BigRational,
    pub points: Vec<SparseVector>,
    /// Bit `i` of the key set means point `i` lies in the subset.
    pub realizers: BTreeMap<u64, SparseVector>,
}

/// `x_i = e_i` and `y_S = (eps/2) * sum_i (+-1) e_i`, threshold `eps/2`.
pub fn build_vc_witness(d: u32, epsilon: &BigRational) -> Result<VcWitness, ConstructionError> {
    if !(1..=MAX_VC_POINTS).contains(&d) {
        return Err(ConstructionError::DOutOfRange(d));
    }
    if !epsilon.is_positive() || epsilon > &BigRational::one() {
        return Err(ConstructionError::EpsilonOutOfRange(epsilon.clone()));
    }
    let load = BigRational::from_integer(d.into()) * epsilon * epsilon;
    if load > BigRational::from_integer(4.into()) {
        return Err(ConstructionError::MarginTooLargeForDimension(load));
    }
    let half = epsilon / BigRational::from_integer(2.into());
    let points = (1..=d as u64).map(|i| SparseVector::basis(i, Mode::Exact)).collect();
    let realizers = (0..1u64 << d)
        .into_par_iter()
        .map(|mask| {
            let y = SparseVector::from_exact((0..d as u64).map(|i| {
                let c = if mask >> i & 1 == 1 { half.clone() } else { -half.clone() };
                (BasisLabel::Key(i + 1), ExactScalar::rational(c))
            }));
            (mask, y)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(VcWitness {
        d,
        epsilon: epsilon.clone(),
        threshold: half,
        points,
        realizers,
    })
}

/// Permutation sorting equal-length binary strings lexicographically.
pub fn lex_order<S: AsRef<str>>(strings: &[S]) -> Result<Vec<usize>, ConstructionError> {
    let len = strings.first().map(|s| s.as_ref().len());
    for s in strings {
        let s = s.as_ref();
        if Some(s.len()) != len || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(ConstructionError::InvalidString(s.to_string()));
        }
    }
    let mut order: Vec<usize> = (0..strings.len()).collect();
    order.sort_by(|&a, &b| strings[a].as_ref().cmp(strings[b].as_ref()));
    if let Some(w) = order.windows(2).find(|w| strings[w[0]].as_ref() == strings[w[1]].as_ref()) {
        return Err(ConstructionError::DuplicateString(strings[w[0]].as_ref().to_string()));
    }
    Ok(order)
}

/// Number of distinct labels used across all vectors.
pub fn used_dimension(w: &WitnessFamily) -> usize {
    let labels: BTreeSet<&BasisLabel> = w
        .pairs()
        .iter()
        .flat_map(|(x, y)| x.labels().into_iter().chain(y.labels()))
        .collect();
    labels.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner_product, norm_squared};
    use crate::scalar::Value;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn ip(a: &SparseVector, b: &SparseVector) -> Value {
        inner_product(a, b).unwrap()
    }

    #[test]
    fn depth_one_tree() {
        let w = build_tree_witness(1, Mode::Exact).unwrap();
        let p = w.pairs();
        assert_eq!(p[0].0, SparseVector::basis(2u64, Mode::Exact));
        assert!(p[0].1.is_zero());
        assert_eq!(p[1].0, SparseVector::basis(3u64, Mode::Exact));
        assert_eq!(p[1].1, SparseVector::basis(2u64, Mode::Exact));
        assert_eq!(w.basis().len(), 2);
    }

    #[test]
    fn depth_two_norms() {
        let w = build_tree_witness(2, Mode::Exact).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w.basis().len(), 6);
        let allowed = [q(0, 1), q(1, 2), q(1, 1)];
        for (x, y) in w.pairs() {
            assert_eq!(norm_squared(x), Value::Exact(q(1, 1)));
            assert!(allowed.iter().any(|a| norm_squared(y) == Value::Exact(a.clone())));
        }
        assert_eq!(ip(&w.pairs()[0].0, &w.pairs()[1].1), Value::Exact(q(1, 2)));
    }

    #[test]
    fn tree_claims_hold_exactly() {
        for m in 1..=5 {
            let w = build_tree_witness(m, Mode::Exact).unwrap();
            let p = w.pairs();
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    assert_eq!(ip(&p[i].0, &p[j].1), Value::Exact(q(1, m as i64)));
                    assert_eq!(ip(&p[j].0, &p[i].1), Value::zero());
                }
            }
            assert_eq!(used_dimension(&w), (1usize << (m + 1)) - 2);
        }
    }

    #[test]
    fn shifted_values() {
        let w = build_shifted_witness(2, Mode::Exact).unwrap();
        let p = w.pairs();
        assert_eq!(ip(&p[0].0, &p[1].1), Value::Exact(q(3, 4)));
        assert_eq!(ip(&p[1].0, &p[0].1), Value::Exact(q(1, 2)));
        let w1 = build_shifted_witness(1, Mode::Exact).unwrap();
        assert_eq!(w1.basis().len(), 3);
        for (x, _) in w1.pairs() {
            assert_eq!(norm_squared(x), Value::Exact(q(1, 1)));
        }
    }

    #[test]
    fn float_mode_matches_exact() {
        let e = build_tree_witness(3, Mode::Exact).unwrap();
        let f = build_tree_witness(3, Mode::Float).unwrap();
        for (a, b) in e.pairs().iter().zip(f.pairs()) {
            let (ve, vf) = (ip(&a.0, &a.1).to_f64(), ip(&b.0, &b.1).to_f64());
            assert!((ve - vf).abs() < 1e-15);
        }
    }

    #[test]
    fn depth_bounds() {
        assert_eq!(build_tree_witness(0, Mode::Exact).unwrap_err(), ConstructionError::MOutOfRange(0));
        assert!(build_shifted_witness(21, Mode::Float).is_err());
    }

    #[test]
    fn vc_witness_boundary() {
        let w = build_vc_witness(16, &q(1, 2)).unwrap();
        assert_eq!(w.realizers.len(), 1 << 16);
        assert_eq!(norm_squared(&w.realizers[&12345]), Value::Exact(q(1, 1)));
        let w = build_vc_witness(1, &q(1, 3)).unwrap();
        assert_eq!(ip(&w.points[0], &w.realizers[&0]), Value::Exact(q(-1, 6)));
        assert_eq!(ip(&w.points[0], &w.realizers[&1]), Value::Exact(q(1, 6)));
        assert!(matches!(
            build_vc_witness(5, &q(1, 1)),
            Err(ConstructionError::MarginTooLargeForDimension(_))
        ));
        assert!(build_vc_witness(0, &q(1, 2)).is_err());
        assert!(build_vc_witness(2, &q(3, 2)).is_err());
    }

    #[test]
    fn lex_order_examples() {
        assert_eq!(lex_order(&["10", "01", "00", "11"]).unwrap(), vec![2, 1, 0, 3]);
        assert_eq!(lex_order(&["0", "1"]).unwrap(), vec![0, 1]);
        let all: Vec<String> = (0..8).rev().map(|i| string_of(i, 3)).collect();
        let order = lex_order(&all).unwrap();
        let sorted: Vec<&str> = order.iter().map(|&i| all[i].as_str()).collect();
        assert_eq!(sorted, ["000", "001", "010", "011", "100", "101", "110", "111"]);
        assert!(matches!(lex_order(&["01", "01"]), Err(ConstructionError::DuplicateString(_))));
        assert!(lex_order(&["01", "1"]).is_err());
    }

    #[test]
    fn edge_keys() {
        assert_eq!(TreeEdge::all(3).count(), 14);
        let e = TreeEdge::from_key(13).unwrap();
        assert_eq!((e.parent_node, e.child_bit), (6, 1));
        assert_eq!(prefix_node([1, 0]), 6);
    }
}
