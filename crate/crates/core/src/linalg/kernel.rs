//! Batched inner products `<x_i, y_j>` between two vector lists.
//!
//! Exact lists are rescaled to a common integer lattice: with `B` the lcm of
//! all radicands and `Lx`, `Ly` the lcm of the coefficient denominators of
//! each side, `K * <x_i, y_j>` is an integer for `K = B * Lx * Ly`. Products
//! are then accumulated in `i128`. Lists that do not fit fall back to
//! big-rational arithmetic.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use super::{inner_product, BasisLabel, LinalgError, SparseVector};
use crate::scalar::Value;

type Packed<T> = Vec<(u32, T)>;

#[derive(Debug, Clone)]
struct Lattice {
    /// (label, radicand, scaled integer coefficient)
    xs: Vec<Vec<(u32, u64, i64)>>,
    ys: Vec<Vec<(u32, u64, i64)>>,
    /// lcm of all radicands.
    radicands: u64,
    /// `K`.
    scale: BigInt,
}

#[derive(Debug, Clone)]
enum Repr {
    Lattice(Lattice),
    Float { xs: Vec<Packed<f64>>, ys: Vec<Packed<f64>> },
    Generic { xs: Vec<SparseVector>, ys: Vec<SparseVector> },
}

/// Inner products between `xs[i]` and `ys[j]`, exact when every vector is.
#[derive(Debug, Clone)]
pub struct PairKernel {
    repr: Repr,
}

fn intern(labels: &mut HashMap<BasisLabel, u32>, label: &BasisLabel) -> u32 {
    let next = labels.len() as u32;
    *labels.entry(label.clone()).or_insert(next)
}

fn lcm_u64(a: u64, b: u64) -> Option<u64> {
    let g = a.gcd(&b);
    (a / g).checked_mul(b)
}

fn pack_side(
    vectors: &[SparseVector],
    labels: &mut HashMap<BasisLabel, u32>,
) -> Option<(Vec<Vec<(u32, u64, BigRational)>>, BigInt, u64)> {
    let mut den_lcm = BigInt::one();
    let mut rad_lcm = 1u64;
    let mut out = Vec::with_capacity(vectors.len());
    for v in vectors {
        let SparseVector::Exact(map) = v else {
            return None;
        };
        let mut packed = Vec::with_capacity(map.len());
        for (label, c) in map {
            den_lcm = den_lcm.lcm(c.denominator());
            rad_lcm = lcm_u64(rad_lcm, c.tag().radicand())?;
            packed.push((intern(labels, label), c.tag().radicand(), c.cofactor().clone()));
        }
        packed.sort_by_key(|e| e.0);
        out.push(packed);
    }
    Some((out, den_lcm, rad_lcm))
}

fn to_lattice(side: Vec<Vec<(u32, u64, BigRational)>>, den: &BigInt) -> Option<Vec<Vec<(u32, u64, i64)>>> {
    side.into_iter()
        .map(|v| {
            v.into_iter()
                .map(|(l, r, c)| {
                    let scaled = c.numer() * (den / c.denom());
                    scaled.to_i64().map(|s| (l, r, s))
                })
                .collect()
        })
        .collect()
}

fn pack_float(vectors: &[SparseVector], labels: &mut HashMap<BasisLabel, u32>) -> Vec<Packed<f64>> {
    vectors
        .iter()
        .map(|v| {
            let mut p: Packed<f64> = v
                .float_entries()
                .into_iter()
                .map(|(k, c)| (intern(labels, k), c))
                .collect();
            p.sort_by_key(|e| e.0);
            p
        })
        .collect()
}

fn tag_name(radicand: u64) -> String {
    if radicand == 1 {
        "1".into()
    } else {
        format!("1/sqrt({radicand})")
    }
}

impl Lattice {
    /// Merge-join over shared labels, calling `f(a, b, radicand_ratio)`.
    fn merge(
        &self,
        i: usize,
        j: usize,
        mut f: impl FnMut(i64, i64, u64) -> bool,
    ) -> Result<bool, LinalgError> {
        let (a, b) = (&self.xs[i], &self.ys[j]);
        let (mut p, mut q) = (0, 0);
        while p < a.len() && q < b.len() {
            match a[p].0.cmp(&b[q].0) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    let (ra, rb) = (a[p].1, b[q].1);
                    if ra != rb {
                        return Err(LinalgError::IncompatibleScaleTags(tag_name(ra), tag_name(rb)));
                    }
                    if !f(a[p].2, b[q].2, self.radicands / ra) {
                        return Ok(false);
                    }
                    p += 1;
                    q += 1;
                }
            }
        }
        Ok(true)
    }

    /// `None` on `i128` overflow.
    fn dot_small(&self, i: usize, j: usize) -> Result<Option<i128>, LinalgError> {
        let mut sum: i128 = 0;
        let done = self.merge(i, j, |a, b, w| {
            match (a as i128)
                .checked_mul(b as i128)
                .and_then(|t| t.checked_mul(w as i128))
                .and_then(|t| sum.checked_add(t))
            {
                Some(s) => {
                    sum = s;
                    true
                }
                None => false,
            }
        })?;
        Ok(done.then_some(sum))
    }

    fn dot_big(&self, i: usize, j: usize) -> Result<BigInt, LinalgError> {
        let mut sum = BigInt::from(0);
        self.merge(i, j, |a, b, w| {
            sum += BigInt::from(a) * BigInt::from(b) * BigInt::from(w);
            true
        })?;
        Ok(sum)
    }
}

impl PairKernel {
    pub fn new(xs: &[SparseVector], ys: &[SparseVector]) -> Self {
        let mut labels = HashMap::new();
        if let (Some((px, lx, bx)), Some((py, ly, by))) =
            (pack_side(xs, &mut labels), pack_side(ys, &mut labels))
        {
            if let Some(radicands) = lcm_u64(bx, by) {
                if let (Some(x), Some(y)) = (to_lattice(px, &lx), to_lattice(py, &ly)) {
                    let scale = BigInt::from(radicands) * lx * ly;
                    return PairKernel {
                        repr: Repr::Lattice(Lattice {
                            xs: x,
                            ys: y,
                            radicands,
                            scale,
                        }),
                    };
                }
            }
            return PairKernel {
                repr: Repr::Generic {
                    xs: xs.to_vec(),
                    ys: ys.to_vec(),
                },
            };
        }
        let mut labels = HashMap::new();
        PairKernel {
            repr: Repr::Float {
                xs: pack_float(xs, &mut labels),
                ys: pack_float(ys, &mut labels),
            },
        }
    }

    pub fn len_x(&self) -> usize {
        match &self.repr {
            Repr::Lattice(l) => l.xs.len(),
            Repr::Float { xs, .. } => xs.len(),
            Repr::Generic { xs, .. } => xs.len(),
        }
    }

    pub fn len_y(&self) -> usize {
        match &self.repr {
            Repr::Lattice(l) => l.ys.len(),
            Repr::Float { ys, .. } => ys.len(),
            Repr::Generic { ys, .. } => ys.len(),
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.repr, Repr::Float { .. })
    }

    /// `K` such that `K * <x_i, y_j>` is an integer, on the lattice path.
    pub fn lattice_scale(&self) -> Option<&BigInt> {
        match &self.repr {
            Repr::Lattice(l) => Some(&l.scale),
            _ => None,
        }
    }

    /// `K * <x_i, y_j>` as an integer, when the lattice path applies and the
    /// sum fits in `i128`.
    pub fn lattice_dot(&self, i: usize, j: usize) -> Option<Result<i128, LinalgError>> {
        let Repr::Lattice(l) = &self.repr else {
            return None;
        };
        l.dot_small(i, j).transpose()
    }

    /// `<x_i, y_j>`.
    pub fn dot(&self, i: usize, j: usize) -> Result<Value, LinalgError> {
        match &self.repr {
            Repr::Lattice(l) => {
                let n = match l.dot_small(i, j)? {
                    Some(n) => BigInt::from(n),
                    None => l.dot_big(i, j)?,
                };
                Ok(Value::Exact(BigRational::new(n, l.scale.clone())))
            }
            Repr::Float { xs, ys } => {
                let (a, b) = (&xs[i], &ys[j]);
                let (mut p, mut q) = (0, 0);
                let mut sum = 0.0;
                while p < a.len() && q < b.len() {
                    match a[p].0.cmp(&b[q].0) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            sum += a[p].1 * b[q].1;
                            p += 1;
                            q += 1;
                        }
                    }
                }
                Ok(Value::Float(sum))
            }
            Repr::Generic { xs, ys } => inner_product(&xs[i], &ys[j]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mode;
    use crate::scalar::ExactScalar;

    fn tagged(entries: &[(u64, i64, i64, u64)]) -> SparseVector {
        SparseVector::from_exact(entries.iter().map(|&(k, n, d, r)| {
            (
                BasisLabel::Key(k),
                ExactScalar::new(BigRational::new(n.into(), d.into()), r).unwrap(),
            )
        }))
    }

    #[test]
    fn lattice_matches_direct_inner_products() {
        let xs = vec![
            tagged(&[(0, 1, 1, 2), (5, 1, 1, 6), (6, 1, 3, 6)]),
            tagged(&[(5, -2, 7, 6)]),
            SparseVector::zero(Mode::Exact),
        ];
        let ys = vec![
            tagged(&[(0, 1, 1, 2), (6, 1, 1, 6)]),
            tagged(&[(5, 3, 5, 6), (9, 1, 1, 1)]),
        ];
        let k = PairKernel::new(&xs, &ys);
        assert!(k.lattice_scale().is_some());
        for i in 0..xs.len() {
            for j in 0..ys.len() {
                assert_eq!(k.dot(i, j).unwrap(), inner_product(&xs[i], &ys[j]).unwrap());
            }
        }
    }

    #[test]
    fn float_lists_use_float_path() {
        let xs = vec![SparseVector::from_dense(&[0.5, 0.5])];
        let ys = vec![SparseVector::from_dense(&[1.0, -1.0]), SparseVector::basis(2u64, Mode::Exact)];
        let k = PairKernel::new(&xs, &ys);
        assert!(!k.is_exact());
        assert_eq!(k.dot(0, 0).unwrap(), Value::Float(0.0));
        assert_eq!(k.dot(0, 1).unwrap(), Value::Float(0.5));
    }

    #[test]
    fn incompatible_tags_error() {
        let xs = vec![tagged(&[(1, 1, 1, 2)])];
        let ys = vec![tagged(&[(1, 1, 1, 3)])];
        let k = PairKernel::new(&xs, &ys);
        assert!(matches!(k.dot(0, 0), Err(LinalgError::IncompatibleScaleTags(_, _))));
    }
}
