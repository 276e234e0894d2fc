//! Rooted trees `T(d,k)`: addresses, levels, complete antichains and the
//! counting formulas for balls around the root.
//!
//! The root has `k` children and every other vertex has `d` children. A
//! vertex is addressed by the labels read from the root, so the first label
//! lies in `0..k` and the later ones in `0..d`. Planar order is the
//! lexicographic order on label strings.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeShape {
    d: u8,
    k: u8,
}

impl TreeShape {
    /// Labels are printed as single digits, so both arities are capped at 10.
    pub fn new(d: u32, k: u32) -> Result<Self> {
        if !(2..=10).contains(&d) || !(2..=10).contains(&k) {
            return Err(Error::InvalidShape(format!(
                "need 2 <= d, k <= 10, got d={d}, k={k}"
            )));
        }
        Ok(TreeShape {
            d: d as u8,
            k: k as u8,
        })
    }

    pub fn d(&self) -> u32 {
        self.d as u32
    }

    pub fn k(&self) -> u32 {
        self.k as u32
    }

    /// Number of children of `v`.
    pub fn arity(&self, v: &Address) -> u8 {
        if v.is_root() {
            self.k
        } else {
            self.d
        }
    }

    /// The shape `T(d,d)` that every subtree below a non-root vertex is isomorphic to.
    pub fn regular(&self) -> TreeShape {
        TreeShape {
            d: self.d,
            k: self.d,
        }
    }

    pub fn validate(&self, a: &Address) -> Result<()> {
        for (i, &x) in a.0.iter().enumerate() {
            let bound = if i == 0 { self.k } else { self.d };
            if x >= bound {
                return Err(Error::InvalidAddress(format!(
                    "label {x} at depth {} of \"{a}\" exceeds arity {bound} in {self}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Exact number of vertices at height `n`.
    pub fn level_count(&self, n: u32) -> BigUint {
        if n == 0 {
            BigUint::one()
        } else {
            BigUint::from(self.k) * Pow::pow(BigUint::from(self.d), n - 1)
        }
    }

    /// `level_count` as a machine integer, for levels that are enumerated.
    pub fn level_size(&self, n: u32) -> Option<usize> {
        if n == 0 {
            return Some(1);
        }
        (self.d as usize)
            .checked_pow(n - 1)
            .and_then(|p| p.checked_mul(self.k as usize))
    }

    /// `|Aut(T^{<=n})| = k! * prod_{i=1}^{n-1} (d!)^{level_count(i)}`; equal to
    /// the index `[K : K^(n)]`. Level 0 gives 1.
    pub fn ball_automorphism_count(&self, n: u32) -> BigUint {
        if n == 0 {
            return BigUint::one();
        }
        let mut total = factorial(self.k as u64);
        let dfact = factorial(self.d as u64);
        for i in 1..n {
            total *= Pow::pow(&dfact, &self.level_count(i));
        }
        total
    }

    /// All vertices of height `n` in planar order.
    pub fn level(&self, n: u32) -> Vec<Address> {
        let mut cur = vec![Address::root()];
        for _ in 0..n {
            cur = cur
                .iter()
                .flat_map(|v| v.children(*self).collect::<Vec<_>>())
                .collect();
        }
        cur
    }

    pub fn level_antichain(&self, n: u32) -> CompleteAntichain {
        CompleteAntichain {
            shape: *self,
            leaves: self.level(n).into_iter().collect(),
        }
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T({},{})", self.d, self.k)
    }
}

pub fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Product `lo * (lo+1) * ... * hi` by balanced splitting; 1 when `lo > hi`.
pub fn range_product(lo: u64, hi: u64) -> BigUint {
    if lo > hi {
        return BigUint::one();
    }
    if hi - lo < 16 {
        return (lo..=hi).fold(BigUint::one(), |acc, i| acc * i);
    }
    let mid = lo + (hi - lo) / 2;
    range_product(lo, mid) * range_product(mid + 1, hi)
}

/// A vertex of `T(d,k)` given by its labels from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(Vec<u8>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn new(labels: Vec<u8>) -> Self {
        Address(labels)
    }

    pub fn labels(&self) -> &[u8] {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u8) -> Address {
        let mut v = self.0.clone();
        v.push(i);
        Address(v)
    }

    pub fn children(&self, shape: TreeShape) -> impl Iterator<Item = Address> + '_ {
        (0..shape.arity(self)).map(move |i| self.child(i))
    }

    pub fn parent(&self) -> Option<Address> {
        if self.0.is_empty() {
            None
        } else {
            Some(Address(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }

    /// `self` is an ancestor of `other` or equal to it.
    pub fn is_prefix_of(&self, other: &Address) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn comparable(&self, other: &Address) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn concat(&self, suffix: &[u8]) -> Address {
        let mut v = self.0.clone();
        v.extend_from_slice(suffix);
        Address(v)
    }

    /// Labels of `self` below the ancestor `prefix`.
    pub fn suffix_after(&self, prefix: &Address) -> &[u8] {
        debug_assert!(prefix.is_prefix_of(self));
        &self.0[prefix.0.len()..]
    }

    pub fn prefix(&self, len: usize) -> Address {
        Address(self.0[..len].to_vec())
    }

    /// Height-then-lexicographic comparison key.
    pub fn bfs_key(&self) -> (usize, &[u8]) {
        (self.0.len(), &self.0)
    }

    pub fn parse(s: &str) -> Result<Address> {
        let mut labels = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            let v = c
                .to_digit(10)
                .ok_or_else(|| Error::parse(i, format!("unexpected '{c}' in address")))?;
            labels.push(v as u8);
        }
        Ok(Address(labels))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Leaves of a complete finite rooted subtree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompleteAntichain {
    shape: TreeShape,
    leaves: BTreeSet<Address>,
}

impl CompleteAntichain {
    pub fn root(shape: TreeShape) -> Self {
        CompleteAntichain {
            shape,
            leaves: [Address::root()].into_iter().collect(),
        }
    }

    pub fn new(shape: TreeShape, leaves: impl IntoIterator<Item = Address>) -> Result<Self> {
        let leaves: BTreeSet<Address> = leaves.into_iter().collect();
        for a in &leaves {
            shape.validate(a)?;
        }
        if !is_complete(shape, &leaves) {
            let listed: Vec<String> = leaves.iter().map(|a| format!("\"{a}\"")).collect();
            return Err(Error::InvalidAddress(format!(
                "{{{}}} is not a complete antichain of {shape}",
                listed.join(", ")
            )));
        }
        Ok(CompleteAntichain { shape, leaves })
    }

    pub(crate) fn from_trusted(shape: TreeShape, leaves: BTreeSet<Address>) -> Self {
        debug_assert!(is_complete(shape, &leaves));
        CompleteAntichain { shape, leaves }
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn leaves(&self) -> &BTreeSet<Address> {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn contains(&self, a: &Address) -> bool {
        self.leaves.contains(a)
    }

    /// The leaf at or above `a`, if any.
    pub fn leaf_above(&self, a: &Address) -> Option<&Address> {
        (0..=a.height()).find_map(|len| self.leaves.get(&a.prefix(len)))
    }

    /// Leaves strictly below `a`, in planar order.
    pub fn leaves_below<'a>(&'a self, a: &'a Address) -> impl Iterator<Item = &'a Address> + 'a {
        self.leaves
            .range(a.clone()..)
            .take_while(move |l| a.is_prefix_of(l))
            .filter(move |l| *l != a)
    }

    pub fn max_height(&self) -> usize {
        self.leaves.iter().map(Address::height).max().unwrap_or(0)
    }

    /// Vertices strictly above some leaf, i.e. the internal vertices of the subtree.
    pub fn internal_vertices(&self) -> BTreeSet<Address> {
        let mut out = BTreeSet::new();
        for l in &self.leaves {
            for len in 0..l.height() {
                out.insert(l.prefix(len));
            }
        }
        out
    }

    /// Number of automorphisms of the finite subtree spanned by the leaves,
    /// counted as independent child permutations at every internal vertex.
    /// This is the index of the pointwise fixator of the subtree in `K`.
    pub fn fixator_index(&self) -> BigUint {
        let mut total = BigUint::one();
        for v in self.internal_vertices() {
            total *= factorial(self.shape.arity(&v) as u64);
        }
        total
    }

    /// Minimal refinement in which every target is a union of leaves.
    ///
    /// Targets at or below a leaf cause that leaf to be expanded along the
    /// path; targets already strictly above leaves are left alone, which makes
    /// the operation idempotent.
    pub fn refine<'t>(&self, targets: impl IntoIterator<Item = &'t Address>) -> Result<CompleteAntichain> {
        let mut leaves = self.leaves.clone();
        for t in targets {
            self.shape
                .validate(t)
                .map_err(|e| Error::InvalidTarget(e.to_string()))?;
            let Some(leaf) = (0..=t.height()).map(|len| t.prefix(len)).find(|p| leaves.contains(p)) else {
                continue;
            };
            let mut cur = leaf;
            while cur != *t {
                leaves.remove(&cur);
                let next = t.prefix(cur.height() + 1);
                for c in cur.children(self.shape) {
                    leaves.insert(c);
                }
                cur = next;
            }
        }
        Ok(CompleteAntichain {
            shape: self.shape,
            leaves,
        })
    }

    /// Common refinement of two complete antichains.
    pub fn meet(&self, other: &CompleteAntichain) -> CompleteAntichain {
        self.refine(other.leaves.iter())
            .expect("addresses of a valid antichain are valid targets")
    }
}

fn is_complete(shape: TreeShape, leaves: &BTreeSet<Address>) -> bool {
    if leaves.is_empty() {
        return false;
    }
    // Walk the finite subtree from the root; every branch must end in a leaf
    // and every leaf must be reached exactly once.
    let mut reached = 0usize;
    let mut stack = vec![Address::root()];
    let max_h = leaves.iter().map(Address::height).max().unwrap_or(0);
    while let Some(v) = stack.pop() {
        if leaves.contains(&v) {
            reached += 1;
            continue;
        }
        if v.height() >= max_h {
            return false;
        }
        stack.extend(v.children(shape));
    }
    reached == leaves.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(s: &str) -> Address {
        Address::parse(s).unwrap()
    }

    fn set(v: &[&str]) -> BTreeSet<Address> {
        v.iter().map(|s| addr(s)).collect()
    }

    #[test]
    fn level_counts() {
        let s22 = TreeShape::new(2, 2).unwrap();
        assert_eq!(s22.level_count(3), BigUint::from(8u32));
        let s35 = TreeShape::new(3, 5).unwrap();
        assert_eq!(s35.level_count(1), BigUint::from(5u32));
        assert_eq!(s35.level_count(2), BigUint::from(15u32));
        // enumeration agrees
        assert_eq!(s35.level(2).len(), 15);
        assert!(s35.level(2).iter().all(|a| s35.validate(a).is_ok()));
    }

    #[test]
    fn ball_counts_small() {
        let s22 = TreeShape::new(2, 2).unwrap();
        assert_eq!(s22.ball_automorphism_count(1), BigUint::from(2u32));
        assert_eq!(s22.ball_automorphism_count(2), BigUint::from(8u32));
        assert_eq!(s22.ball_automorphism_count(3), BigUint::from(128u32));
        let s34 = TreeShape::new(3, 4).unwrap();
        assert_eq!(s34.ball_automorphism_count(1), BigUint::from(24u32));
        assert_eq!(s22.ball_automorphism_count(0), BigUint::one());
    }

    #[test]
    fn shape_bounds() {
        assert!(TreeShape::new(1, 2).is_err());
        assert!(TreeShape::new(2, 11).is_err());
    }

    #[test]
    fn completeness_predicate() {
        let s = TreeShape::new(2, 2).unwrap();
        assert!(CompleteAntichain::new(s, set(&["0", "10", "11"])).is_ok());
        assert!(CompleteAntichain::new(s, set(&[""])).is_ok());
        assert!(CompleteAntichain::new(s, set(&["0", "10"])).is_err());
        assert!(CompleteAntichain::new(s, set(&["0", "1", "10"])).is_err());
        assert!(CompleteAntichain::new(s, set(&["0", "12"])).is_err());
    }

    #[test]
    fn refine_examples() {
        let s = TreeShape::new(2, 2).unwrap();
        let a = CompleteAntichain::new(s, set(&["0", "1"])).unwrap();
        let r = a.refine([addr("00")].iter()).unwrap();
        assert_eq!(r.leaves(), &set(&["00", "01", "1"]));
        let r = a.refine([].iter()).unwrap();
        assert_eq!(r, a);
        let r = a.refine([addr("10"), addr("010")].iter()).unwrap();
        assert_eq!(r.leaves(), &set(&["00", "010", "011", "10", "11"]));
        assert_eq!(r.refine([addr("10"), addr("010")].iter()).unwrap(), r);
        assert!(a.refine([addr("2")].iter()).is_err());
    }

    #[test]
    fn leaf_lookup() {
        let s = TreeShape::new(2, 2).unwrap();
        let a = CompleteAntichain::new(s, set(&["0", "10", "11"])).unwrap();
        assert_eq!(a.leaf_above(&addr("011")), Some(&addr("0")));
        assert_eq!(a.leaf_above(&addr("1")), None);
        let below: Vec<_> = a.leaves_below(&addr("1")).cloned().collect();
        assert_eq!(below, vec![addr("10"), addr("11")]);
        assert_eq!(a.fixator_index(), BigUint::from(4u32));
    }
}
