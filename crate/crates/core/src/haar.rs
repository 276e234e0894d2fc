//! Haar measure and coset calculus, normalized so that `μ(K) = 1`.
//!
//! `K^(n)` is the pointwise fixator of the height-`n` level. More generally
//! `K_L` denotes the fixator of the finite subtree spanned by a complete
//! antichain `L`, so that `K^(n) = K_{V_n}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::element::{AlmostAutomorphism, SubgroupClass};
use crate::error::{Error, Result};
use crate::perm::Perm;
use crate::portrait::Portrait;
use crate::tree::{Address, CompleteAntichain, TreeShape};

pub type MeasureValue = BigRational;

pub const DEFAULT_PARTITION_CAP: usize = 1_000_000;

static PARTITION_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_PARTITION_CAP);

/// Largest number of pieces any single refinement may produce.
pub fn partition_cap() -> usize {
    PARTITION_CAP.load(Ordering::Relaxed)
}

pub fn set_partition_cap(cap: usize) {
    PARTITION_CAP.store(cap.max(1), Ordering::Relaxed);
}

/// The left coset `rep · K^(level)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coset {
    pub rep: AlmostAutomorphism,
    pub level: u32,
}

impl Coset {
    pub fn new(rep: AlmostAutomorphism, level: u32) -> Self {
        Coset { rep, level }
    }

    pub fn subgroup(shape: TreeShape, level: u32) -> Self {
        Coset::new(AlmostAutomorphism::identity(shape), level)
    }

    pub fn shape(&self) -> TreeShape {
        self.rep.shape()
    }
}

impl fmt::Display for Coset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} K^({})", self.rep, self.level)
    }
}

/// `μ(K^(n)) = 1 / |Aut(T^{<=n})|`.
pub fn measure_level(shape: TreeShape, n: u32) -> MeasureValue {
    BigRational::new(BigInt::one(), BigInt::from(shape.ball_automorphism_count(n)))
}

pub fn measure_coset(c: &Coset) -> MeasureValue {
    measure_level(c.shape(), c.level)
}

/// `μ(K_L) = 1 / [K : K_L]`.
pub fn measure_fixator(l: &CompleteAntichain) -> MeasureValue {
    BigRational::new(BigInt::one(), BigInt::from(l.fixator_index()))
}

pub fn coset_member(gamma: &AlmostAutomorphism, c: &Coset) -> bool {
    c.rep
        .inverse()
        .compose(gamma)
        .membership(SubgroupClass::Kn(c.level))
}

pub fn coset_equal(c1: &Coset, c2: &Coset) -> Result<bool> {
    if c1.level != c2.level {
        return Err(Error::LevelMismatch(c1.level, c2.level));
    }
    Ok(coset_member(&c1.rep, c2))
}

fn check_cap(count: &num_bigint::BigUint, what: &str) -> Result<usize> {
    let cap = partition_cap();
    match count.to_usize() {
        Some(n) if n <= cap => Ok(n),
        _ => Err(Error::ResourceLimit(format!(
            "{what} needs {count} pieces, cap is {cap}"
        ))),
    }
}

/// Representatives of `K_coarse / K_fine` for a refinement `fine` of
/// `coarse`: all portraits supported on vertices at or below a coarse leaf
/// and strictly above a fine leaf, enumerated in lexicographic order.
pub fn transversal(coarse: &CompleteAntichain, fine: &CompleteAntichain) -> Result<Vec<AlmostAutomorphism>> {
    let shape = coarse.shape();
    let mut vertices: Vec<Address> = fine
        .internal_vertices()
        .into_iter()
        .filter(|v| coarse.leaf_above(v).is_some())
        .collect();
    vertices.sort_by(|a, b| a.bfs_key().cmp(&b.bfs_key()));
    let mut count = num_bigint::BigUint::one();
    for v in &vertices {
        count *= crate::tree::factorial(shape.arity(v) as u64);
    }
    let total = check_cap(&count, "transversal")?;
    let choices: Vec<Vec<Perm>> = vertices
        .iter()
        .map(|v| Perm::all(shape.arity(v) as usize))
        .collect();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; vertices.len()];
    loop {
        let mut p = Portrait::identity();
        for (i, v) in vertices.iter().enumerate() {
            p.set(v.clone(), choices[i][idx[i]].clone());
        }
        out.push(AlmostAutomorphism::from_portrait(shape, p).expect("valid portrait"));
        // odometer, last vertex fastest
        let mut pos = vertices.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Disjoint level-`m` cosets covering `c`, in transversal order.
pub fn partition_coset(c: &Coset, m: u32) -> Result<Vec<Coset>> {
    if m < c.level {
        return Err(Error::LevelMismatch(c.level, m));
    }
    if m == c.level {
        return Ok(vec![c.clone()]);
    }
    let shape = c.shape();
    let reps = transversal(&shape.level_antichain(c.level), &shape.level_antichain(m))?;
    Ok(reps
        .into_iter()
        .map(|k| Coset::new(c.rep.compose(&k), m))
        .collect())
}

/// Smallest set of balls with the same union.
pub fn normalize_clopen(shape: TreeShape, balls: impl IntoIterator<Item = Address>) -> Vec<Address> {
    let mut set: std::collections::BTreeSet<Address> = balls.into_iter().collect();
    // drop balls covered by another
    let snapshot: Vec<Address> = set.iter().cloned().collect();
    for b in &snapshot {
        if (0..b.height()).any(|len| set.contains(&b.prefix(len))) {
            set.remove(b);
        }
    }
    loop {
        let mut merged = None;
        for b in set.iter().rev() {
            if let Some(p) = b.parent() {
                if p.children(shape).all(|c| set.contains(&c)) {
                    merged = Some(p);
                    break;
                }
            }
        }
        match merged {
            Some(p) => {
                let children: Vec<Address> = p.children(shape).collect();
                for c in children {
                    set.remove(&c);
                }
                set.insert(p);
            }
            None => break,
        }
    }
    set.into_iter().collect()
}

/// Images of the level balls as clopen sets. Equal cosets have equal
/// fingerprints; the converse fails in general.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub Vec<Vec<Address>>);

pub fn coset_fingerprint(c: &Coset) -> Fingerprint {
    let shape = c.shape();
    Fingerprint(
        shape
            .level(c.level)
            .iter()
            .map(|v| normalize_clopen(shape, c.rep.image_balls(v)))
            .collect(),
    )
}

/// Complete invariant of a coset: for every level vertex `v`, the restriction
/// of the representative to `B^v` up to rooted automorphisms of `T^v`,
/// encoded as an unordered tree whose leaves carry image balls.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CosetKey(pub Vec<NodeKey>);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKey {
    Leaf(Address),
    Node(Vec<NodeKey>),
}

pub fn coset_key(c: &Coset) -> CosetKey {
    let shape = c.shape();
    CosetKey(
        shape
            .level(c.level)
            .iter()
            .map(|v| node_key(&c.rep, v))
            .collect(),
    )
}

fn node_key(g: &AlmostAutomorphism, v: &Address) -> NodeKey {
    match g.evaluate_ball(v) {
        Ok((img, _)) => NodeKey::Leaf(img),
        Err(_) => {
            let mut kids: Vec<NodeKey> = v.children(g.shape()).map(|c| node_key(g, &c)).collect();
            kids.sort();
            NodeKey::Node(kids)
        }
    }
}

/// Groups cosets by key, keeping the first representative of each class.
pub fn dedup_cosets(cosets: impl IntoIterator<Item = Coset>) -> BTreeMap<CosetKey, Coset> {
    let mut out = BTreeMap::new();
    for c in cosets {
        out.entry(coset_key(&c)).or_insert(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::SubgroupClass;

    fn s22() -> TreeShape {
        TreeShape::new(2, 2).unwrap()
    }

    fn shift() -> AlmostAutomorphism {
        AlmostAutomorphism::parse(s22(), "{0->00, 10->01, 11->1}").unwrap()
    }

    #[test]
    fn measures() {
        assert_eq!(measure_level(s22(), 0), BigRational::one());
        assert_eq!(
            measure_coset(&Coset::new(shift(), 2)),
            BigRational::new(1.into(), 8.into())
        );
    }

    #[test]
    fn partition_counts_and_measure() {
        let shape = s22();
        let c = Coset::subgroup(shape, 1);
        let parts = partition_coset(&c, 2).unwrap();
        assert_eq!(parts.len(), 4);
        let total: BigRational = parts.iter().map(measure_coset).sum();
        assert_eq!(total, measure_coset(&c));
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                assert!(!coset_equal(a, b).unwrap());
            }
            assert!(coset_member(&a.rep, &c));
        }
        assert_eq!(partition_coset(&c, 1).unwrap(), vec![c]);
    }

    #[test]
    fn membership_examples() {
        let shape = s22();
        assert!(coset_member(&AlmostAutomorphism::identity(shape), &Coset::subgroup(shape, 3)));
        assert!(!coset_member(&shift(), &Coset::subgroup(shape, 1)));
        assert!(matches!(
            coset_equal(&Coset::subgroup(shape, 1), &Coset::subgroup(shape, 2)),
            Err(Error::LevelMismatch(1, 2))
        ));
    }

    #[test]
    fn right_invariance() {
        let shape = s22();
        for seed in 0..40 {
            let g = AlmostAutomorphism::random(shape, seed, SubgroupClass::N, 2);
            for n in 0..3 {
                let k = AlmostAutomorphism::random(shape, seed + 1000, SubgroupClass::Kn(n), 2);
                let a = Coset::new(g.clone(), n);
                let b = Coset::new(g.compose(&k), n);
                assert!(coset_equal(&a, &b).unwrap());
                assert_eq!(coset_fingerprint(&a), coset_fingerprint(&b));
                assert_eq!(coset_key(&a), coset_key(&b));
            }
        }
    }

    #[test]
    fn fingerprint_is_incomplete() {
        let shape = s22();
        // a local similarity inside B^0 that fixes B^0 and B^1 as sets
        let g = AlmostAutomorphism::parse(shape, "{00->000, 010->001, 011->01, 1->1}").unwrap();
        let a = Coset::new(g, 1);
        let b = Coset::subgroup(shape, 1);
        assert_eq!(coset_fingerprint(&a), coset_fingerprint(&b));
        assert!(!coset_equal(&a, &b).unwrap());
        assert_ne!(coset_key(&a), coset_key(&b));
    }

    #[test]
    fn clopen_normalization() {
        let shape = s22();
        let balls = ["00", "01", "10", "110", "111"].map(|s| Address::parse(s).unwrap());
        assert_eq!(normalize_clopen(shape, balls), vec![Address::root()]);
    }
}
