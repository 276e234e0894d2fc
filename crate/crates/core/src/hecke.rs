//! Double-coset algebras `C[k\Q/k]` of finite groups under counting-measure
//! convolution, and commutants of normalizer images inside them.
//!
//! Structure constants are unnormalized counts:
//! `1_{D_i} * 1_{D_j} = Σ_l c_ij^l 1_{D_l}` with
//! `c_ij^l = #{u ∈ D_i : u^-1 x_l ∈ D_j}` for any `x_l ∈ D_l`. With this
//! normalization the unit is `|k|^-1 1_k` and `Σ_l c_ij^l |D_l| = |D_i| |D_j|`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group::PermGroup;
use crate::haar::partition_cap;
use crate::perm::Perm;

pub const MAX_GROUP_ORDER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct DoubleCosetAlgebra {
    pub q: PermGroup,
    pub k: PermGroup,
    /// Element indices of each double coset, sorted; `cosets[0]` is `k`.
    pub cosets: Vec<Vec<usize>>,
    coset_of: Vec<usize>,
    /// `consts[i][j][l] = c_ij^l`.
    pub consts: Vec<Vec<Vec<u64>>>,
}

impl DoubleCosetAlgebra {
    pub fn new(q: PermGroup, k: PermGroup) -> Result<Self> {
        if q.order() > MAX_GROUP_ORDER.min(partition_cap()) {
            return Err(Error::ResourceLimit(format!("|Q| = {} exceeds the Hecke cap", q.order())));
        }
        if !k.is_subgroup_of(&q) {
            return Err(Error::InvalidGroup("k is not a subgroup of Q".into()));
        }
        let kidx: Vec<usize> = k.elements().iter().map(|p| q.index_of(p).unwrap()).collect();
        let n = q.order();
        let mut coset_of = vec![usize::MAX; n];
        let mut cosets = Vec::new();
        // scanning in index order makes each coset's least element its label
        for x in 0..n {
            if coset_of[x] != usize::MAX {
                continue;
            }
            let mut set = BTreeSet::new();
            for &a in &kidx {
                let ax = q.mul(a, x);
                for &b in &kidx {
                    set.insert(q.mul(ax, b));
                }
            }
            let id = cosets.len();
            for &y in &set {
                coset_of[y] = id;
            }
            cosets.push(set.into_iter().collect::<Vec<_>>());
        }
        let r = cosets.len();
        let mut consts = vec![vec![vec![0u64; r]; r]; r];
        for l in 0..r {
            let xl = cosets[l][0];
            for (i, di) in cosets.iter().enumerate() {
                for &u in di {
                    let j = coset_of[q.mul(q.inv(u), xl)];
                    consts[i][j][l] += 1;
                }
            }
        }
        Ok(DoubleCosetAlgebra {
            q,
            k,
            cosets,
            coset_of,
            consts,
        })
    }

    pub fn dim(&self) -> usize {
        self.cosets.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.cosets.iter().map(Vec::len).collect()
    }

    pub fn coset_of(&self, x: usize) -> usize {
        self.coset_of[x]
    }

    /// Product of coefficient vectors in the indicator basis.
    pub fn mul(&self, f: &[BigRational], g: &[BigRational]) -> Vec<BigRational> {
        let r = self.dim();
        let mut out = vec![BigRational::zero(); r];
        for i in 0..r {
            if f[i].is_zero() {
                continue;
            }
            for j in 0..r {
                if g[j].is_zero() {
                    continue;
                }
                let fg = &f[i] * &g[j];
                for (l, o) in out.iter_mut().enumerate() {
                    let c = self.consts[i][j][l];
                    if c != 0 {
                        *o += &fg * BigInt::from(c);
                    }
                }
            }
        }
        out
    }

    pub fn unit(&self) -> Vec<BigRational> {
        let mut u = vec![BigRational::zero(); self.dim()];
        u[0] = BigRational::new(BigInt::one(), BigInt::from(self.k.order()));
        u
    }

    pub fn basis_vector(&self, i: usize) -> Vec<BigRational> {
        let mut v = vec![BigRational::zero(); self.dim()];
        v[i] = BigRational::one();
        v
    }

    pub fn check_associative(&self) -> bool {
        let r = self.dim();
        for i in 0..r {
            for j in 0..r {
                for l in 0..r {
                    for p in 0..r {
                        let lhs: u64 = (0..r).map(|m| self.consts[i][j][m] * self.consts[m][l][p]).sum();
                        let rhs: u64 = (0..r).map(|m| self.consts[j][l][m] * self.consts[i][m][p]).sum();
                        if lhs != rhs {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn check_mass(&self) -> bool {
        let sizes = self.sizes();
        let r = self.dim();
        (0..r).all(|i| {
            (0..r).all(|j| {
                (0..r).map(|l| self.consts[i][j][l] * sizes[l] as u64).sum::<u64>() == (sizes[i] * sizes[j]) as u64
            })
        })
    }

    pub fn check_unit(&self) -> bool {
        let u = self.unit();
        (0..self.dim()).all(|i| {
            let e = self.basis_vector(i);
            self.mul(&u, &e) == e && self.mul(&e, &u) == e
        })
    }

    /// Coset index of `hk` for `h` normalizing `k`.
    fn coset_of_perm(&self, h: &Perm) -> Result<usize> {
        let i = self
            .q
            .index_of(h)
            .ok_or_else(|| Error::InvalidGroup(format!("{} is not in Q", h.to_cycle_string(1))))?;
        Ok(self.coset_of[i])
    }

    fn check_normalizes(&self, h: &PermGroup) -> Result<()> {
        for g in h.generators() {
            if !self.q.contains(g) {
                return Err(Error::InvalidGroup(format!("{} is not in Q", g.to_cycle_string(1))));
            }
            if !self.k.normalizes(g) {
                return Err(Error::HypothesisViolation(format!(
                    "{} does not normalize k",
                    g.to_cycle_string(1)
                )));
            }
        }
        Ok(())
    }

    /// Dimension of `{z : z * 1_{hk} = 1_{hk} * z for every generator h}`,
    /// by exact elimination on the structure constants.
    pub fn commutant_dimension(&self, h: &PermGroup) -> Result<usize> {
        self.check_normalizes(h)?;
        let r = self.dim();
        let mut rows = Vec::new();
        for g in h.generators() {
            let hc = self.coset_of_perm(g)?;
            for p in 0..r {
                rows.push(
                    (0..r)
                        .map(|l| BigRational::from_integer(BigInt::from(self.consts[l][hc][p]) - BigInt::from(self.consts[hc][l][p])))
                        .collect(),
                );
            }
        }
        Ok(r - rank(rows, r))
    }

    /// Number of orbits of `h` acting on the double cosets by conjugation.
    pub fn conjugation_orbit_count(&self, h: &PermGroup) -> Result<usize> {
        self.check_normalizes(h)?;
        let r = self.dim();
        let mut parent: Vec<usize> = (0..r).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for g in h.generators() {
            let gi = self.q.index_of(g).unwrap();
            let ginv = self.q.inv(gi);
            for i in 0..r {
                let x = self.cosets[i][0];
                let j = self.coset_of[self.q.mul(self.q.mul(gi, x), ginv)];
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        Ok((0..r).filter(|&i| find(&mut parent, i) == i).count())
    }

    pub fn to_json(&self) -> Value {
        let r = self.dim();
        let mut products = Vec::new();
        for i in 0..r {
            for j in 0..r {
                let terms: Vec<Value> = (0..r)
                    .filter(|&l| self.consts[i][j][l] != 0)
                    .map(|l| json!({"coset": l + 1, "coeff": self.consts[i][j][l]}))
                    .collect();
                products.push(json!({"i": i + 1, "j": j + 1, "terms": terms}));
            }
        }
        json!({
            "group_order": self.q.order(),
            "subgroup_order": self.k.order(),
            "double_cosets": self.cosets.iter().enumerate().map(|(i, c)| json!({
                "index": i + 1,
                "size": c.len(),
                "representative": self.q.element(c[0]).to_cycle_string(1),
            })).collect::<Vec<_>>(),
            "unit": {"coset": 1, "coeff": {"num": "1", "den": self.k.order().to_string()}},
            "structure_constants": products,
            "associative": self.check_associative(),
            "mass_identity": self.check_mass(),
        })
    }
}

/// Rank over `Q` by Gaussian elimination.
pub fn rank(mut rows: Vec<Vec<BigRational>>, ncols: usize) -> usize {
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = rows[rank][col].recip();
        for x in rows[rank].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Convolution of two functions on `Q` by direct summation over `Q`.
pub fn convolve_functions(q: &PermGroup, f: &[i64], g: &[i64]) -> Vec<i64> {
    let n = q.order();
    let mut out = vec![0i64; n];
    for u in 0..n {
        if f[u] == 0 {
            continue;
        }
        let ui = q.inv(u);
        for (x, o) in out.iter_mut().enumerate() {
            *o += f[u] * g[q.mul(ui, x)];
        }
    }
    out
}

/// Commutant dimension computed in the full group algebra: bi-`k`-invariant
/// `f` with `f(x h^-1) = f(h^-1 x)` for every generator `h`.
pub fn commutant_dimension_bruteforce(q: &PermGroup, k: &PermGroup, h: &PermGroup) -> usize {
    let n = q.order();
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    let mut push = |a: usize, b: usize| {
        if a != b {
            let mut row = vec![BigRational::zero(); n];
            row[a] = BigRational::one();
            row[b] = -BigRational::one();
            rows.push(row);
        }
    };
    for kk in k.generators() {
        let ki = q.index_of(kk).unwrap();
        for x in 0..n {
            push(q.mul(ki, x), x);
            push(q.mul(x, ki), x);
        }
    }
    for g in h.generators() {
        let hi = q.inv(q.index_of(g).unwrap());
        for x in 0..n {
            push(q.mul(x, hi), q.mul(hi, x));
        }
    }
    n - rank(rows, n)
}

/// `Aut(T^{<=2})` for the binary rooted tree, acting on the four leaves
/// `00, 01, 10, 11` labelled `1..4`.
pub fn aut_binary_depth2() -> PermGroup {
    PermGroup::parse(4, "(1 3)(2 4),(1 2),(3 4)").unwrap()
}

pub fn preset_group(name: &str) -> Result<PermGroup> {
    let lower = name.to_ascii_lowercase();
    if let Some(n) = lower.strip_prefix('s').and_then(|s| s.parse::<usize>().ok()) {
        return PermGroup::symmetric(n);
    }
    match lower.as_str() {
        "aut22" | "aut(2,2,2)" => Ok(aut_binary_depth2()),
        "c3xs3" => Ok(crate::burger_mozes::c3_times_s3()),
        _ => Err(Error::InvalidGroup(format!("unknown group preset '{name}' (s<n>, aut22, c3xs3)"))),
    }
}

/// A seeded pair `k ≤ Q` with `Q` on at most 7 points, `|Q| <= 5000`, at
/// most 20 double cosets.
pub fn random_pair(seed: u64) -> (PermGroup, PermGroup) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d = rng.random_range(3..=7usize);
        let rand_perm = |rng: &mut ChaCha8Rng| {
            let mut v: Vec<u8> = (0..d as u8).collect();
            for i in (1..d).rev() {
                v.swap(i, rng.random_range(0..=i));
            }
            Perm::from_images(v).unwrap()
        };
        let gens = vec![rand_perm(&mut rng), rand_perm(&mut rng)];
        let Ok(q) = PermGroup::closure_capped(d, gens, 5000) else {
            continue;
        };
        let nk = rng.random_range(1..=2);
        let kgens: Vec<Perm> = (0..nk).map(|_| q.element(rng.random_range(0..q.order())).clone()).collect();
        let k = PermGroup::closure(d, kgens).unwrap();
        if let Ok(alg) = DoubleCosetAlgebra::new(q.clone(), k.clone()) {
            if alg.dim() <= 20 {
                return (q, k);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3_pair() -> DoubleCosetAlgebra {
        let q = PermGroup::symmetric(3).unwrap();
        let k = PermGroup::parse(3, "(1 2)").unwrap();
        DoubleCosetAlgebra::new(q, k).unwrap()
    }

    #[test]
    fn s3_structure_constants() {
        let a = s3_pair();
        assert_eq!(a.sizes(), vec![2, 4]);
        assert_eq!(a.consts[1][1], vec![4, 2]);
        assert!(a.check_associative() && a.check_mass() && a.check_unit());
        // pointwise convolution of indicators agrees
        let ind = |c: usize| -> Vec<i64> { (0..6).map(|x| (a.coset_of(x) == c) as i64).collect() };
        let conv = convolve_functions(&a.q, &ind(1), &ind(1));
        let expect: Vec<i64> = (0..6).map(|x| 4 * ind(0)[x] + 2 * ind(1)[x]).collect();
        assert_eq!(conv, expect);
    }

    #[test]
    fn whole_group_is_scalar() {
        let q = PermGroup::symmetric(4).unwrap();
        let a = DoubleCosetAlgebra::new(q.clone(), q).unwrap();
        assert_eq!(a.dim(), 1);
        assert!(a.check_unit());
    }

    #[test]
    fn commutant_examples() {
        let a = s3_pair();
        let triv = PermGroup::trivial(3);
        assert_eq!(a.commutant_dimension(&triv).unwrap(), 2);
        assert_eq!(a.commutant_dimension(&a.k.clone()).unwrap(), 2);
        assert!(matches!(
            a.commutant_dimension(&PermGroup::parse(3, "(1 2 3)").unwrap()),
            Err(Error::HypothesisViolation(_))
        ));
        let q = aut_binary_depth2();
        let k = PermGroup::parse(4, "(3 4)").unwrap();
        let alg = DoubleCosetAlgebra::new(q.clone(), k.clone()).unwrap();
        let h = q.normalizer(&k);
        let dim = alg.commutant_dimension(&h).unwrap();
        assert_eq!(dim, alg.conjugation_orbit_count(&h).unwrap());
        assert_eq!(dim, commutant_dimension_bruteforce(&q, &k, &h));
    }

    #[test]
    fn random_pairs() {
        for seed in 0..5 {
            let (q, k) = random_pair(seed);
            assert!(q.order() <= 5000);
            let a = DoubleCosetAlgebra::new(q.clone(), k.clone()).unwrap();
            assert!(a.check_associative() && a.check_mass() && a.check_unit());
            let n = q.normalizer(&k);
            let d_full = a.commutant_dimension(&n).unwrap();
            assert_eq!(d_full, a.conjugation_orbit_count(&n).unwrap());
            assert!(d_full <= a.commutant_dimension(&k).unwrap());
        }
    }
}
