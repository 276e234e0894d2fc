//! Conjugation-orbit lower bounds for cosets `gK^(n)` and the growth of
//! `c(gK^(n)) · μ(K^(n))²` for nontrivial elements of `N(d,k)`.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use serde_json::{json, Value};

use crate::element::{AlmostAutomorphism, SubgroupClass};
use crate::error::{Error, Result};
use crate::haar::{coset_equal, coset_fingerprint, measure_level, Coset, Fingerprint};
use crate::perm::Perm;
use crate::portrait::Portrait;
use crate::tree::{factorial, range_product, Address, TreeShape};

/// Largest `d^(n-n0)` for which factorials are evaluated exactly.
pub const STAR_LEAF_BUDGET: u64 = 1 << 16;

/// A vertex `w` with `g(B^w)` disjoint from `B^w` and `g` rigid on `B^w`.
pub fn find_displaced_ball(g: &AlmostAutomorphism) -> Result<(Address, u32)> {
    if g.is_identity() {
        return Err(Error::IdentityInput);
    }
    let shape = g.shape();
    let mut start: Vec<Address> = g.domain().leaves().iter().cloned().collect();
    start.sort_by(|a, b| a.bfs_key().cmp(&b.bfs_key()));
    let mut queue: VecDeque<Address> = start.into();
    // a moved point is separated from its image after at most depth()+1 more levels
    let limit = g.depth() + 2;
    while let Some(a) = queue.pop_front() {
        let (img, _) = g.evaluate_ball(&a)?;
        if !img.comparable(&a) {
            return Ok((a.clone(), a.height() as u32));
        }
        if a.height() <= limit {
            queue.extend(a.children(shape));
        }
    }
    Err(Error::Consistency(format!("no displaced ball found for {g}")))
}

fn pow_checked(d: u32, m: u32) -> Result<u64> {
    (d as u64)
        .checked_pow(m)
        .filter(|&x| x <= STAR_LEAF_BUDGET)
        .ok_or_else(|| Error::ResourceLimit(format!("{d}^{m} exceeds the factorial budget {STAR_LEAF_BUDGET}")))
}

/// `(d^m)! / |Aut(T(d,d)^{<=m})|` with `m = n - n0`; 1 when `n <= n0`.
pub fn witness_bound_at(shape: TreeShape, n0: u32, n: u32) -> Result<BigUint> {
    if n <= n0 {
        return Ok(BigUint::one());
    }
    let m = n - n0;
    let leaves = pow_checked(shape.d(), m)?;
    Ok(factorial(leaves) / shape.regular().ball_automorphism_count(m))
}

pub fn neretin_witness_bound(shape: TreeShape, g: &AlmostAutomorphism, n: u32) -> Result<BigUint> {
    let (_, n0) = find_displaced_ball(g)?;
    witness_bound_at(shape, n0, n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarRow {
    pub n: u32,
    pub lower_bound: BigUint,
    pub mu_squared: BigRational,
    pub product: BigRational,
}

pub fn star_table(shape: TreeShape, g: &AlmostAutomorphism, n_from: u32, n_to: u32) -> Result<Vec<StarRow>> {
    let (_, n0) = find_displaced_ball(g)?;
    let mut rows = Vec::new();
    for n in n_from..=n_to {
        let lb = witness_bound_at(shape, n0, n)?;
        let mu = measure_level(shape, n);
        let mu_squared = &mu * &mu;
        let product = BigRational::from_integer(BigInt::from(lb.clone())) * &mu_squared;
        rows.push(StarRow {
            n,
            lower_bound: lb,
            mu_squared,
            product,
        });
    }
    Ok(rows)
}

/// Decimal rendering with six significant digits, for display columns only.
pub fn approx_string(q: &BigRational) -> String {
    if q.is_zero() {
        return "0".into();
    }
    let sign = if q.numer().sign() == num_bigint::Sign::Minus { "-" } else { "" };
    let a = num_traits::Signed::abs(q);
    let ten = |e: i64| -> BigRational {
        let p = BigRational::from_integer(Pow::pow(BigInt::from(10), e.unsigned_abs()));
        if e >= 0 {
            p
        } else {
            p.recip()
        }
    };
    let mut e = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    if a < ten(e) {
        e -= 1;
    }
    let mut r = (&a * ten(5 - e) + BigRational::new(1.into(), 2.into())).floor().to_integer();
    if r >= BigInt::from(1_000_000) {
        r /= 10;
        e += 1;
    }
    let digits = r.to_string();
    format!("{sign}{}.{}e{}{:02}", &digits[..1], &digits[1..], if e < 0 { "-" } else { "+" }, e.abs())
}

pub fn star_rows_json(rows: &[StarRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "n": r.n,
                    "lower_bound": r.lower_bound.to_string(),
                    "mu_squared": {"num": r.mu_squared.numer().to_string(), "den": r.mu_squared.denom().to_string()},
                    "product": {"num": r.product.numer().to_string(), "den": r.product.denom().to_string()},
                    "product_approx": approx_string(&r.product),
                })
            })
            .collect(),
    )
}

pub fn star_rows_csv(rows: &[StarRow]) -> String {
    let mut out = String::from("n,lower_bound,mu_sq_num,mu_sq_den,product_num,product_den,product_float\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            r.lower_bound,
            r.mu_squared.numer(),
            r.mu_squared.denom(),
            r.product.numer(),
            r.product.denom(),
            approx_string(&r.product)
        ));
    }
    out
}

/// Exact evidence that `product(n+1) / product(n) > 1` for every `n >= n1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthCertificate {
    pub w: Address,
    pub n0: u32,
    /// `1 + 2k d^(n0-1)`, the power of `d!` in the ratio denominator per `d^m`.
    pub c: u64,
    /// Smallest `m` with `d^((d-1)m) >= (d!)^c`; from `n0 + m_star` on the
    /// ratio exceeds 1 by the product bound alone.
    pub m_star: u32,
    /// `(n, ratio > 1)` evaluated exactly.
    pub exact: Vec<(u32, bool)>,
    pub n1: u32,
}

impl GrowthCertificate {
    pub fn to_json(&self) -> Value {
        json!({
            "w": self.w.to_string(),
            "n0": self.n0,
            "c": self.c,
            "m_star": self.m_star,
            "analytic_from": self.n0 + self.m_star,
            "exact": self.exact.iter().map(|(n, ok)| json!({"n": n, "ratio_gt_1": ok})).collect::<Vec<_>>(),
            "n1": self.n1,
        })
    }
}

/// Numerator and denominator of `product(n+1)/product(n)` for `n >= n0`:
/// `(d^(m+1))!/(d^m)!` over `(d!)^(d^m + 2 k d^(n-1))`.
pub fn ratio_parts(shape: TreeShape, n0: u32, n: u32) -> Result<(BigUint, BigUint)> {
    if n < n0 || n == 0 {
        return Err(Error::Consistency(format!("ratio requested below n0 = {n0}")));
    }
    let d = shape.d();
    let m = n - n0;
    let lo = pow_checked(d, m)?;
    let hi = pow_checked(d, m + 1)?;
    let p = range_product(lo + 1, hi);
    let exp = BigUint::from(lo) + shape.level_count(n) * 2u32;
    Ok((p, Pow::pow(&factorial(d as u64), &exp)))
}

/// Finds `n1` for the product ratio of `g`, checking exactly every `n` from
/// `n0` up to `max(exact_to, n0 + m_star)`.
pub fn growth_certificate(shape: TreeShape, g: &AlmostAutomorphism, exact_to: u32) -> Result<GrowthCertificate> {
    let (w, n0) = find_displaced_ball(g)?;
    let d = shape.d() as u64;
    let c = 1 + 2 * shape.k() as u64 * d.pow(n0 - 1);
    let target = Pow::pow(factorial(d), c);
    let mut m_star = 0u32;
    while Pow::pow(BigUint::from(d), (d - 1) * m_star as u64) < target {
        m_star += 1;
    }
    let last = exact_to.max(n0 + m_star);
    let mut exact = Vec::new();
    for n in n0..=last {
        let (p, q) = ratio_parts(shape, n0, n)?;
        exact.push((n, p > q));
    }
    // the analytic bound covers n >= n0 + m_star, so n1 is one past the last failure
    let n1 = exact
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n + 1)
        .max()
        .unwrap_or(n0);
    Ok(GrowthCertificate {
        w,
        n0,
        c,
        m_star,
        exact,
        n1,
    })
}

/// `N! · e_lo^N >= N^N` with `e_lo = Σ_{i<=12} 1/i! < e`, hence `N! >= (N/e)^N`.
pub fn stirling_lower_bound_holds(n: u64) -> bool {
    let mut e_lo = BigRational::zero();
    for i in 0..=12u64 {
        e_lo += BigRational::new(BigInt::one(), BigInt::from(factorial(i)));
    }
    let lhs = BigRational::from_integer(BigInt::from(factorial(n))) * Pow::pow(&e_lo, n);
    let rhs = BigRational::from_integer(Pow::pow(BigInt::from(n), n));
    lhs >= rhs
}

/// Cosets `h g h⁻¹ K^(n)` shown pairwise distinct, each with its conjugator.
#[derive(Debug, Clone)]
pub struct OrbitCertificate {
    pub base: Coset,
    pub conjugators: Vec<AlmostAutomorphism>,
    pub witnesses: Vec<Coset>,
    pub count: usize,
    /// True when the search stopped at the budget rather than closing the orbit.
    pub exhausted: bool,
}

impl OrbitCertificate {
    /// Recomputes every witness and re-checks pairwise distinctness.
    pub fn verify(&self) -> Result<bool> {
        let n = self.base.level;
        if self.conjugators.len() != self.witnesses.len() || self.count != self.witnesses.len() {
            return Ok(false);
        }
        let mut buckets: BTreeMap<Fingerprint, Vec<usize>> = BTreeMap::new();
        for (i, (h, w)) in self.conjugators.iter().zip(&self.witnesses).enumerate() {
            if !h.membership(SubgroupClass::On(n)) || w.level != n {
                return Ok(false);
            }
            let fresh = Coset::new(self.base.rep.conjugate_by(h), n);
            if !coset_equal(&fresh, w)? {
                return Ok(false);
            }
            let bucket = buckets.entry(coset_fingerprint(&fresh)).or_default();
            for &j in bucket.iter() {
                if coset_equal(&self.witnesses[j], w)? {
                    return Ok(false);
                }
            }
            bucket.push(i);
        }
        Ok(true)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "base": {"rep": self.base.rep.to_string(), "level": self.base.level},
            "count": self.count,
            "exhausted": self.exhausted,
            "witnesses": self.conjugators.iter().zip(&self.witnesses).map(|(h, w)| json!({
                "conjugator": h.to_string(),
                "coset_rep": w.rep.to_string(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Breadth-first search of the conjugation orbit of `c` under the group
/// generated by `generators`, stopping after `budget` distinct cosets.
pub fn orbit_lower_bound_bfs(c: &Coset, generators: &[AlmostAutomorphism], budget: usize) -> Result<OrbitCertificate> {
    let n = c.level;
    for t in generators {
        if !t.membership(SubgroupClass::On(n)) {
            return Err(Error::NotNormalizing {
                element: t.to_string(),
                level: n,
            });
        }
    }
    let shape = c.shape();
    let mut conjugators = vec![AlmostAutomorphism::identity(shape)];
    let mut witnesses = vec![c.clone()];
    let mut buckets: BTreeMap<Fingerprint, Vec<usize>> = BTreeMap::new();
    buckets.entry(coset_fingerprint(c)).or_default().push(0);
    let mut queue = VecDeque::from([0usize]);
    let budget = budget.max(1);
    let mut exhausted = false;
    'search: while let Some(i) = queue.pop_front() {
        for t in generators {
            if witnesses.len() >= budget {
                exhausted = true;
                break 'search;
            }
            let cand = Coset::new(witnesses[i].rep.conjugate_by(t), n);
            let bucket = buckets.entry(coset_fingerprint(&cand)).or_default();
            let mut known = false;
            for &j in bucket.iter() {
                if coset_equal(&witnesses[j], &cand)? {
                    known = true;
                    break;
                }
            }
            if !known {
                bucket.push(witnesses.len());
                queue.push_back(witnesses.len());
                conjugators.push(t.compose(&conjugators[i]));
                witnesses.push(cand);
            }
        }
    }
    Ok(OrbitCertificate {
        base: c.clone(),
        count: witnesses.len(),
        conjugators,
        witnesses,
        exhausted,
    })
}

/// Rigid transpositions of planar-adjacent level-`n` balls, followed by the
/// transpositions `u a b <-> u a' b'` (`a != a'`) of level-`n` balls that lie
/// in a common level-`(n-2)` ball.
pub fn default_generators(shape: TreeShape, n: u32) -> Result<Vec<AlmostAutomorphism>> {
    let level = shape.level(n);
    let mut out: Vec<AlmostAutomorphism> = Vec::new();
    for pair in level.windows(2) {
        out.push(AlmostAutomorphism::ball_swap(shape, &pair[0], &pair[1])?);
    }
    if n >= 2 {
        for u in shape.level(n - 2) {
            let ar = shape.arity(&u);
            let d = shape.d() as u8;
            for a in 0..ar {
                for a2 in a + 1..ar {
                    for b in 0..d {
                        for b2 in 0..d {
                            let x = u.child(a).child(b);
                            let y = u.child(a2).child(b2);
                            let g = AlmostAutomorphism::ball_swap(shape, &x, &y)?;
                            if !out.contains(&g) {
                                out.push(g);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The element permuting the level-`n` balls rigidly by `p`, where `p`
/// acts on the positions of `shape.level(n)`.
pub fn level_permutation(shape: TreeShape, n: u32, p: &Perm) -> Result<AlmostAutomorphism> {
    let level = shape.level(n);
    if p.degree() != level.len() {
        return Err(Error::InvalidElement(format!(
            "permutation of degree {} for {} level-{n} balls",
            p.degree(),
            level.len()
        )));
    }
    AlmostAutomorphism::from_triples(
        shape,
        level
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), level[p.apply(i as u8) as usize].clone(), Portrait::identity())),
    )
}

/// The finite group generated by `gens`, breadth first from the identity;
/// fails once more than `cap` elements are found.
pub fn element_closure(shape: TreeShape, gens: &[AlmostAutomorphism], cap: usize) -> Result<Vec<AlmostAutomorphism>> {
    let id = AlmostAutomorphism::identity(shape);
    let mut seen = std::collections::BTreeSet::from([id.clone()]);
    let mut out = vec![id];
    let mut i = 0;
    while i < out.len() {
        for g in gens {
            let y = g.compose(&out[i]);
            if seen.insert(y.clone()) {
                if out.len() >= cap {
                    return Err(Error::ResourceLimit(format!("generated group exceeds {cap} elements")));
                }
                out.push(y);
            }
        }
        i += 1;
    }
    Ok(out)
}

/// The rooted automorphism exchanging the first two children of `v`.
/// Depth-1 portrait swaps rooted at the displaced ball of `g`: every
/// transposition of two children of that ball.
pub fn depth_one_generators(g: &AlmostAutomorphism) -> Result<Vec<AlmostAutomorphism>> {
    let shape = g.shape();
    let (w, _) = find_displaced_ball(g)?;
    let ar = shape.arity(&w) as usize;
    let mut out = Vec::new();
    for a in 0..ar as u8 {
        for b in a + 1..ar as u8 {
            out.push(AlmostAutomorphism::from_portrait(
                shape,
                Portrait::at(w.clone(), Perm::transposition(ar, a, b)),
            )?);
        }
    }
    Ok(out)
}

pub fn portrait_swap(shape: TreeShape, v: &Address) -> Result<AlmostAutomorphism> {
    let ar = shape.arity(v) as usize;
    AlmostAutomorphism::from_portrait(shape, Portrait::at(v.clone(), Perm::transposition(ar, 0, 1)))
}
