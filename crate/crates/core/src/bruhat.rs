//! Finite atomic plus locally constant measures on `N(d,k)` under convolution.
//!
//! A [`BruhatMeasure`] is `Σ c_γ δ_γ + Σ c_j 1_{x_j K^(m)} μ`. The density is
//! kept at one level `m`, the smallest at which it is right `K^(m)`-invariant,
//! with one entry per coset. This makes the normal form unique.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::element::{random_with, AlmostAutomorphism, SubgroupClass};
use crate::error::{Error, Result};
use crate::haar::{
    coset_equal, coset_fingerprint, coset_key, coset_member, measure_coset, measure_fixator,
    measure_level, partition_cap, partition_coset, transversal, Coset, CosetKey, MeasureValue,
};
use crate::tree::{CompleteAntichain, TreeShape};

#[derive(Debug, Clone)]
pub struct BruhatMeasure {
    shape: TreeShape,
    atoms: BTreeMap<AlmostAutomorphism, MeasureValue>,
    level: u32,
    density: BTreeMap<CosetKey, (Coset, MeasureValue)>,
}

impl PartialEq for BruhatMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self.atoms == other.atoms
            && self.level == other.level
            && self.density.len() == other.density.len()
            && self
                .density
                .iter()
                .zip(&other.density)
                .all(|((k1, (_, c1)), (k2, (_, c2)))| k1 == k2 && c1 == c2)
    }
}

impl Eq for BruhatMeasure {}

impl BruhatMeasure {
    pub fn zero(shape: TreeShape) -> Self {
        BruhatMeasure {
            shape,
            atoms: BTreeMap::new(),
            level: 0,
            density: BTreeMap::new(),
        }
    }

    pub fn atom(gamma: AlmostAutomorphism, c: MeasureValue) -> Self {
        let shape = gamma.shape();
        Self::from_parts(shape, [(gamma, c)], []).expect("a single atom never refines")
    }

    /// `c · 1_{coset}` as a density.
    pub fn indicator(coset: Coset, c: MeasureValue) -> Self {
        let shape = coset.shape();
        Self::from_parts(shape, [], [(coset, c)]).expect("a single coset never refines")
    }

    /// `p_{K^(n)} = μ(K^(n))⁻¹ 1_{K^(n)}`.
    pub fn averaging_projection(shape: TreeShape, n: u32) -> Self {
        Self::indicator(Coset::subgroup(shape, n), measure_level(shape, n).recip())
    }

    /// Collects atoms and density pieces of arbitrary levels into normal form.
    pub fn from_parts(
        shape: TreeShape,
        atoms: impl IntoIterator<Item = (AlmostAutomorphism, MeasureValue)>,
        pieces: impl IntoIterator<Item = (Coset, MeasureValue)>,
    ) -> Result<Self> {
        let mut atom_map: BTreeMap<AlmostAutomorphism, MeasureValue> = BTreeMap::new();
        for (g, c) in atoms {
            *atom_map.entry(g).or_insert_with(BigRational::zero) += c;
        }
        atom_map.retain(|_, c| !c.is_zero());
        let pieces: Vec<(Coset, MeasureValue)> = pieces.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let top = pieces.iter().map(|(c, _)| c.level).max().unwrap_or(0);
        let mut fine: BTreeMap<CosetKey, (Coset, MeasureValue)> = BTreeMap::new();
        let mut produced = 0usize;
        for (coset, c) in pieces {
            for part in partition_coset(&coset, top)? {
                produced += 1;
                if produced > partition_cap() {
                    return Err(Error::ResourceLimit(format!(
                        "normal form at level {top} exceeds {} pieces",
                        partition_cap()
                    )));
                }
                fine.entry(coset_key(&part))
                    .and_modify(|e| e.1 += &c)
                    .or_insert((part, c.clone()));
            }
        }
        fine.retain(|_, (_, c)| !c.is_zero());
        let (level, density) = coarsen(shape, top, fine);
        Ok(BruhatMeasure {
            shape,
            atoms: atom_map,
            level,
            density,
        })
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&AlmostAutomorphism, &MeasureValue)> {
        self.atoms.iter()
    }

    pub fn density(&self) -> impl Iterator<Item = (&Coset, &MeasureValue)> {
        self.density.values().map(|(c, v)| (c, v))
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_empty()
    }

    fn parts(&self) -> (Vec<(AlmostAutomorphism, MeasureValue)>, Vec<(Coset, MeasureValue)>) {
        (
            self.atoms.iter().map(|(g, c)| (g.clone(), c.clone())).collect(),
            self.density.values().cloned().collect(),
        )
    }

    pub fn add(&self, other: &BruhatMeasure) -> Result<BruhatMeasure> {
        let (mut a, mut d) = self.parts();
        let (a2, d2) = other.parts();
        a.extend(a2);
        d.extend(d2);
        Self::from_parts(self.shape, a, d)
    }

    pub fn scale(&self, s: &MeasureValue) -> BruhatMeasure {
        if s.is_zero() {
            return Self::zero(self.shape);
        }
        let mut out = self.clone();
        for c in out.atoms.values_mut() {
            *c *= s;
        }
        for (_, c) in out.density.values_mut() {
            *c *= s;
        }
        out
    }

    pub fn sub(&self, other: &BruhatMeasure) -> Result<BruhatMeasure> {
        self.add(&other.scale(&-BigRational::from_integer(1.into())))
    }

    /// Total mass `μ_f(G)`.
    pub fn total_mass(&self) -> MeasureValue {
        let mut t: MeasureValue = self.atoms.values().cloned().sum();
        for (coset, c) in self.density.values() {
            t += c * measure_coset(coset);
        }
        t
    }

    /// Value of the density at `t` (atoms are ignored).
    pub fn density_at(&self, t: &AlmostAutomorphism) -> MeasureValue {
        self.density
            .values()
            .filter(|(coset, _)| coset_member(t, coset))
            .map(|(_, c)| c.clone())
            .sum()
    }

    /// Sum of absolute values of all coefficients weighted by mass.
    pub fn total_variation(&self) -> MeasureValue {
        let mut t: MeasureValue = self.atoms.values().map(|c| c.abs()).sum();
        for (coset, c) in self.density.values() {
            t += c.abs() * measure_coset(coset);
        }
        t
    }

    /// `f*(t) = conj(f(t⁻¹))`.
    pub fn involution(&self) -> Result<BruhatMeasure> {
        let atoms: Vec<_> = self.atoms.iter().map(|(g, c)| (g.inverse(), c.clone())).collect();
        let mut pieces = Vec::new();
        for (coset, c) in self.density.values() {
            // 1_{xK}(t⁻¹) = 1_{K x⁻¹}(t)
            let id = AlmostAutomorphism::identity(self.shape);
            for part in right_translate(&id, coset.level, &coset.rep.inverse())? {
                pieces.push((part, c.clone()));
            }
        }
        Self::from_parts(self.shape, atoms, pieces)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "shape": {"d": self.shape.d(), "k": self.shape.k()},
            "level": self.level,
            "atoms": self.atoms.iter().map(|(g, c)| json!({
                "element": g.to_string(),
                "coeff": rational_string(c),
            })).collect::<Vec<_>>(),
            "density": self.density.values().map(|(coset, c)| json!({
                "rep": coset.rep.to_string(),
                "level": coset.level,
                "coeff": rational_string(c),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<BruhatMeasure> {
        let bad = |m: &str| Error::parse(0, format!("measure JSON: {m}"));
        let shape = TreeShape::new(
            v["shape"]["d"].as_u64().ok_or_else(|| bad("missing shape.d"))? as u32,
            v["shape"]["k"].as_u64().ok_or_else(|| bad("missing shape.k"))? as u32,
        )?;
        let mut atoms = Vec::new();
        for a in v["atoms"].as_array().map(Vec::as_slice).unwrap_or(&[]) {
            let g = AlmostAutomorphism::parse(shape, a["element"].as_str().ok_or_else(|| bad("atom without element"))?)?;
            atoms.push((g, parse_rational(a["coeff"].as_str().ok_or_else(|| bad("atom without coeff"))?)?));
        }
        let mut pieces = Vec::new();
        for p in v["density"].as_array().map(Vec::as_slice).unwrap_or(&[]) {
            let g = AlmostAutomorphism::parse(shape, p["rep"].as_str().ok_or_else(|| bad("piece without rep"))?)?;
            let level = p["level"].as_u64().ok_or_else(|| bad("piece without level"))? as u32;
            pieces.push((Coset::new(g, level), parse_rational(p["coeff"].as_str().ok_or_else(|| bad("piece without coeff"))?)?));
        }
        Self::from_parts(shape, atoms, pieces)
    }
}

pub fn rational_string(q: &BigRational) -> String {
    if q.denom() == &BigInt::from(1) {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let num: BigInt = n
        .parse()
        .map_err(|_| Error::parse(0, format!("bad rational \"{s}\"")))?;
    let den: BigInt = d
        .parse()
        .map_err(|_| Error::parse(n.len(), format!("bad rational \"{s}\"")))?;
    if den.is_zero() {
        return Err(Error::parse(n.len(), "zero denominator"));
    }
    Ok(BigRational::new(num, den))
}

/// Finds the smallest level at which the density is right-invariant.
fn coarsen(
    shape: TreeShape,
    top: u32,
    fine: BTreeMap<CosetKey, (Coset, MeasureValue)>,
) -> (u32, BTreeMap<CosetKey, (Coset, MeasureValue)>) {
    if fine.is_empty() {
        return (0, fine);
    }
    let big = shape.ball_automorphism_count(top);
    'level: for j in 0..top {
        let ratio = &big / shape.ball_automorphism_count(j);
        let mut groups: BTreeMap<CosetKey, (Coset, MeasureValue, num_bigint::BigUint)> = BTreeMap::new();
        for (coset, c) in fine.values() {
            let coarse = Coset::new(coset.rep.clone(), j);
            match groups.entry(coset_key(&coarse)) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((coarse, c.clone(), 1u32.into()));
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let g = e.get_mut();
                    if &g.1 != c {
                        continue 'level;
                    }
                    g.2 += 1u32;
                }
            }
        }
        if groups.values().all(|g| g.2 == ratio) {
            return (
                j,
                groups.into_iter().map(|(k, (coset, c, _))| (k, (coset, c))).collect(),
            );
        }
    }
    (top, fine)
}

/// Image under `eta⁻¹` of a complete antichain refining the range of `eta`.
fn pull_back(eta: &AlmostAutomorphism, l: &CompleteAntichain) -> CompleteAntichain {
    let inv = eta.inverse();
    let leaves = l
        .leaves()
        .iter()
        .map(|a| inv.evaluate_ball(a).expect("antichain refines the range").0)
        .collect();
    CompleteAntichain::from_trusted(eta.shape(), leaves)
}

/// The cosets partitioning `a K^(n) η`, all of one level.
pub fn right_translate(a: &AlmostAutomorphism, n: u32, eta: &AlmostAutomorphism) -> Result<Vec<Coset>> {
    let shape = a.shape();
    let vn = shape.level_antichain(n);
    let l0 = vn.meet(&eta.range());
    let l1 = pull_back(eta, &l0);
    let m = l1.max_height() as u32;
    let vm = shape.level_antichain(m);
    let t1 = transversal(&vn, &l0)?;
    let t2 = transversal(&l1, &vm)?;
    if t1.len().saturating_mul(t2.len()) > partition_cap() {
        return Err(Error::ResourceLimit(format!(
            "right translation needs {} pieces",
            t1.len() as u128 * t2.len() as u128
        )));
    }
    let mut out = Vec::with_capacity(t1.len() * t2.len());
    for k in &t1 {
        let ake = a.compose(k).compose(eta);
        for t in &t2 {
            out.push(Coset::new(ake.compose(t), m));
        }
    }
    Ok(out)
}

/// `1_{aK^(n)} ∗ 1_{ηK^(n')} = Σ μ(K_M) 1_{aκητ K^(n')}`.
fn indicator_product(a: &Coset, b: &Coset) -> Result<Vec<(Coset, MeasureValue)>> {
    let shape = a.shape();
    let eta = &b.rep;
    let vn = shape.level_antichain(a.level);
    let l0 = vn.meet(&eta.range());
    let l1 = pull_back(eta, &l0);
    let mm = l1.meet(&shape.level_antichain(b.level));
    let weight = measure_fixator(&mm);
    let t1 = transversal(&vn, &l0)?;
    let t3 = transversal(&l1, &mm)?;
    if t1.len().saturating_mul(t3.len()) > partition_cap() {
        return Err(Error::ResourceLimit(format!(
            "density product needs {} pieces",
            t1.len() as u128 * t3.len() as u128
        )));
    }
    let mut out = Vec::new();
    for k in &t1 {
        let ake = a.rep.compose(k).compose(eta);
        for t in &t3 {
            out.push((Coset::new(ake.compose(t), b.level), weight.clone()));
        }
    }
    Ok(out)
}

/// Exact convolution `f ∗ g`.
pub fn convolve(f: &BruhatMeasure, g: &BruhatMeasure) -> Result<BruhatMeasure> {
    let shape = f.shape;
    let mut atoms = Vec::new();
    let mut pieces = Vec::new();
    for (x, cx) in &f.atoms {
        for (y, cy) in &g.atoms {
            atoms.push((x.compose(y), cx * cy));
        }
        for (coset, cy) in g.density.values() {
            pieces.push((Coset::new(x.compose(&coset.rep), coset.level), cx * cy));
        }
    }
    for (coset, cx) in f.density.values() {
        for (y, cy) in &g.atoms {
            let c = cx * cy;
            for part in right_translate(&coset.rep, coset.level, y)? {
                pieces.push((part, c.clone()));
            }
        }
        for (other, cy) in g.density.values() {
            let c = cx * cy;
            for (part, w) in indicator_product(coset, other)? {
                pieces.push((part, &c * w));
            }
        }
    }
    BruhatMeasure::from_parts(shape, atoms, pieces)
}

/// `φ^f(gK^(n)) = ⟨f ∗ ξ_K, ξ_{gK}⟩`, from closed forms per atom and piece.
pub fn fourier_coefficient(f: &BruhatMeasure, c: &Coset) -> MeasureValue {
    let n = c.level;
    let mut total = BigRational::zero();
    for (gamma, w) in &f.atoms {
        if coset_member(gamma, c) {
            total += w;
        }
    }
    for (piece, w) in f.density.values() {
        let m = piece.level;
        if m >= n {
            if coset_member(&piece.rep, c) {
                total += w * measure_level(f.shape, m);
            }
        } else if coset_member(&c.rep, piece) {
            total += w * measure_level(f.shape, n);
        }
    }
    total
}

/// Level-`n` cosets outside of which every coefficient vanishes.
pub fn fourier_support(f: &BruhatMeasure, n: u32) -> Result<Vec<Coset>> {
    let mut cosets = Vec::new();
    for gamma in f.atoms.keys() {
        cosets.push(Coset::new(gamma.clone(), n));
    }
    for (piece, _) in f.density.values() {
        if piece.level >= n {
            cosets.push(Coset::new(piece.rep.clone(), n));
        } else {
            cosets.extend(partition_coset(piece, n)?);
        }
    }
    Ok(crate::haar::dedup_cosets(cosets).into_values().collect())
}

/// Checks that all Fourier coefficients at level `n` vanish exactly when
/// `f ∗ p_{K^(n)} = 0`. Returns the common truth value.
pub fn vanishing_check(f: &BruhatMeasure, n: u32) -> Result<bool> {
    let coefficients_vanish = fourier_support(f, n)?
        .iter()
        .all(|c| fourier_coefficient(f, c).is_zero());
    let projected = convolve(f, &BruhatMeasure::averaging_projection(f.shape, n))?;
    if coefficients_vanish != projected.is_zero() {
        return Err(Error::Consistency(format!(
            "Fourier coefficients vanish: {coefficients_vanish}, f ∗ p_K = 0: {}",
            projected.is_zero()
        )));
    }
    Ok(coefficients_vanish)
}

/// `p_{K^(m)} ∗ 1_{γK^(n)} = 1_{γK^(n)}`, computed by convolution.
pub fn averaging_identity_check(gamma: &AlmostAutomorphism, n: u32, m: u32) -> Result<bool> {
    let shape = gamma.shape();
    let target = BruhatMeasure::indicator(Coset::new(gamma.clone(), n), BigRational::from_integer(1.into()));
    let lhs = convolve(&BruhatMeasure::averaging_projection(shape, m), &target)?;
    Ok(lhs == target)
}

/// Decides `γ⁻¹ K^(m) γ ⊆ K^(n)` exactly.
pub fn conjugation_contained(gamma: &AlmostAutomorphism, n: u32, m: u32) -> Result<bool> {
    let shape = gamma.shape();
    let vm = shape.level_antichain(m);
    let mm = vm.meet(&gamma.range());
    // γ⁻¹ K_M γ = K_{γ⁻¹(M)}, which lies in K^(n) iff all its leaves are that deep
    let pulled = pull_back(gamma, &mm);
    if pulled.leaves().iter().any(|a| (a.height() as u32) < n) {
        return Ok(false);
    }
    let inv = gamma.inverse();
    for k in transversal(&vm, &mm)? {
        if !inv.compose(&k).compose(gamma).membership(SubgroupClass::Kn(n)) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertReport {
    /// Number of pairwise distinct cosets `h g h⁻¹ K^(n)`, the base coset included.
    pub distinct: usize,
    pub orbit: Vec<Coset>,
    pub phi: MeasureValue,
    pub lhs: MeasureValue,
    pub rhs: MeasureValue,
    pub holds: bool,
}

/// Checks `‖f ∗ ξ_K‖² ≥ N |φ^f(gK)|²` for a conjugation-invariant `f`.
pub fn hilbert_inequality_check(
    f: &BruhatMeasure,
    conjugators: &[AlmostAutomorphism],
    c: &Coset,
) -> Result<HilbertReport> {
    let n = c.level;
    let shape = f.shape;
    for h in conjugators {
        if !h.membership(SubgroupClass::On(n)) {
            return Err(Error::NotNormalizing {
                element: h.to_string(),
                level: n,
            });
        }
        let one = BigRational::from_integer(1.into());
        let conj = convolve(
            &convolve(&BruhatMeasure::atom(h.clone(), one.clone()), f)?,
            &BruhatMeasure::atom(h.inverse(), one),
        )?;
        if &conj != f {
            return Err(Error::InvarianceViolation(h.to_string()));
        }
    }
    let mut orbit: Vec<Coset> = vec![c.clone()];
    let mut buckets: BTreeMap<crate::haar::Fingerprint, Vec<usize>> = BTreeMap::new();
    buckets.entry(coset_fingerprint(c)).or_default().push(0);
    for h in conjugators {
        let cand = Coset::new(c.rep.conjugate_by(h), n);
        let fp = coset_fingerprint(&cand);
        let bucket = buckets.entry(fp).or_default();
        let mut seen = false;
        for &i in bucket.iter() {
            if coset_equal(&orbit[i], &cand)? {
                seen = true;
                break;
            }
        }
        if !seen {
            bucket.push(orbit.len());
            orbit.push(cand);
        }
    }
    let projected = convolve(f, &BruhatMeasure::indicator(Coset::subgroup(shape, n), BigRational::from_integer(1.into())))?;
    let mut norm = BigRational::zero();
    for (piece, v) in projected.density.values() {
        norm += v * v * measure_coset(piece);
    }
    let lhs = norm / measure_level(shape, n);
    let phi = fourier_coefficient(f, c);
    let rhs = BigRational::from_integer(orbit.len().into()) * &phi * &phi;
    Ok(HilbertReport {
        distinct: orbit.len(),
        orbit,
        holds: lhs >= rhs,
        phi,
        lhs,
        rhs,
    })
}

/// A sub-coset of level `m` whose coefficient-to-measure ratio is at least
/// that of `c`.
pub fn ratio_step(f: &BruhatMeasure, c: &Coset, m: u32) -> Result<Coset> {
    if m <= c.level {
        return Err(Error::LevelMismatch(c.level, m));
    }
    let shape = f.shape;
    let base = fourier_coefficient(f, c).abs() / measure_level(shape, c.level);
    let mu_m = measure_level(shape, m);
    for part in partition_coset(c, m)? {
        let r = fourier_coefficient(f, &part).abs() / &mu_m;
        if r >= base {
            return Ok(part);
        }
    }
    Err(Error::Consistency(format!(
        "no level-{m} sub-coset of {c} reaches ratio {base}"
    )))
}

/// `Σ_h δ_h ∗ f ∗ δ_{h⁻¹}` over the listed elements; invariant under
/// conjugation by each of them when they form a group.
pub fn conjugation_average(f: &BruhatMeasure, group: &[AlmostAutomorphism]) -> Result<BruhatMeasure> {
    let one = BigRational::from_integer(1.into());
    let mut out = BruhatMeasure::zero(f.shape);
    for h in group {
        let conj = convolve(
            &convolve(&BruhatMeasure::atom(h.clone(), one.clone()), f)?,
            &BruhatMeasure::atom(h.inverse(), one.clone()),
        )?;
        out = out.add(&conj)?;
    }
    Ok(out)
}

/// Seeded random measure with atoms and density pieces of level at most `max_level`.
pub fn random_measure(shape: TreeShape, seed: u64, max_level: u32, atoms: usize, pieces: usize) -> Result<BruhatMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeff = |rng: &mut ChaCha8Rng| {
        let mut num = rng.random_range(-4i64..=4);
        if num == 0 {
            num = 1;
        }
        BigRational::new(num.into(), rng.random_range(1i64..=3).into())
    };
    let mut a = Vec::new();
    for _ in 0..atoms {
        let class = if rng.random_bool(0.5) { SubgroupClass::N } else { SubgroupClass::K };
        let g = random_with(shape, &mut rng, class, 1);
        a.push((g, coeff(&mut rng)));
    }
    let mut d = Vec::new();
    for _ in 0..pieces {
        let level = rng.random_range(0..=max_level);
        let class = if rng.random_bool(0.5) { SubgroupClass::N } else { SubgroupClass::On(level) };
        let g = random_with(shape, &mut rng, class, 1);
        d.push((Coset::new(g, level), coeff(&mut rng)));
    }
    BruhatMeasure::from_parts(shape, a, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s22() -> TreeShape {
        TreeShape::new(2, 2).unwrap()
    }

    fn one() -> BigRational {
        BigRational::from_integer(1.into())
    }

    fn shift() -> AlmostAutomorphism {
        AlmostAutomorphism::parse(s22(), "{0->00, 10->01, 11->1}").unwrap()
    }

    #[test]
    fn atom_products() {
        let s = shift();
        let a = BruhatMeasure::atom(s.clone(), one());
        let b = BruhatMeasure::atom(s.inverse(), one());
        let e = BruhatMeasure::atom(AlmostAutomorphism::identity(s22()), one());
        assert_eq!(convolve(&a, &b).unwrap(), e);
    }

    #[test]
    fn projection_is_idempotent() {
        for n in 0..3 {
            let p = BruhatMeasure::averaging_projection(s22(), n);
            assert_eq!(convolve(&p, &p).unwrap(), p);
        }
    }

    #[test]
    fn translated_indicator() {
        let s = shift();
        let coset = Coset::subgroup(s22(), 1);
        let f = convolve(&BruhatMeasure::atom(s.clone(), one()), &BruhatMeasure::indicator(coset, one())).unwrap();
        assert_eq!(f, BruhatMeasure::indicator(Coset::new(s, 1), one()));
    }

    #[test]
    fn right_translation_preserves_mass() {
        let s = shift();
        for n in 0..3 {
            let parts = right_translate(&AlmostAutomorphism::identity(s22()), n, &s).unwrap();
            let mass: BigRational = parts.iter().map(measure_coset).sum();
            assert_eq!(mass, measure_level(s22(), n));
            for p in &parts {
                // every piece lies in K^(n) s
                let back = p.rep.compose(&s.inverse());
                assert!(back.membership(SubgroupClass::Kn(n)));
            }
        }
    }

    #[test]
    fn averaging_examples() {
        let s = shift();
        let id = AlmostAutomorphism::identity(s22());
        assert!(averaging_identity_check(&id, 1, 2).unwrap());
        assert!(averaging_identity_check(&s, 1, 3).unwrap());
        assert!(!averaging_identity_check(&s, 1, 1).unwrap());
        assert!(conjugation_contained(&s, 1, 3).unwrap());
        assert!(!conjugation_contained(&s, 1, 1).unwrap());
    }

    #[test]
    fn vanishing_examples() {
        let s = shift();
        for n in 0..3 {
            let atom = BruhatMeasure::atom(s.clone(), one());
            let dens = BruhatMeasure::indicator(Coset::new(s.clone(), n), measure_level(s22(), n).recip());
            assert!(vanishing_check(&atom.sub(&dens).unwrap(), n).unwrap());
            assert!(!vanishing_check(&atom, n).unwrap());
        }
    }

    #[test]
    fn hilbert_on_subgroup_indicator() {
        let n = 2;
        let k = Coset::subgroup(s22(), n);
        let f = BruhatMeasure::indicator(k.clone(), one());
        let h = AlmostAutomorphism::random(s22(), 3, SubgroupClass::On(n), 1);
        let rep = hilbert_inequality_check(&f, &[h], &k).unwrap();
        let mu = measure_level(s22(), n);
        assert_eq!(rep.lhs, &mu * &mu);
        assert_eq!(rep.rhs, &mu * &mu);
        assert!(rep.holds);
        let zero = BruhatMeasure::zero(s22());
        let rep = hilbert_inequality_check(&zero, &[], &k).unwrap();
        assert!(rep.lhs.is_zero() && rep.rhs.is_zero() && rep.holds);
    }

    #[test]
    fn json_round_trip() {
        let f = random_measure(s22(), 7, 2, 2, 3).unwrap();
        let g = BruhatMeasure::from_json(&f.to_json()).unwrap();
        assert_eq!(f, g);
    }
}
