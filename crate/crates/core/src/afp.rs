//! Amalgamated free products `A *_K B` of finite permutation groups:
//! normal forms over fixed transversals and the four-case conjugator witness.
//!
//! Normal form: `g = g_1 … g_n · k` with `k ∈ K` and the `g_i` alternating
//! between nontrivial transversal representatives of `A/K` and `B/K`. The
//! representative of `xK` is its element of least index.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group::PermGroup;
use crate::perm::{parse_cycle_list, Perm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Side::A => "A",
            Side::B => "B",
        }
    }
}

#[derive(Debug, Clone)]
struct Factor {
    group: PermGroup,
    in_k: Vec<bool>,
    rep: Vec<usize>,
}

impl Factor {
    fn new(group: PermGroup, k: &[usize]) -> Self {
        let mut in_k = vec![false; group.order()];
        for &i in k {
            in_k[i] = true;
        }
        let rep = (0..group.order())
            .map(|x| k.iter().map(|&kk| group.mul(x, kk)).min().unwrap())
            .collect();
        Factor { group, in_k, rep }
    }
}

#[derive(Debug, Clone)]
pub struct Amalgam {
    pub name: String,
    fa: Factor,
    fb: Factor,
    /// `K` as indices in `A`, sorted.
    k_a: Vec<usize>,
    a_to_b: HashMap<usize, usize>,
    b_to_a: HashMap<usize, usize>,
}

/// `g_1 … g_n · k`, `k` stored as an index into `A`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AfpElem {
    pub syllables: Vec<(Side, usize)>,
    pub k: usize,
}

impl AfpElem {
    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }
}

impl Amalgam {
    /// `K` is generated inside `A` by the first components of `k_pairs`; the
    /// identification with `B` extends the pairing multiplicatively.
    pub fn new(name: &str, a: PermGroup, b: PermGroup, k_pairs: Vec<(Perm, Perm)>) -> Result<Self> {
        let ident = (a.identity_index(), b.identity_index());
        let mut gens = Vec::new();
        for (pa, pb) in &k_pairs {
            let (Some(i), Some(j)) = (a.index_of(pa), b.index_of(pb)) else {
                return Err(Error::InvalidGroup("amalgamated generator outside its factor".into()));
            };
            gens.push((i, j));
        }
        let mut a_to_b = HashMap::from([ident]);
        let mut b_to_a = HashMap::from([(ident.1, ident.0)]);
        let mut queue = VecDeque::from([ident]);
        while let Some((x, y)) = queue.pop_front() {
            for &(gi, gj) in &gens {
                let (nx, ny) = (a.mul(gi, x), b.mul(gj, y));
                match (a_to_b.get(&nx), b_to_a.get(&ny)) {
                    (None, None) => {
                        a_to_b.insert(nx, ny);
                        b_to_a.insert(ny, nx);
                        queue.push_back((nx, ny));
                    }
                    (Some(&yy), Some(&xx)) if yy == ny && xx == nx => {}
                    _ => return Err(Error::InvalidGroup("the pairing does not define an isomorphism".into())),
                }
            }
        }
        let mut k_a: Vec<usize> = a_to_b.keys().copied().collect();
        k_a.sort();
        let mut k_b: Vec<usize> = b_to_a.keys().copied().collect();
        k_b.sort();
        Ok(Amalgam {
            name: name.into(),
            fa: Factor::new(a, &k_a),
            fb: Factor::new(b, &k_b),
            k_a,
            a_to_b,
            b_to_a,
        })
    }

    /// `S3 *_{C2} S3` with `K = <(1 2)>` in both factors. `K` is
    /// self-normalizing in `S3`, so the normalizer hypothesis fails.
    pub fn s3_s3() -> Self {
        let s3 = PermGroup::symmetric(3).unwrap();
        let k = Perm::parse_cycles("(1 2)", 3, 1).unwrap();
        Amalgam::new("S3*C2S3", s3.clone(), s3, vec![(k.clone(), k)]).unwrap()
    }

    /// `C6 *_{C2} C4`, amalgamating `a^3` with `b^2`; both factors normalize `K`.
    pub fn c6_c4() -> Self {
        let a = Perm::parse_cycles("(1 2 3 4 5 6)", 6, 1).unwrap();
        let b = Perm::parse_cycles("(1 2 3 4)", 4, 1).unwrap();
        let a3 = a.compose(&a).compose(&a);
        let b2 = b.compose(&b);
        let ga = PermGroup::closure(6, vec![a]).unwrap();
        let gb = PermGroup::closure(4, vec![b]).unwrap();
        Amalgam::new("C6*C2C4", ga, gb, vec![(a3, b2)]).unwrap()
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "s3s3" | "S3*C2S3" => Ok(Self::s3_s3()),
            "c6c4" | "C6*C2C4" => Ok(Self::c6_c4()),
            _ => Err(Error::InvalidGroup(format!("unknown amalgam preset '{name}' (s3s3, c6c4)"))),
        }
    }

    fn factor(&self, s: Side) -> &Factor {
        match s {
            Side::A => &self.fa,
            Side::B => &self.fb,
        }
    }

    pub fn group(&self, s: Side) -> &PermGroup {
        &self.factor(s).group
    }

    pub fn k_indices(&self) -> &[usize] {
        &self.k_a
    }

    pub fn in_k(&self, s: Side, x: usize) -> bool {
        self.factor(s).in_k[x]
    }

    /// `k ∈ K` (an `A` index) as an element of side `s`.
    fn k_on(&self, s: Side, k: usize) -> usize {
        match s {
            Side::A => k,
            Side::B => self.a_to_b[&k],
        }
    }

    fn k_from(&self, s: Side, x: usize) -> usize {
        match s {
            Side::A => x,
            Side::B => self.b_to_a[&x],
        }
    }

    pub fn identity(&self) -> AfpElem {
        AfpElem {
            syllables: Vec::new(),
            k: self.fa.group.identity_index(),
        }
    }

    /// Right multiplication by a single letter; no cascade is possible
    /// because the merged syllable sits next to one from the other factor.
    pub fn push_letter(&self, g: &mut AfpElem, side: Side, y: usize) {
        let f = self.factor(side);
        let ky = f.group.mul(self.k_on(side, g.k), y);
        let z = match g.syllables.last() {
            Some(&(s, t)) if s == side => {
                g.syllables.pop();
                f.group.mul(t, ky)
            }
            _ => ky,
        };
        if f.in_k[z] {
            g.k = self.k_from(side, z);
        } else {
            let r = f.rep[z];
            g.syllables.push((side, r));
            g.k = self.k_from(side, f.group.mul(f.group.inv(r), z));
        }
    }

    pub fn normal_form(&self, letters: &[(Side, usize)]) -> AfpElem {
        let mut g = self.identity();
        for &(s, y) in letters {
            self.push_letter(&mut g, s, y);
        }
        g
    }

    pub fn letters(&self, g: &AfpElem) -> Vec<(Side, usize)> {
        let mut out = g.syllables.clone();
        out.push((Side::A, g.k));
        out
    }

    pub fn mul(&self, g: &AfpElem, h: &AfpElem) -> AfpElem {
        let mut out = g.clone();
        for (s, y) in self.letters(h) {
            self.push_letter(&mut out, s, y);
        }
        out
    }

    pub fn inverse(&self, g: &AfpElem) -> AfpElem {
        let letters: Vec<(Side, usize)> = self
            .letters(g)
            .into_iter()
            .rev()
            .map(|(s, y)| (s, self.group(s).inv(y)))
            .collect();
        self.normal_form(&letters)
    }

    pub fn power(&self, g: &AfpElem, n: usize) -> AfpElem {
        let mut out = self.identity();
        for _ in 0..n {
            out = self.mul(&out, g);
        }
        out
    }

    pub fn is_in_k(&self, g: &AfpElem) -> bool {
        g.syllables.is_empty()
    }

    pub fn format(&self, g: &AfpElem) -> String {
        let mut parts: Vec<String> = g
            .syllables
            .iter()
            .map(|&(s, y)| format!("{}:{}", s.label(), self.group(s).element(y).to_cycle_string(1)))
            .collect();
        if g.k != self.fa.group.identity_index() || parts.is_empty() {
            parts.push(format!("K:{}", self.fa.group.element(g.k).to_cycle_string(1)));
        }
        parts.join(" ")
    }

    /// Parses `A:(1 3) B:(1 2 3) K:(1 2)`; `e` stands for the identity.
    pub fn parse(&self, s: &str) -> Result<AfpElem> {
        let letters = self.parse_letters(s)?;
        Ok(self.normal_form(&letters))
    }

    pub fn parse_letters(&self, s: &str) -> Result<Vec<(Side, usize)>> {
        let bytes = s.as_bytes();
        let mut i = 0;
        let mut out = Vec::new();
        while i < bytes.len() {
            if (bytes[i] as char).is_whitespace() || bytes[i] == b'*' {
                i += 1;
                continue;
            }
            if i + 1 >= bytes.len() || bytes[i + 1] != b':' {
                return Err(Error::parse(i, "expected A:, B: or K:"));
            }
            let side = match bytes[i] {
                b'A' | b'K' => Side::A,
                b'B' => Side::B,
                _ => return Err(Error::parse(i, "expected A:, B: or K:")),
            };
            let is_k = bytes[i] == b'K';
            i += 2;
            let start = i;
            let p = if s[i..].starts_with('e') {
                i += 1;
                Perm::identity(self.group(side).degree())
            } else {
                while i < bytes.len() && bytes[i] == b'(' {
                    match s[i..].find(')') {
                        Some(j) => i += j + 1,
                        None => return Err(Error::parse(s.len(), "missing ')'")),
                    }
                }
                if start == i {
                    return Err(Error::parse(i, "expected a permutation"));
                }
                let cycles = parse_cycle_list(&s[start..i], 1, start)?;
                Perm::from_cycles(self.group(side).degree(), &cycles)?
            };
            let idx = self
                .group(side)
                .index_of(&p)
                .ok_or_else(|| Error::parse(start, format!("{} is not in factor {}", p.to_cycle_string(1), side.label())))?;
            if is_k && !self.in_k(side, idx) {
                return Err(Error::parse(start, "K: element is not in the amalgamated subgroup"));
            }
            out.push((side, idx));
        }
        Ok(out)
    }

    pub fn random_letters<R: Rng>(&self, rng: &mut R, max_len: usize) -> Vec<(Side, usize)> {
        let n = rng.random_range(0..=max_len);
        (0..n)
            .map(|_| {
                let s = if rng.random_bool(0.5) { Side::A } else { Side::B };
                (s, rng.random_range(0..self.group(s).order()))
            })
            .collect()
    }

    /// Inserts a trivial relator: `y y^-1` in one factor, or `k_A · k_B^-1`
    /// for an amalgamated pair.
    pub fn random_rewrite<R: Rng>(&self, letters: &mut Vec<(Side, usize)>, rng: &mut R) {
        let pos = rng.random_range(0..=letters.len());
        if rng.random_bool(0.5) {
            let s = if rng.random_bool(0.5) { Side::A } else { Side::B };
            let y = rng.random_range(0..self.group(s).order());
            letters.splice(pos..pos, [(s, y), (s, self.group(s).inv(y))]);
        } else {
            let k = self.k_a[rng.random_range(0..self.k_a.len())];
            let kb = self.fb.group.inv(self.a_to_b[&k]);
            letters.splice(pos..pos, [(Side::A, k), (Side::B, kb)]);
        }
    }

    /// Elements of `N_X(K) ∖ K` for the factor on side `s`.
    pub fn normalizing_outside(&self, s: Side) -> Vec<usize> {
        let f = self.factor(s);
        let k: Vec<usize> = (0..f.group.order()).filter(|&i| f.in_k[i]).collect();
        (0..f.group.order())
            .filter(|&x| {
                !f.in_k[x] && {
                    let xi = f.group.inv(x);
                    k.iter().all(|&kk| f.in_k[f.group.mul(f.group.mul(x, kk), xi)])
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AfpCase {
    AA,
    BB,
    AB,
    BA,
}

#[derive(Debug, Clone)]
pub struct AfpWitness {
    pub g: AfpElem,
    pub case: AfpCase,
    pub x: AfpElem,
    /// True when the family is `x^-N g x^N` rather than `x^N g x^-N`.
    pub inverted: bool,
    pub lengths: Vec<usize>,
    pub hypothesis_met: bool,
}

impl AfpWitness {
    pub fn strictly_increasing(&self) -> bool {
        self.lengths.windows(2).all(|w| w[0] < w[1])
    }

    pub fn to_json(&self, am: &Amalgam) -> Value {
        json!({
            "group": am.name,
            "g": am.format(&self.g),
            "case": format!("{:?}", self.case),
            "x": am.format(&self.x),
            "family": if self.inverted { "x^-N g x^N" } else { "x^N g x^-N" },
            "lengths": self.lengths,
            "strictly_increasing": self.strictly_increasing(),
            "hypothesis_met": self.hypothesis_met,
        })
    }
}

/// Conjugator choice by the sides of the first and last syllables of `g`.
/// In strict mode `a_1, a_2, b` must normalize `K`; otherwise only
/// `a_i, b ∉ K` and `a_2^-1 a_1 ∉ K` are required, which is all the length
/// argument uses.
pub fn afp_witness(
    am: &Amalgam,
    g: &AfpElem,
    a1: Option<usize>,
    a2: Option<usize>,
    b: Option<usize>,
    n_max: usize,
    strict: bool,
) -> Result<AfpWitness> {
    if am.is_in_k(g) {
        return Err(Error::HypothesisViolation("g lies in K".into()));
    }
    let ga = am.group(Side::A);
    let gb = am.group(Side::B);
    let norm_a = am.normalizing_outside(Side::A);
    let norm_b = am.normalizing_outside(Side::B);
    let outside_a: Vec<usize> = (0..ga.order()).filter(|&x| !am.in_k(Side::A, x)).collect();
    let outside_b: Vec<usize> = (0..gb.order()).filter(|&x| !am.in_k(Side::B, x)).collect();
    let pool_a = if norm_a.is_empty() && !strict { &outside_a } else { &norm_a };
    let pool_b = if norm_b.is_empty() && !strict { &outside_b } else { &norm_b };
    let apart = |x: usize, y: usize| !am.in_k(Side::A, ga.mul(ga.inv(y), x));
    let a1 = match a1 {
        Some(x) => x,
        None => *pool_a
            .first()
            .ok_or_else(|| Error::HypothesisViolation("no admissible a_1 in A".into()))?,
    };
    let a2 = match a2 {
        Some(x) => x,
        // prefer a_2 outside both a_1 K and K a_1, so one of a_i g_1, g_n k a_i avoids K
        None => *pool_a
            .iter()
            .find(|&&y| apart(a1, y) && !am.in_k(Side::A, ga.mul(a1, ga.inv(y))))
            .or_else(|| pool_a.iter().find(|&&y| apart(a1, y)))
            .ok_or_else(|| Error::HypothesisViolation("no admissible a_2 in A".into()))?,
    };
    let b = match b {
        Some(x) => x,
        None => *pool_b
            .first()
            .ok_or_else(|| Error::HypothesisViolation("no admissible b in B".into()))?,
    };
    if am.in_k(Side::A, a1) || am.in_k(Side::A, a2) || am.in_k(Side::B, b) || !apart(a1, a2) {
        return Err(Error::HypothesisViolation("need a_1, a_2, b outside K and a_2^-1 a_1 outside K".into()));
    }
    let normalizing = norm_a.contains(&a1) && norm_a.contains(&a2) && norm_b.contains(&b);
    if strict && !normalizing {
        return Err(Error::HypothesisViolation("a_1, a_2, b must normalize K".into()));
    }
    let first = g.syllables[0];
    let last = *g.syllables.last().unwrap();
    let word = |l: &[(Side, usize)]| am.normal_form(l);
    let (case, x, inverted) = match (first.0, last.0) {
        (Side::A, Side::A) => (AfpCase::AA, word(&[(Side::A, a1), (Side::B, b)]), false),
        (Side::B, Side::B) => (AfpCase::BB, word(&[(Side::B, b), (Side::A, a1)]), false),
        (Side::A, Side::B) => {
            let ai = [a1, a2]
                .into_iter()
                .find(|&ai| !am.in_k(Side::A, ga.mul(ai, first.1)))
                .ok_or_else(|| Error::HypothesisViolation("both a_i g_1 lie in K".into()))?;
            (AfpCase::AB, word(&[(Side::B, b), (Side::A, ai)]), false)
        }
        (Side::B, Side::A) => {
            let tail = ga.mul(last.1, g.k);
            let ai = [a1, a2]
                .into_iter()
                .find(|&ai| !am.in_k(Side::A, ga.mul(tail, ai)))
                .ok_or_else(|| Error::HypothesisViolation("both g_n k a_i lie in K".into()))?;
            (AfpCase::BA, word(&[(Side::A, ai), (Side::B, b)]), true)
        }
    };
    let xi = am.inverse(&x);
    let (left, right) = if inverted { (&xi, &x) } else { (&x, &xi) };
    let lengths = (0..=n_max)
        .map(|n| am.mul(&am.mul(&am.power(left, n), g), &am.power(right, n)).len())
        .collect();
    Ok(AfpWitness {
        g: g.clone(),
        case,
        x,
        inverted,
        lengths,
        hypothesis_met: normalizing,
    })
}

/// Sample elements of `A *_K B` by first and last syllable side.
pub fn case_samples(am: &Amalgam, seed: u64, per_case: usize) -> BTreeMap<AfpCase, Vec<AfpElem>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out: BTreeMap<AfpCase, Vec<AfpElem>> = BTreeMap::new();
    let mut guard = 0;
    while out.len() < 4 || out.values().any(|v| v.len() < per_case) {
        guard += 1;
        if guard > 100_000 {
            break;
        }
        let g = am.normal_form(&am.random_letters(&mut rng, 7));
        if g.is_empty() {
            continue;
        }
        let case = match (g.syllables[0].0, g.syllables.last().unwrap().0) {
            (Side::A, Side::A) => AfpCase::AA,
            (Side::B, Side::B) => AfpCase::BB,
            (Side::A, Side::B) => AfpCase::AB,
            (Side::B, Side::A) => AfpCase::BA,
        };
        let v = out.entry(case).or_default();
        if v.len() < per_case {
            v.push(g);
        }
    }
    out
}
