//! HNN extensions `HNN(H, K_1, K_-1, θ)` over a finite base or over `Z`
//! (Baumslag–Solitar), with Britton reduction and conjugator witnesses.
//!
//! Orientation: `t k t^-1 = θ(k)` for `k ∈ K_1`. A subword `t^ε g t^-ε`
//! is a pinch exactly when `g ∈ K_ε`, and it collapses to `θ^ε(g)`.

use std::collections::BTreeSet;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group::PermGroup;
use crate::perm::{parse_cycle_list, Perm};

pub trait HnnBase {
    type Elem: Clone + Eq + Ord + Debug;

    fn name(&self) -> String;
    fn identity(&self) -> Self::Elem;
    /// Group product `a·b`.
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
    /// Membership in `K_ε`.
    fn in_assoc(&self, eps: i8, g: &Self::Elem) -> bool;
    /// `t^ε g t^-ε` for `g ∈ K_ε`.
    fn push_through(&self, eps: i8, g: &Self::Elem) -> Self::Elem;
    fn format_elem(&self, g: &Self::Elem) -> String;
    /// Parses one base token; `pos` is the token offset for error reporting.
    fn parse_elem(&self, s: &str, pos: usize) -> Result<Self::Elem>;
    fn random_elem(&self, rng: &mut dyn rand::RngCore) -> Self::Elem;
    fn random_assoc(&self, eps: i8, rng: &mut dyn rand::RngCore) -> Self::Elem;
    /// Whether `x` commutes with every element of `K_ε`.
    fn centralizes(&self, eps: i8, x: &Self::Elem) -> bool;
    /// A default element of `Z_H(K_ε) ∖ K_ε`, if one exists.
    fn find_centralizing(&self, eps: i8) -> Option<Self::Elem>;
}

/// `g ∈ K_m`: `t^l g t^-l ∈ H` for all `|l| <= m`.
pub fn in_km<B: HnnBase>(base: &B, g: &B::Elem, m: u32) -> bool {
    first_escape(base, g, m).is_none()
}

/// Smallest `|s| <= m` (positive first) with `t^s g t^-s ∉ H`.
pub fn first_escape<B: HnnBase>(base: &B, g: &B::Elem, m: u32) -> Option<i64> {
    let mut cur = [g.clone(), g.clone()];
    for step in 1..=m as i64 {
        for (i, eps) in [1i8, -1].into_iter().enumerate() {
            if !base.in_assoc(eps, &cur[i]) {
                return Some(step * eps as i64);
            }
            cur[i] = base.push_through(eps, &cur[i]);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Letter<E> {
    G(E),
    T(i8),
}

/// `g_1 t^ε_1 g_2 … t^ε_n g_(n+1)`; `heads.len() == eps.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HnnWord<E> {
    pub heads: Vec<E>,
    pub eps: Vec<i8>,
}

impl<E: Clone + Eq> HnnWord<E> {
    pub fn from_letters<B: HnnBase<Elem = E>>(base: &B, letters: &[Letter<E>]) -> Self {
        let mut heads = vec![base.identity()];
        let mut eps = Vec::new();
        for l in letters {
            match l {
                Letter::G(g) => {
                    let last = heads.last_mut().unwrap();
                    *last = base.mul(last, g);
                }
                Letter::T(e) => {
                    eps.push(*e);
                    heads.push(base.identity());
                }
            }
        }
        HnnWord { heads, eps }
    }

    pub fn base_element<B: HnnBase<Elem = E>>(base: &B, g: E) -> Self {
        let _ = base;
        HnnWord {
            heads: vec![g],
            eps: Vec::new(),
        }
    }

    pub fn letters(&self) -> Vec<Letter<E>> {
        let mut out = Vec::with_capacity(2 * self.heads.len());
        for (i, h) in self.heads.iter().enumerate() {
            out.push(Letter::G(h.clone()));
            if let Some(&e) = self.eps.get(i) {
                out.push(Letter::T(e));
            }
        }
        out
    }

    pub fn sigma(&self) -> i64 {
        self.eps.iter().map(|&e| e as i64).sum()
    }

    pub fn tau(&self) -> usize {
        self.eps.len()
    }

    pub fn concat<B: HnnBase<Elem = E>>(&self, base: &B, other: &HnnWord<E>) -> Self {
        let mut heads = self.heads.clone();
        let last = heads.pop().unwrap();
        heads.push(base.mul(&last, &other.heads[0]));
        heads.extend(other.heads[1..].iter().cloned());
        let mut eps = self.eps.clone();
        eps.extend(&other.eps);
        HnnWord { heads, eps }
    }

    pub fn inverse<B: HnnBase<Elem = E>>(&self, base: &B) -> Self {
        HnnWord {
            heads: self.heads.iter().rev().map(|h| base.inv(h)).collect(),
            eps: self.eps.iter().rev().map(|e| -e).collect(),
        }
    }

    pub fn power<B: HnnBase<Elem = E>>(&self, base: &B, n: usize) -> Self {
        let mut out = HnnWord {
            heads: vec![base.identity()],
            eps: Vec::new(),
        };
        for _ in 0..n {
            out = out.concat(base, self);
        }
        out
    }

    /// No pinch `t^ε g t^-ε` with `g ∈ K_ε`.
    pub fn is_reduced<B: HnnBase<Elem = E>>(&self, base: &B) -> bool {
        (1..self.eps.len()).all(|i| !(self.eps[i - 1] == -self.eps[i] && base.in_assoc(self.eps[i - 1], &self.heads[i])))
    }

    pub fn format<B: HnnBase<Elem = E>>(&self, base: &B) -> String {
        let id = base.identity();
        let mut parts = Vec::new();
        for (i, h) in self.heads.iter().enumerate() {
            if *h != id {
                parts.push(base.format_elem(h));
            }
            if let Some(&e) = self.eps.get(i) {
                parts.push(if e == 1 { "t".to_string() } else { "t^-1".to_string() });
            }
        }
        if parts.is_empty() {
            "e".into()
        } else {
            parts.join(" ")
        }
    }
}

/// Stack-based Britton reduction; each pinch is resolved as soon as the
/// closing stable letter arrives, so the output has no pinch.
pub fn britton_reduce<B: HnnBase>(base: &B, w: &HnnWord<B::Elem>) -> HnnWord<B::Elem> {
    let mut heads = vec![w.heads[0].clone()];
    let mut eps: Vec<i8> = Vec::new();
    for (i, &e) in w.eps.iter().enumerate() {
        let next = &w.heads[i + 1];
        match eps.last() {
            Some(&pe) if pe == -e && base.in_assoc(pe, heads.last().unwrap()) => {
                let g = heads.pop().unwrap();
                eps.pop();
                let img = base.push_through(pe, &g);
                let last = heads.last_mut().unwrap();
                *last = base.mul(&base.mul(last, &img), next);
            }
            _ => {
                eps.push(e);
                heads.push(next.clone());
            }
        }
    }
    HnnWord { heads, eps }
}

/// Splits the word DSL into tokens: `t`, `t^-1`, base tokens, and runs of
/// parenthesised cycles, with their byte offsets.
fn tokenize(s: &str) -> Result<Vec<(usize, String)>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if (bytes[i] as char).is_whitespace() || bytes[i] == b'*' {
            i += 1;
            continue;
        }
        let start = i;
        if bytes[i] == b'(' {
            while i < bytes.len() && bytes[i] == b'(' {
                match s[i..].find(')') {
                    Some(j) => i += j + 1,
                    None => return Err(Error::parse(s.len(), "missing ')'")),
                }
            }
        } else {
            while i < bytes.len() && !(bytes[i] as char).is_whitespace() && bytes[i] != b'(' && bytes[i] != b'*' {
                i += 1;
            }
        }
        out.push((start, s[start..i].to_string()));
    }
    Ok(out)
}

pub fn parse_word<B: HnnBase>(base: &B, s: &str) -> Result<HnnWord<B::Elem>> {
    let mut letters = Vec::new();
    for (pos, tok) in tokenize(s)? {
        if tok == "t" || tok.starts_with("t^") {
            let exp: i64 = if tok == "t" {
                1
            } else {
                tok[2..].parse().map_err(|_| Error::parse(pos + 2, "bad exponent of t"))?
            };
            let e = exp.signum() as i8;
            for _ in 0..exp.unsigned_abs() {
                letters.push(Letter::T(e));
            }
        } else {
            letters.push(Letter::G(base.parse_elem(&tok, pos)?));
        }
    }
    Ok(HnnWord::from_letters(base, &letters))
}

fn parse_power(tok: &str, pos: usize) -> Result<(&str, BigInt)> {
    match tok.split_once('^') {
        Some((name, e)) => {
            let exp: BigInt = e.parse().map_err(|_| Error::parse(pos + name.len() + 1, "bad exponent"))?;
            Ok((name, exp))
        }
        None => Ok((tok, BigInt::one())),
    }
}

/// `BS(m, n) = HNN(Z, mZ, nZ, a^m ↦ a^n)`, base elements `a^e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaumslagSolitar {
    pub m: i64,
    pub n: i64,
}

impl BaumslagSolitar {
    pub fn new(m: i64, n: i64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidGroup("BS(m, n) needs m, n nonzero".into()));
        }
        Ok(BaumslagSolitar { m, n })
    }

    /// Positive generator of `K_l ∩ <a>`, found by scanning multiples of the
    /// candidate `m^l n^l`'s divisors upward.
    pub fn km_generator(&self, l: u32) -> BigInt {
        let bound = (BigInt::from(self.m) * self.n).abs().pow(l);
        let mut e = BigInt::one();
        while e <= bound {
            if bound.is_multiple_of(&e) && in_km(self, &e, l) {
                return e;
            }
            e += 1;
        }
        bound
    }
}

impl HnnBase for BaumslagSolitar {
    type Elem = BigInt;

    fn name(&self) -> String {
        format!("BS({},{})", self.m, self.n)
    }

    fn identity(&self) -> BigInt {
        BigInt::zero()
    }

    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a + b
    }

    fn inv(&self, a: &BigInt) -> BigInt {
        -a
    }

    fn in_assoc(&self, eps: i8, g: &BigInt) -> bool {
        let q = if eps == 1 { self.m } else { self.n };
        g.is_multiple_of(&BigInt::from(q))
    }

    fn push_through(&self, eps: i8, g: &BigInt) -> BigInt {
        let (from, to) = if eps == 1 { (self.m, self.n) } else { (self.n, self.m) };
        g / from * to
    }

    fn format_elem(&self, g: &BigInt) -> String {
        if g.is_one() {
            "a".into()
        } else {
            format!("a^{g}")
        }
    }

    fn parse_elem(&self, s: &str, pos: usize) -> Result<BigInt> {
        if s == "e" {
            return Ok(BigInt::zero());
        }
        let (name, exp) = parse_power(s, pos)?;
        if name != "a" {
            return Err(Error::parse(pos, format!("unknown base element '{s}'")));
        }
        Ok(exp)
    }

    fn random_elem(&self, rng: &mut dyn rand::RngCore) -> BigInt {
        BigInt::from(rng.random_range(-6i64..=6))
    }

    fn random_assoc(&self, eps: i8, rng: &mut dyn rand::RngCore) -> BigInt {
        let q = if eps == 1 { self.m } else { self.n };
        BigInt::from(q * rng.random_range(-3i64..=3))
    }

    fn centralizes(&self, _eps: i8, _x: &BigInt) -> bool {
        true
    }

    fn find_centralizing(&self, eps: i8) -> Option<BigInt> {
        let x = BigInt::one();
        (!self.in_assoc(eps, &x)).then_some(x)
    }
}

/// A finite base `H` given as a permutation group, with `K_1` and an
/// injective homomorphism `θ: K_1 → H` whose image is `K_-1`.
#[derive(Debug, Clone)]
pub struct FiniteBase {
    pub name: String,
    pub h: PermGroup,
    /// `assoc[0]` is `K_1`, `assoc[1]` is `K_-1`, as membership flags.
    assoc: [Vec<bool>; 2],
    theta: Vec<Option<usize>>,
    theta_inv: Vec<Option<usize>>,
    gen_names: Vec<(String, usize)>,
}

impl FiniteBase {
    pub fn new(
        name: &str,
        h: PermGroup,
        k1_gens: Vec<Perm>,
        theta: impl Fn(&Perm) -> Perm,
        gen_names: Vec<(String, Perm)>,
    ) -> Result<Self> {
        let k1 = PermGroup::closure(h.degree(), k1_gens)?;
        if !k1.is_subgroup_of(&h) {
            return Err(Error::InvalidGroup("K_1 is not contained in H".into()));
        }
        let n = h.order();
        let mut fwd = vec![None; n];
        let mut back = vec![None; n];
        for p in k1.elements() {
            let img = theta(p);
            let (Some(i), Some(j)) = (h.index_of(p), h.index_of(&img)) else {
                return Err(Error::InvalidGroup(format!("θ({}) is not in H", p.to_cycle_string(1))));
            };
            if back[j].is_some() {
                return Err(Error::InvalidGroup("θ is not injective".into()));
            }
            fwd[i] = Some(j);
            back[j] = Some(i);
        }
        for a in k1.elements() {
            for b in k1.elements() {
                if theta(&a.compose(b)) != theta(a).compose(&theta(b)) {
                    return Err(Error::InvalidGroup("θ is not a homomorphism".into()));
                }
            }
        }
        let assoc = [fwd.iter().map(Option::is_some).collect(), back.iter().map(Option::is_some).collect()];
        let mut names = Vec::new();
        for (s, p) in gen_names {
            let i = h
                .index_of(&p)
                .ok_or_else(|| Error::InvalidGroup(format!("named generator {s} is not in H")))?;
            names.push((s, i));
        }
        Ok(FiniteBase {
            name: name.into(),
            h,
            assoc,
            theta: fwd,
            theta_inv: back,
            gen_names: names,
        })
    }

    /// `H = C4 = <a>`, `K_1 = K_-1 = <a^2>`, `θ = id`.
    pub fn cyclic4() -> Self {
        let a = Perm::parse_cycles("(1 2 3 4)", 4, 1).unwrap();
        let a2 = a.compose(&a);
        let h = PermGroup::closure(4, vec![a.clone()]).unwrap();
        FiniteBase::new("C4", h, vec![a2], |p| p.clone(), vec![("a".into(), a)]).unwrap()
    }

    /// `H = S3`, `K_1 = <(1 2)>`, `K_-1 = <(1 3)>`, `θ` conjugation by `(2 3)`.
    /// The centralizer of `K_1` is `K_1` itself, so no witness exists.
    pub fn s3_transpositions() -> Self {
        let a = Perm::parse_cycles("(1 2)", 3, 1).unwrap();
        let b = Perm::parse_cycles("(1 2 3)", 3, 1).unwrap();
        let c = Perm::parse_cycles("(2 3)", 3, 1).unwrap();
        let h = PermGroup::symmetric(3).unwrap();
        FiniteBase::new(
            "S3",
            h,
            vec![a.clone()],
            move |p| c.compose(p).compose(&c),
            vec![("a".into(), a), ("b".into(), b)],
        )
        .unwrap()
    }

    /// `K_m` as sorted element indices.
    pub fn km(&self, m: u32) -> Vec<usize> {
        (0..self.h.order()).filter(|i| in_km(self, i, m)).collect()
    }

    pub fn assoc_elements(&self, eps: i8) -> Vec<usize> {
        let flags = &self.assoc[if eps == 1 { 0 } else { 1 }];
        (0..flags.len()).filter(|&i| flags[i]).collect()
    }
}

impl HnnBase for FiniteBase {
    type Elem = usize;

    fn name(&self) -> String {
        self.name.clone()
    }

    fn identity(&self) -> usize {
        self.h.identity_index()
    }

    fn mul(&self, a: &usize, b: &usize) -> usize {
        self.h.mul(*a, *b)
    }

    fn inv(&self, a: &usize) -> usize {
        self.h.inv(*a)
    }

    fn in_assoc(&self, eps: i8, g: &usize) -> bool {
        self.assoc[if eps == 1 { 0 } else { 1 }][*g]
    }

    fn push_through(&self, eps: i8, g: &usize) -> usize {
        let map = if eps == 1 { &self.theta } else { &self.theta_inv };
        map[*g].expect("push_through outside the associated subgroup")
    }

    fn format_elem(&self, g: &usize) -> String {
        self.h.element(*g).to_cycle_string(1)
    }

    fn parse_elem(&self, s: &str, pos: usize) -> Result<usize> {
        if s == "e" {
            return Ok(self.identity());
        }
        if s.starts_with('(') {
            let cycles = parse_cycle_list(s, 1, pos)?;
            let p = Perm::from_cycles(self.h.degree(), &cycles)?;
            return self
                .h
                .index_of(&p)
                .ok_or_else(|| Error::parse(pos, format!("{s} is not in {}", self.name)));
        }
        if let Some(rest) = s.strip_prefix('g') {
            if let Ok(i) = rest.parse::<usize>() {
                return if i < self.h.order() {
                    Ok(i)
                } else {
                    Err(Error::parse(pos, format!("element index {i} out of range")))
                };
            }
        }
        let (name, exp) = parse_power(s, pos)?;
        let &(_, gi) = self
            .gen_names
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::parse(pos, format!("unknown base element '{s}'")))?;
        let order = BigInt::from(self.h.order());
        let e: usize = exp.mod_floor(&order).try_into().unwrap();
        let mut out = self.identity();
        for _ in 0..e {
            out = self.h.mul(out, gi);
        }
        Ok(out)
    }

    fn random_elem(&self, rng: &mut dyn rand::RngCore) -> usize {
        rng.random_range(0..self.h.order())
    }

    fn random_assoc(&self, eps: i8, rng: &mut dyn rand::RngCore) -> usize {
        let els = self.assoc_elements(eps);
        els[rng.random_range(0..els.len())]
    }

    fn centralizes(&self, eps: i8, x: &usize) -> bool {
        self.assoc_elements(eps).iter().all(|k| self.h.mul(*x, *k) == self.h.mul(*k, *x))
    }

    fn find_centralizing(&self, eps: i8) -> Option<usize> {
        (0..self.h.order()).find(|x| !self.in_assoc(eps, x) && self.centralizes(eps, x))
    }
}

/// One random application of a defining relation, leaving the element
/// unchanged: insert `t^ε k t^-ε θ^ε(k)^-1`, insert `t^ε t^-ε`, insert
/// `h h^-1`, or expand a base letter `g` as `g θ^ε(k)^-1 t^ε k t^-ε`.
pub fn random_rewrite<B: HnnBase, R: Rng>(base: &B, letters: &mut Vec<Letter<B::Elem>>, rng: &mut R) {
    let eps: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
    let pos = rng.random_range(0..=letters.len());
    match rng.random_range(0..4) {
        0 => {
            let k = base.random_assoc(eps, rng);
            let img = base.push_through(eps, &k);
            letters.splice(pos..pos, [Letter::T(eps), Letter::G(k), Letter::T(-eps), Letter::G(base.inv(&img))]);
        }
        1 => {
            letters.splice(pos..pos, [Letter::T(eps), Letter::T(-eps)]);
        }
        2 => {
            let h = base.random_elem(rng);
            let hi = base.inv(&h);
            letters.splice(pos..pos, [Letter::G(h), Letter::G(hi)]);
        }
        _ => {
            let gpos: Vec<usize> = (0..letters.len()).filter(|&i| matches!(letters[i], Letter::G(_))).collect();
            let k = base.random_assoc(eps, rng);
            let img = base.push_through(eps, &k);
            let tail = [Letter::G(base.inv(&img)), Letter::T(eps), Letter::G(k), Letter::T(-eps)];
            match gpos.get(rng.random_range(0..gpos.len().max(1))) {
                Some(&i) => {
                    letters.splice(i + 1..i + 1, tail);
                }
                None => {
                    letters.splice(pos..pos, tail);
                }
            }
        }
    }
}

pub fn random_word<B: HnnBase, R: Rng>(base: &B, rng: &mut R, max_syllables: usize) -> HnnWord<B::Elem> {
    let n = rng.random_range(0..=max_syllables);
    let mut letters = vec![Letter::G(base.random_elem(rng))];
    for _ in 0..n {
        letters.push(Letter::T(if rng.random_bool(0.5) { 1 } else { -1 }));
        letters.push(Letter::G(base.random_elem(rng)));
    }
    HnnWord::from_letters(base, &letters)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HnnCase {
    /// `g ∈ H ∖ K_m`, with the escape exponent `s`.
    Base { s: i64 },
    OppositeEnds,
    EqualEndsInside,
    EqualEndsOutside,
}

#[derive(Debug, Clone)]
pub struct HnnWitness<E> {
    pub g: HnnWord<E>,
    pub m: u32,
    pub case: HnnCase,
    pub x: HnnWord<E>,
    /// `τ(x^N g x^-N)` for `N = 0..=n_max`, each from an independent reduction.
    pub taus: Vec<usize>,
    /// Closed form for `τ(x^N g x^-N)`, `N >= 1`.
    pub expected: Vec<usize>,
    pub hypothesis_met: bool,
}

impl<E: Clone + Eq> HnnWitness<E> {
    pub fn strictly_increasing(&self) -> bool {
        self.taus.windows(2).all(|w| w[0] < w[1])
    }

    pub fn matches_formula(&self) -> bool {
        self.taus[1..] == self.expected[..]
    }

    pub fn to_json<B: HnnBase<Elem = E>>(&self, base: &B) -> Value {
        let case = match self.case {
            HnnCase::Base { s } => json!({"kind": "base", "s": s}),
            HnnCase::OppositeEnds => json!({"kind": "opposite_ends"}),
            HnnCase::EqualEndsInside => json!({"kind": "equal_ends_first_in_assoc"}),
            HnnCase::EqualEndsOutside => json!({"kind": "equal_ends_first_outside"}),
        };
        json!({
            "group": base.name(),
            "g": self.g.format(base),
            "m": self.m,
            "case": case,
            "x": self.x.format(base),
            "tau_x": self.x.tau(),
            "taus": self.taus,
            "expected": self.expected,
            "strictly_increasing": self.strictly_increasing(),
            "formula_holds": self.matches_formula(),
            "hypothesis_met": self.hypothesis_met,
        })
    }
}

fn word_of<B: HnnBase>(base: &B, letters: Vec<Letter<B::Elem>>) -> HnnWord<B::Elem> {
    HnnWord::from_letters(base, &letters)
}

/// Builds the conjugator for `g ∉ K_m` and certifies, for `N <= n_max`, that
/// `τ(x^N g x^-N)` strictly increases. `x_1`, `x_-1` default to the base's
/// own choice; they must lie in `Z_H(K_±1) ∖ K_±1`.
pub fn hnn_witness<B: HnnBase>(
    base: &B,
    g: &HnnWord<B::Elem>,
    m: u32,
    x_pos: Option<B::Elem>,
    x_neg: Option<B::Elem>,
    n_max: usize,
) -> Result<HnnWitness<B::Elem>> {
    let pick = |eps: i8, given: Option<B::Elem>| -> Result<B::Elem> {
        let x = match given {
            Some(x) => x,
            None => base.find_centralizing(eps).ok_or_else(|| {
                Error::HypothesisViolation(format!("no element of Z_H(K_{eps}) outside K_{eps} in {}", base.name()))
            })?,
        };
        if base.in_assoc(eps, &x) || !base.centralizes(eps, &x) {
            return Err(Error::HypothesisViolation(format!(
                "x_{eps} = {} is not in Z_H(K_{eps}) ∖ K_{eps}",
                base.format_elem(&x)
            )));
        }
        Ok(x)
    };
    let x1 = pick(1, x_pos)?;
    let xm1 = pick(-1, x_neg)?;
    let xe = |eps: i8| if eps == 1 { x1.clone() } else { xm1.clone() };
    let r = britton_reduce(base, g);
    let n = r.tau();
    let (case, x, expected): (HnnCase, HnnWord<B::Elem>, Box<dyn Fn(usize) -> usize>) = if n == 0 {
        let h = &r.heads[0];
        let s = first_escape(base, h, m)
            .ok_or_else(|| Error::HypothesisViolation(format!("g = {} lies in K_{m}", r.format(base))))?;
        let e = s.signum() as i8;
        let a = s.unsigned_abs() as usize;
        let mut letters = vec![Letter::G(xe(e))];
        letters.extend(std::iter::repeat_n(Letter::T(-e), a));
        letters.push(Letter::G(xe(-e)));
        letters.extend(std::iter::repeat_n(Letter::T(e), a));
        (HnnCase::Base { s }, word_of(base, letters), Box::new(move |nn| 2 * (a + 1) + 2 * (nn - 1) * 2 * a))
    } else {
        let e1 = r.eps[0];
        let en = r.eps[n - 1];
        let (case, letters) = if e1 == -en {
            (
                HnnCase::OppositeEnds,
                vec![Letter::G(xe(e1)), Letter::T(-e1), Letter::G(xe(-e1)), Letter::T(e1)],
            )
        } else if base.in_assoc(-e1, &r.heads[0]) {
            (
                HnnCase::EqualEndsInside,
                vec![Letter::T(e1), Letter::G(xe(e1)), Letter::T(-e1), Letter::G(xe(-e1))],
            )
        } else {
            (
                HnnCase::EqualEndsOutside,
                vec![Letter::G(xe(-e1)), Letter::T(e1), Letter::G(xe(e1)), Letter::T(-e1)],
            )
        };
        (case, word_of(base, letters), Box::new(move |nn| n + 4 * nn))
    };
    let xinv = x.inverse(base);
    let mut taus = Vec::with_capacity(n_max + 1);
    let mut expected_vals = Vec::with_capacity(n_max);
    for nn in 0..=n_max {
        let w = x.power(base, nn).concat(base, g).concat(base, &xinv.power(base, nn));
        taus.push(britton_reduce(base, &w).tau());
        if nn >= 1 {
            expected_vals.push(expected(nn));
        }
    }
    Ok(HnnWitness {
        g: g.clone(),
        m,
        case,
        x,
        taus,
        expected: expected_vals,
        hypothesis_met: true,
    })
}

/// Brute-force `K_m` membership: reduce `t^l g t^-l` for every `|l| <= m`.
pub fn in_km_by_reduction<B: HnnBase>(base: &B, g: &B::Elem, m: u32) -> bool {
    (-(m as i64)..=m as i64).all(|l| {
        let e = l.signum() as i8;
        let a = l.unsigned_abs() as usize;
        let mut letters: Vec<Letter<B::Elem>> = std::iter::repeat_n(Letter::T(e), a).collect();
        letters.push(Letter::G(g.clone()));
        letters.extend(std::iter::repeat_n(Letter::T(-e), a));
        britton_reduce(base, &HnnWord::from_letters(base, &letters)).tau() == 0
    })
}

/// Indices of `K_m` for every `m <= m_max`, as a decreasing chain.
pub fn km_chain(base: &FiniteBase, m_max: u32) -> Vec<BTreeSet<usize>> {
    (0..=m_max).map(|m| base.km(m).into_iter().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bs() -> BaumslagSolitar {
        BaumslagSolitar::new(2, 3).unwrap()
    }

    #[test]
    fn bs_pinch() {
        let b = bs();
        let w = parse_word(&b, "t^-1 a^3 t").unwrap();
        let r = britton_reduce(&b, &w);
        assert_eq!(r.format(&b), "a^2");
        let w = parse_word(&b, "t a t^-1").unwrap();
        let r = britton_reduce(&b, &w);
        assert_eq!((r.tau(), r.sigma()), (2, 0));
        let e = britton_reduce(&b, &parse_word(&b, "").unwrap());
        assert_eq!((e.tau(), e.sigma(), e.format(&b)), (0, 0, "e".to_string()));
    }

    #[test]
    fn nested_pinches_cascade() {
        let b = bs();
        // t^-1 (t^-1 a^9 t) t = t^-1 a^6 t = a^4
        let r = britton_reduce(&b, &parse_word(&b, "t^-2 a^9 t^2").unwrap());
        assert_eq!(r.format(&b), "a^4");
    }

    #[test]
    fn km_finite_toy() {
        let c4 = FiniteBase::cyclic4();
        assert_eq!(c4.km(0).len(), 4);
        assert_eq!(c4.km(1).len(), 2);
        assert_eq!(c4.km(2).len(), 2);
        for m in 0..4 {
            for g in 0..4 {
                assert_eq!(in_km(&c4, &g, m), in_km_by_reduction(&c4, &g, m));
            }
        }
    }

    #[test]
    fn km_baumslag_solitar() {
        let b = bs();
        for l in 0..4u32 {
            assert_eq!(b.km_generator(l), BigInt::from(6).pow(l));
            for e in -80i64..=80 {
                let e = BigInt::from(e);
                assert_eq!(in_km(&b, &e, l), in_km_by_reduction(&b, &e, l), "a^{e} at level {l}");
            }
        }
    }

    #[test]
    fn witness_base_case() {
        let b = bs();
        for (word, s) in [("a", 1i64), ("a^2", -1), ("a^3", 1), ("a^6", 2), ("a^-12", -2)] {
            let g = parse_word(&b, word).unwrap();
            let w = hnn_witness(&b, &g, 2, None, None, 12).unwrap();
            assert_eq!(w.case, HnnCase::Base { s }, "{word}");
            assert!(w.strictly_increasing());
            assert!(w.matches_formula(), "{word}: {:?} vs {:?}", w.taus, w.expected);
        }
        assert!(matches!(
            hnn_witness(&b, &parse_word(&b, "a^36").unwrap(), 2, None, None, 3),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn witness_word_cases() {
        let c4 = FiniteBase::cyclic4();
        let b = bs();
        let cases = [
            ("a t a", HnnCase::EqualEndsOutside),
            ("a^2 t a", HnnCase::EqualEndsInside),
            ("t a t^-1", HnnCase::OppositeEnds),
        ];
        for (word, case) in cases {
            let w = hnn_witness(&c4, &parse_word(&c4, word).unwrap(), 1, None, None, 10).unwrap();
            assert_eq!(w.case, case, "{word}");
            assert!(w.strictly_increasing() && w.matches_formula(), "{word}: {:?}", w.taus);
        }
        for word in ["a t a", "a^3 t a", "t a t^-1", "t^-1 a t a^2 t^-1"] {
            let w = hnn_witness(&b, &parse_word(&b, word).unwrap(), 1, None, None, 10).unwrap();
            assert!(w.strictly_increasing() && w.matches_formula(), "{word}: {:?}", w.taus);
        }
    }

    #[test]
    fn s3_instance_has_no_witness() {
        let s3 = FiniteBase::s3_transpositions();
        assert_eq!(s3.assoc_elements(-1), vec![0, s3.h.index_of(&Perm::parse_cycles("(1 3)", 3, 1).unwrap()).unwrap()]);
        let g = parse_word(&s3, "b t a").unwrap();
        assert!(matches!(hnn_witness(&s3, &g, 1, None, None, 3), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn rewrites_preserve_invariants() {
        let b = bs();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let w = random_word(&b, &mut rng, 5);
            let r = britton_reduce(&b, &w);
            let mut letters = w.letters();
            for _ in 0..100 {
                random_rewrite(&b, &mut letters, &mut rng);
                let rr = britton_reduce(&b, &HnnWord::from_letters(&b, &letters));
                assert!(rr.is_reduced(&b));
                assert_eq!((rr.sigma(), rr.tau()), (r.sigma(), r.tau()));
            }
        }
    }

    #[test]
    fn parse_errors() {
        let c4 = FiniteBase::cyclic4();
        assert!(matches!(parse_word(&c4, "a t^x"), Err(Error::Parse { pos: 4, .. })));
        assert!(matches!(parse_word(&c4, "a q"), Err(Error::Parse { pos: 2, .. })));
        assert_eq!(parse_word(&c4, "(1 2 3 4) t").unwrap().tau(), 1);
    }
}
