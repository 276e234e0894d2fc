//! Finite permutation groups with a fully enumerated, sorted element list.
//!
//! Points are stored 0-based; text forms use 1-based cycle notation.
//! Products follow function notation: `mul(a, b)` applies `b` first.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::haar::partition_cap;
use crate::perm::{parse_cycle_list, Perm};

pub const MAX_DEGREE: usize = 16;

#[derive(Clone)]
pub struct PermGroup {
    degree: usize,
    gens: Vec<Perm>,
    elements: Vec<Perm>,
    index: HashMap<Perm, usize>,
}

impl fmt::Debug for PermGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermGroup(degree {}, order {}, gens {})", self.degree, self.order(), self.gens_string())
    }
}

impl PartialEq for PermGroup {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.elements == other.elements
    }
}

impl Eq for PermGroup {}

impl PermGroup {
    /// Closure of `gens` by breadth-first multiplication, capped at the
    /// global resource cap.
    pub fn closure(degree: usize, gens: Vec<Perm>) -> Result<Self> {
        Self::closure_capped(degree, gens, partition_cap())
    }

    pub fn closure_capped(degree: usize, gens: Vec<Perm>, cap: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::InvalidGroup(format!("degree {degree} outside 1..={MAX_DEGREE}")));
        }
        if let Some(g) = gens.iter().find(|g| g.degree() != degree) {
            return Err(Error::InvalidGroup(format!("generator {} has degree {}", g.to_cycle_string(1), g.degree())));
        }
        let id = Perm::identity(degree);
        let mut seen: BTreeSet<Perm> = BTreeSet::from([id.clone()]);
        let mut queue = VecDeque::from([id]);
        while let Some(x) = queue.pop_front() {
            for g in &gens {
                let y = g.compose(&x);
                if !seen.contains(&y) {
                    if seen.len() >= cap {
                        return Err(Error::ResourceLimit(format!("group closure exceeds {cap} elements")));
                    }
                    seen.insert(y.clone());
                    queue.push_back(y);
                }
            }
        }
        Ok(Self::assemble(degree, gens, seen.into_iter().collect()))
    }

    fn assemble(degree: usize, gens: Vec<Perm>, elements: Vec<Perm>) -> Self {
        let index = elements.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        PermGroup {
            degree,
            gens,
            elements,
            index,
        }
    }

    /// A group from a set already known to be closed; checked.
    pub fn from_elements(degree: usize, elements: impl IntoIterator<Item = Perm>) -> Result<Self> {
        let set: BTreeSet<Perm> = elements.into_iter().collect();
        let elements: Vec<Perm> = set.into_iter().collect();
        let g = Self::assemble(degree, elements.iter().filter(|p| !p.is_identity()).cloned().collect(), elements);
        if g.elements.first() != Some(&Perm::identity(degree)) {
            return Err(Error::InvalidGroup("subset does not contain the identity".into()));
        }
        for a in &g.elements {
            for b in &g.gens {
                if !g.index.contains_key(&a.compose(b)) {
                    return Err(Error::InvalidGroup("subset is not closed under products".into()));
                }
            }
        }
        Ok(g)
    }

    pub fn trivial(degree: usize) -> Self {
        Self::assemble(degree, Vec::new(), vec![Perm::identity(degree)])
    }

    pub fn symmetric(degree: usize) -> Result<Self> {
        let mut gens = Vec::new();
        if degree >= 2 {
            gens.push(Perm::transposition(degree, 0, 1));
            let cycle: Vec<u8> = (0..degree as u8).collect();
            gens.push(Perm::from_cycles(degree, &[cycle])?);
        }
        Self::closure(degree, gens)
    }

    /// Parses `(1 2 3),(4 5)`: comma or whitespace separated generators,
    /// each a product of 1-based cycles.
    pub fn parse(degree: usize, s: &str) -> Result<Self> {
        Self::closure(degree, parse_generators(degree, s)?)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Perm] {
        &self.gens
    }

    pub fn gens_string(&self) -> String {
        if self.gens.is_empty() {
            return "()".into();
        }
        self.gens.iter().map(|g| g.to_cycle_string(1)).collect::<Vec<_>>().join(",")
    }

    pub fn elements(&self) -> &[Perm] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Perm {
        &self.elements[i]
    }

    pub fn index_of(&self, p: &Perm) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn contains(&self, p: &Perm) -> bool {
        self.index.contains_key(p)
    }

    pub fn identity_index(&self) -> usize {
        0
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.index[&self.elements[a].compose(&self.elements[b])]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.index[&self.elements[a].inverse()]
    }

    pub fn is_subgroup_of(&self, other: &PermGroup) -> bool {
        self.degree == other.degree && self.elements.iter().all(|p| other.contains(p))
    }

    /// Orbits on `{0..degree}`, each sorted, ordered by least point.
    pub fn orbits(&self) -> Vec<Vec<u8>> {
        let mut seen = vec![false; self.degree];
        let mut out = Vec::new();
        for start in 0..self.degree as u8 {
            if seen[start as usize] {
                continue;
            }
            let mut orbit = vec![start];
            seen[start as usize] = true;
            let mut i = 0;
            while i < orbit.len() {
                let x = orbit[i];
                for g in &self.gens {
                    let y = g.apply(x);
                    if !seen[y as usize] {
                        seen[y as usize] = true;
                        orbit.push(y);
                    }
                }
                i += 1;
            }
            orbit.sort();
            out.push(orbit);
        }
        out
    }

    pub fn is_transitive(&self) -> bool {
        self.orbits().len() == 1
    }

    pub fn point_stabilizer(&self, point: u8) -> PermGroup {
        self.filter(|p| p.apply(point) == point)
    }

    /// Elements mapping the set `s` onto itself.
    pub fn set_stabilizer(&self, s: &[u8]) -> PermGroup {
        let set: BTreeSet<u8> = s.iter().copied().collect();
        self.filter(|p| set.iter().all(|&x| set.contains(&p.apply(x))))
    }

    /// Points fixed by every element.
    pub fn fixed_points(&self) -> Vec<u8> {
        (0..self.degree as u8)
            .filter(|&x| self.gens.iter().all(|g| g.apply(x) == x))
            .collect()
    }

    /// `N_self(sub)`.
    pub fn normalizer(&self, sub: &PermGroup) -> PermGroup {
        self.filter(|p| {
            let inv = p.inverse();
            sub.gens.iter().all(|s| sub.contains(&p.compose(s).compose(&inv)))
        })
    }

    pub fn normalizes(&self, p: &Perm) -> bool {
        let inv = p.inverse();
        self.gens.iter().all(|s| self.contains(&p.compose(s).compose(&inv)))
    }

    fn filter(&self, keep: impl Fn(&Perm) -> bool) -> PermGroup {
        let elements: Vec<Perm> = self.elements.iter().filter(|p| keep(p)).cloned().collect();
        let gens = small_generating_set(self.degree, &elements);
        Self::assemble(self.degree, gens, elements)
    }
}

/// Greedy generating set: scan in sorted order, keep anything not yet generated.
fn small_generating_set(degree: usize, elements: &[Perm]) -> Vec<Perm> {
    let mut gens: Vec<Perm> = Vec::new();
    let mut span: BTreeSet<Perm> = BTreeSet::from([Perm::identity(degree)]);
    for p in elements {
        if span.contains(p) {
            continue;
        }
        gens.push(p.clone());
        let mut queue: VecDeque<Perm> = span.iter().cloned().collect();
        while let Some(x) = queue.pop_front() {
            for g in &gens {
                let y = g.compose(&x);
                if span.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
    }
    gens
}

/// Generators separated by commas or whitespace between closing and opening
/// parentheses; `()` is the identity.
pub fn parse_generators(degree: usize, s: &str) -> Result<Vec<Perm>> {
    let mut gens = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        while i < bytes.len() && (bytes[i] == b',' || (bytes[i] as char).is_whitespace()) {
            i += 1;
        }
        if i == bytes.len() {
            break;
        }
        let start = i;
        // a generator is a maximal run of adjacent parenthesised cycles
        loop {
            if i >= bytes.len() || bytes[i] != b'(' {
                return Err(Error::parse(i, "expected '('"));
            }
            match s[i..].find(')') {
                Some(j) => i += j + 1,
                None => return Err(Error::parse(s.len(), "missing ')'")),
            }
            if i >= bytes.len() || bytes[i] != b'(' {
                break;
            }
        }
        let text = &s[start..i];
        if text.trim() == "()" {
            gens.push(Perm::identity(degree));
            continue;
        }
        let cycles = parse_cycle_list(text, 1, start)?;
        gens.push(Perm::from_cycles(degree, &cycles)?);
    }
    Ok(gens)
}

/// All subgroups of `g`, each generated by at most two elements; complete
/// whenever every subgroup of `g` is 2-generated (true for `S_n`, `n <= 4`).
pub fn two_generated_subgroups(g: &PermGroup) -> Result<Vec<PermGroup>> {
    let mut found: BTreeSet<Vec<Perm>> = BTreeSet::new();
    let mut out = Vec::new();
    for (i, a) in g.elements().iter().enumerate() {
        for b in &g.elements()[i..] {
            let h = PermGroup::closure(g.degree(), vec![a.clone(), b.clone()])?;
            if found.insert(h.elements.clone()) {
                out.push(h);
            }
        }
    }
    out.sort_by(|x, y| (x.order(), &x.elements).cmp(&(y.order(), &y.elements)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(deg: usize, s: &str) -> Perm {
        Perm::parse_cycles(s, deg, 1).unwrap()
    }

    #[test]
    fn symmetric_orders() {
        for (n, o) in [(1, 1), (2, 2), (3, 6), (4, 24), (5, 120)] {
            assert_eq!(PermGroup::symmetric(n).unwrap().order(), o);
        }
    }

    #[test]
    fn stabilizers_and_orbits() {
        let s3 = PermGroup::symmetric(3).unwrap();
        let st = s3.point_stabilizer(0);
        assert_eq!(st.elements(), &[Perm::identity(3), p(3, "(2 3)")]);
        let g = PermGroup::parse(4, "(1 2)(3 4)").unwrap();
        assert_eq!(g.orbits(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(PermGroup::parse(4, "(1 2)").unwrap().fixed_points(), vec![2, 3]);
    }

    #[test]
    fn product_action_order() {
        // C3 x S3 on {1..9} with (i, j) -> 3(i-1)+j
        let g = PermGroup::parse(9, "(1 4 7)(2 5 8)(3 6 9),(1 2 3)(4 5 6)(7 8 9),(1 2)(4 5)(7 8)").unwrap();
        assert_eq!(g.order(), 18);
        assert!(g.is_transitive());
    }

    #[test]
    fn s4_has_30_subgroups() {
        let s4 = PermGroup::symmetric(4).unwrap();
        let subs = two_generated_subgroups(&s4).unwrap();
        assert_eq!(subs.len(), 30);
        let orders: Vec<usize> = subs.iter().map(|h| h.order()).collect();
        assert_eq!(orders.iter().filter(|&&o| o == 4).count(), 7);
    }

    #[test]
    fn cap_and_parse_errors() {
        assert!(matches!(
            PermGroup::closure_capped(5, PermGroup::symmetric(5).unwrap().gens.clone(), 50),
            Err(Error::ResourceLimit(_))
        ));
        assert!(matches!(PermGroup::parse(3, "(1 2"), Err(Error::Parse { .. })));
        assert!(PermGroup::parse(3, "(1 4)").is_err());
        assert!(PermGroup::from_elements(3, [Perm::identity(3), p(3, "(1 2 3)")]).is_err());
    }

    #[test]
    fn normalizer_in_s3() {
        let s3 = PermGroup::symmetric(3).unwrap();
        let k = PermGroup::parse(3, "(1 2)").unwrap();
        assert_eq!(s3.normalizer(&k), k);
        let a3 = PermGroup::parse(3, "(1 2 3)").unwrap();
        assert_eq!(s3.normalizer(&a3), s3);
    }
}
