//! Almost automorphisms of `T(d,k)` with finitary tails.
//!
//! A representative ([`TreePair`]) sends each leaf `a` of a complete antichain
//! onto a leaf `β(a)` of another one, acting below `a` by a portrait. The group
//! element ([`AlmostAutomorphism`]) is the representative with the smallest
//! domain; two representatives describe the same element exactly when their
//! canonical forms agree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::perm::{parse_cycle_list, Perm};
use crate::portrait::Portrait;
use crate::tree::{Address, CompleteAntichain, TreeShape};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Piece {
    pub image: Address,
    pub tail: Portrait,
}

/// A (not necessarily reduced) tree-pair representative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePair {
    shape: TreeShape,
    pieces: BTreeMap<Address, Piece>,
}

/// Canonical form of an element of the Neretin group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AlmostAutomorphism {
    shape: TreeShape,
    pieces: BTreeMap<Address, Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubgroupClass {
    /// The whole group.
    N,
    /// Local isometries.
    O,
    /// Rooted automorphisms.
    K,
    /// Rooted automorphisms fixing every vertex of height `n`.
    Kn(u32),
    /// Normalizer of `K^(n)` in `O`.
    On(u32),
}

impl fmt::Display for SubgroupClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgroupClass::N => write!(f, "N"),
            SubgroupClass::O => write!(f, "O"),
            SubgroupClass::K => write!(f, "K"),
            SubgroupClass::Kn(n) => write!(f, "K_n({n})"),
            SubgroupClass::On(n) => write!(f, "O_n({n})"),
        }
    }
}

impl std::str::FromStr for SubgroupClass {
    type Err = Error;

    /// Accepts `N`, `O`, `K`, `Kn:3`, `On:3` and `K_n(3)` / `O_n(3)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let level = |rest: &str| -> Result<u32> {
            let r = rest
                .trim_start_matches(':')
                .trim_start_matches('(')
                .trim_end_matches(')');
            r.parse()
                .map_err(|_| Error::parse(0, format!("bad level in class \"{s}\"")))
        };
        match t {
            "N" => Ok(SubgroupClass::N),
            "O" => Ok(SubgroupClass::O),
            "K" => Ok(SubgroupClass::K),
            _ if t.starts_with("K_n") => Ok(SubgroupClass::Kn(level(&t[3..])?)),
            _ if t.starts_with("O_n") => Ok(SubgroupClass::On(level(&t[3..])?)),
            _ if t.starts_with("Kn") => Ok(SubgroupClass::Kn(level(&t[2..])?)),
            _ if t.starts_with("On") => Ok(SubgroupClass::On(level(&t[2..])?)),
            _ => Err(Error::parse(0, format!("unknown subgroup class \"{s}\""))),
        }
    }
}

impl TreePair {
    pub fn new(shape: TreeShape, pieces: BTreeMap<Address, Piece>) -> Result<Self> {
        let tp = TreePair { shape, pieces };
        tp.validate()?;
        Ok(tp)
    }

    pub fn from_triples(
        shape: TreeShape,
        triples: impl IntoIterator<Item = (Address, Address, Portrait)>,
    ) -> Result<Self> {
        let mut pieces = BTreeMap::new();
        for (a, b, tail) in triples {
            if pieces.contains_key(&a) {
                return Err(Error::InvalidElement(format!("leaf \"{a}\" listed twice")));
            }
            pieces.insert(a, Piece { image: b, tail });
        }
        TreePair::new(shape, pieces)
    }

    fn validate(&self) -> Result<()> {
        let shape = self.shape;
        let domain = CompleteAntichain::new(shape, self.pieces.keys().cloned())?;
        let images: BTreeSet<Address> = self.pieces.values().map(|p| p.image.clone()).collect();
        if images.len() != self.pieces.len() {
            return Err(Error::InvalidElement("leaf map is not injective".into()));
        }
        CompleteAntichain::new(shape, images)?;
        for (a, piece) in &self.pieces {
            let top = shape.arity(a);
            if top != shape.arity(&piece.image) {
                return Err(Error::InvalidElement(format!(
                    "leaf \"{a}\" and its image \"{}\" have different arity",
                    piece.image
                )));
            }
            for (v, p) in piece.tail.entries() {
                let ar = if v.is_root() { top } else { shape.d() as u8 };
                if p.degree() != ar as usize {
                    return Err(Error::InvalidElement(format!(
                        "tail permutation at \"{a}\"/\"{v}\" must have degree {ar}"
                    )));
                }
                for (i, &x) in v.labels().iter().enumerate() {
                    let bound = if i == 0 { top } else { shape.d() as u8 };
                    if x >= bound {
                        return Err(Error::InvalidElement(format!(
                            "tail vertex \"{v}\" below \"{a}\" is not in the tree"
                        )));
                    }
                }
            }
        }
        debug_assert_eq!(domain.len(), self.pieces.len());
        Ok(())
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn pieces(&self) -> &BTreeMap<Address, Piece> {
        &self.pieces
    }

    pub fn domain(&self) -> CompleteAntichain {
        CompleteAntichain::from_trusted(self.shape, self.pieces.keys().cloned().collect())
    }

    pub fn range(&self) -> CompleteAntichain {
        CompleteAntichain::from_trusted(
            self.shape,
            self.pieces.values().map(|p| p.image.clone()).collect(),
        )
    }

    fn leaf_above(&self, a: &Address) -> Option<Address> {
        (0..=a.height())
            .map(|len| a.prefix(len))
            .find(|p| self.pieces.contains_key(p))
    }

    /// Replaces the leaf `a` by its children.
    fn expand_leaf(&mut self, a: &Address) {
        let piece = self.pieces.remove(a).expect("expand_leaf on a non-leaf");
        let root_perm = piece.tail.get(&Address::root()).cloned();
        for c in a.children(self.shape) {
            let i = c.last().unwrap();
            let j = root_perm.as_ref().map_or(i, |p| p.apply(i));
            self.pieces.insert(
                c,
                Piece {
                    image: piece.image.child(j),
                    tail: piece.tail.restrict(&[i]),
                },
            );
        }
    }

    /// Expands domain leaves until every target at or below a leaf is itself
    /// a leaf. Targets strictly above the domain are ignored.
    pub fn refine<'t>(&self, targets: impl IntoIterator<Item = &'t Address>) -> Result<TreePair> {
        let mut out = self.clone();
        for t in targets {
            self.shape
                .validate(t)
                .map_err(|e| Error::InvalidTarget(e.to_string()))?;
            out.refine_at(t);
        }
        Ok(out)
    }

    fn refine_at(&mut self, t: &Address) {
        let Some(mut cur) = self.leaf_above(t) else {
            return;
        };
        while cur != *t {
            self.expand_leaf(&cur);
            cur = t.prefix(cur.height() + 1);
        }
    }

    /// Refines so that every target at or below a range leaf becomes a range leaf.
    pub fn refine_range<'t>(&self, targets: impl IntoIterator<Item = &'t Address>) -> TreePair {
        let mut out = self.clone();
        for t in targets {
            let by_image: BTreeMap<&Address, &Address> =
                out.pieces.iter().map(|(a, p)| (&p.image, a)).collect();
            let Some(b) = (0..=t.height()).map(|len| t.prefix(len)).find(|p| by_image.contains_key(p))
            else {
                continue;
            };
            let a = by_image[&b].clone();
            let tail = &out.pieces[&a].tail;
            let pre = a.concat(&tail.inverse().apply(t.suffix_after(&b)));
            out.refine_at(&pre);
        }
        out
    }

    /// Equivalent representative whose tails are all trivial.
    pub fn expanded(&self) -> TreePair {
        let mut targets = Vec::new();
        for (a, piece) in &self.pieces {
            for (v, _) in piece.tail.entries() {
                targets.push(a.concat(v.labels()).child(0));
            }
        }
        let mut out = self.clone();
        for t in &targets {
            out.refine_at(t);
        }
        debug_assert!(out.pieces.values().all(|p| p.tail.is_identity()));
        out
    }

    /// Image of a vertex at or below a domain leaf, with the tail below it.
    pub fn map_vertex(&self, a: &Address) -> Option<(Address, Portrait)> {
        let leaf = self.leaf_above(a)?;
        let piece = &self.pieces[&leaf];
        let x = a.suffix_after(&leaf);
        Some((
            piece.image.concat(&piece.tail.apply(x)),
            piece.tail.restrict(x),
        ))
    }

    pub fn canonicalize(&self) -> AlmostAutomorphism {
        let shape = self.shape;
        let mut pieces = self.pieces.clone();
        loop {
            let mut parents: Vec<Address> = pieces.keys().filter_map(Address::parent).collect();
            parents.sort_by(|x, y| y.height().cmp(&x.height()).then(x.cmp(y)));
            parents.dedup();
            let mut changed = false;
            for v in parents {
                if pieces.contains_key(&v) {
                    continue;
                }
                let children: Vec<Address> = v.children(shape).collect();
                if !children.iter().all(|c| pieces.contains_key(c)) {
                    continue;
                }
                let Some(w) = pieces[&children[0]].image.parent() else {
                    continue;
                };
                if shape.arity(&w) as usize != children.len()
                    || !children.iter().all(|c| pieces[c].image.parent().as_ref() == Some(&w))
                {
                    continue;
                }
                let images: Vec<u8> = children
                    .iter()
                    .map(|c| pieces[c].image.last().unwrap())
                    .collect();
                let mut tail = Portrait::identity();
                tail.set(Address::root(), Perm::from_images(images).expect("bijective block"));
                for c in &children {
                    let piece = pieces.remove(c).unwrap();
                    tail.absorb(piece.tail.shifted(&[c.last().unwrap()]));
                }
                pieces.insert(v, Piece { image: w, tail });
                changed = true;
            }
            if !changed {
                break;
            }
        }
        AlmostAutomorphism { shape, pieces }
    }
}

impl AlmostAutomorphism {
    pub fn identity(shape: TreeShape) -> Self {
        let mut pieces = BTreeMap::new();
        pieces.insert(
            Address::root(),
            Piece {
                image: Address::root(),
                tail: Portrait::identity(),
            },
        );
        AlmostAutomorphism { shape, pieces }
    }

    pub fn from_triples(
        shape: TreeShape,
        triples: impl IntoIterator<Item = (Address, Address, Portrait)>,
    ) -> Result<Self> {
        Ok(TreePair::from_triples(shape, triples)?.canonicalize())
    }

    /// Rooted automorphism given by a portrait at the root.
    pub fn from_portrait(shape: TreeShape, p: Portrait) -> Result<Self> {
        Self::from_triples(shape, [(Address::root(), Address::root(), p)])
    }

    /// The element exchanging the balls below `u` and `v` rigidly and fixing
    /// everything else.
    pub fn ball_swap(shape: TreeShape, u: &Address, v: &Address) -> Result<Self> {
        if u.comparable(v) {
            return Err(Error::InvalidElement(format!(
                "balls \"{u}\" and \"{v}\" are not disjoint"
            )));
        }
        let dom = CompleteAntichain::root(shape).refine([u.clone(), v.clone()].iter())?;
        Self::from_triples(
            shape,
            dom.leaves().iter().map(|a| {
                let b = if a == u {
                    v.clone()
                } else if a == v {
                    u.clone()
                } else {
                    a.clone()
                };
                (a.clone(), b, Portrait::identity())
            }),
        )
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn pieces(&self) -> &BTreeMap<Address, Piece> {
        &self.pieces
    }

    pub fn representative(&self) -> TreePair {
        TreePair {
            shape: self.shape,
            pieces: self.pieces.clone(),
        }
    }

    pub fn domain(&self) -> CompleteAntichain {
        CompleteAntichain::from_trusted(self.shape, self.pieces.keys().cloned().collect())
    }

    pub fn range(&self) -> CompleteAntichain {
        CompleteAntichain::from_trusted(
            self.shape,
            self.pieces.values().map(|p| p.image.clone()).collect(),
        )
    }

    pub fn refine<'t>(&self, targets: impl IntoIterator<Item = &'t Address>) -> Result<TreePair> {
        self.representative().refine(targets)
    }

    pub fn expanded(&self) -> TreePair {
        self.representative().expanded()
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.len() == 1 && {
            let (a, p) = self.pieces.iter().next().unwrap();
            a.is_root() && p.image.is_root() && p.tail.is_identity()
        }
    }

    /// `self ∘ h`: apply `h` first.
    pub fn compose(&self, h: &AlmostAutomorphism) -> AlmostAutomorphism {
        assert_eq!(self.shape, h.shape, "composing elements of different trees");
        let g_dom: Vec<Address> = self.pieces.keys().cloned().collect();
        let h = h.representative().refine_range(g_dom.iter());
        let h_rng: Vec<Address> = h.pieces.values().map(|p| p.image.clone()).collect();
        let mut g = self.representative();
        for t in &h_rng {
            g.refine_at(t);
        }
        let mut pieces = BTreeMap::new();
        for (a, hp) in h.pieces {
            let gp = &g.pieces[&hp.image];
            pieces.insert(
                a,
                Piece {
                    image: gp.image.clone(),
                    tail: gp.tail.compose(&hp.tail),
                },
            );
        }
        TreePair {
            shape: self.shape,
            pieces,
        }
        .canonicalize()
    }

    pub fn inverse(&self) -> AlmostAutomorphism {
        let pieces = self
            .pieces
            .iter()
            .map(|(a, p)| {
                (
                    p.image.clone(),
                    Piece {
                        image: a.clone(),
                        tail: p.tail.inverse(),
                    },
                )
            })
            .collect();
        // inverting a reduced pair gives a reduced pair
        AlmostAutomorphism {
            shape: self.shape,
            pieces,
        }
    }

    /// `h ∘ self ∘ h⁻¹`.
    pub fn conjugate_by(&self, h: &AlmostAutomorphism) -> AlmostAutomorphism {
        h.compose(self).compose(&h.inverse())
    }

    /// The ball `B^a` is mapped onto `B^image` by a similarity of ratio
    /// `d^(-exponent)`; needs `a` at or below a canonical leaf.
    pub fn evaluate_ball(&self, a: &Address) -> Result<(Address, i64)> {
        self.shape.validate(a)?;
        let leaf = (0..=a.height())
            .map(|len| a.prefix(len))
            .find(|p| self.pieces.contains_key(p))
            .ok_or_else(|| Error::BallNotRigid(format!("\"{a}\"")))?;
        let piece = &self.pieces[&leaf];
        let image = piece.image.concat(&piece.tail.apply(a.suffix_after(&leaf)));
        let exp = image.height() as i64 - a.height() as i64;
        Ok((image, exp))
    }

    /// Exponent of each canonical leaf.
    pub fn exponents(&self) -> impl Iterator<Item = (&Address, i64)> {
        self.pieces
            .iter()
            .map(|(a, p)| (a, p.image.height() as i64 - a.height() as i64))
    }

    /// Image of `B^v` as a set of balls; a single ball when `B^v` is rigid.
    pub fn image_balls(&self, v: &Address) -> Vec<Address> {
        match self.evaluate_ball(v) {
            Ok((img, _)) => vec![img],
            Err(_) => {
                let start = v.clone();
                self.pieces
                    .range(start.clone()..)
                    .take_while(|(a, _)| start.is_prefix_of(a))
                    .map(|(_, p)| p.image.clone())
                    .collect()
            }
        }
    }

    pub fn membership(&self, class: SubgroupClass) -> bool {
        match class {
            SubgroupClass::N => true,
            SubgroupClass::O => self.exponents().all(|(_, e)| e == 0),
            SubgroupClass::K => self.root_portrait().is_some(),
            SubgroupClass::Kn(n) => self
                .root_portrait()
                .is_some_and(|p| p.entries().all(|(v, _)| v.height() >= n as usize)),
            SubgroupClass::On(n) => self
                .exponents()
                .all(|(a, e)| e == 0 && a.height() <= n as usize),
        }
    }

    fn root_portrait(&self) -> Option<&Portrait> {
        if self.pieces.len() == 1 {
            self.pieces.get(&Address::root()).map(|p| &p.tail)
        } else {
            None
        }
    }

    /// Longest address in the canonical form, counting tail vertices.
    pub fn depth(&self) -> usize {
        self.pieces
            .iter()
            .map(|(a, p)| {
                let t = p.tail.depth();
                (a.height() + t).max(p.image.height() + t)
            })
            .max()
            .unwrap_or(0)
    }

    /// Deterministic pseudo-random element of `class`. `depth_budget` bounds
    /// how deep the tree pair and tails reach beyond the class level.
    pub fn random(shape: TreeShape, seed: u64, class: SubgroupClass, depth_budget: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_with(shape, &mut rng, class, depth_budget)
    }

    pub fn parse(shape: TreeShape, s: &str) -> Result<Self> {
        Ok(parse_tree_pair(shape, s)?.canonicalize())
    }
}

/// Like [`AlmostAutomorphism::random`] but drawing from a caller-owned generator.
pub fn random_with<R: Rng>(
    shape: TreeShape,
    rng: &mut R,
    class: SubgroupClass,
    depth_budget: u32,
) -> AlmostAutomorphism {
    let budget = depth_budget.max(1);
    match class {
        SubgroupClass::K => AlmostAutomorphism::from_portrait(
            shape,
            random_portrait(shape, rng, &Address::root(), 0, budget),
        )
        .expect("random portrait is valid"),
        SubgroupClass::Kn(n) => AlmostAutomorphism::from_portrait(
            shape,
            random_portrait(shape, rng, &Address::root(), n, n + budget),
        )
        .expect("random portrait is valid"),
        SubgroupClass::On(n) => {
            let level = shape.level(n);
            let mut images = level.clone();
            images.shuffle(rng);
            let tail_depth = budget - 1;
            AlmostAutomorphism::from_triples(
                shape,
                level.into_iter().zip(images).map(|(a, b)| {
                    let t = random_portrait(shape, rng, &a, 0, tail_depth);
                    (a, b, t)
                }),
            )
            .expect("random level permutation is valid")
        }
        SubgroupClass::O => {
            let dom = random_antichain(shape, rng, budget, budget as usize + 1);
            let mut by_height: BTreeMap<usize, Vec<Address>> = BTreeMap::new();
            for a in dom.leaves() {
                by_height.entry(a.height()).or_default().push(a.clone());
            }
            let mut triples = Vec::new();
            for (_, group) in by_height {
                let mut images = group.clone();
                images.shuffle(rng);
                for (a, b) in group.into_iter().zip(images) {
                    let t = random_portrait(shape, rng, &a, 0, 1);
                    triples.push((a, b, t));
                }
            }
            AlmostAutomorphism::from_triples(shape, triples).expect("height-preserving map is valid")
        }
        SubgroupClass::N => {
            let expansions = rng.random_range(0..=budget as usize + 1);
            let dom = random_antichain_with(shape, rng, budget + 1, expansions);
            let range = random_antichain_with(shape, rng, budget + 1, expansions);
            let mut images: Vec<Address> = range.leaves().iter().cloned().collect();
            images.shuffle(rng);
            let triples: Vec<_> = dom
                .leaves()
                .iter()
                .cloned()
                .zip(images)
                .map(|(a, b)| (a, b, Portrait::identity()))
                .collect();
            AlmostAutomorphism::from_triples(shape, triples).expect("random tree pair is valid")
        }
    }
}

/// Random permutations at vertices of relative depth in `lo..hi` below `at`.
fn random_portrait<R: Rng>(shape: TreeShape, rng: &mut R, at: &Address, lo: u32, hi: u32) -> Portrait {
    let mut out = Portrait::identity();
    let mut frontier = vec![Address::root()];
    for depth in 0..hi {
        let mut next = Vec::new();
        for v in &frontier {
            let abs = at.concat(v.labels());
            let ar = shape.arity(&abs) as usize;
            if depth >= lo {
                let mut imgs: Vec<u8> = (0..ar as u8).collect();
                imgs.shuffle(rng);
                out.set(v.clone(), Perm::from_images(imgs).unwrap());
            }
            next.extend((0..ar as u8).map(|i| v.child(i)));
        }
        frontier = next;
    }
    out
}

fn random_antichain<R: Rng>(shape: TreeShape, rng: &mut R, max_h: u32, max_exp: usize) -> CompleteAntichain {
    let expansions = rng.random_range(0..=max_exp);
    random_antichain_with(shape, rng, max_h, expansions)
}

/// Starts from the root children and performs `expansions` further random
/// leaf expansions among leaves of height below `max_h`.
fn random_antichain_with<R: Rng>(
    shape: TreeShape,
    rng: &mut R,
    max_h: u32,
    expansions: usize,
) -> CompleteAntichain {
    let mut leaves: BTreeSet<Address> = Address::root().children(shape).collect();
    for _ in 0..expansions {
        let open: Vec<Address> = leaves
            .iter()
            .filter(|a| (a.height() as u32) < max_h)
            .cloned()
            .collect();
        if open.is_empty() {
            break;
        }
        let pick = open[rng.random_range(0..open.len())].clone();
        leaves.remove(&pick);
        leaves.extend(pick.children(shape));
    }
    CompleteAntichain::from_trusted(shape, leaves)
}

impl fmt::Display for AlmostAutomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_pieces(&self.pieces, f)
    }
}

impl fmt::Display for TreePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_pieces(&self.pieces, f)
    }
}

fn fmt_pieces(pieces: &BTreeMap<Address, Piece>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let map: Vec<String> = pieces
        .iter()
        .map(|(a, p)| format!("{a}->{}", p.image))
        .collect();
    write!(f, "{{{}", map.join(", "))?;
    let tails: Vec<String> = pieces
        .iter()
        .filter(|(_, p)| !p.tail.is_identity())
        .map(|(a, p)| {
            let entries: Vec<String> = p
                .tail
                .entries()
                .map(|(v, perm)| format!("{v} : {}", perm.to_cycle_string(0)))
                .collect();
            format!("{a}:({})", entries.join(", "))
        })
        .collect();
    if !tails.is_empty() {
        write!(f, " | tails: {}", tails.join(", "))?;
    }
    f.write_str("}")
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.ws();
        if self.s[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(Error::parse(self.pos, format!("expected '{lit}'")))
        }
    }

    fn address(&mut self) -> Address {
        self.ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        Address::parse(&self.s[start..self.pos]).expect("digits only")
    }
}

/// Parses the element notation `{0->00, 10->01, 11->1 | tails: 10:( : (0 1))}`.
pub fn parse_tree_pair(shape: TreeShape, s: &str) -> Result<TreePair> {
    let mut c = Cursor { s, pos: 0 };
    c.expect("{")?;
    let mut triples: Vec<(Address, Address, Portrait)> = Vec::new();
    let mut seen = BTreeSet::new();
    c.ws();
    if c.eat("}") {
        return finish(shape, &c, vec![(Address::root(), Address::root(), Portrait::identity())]);
    }
    loop {
        let at = c.pos;
        let a = c.address();
        c.expect("->")?;
        let b = c.address();
        shape.validate(&a).map_err(|e| Error::parse(at, e.to_string()))?;
        shape.validate(&b).map_err(|e| Error::parse(at, e.to_string()))?;
        if !seen.insert(a.clone()) {
            return Err(Error::parse(at, format!("leaf \"{a}\" listed twice")));
        }
        triples.push((a, b, Portrait::identity()));
        if c.eat(",") {
            continue;
        }
        break;
    }
    if c.eat("|") {
        c.expect("tails")?;
        c.expect(":")?;
        loop {
            let at = c.pos;
            let leaf = c.address();
            let idx = triples
                .iter()
                .position(|t| t.0 == leaf)
                .ok_or_else(|| Error::parse(at, format!("tail for unknown leaf \"{leaf}\"")))?;
            c.expect(":")?;
            c.expect("(")?;
            let mut tail = Portrait::identity();
            loop {
                let vat = c.pos;
                let v = c.address();
                c.expect(":")?;
                c.ws();
                let start = c.pos;
                let mut depth = 0i32;
                while let Some(ch) = c.peek() {
                    match ch {
                        '(' => depth += 1,
                        ')' if depth == 0 => break,
                        ')' => depth -= 1,
                        ',' if depth == 0 => break,
                        _ => {}
                    }
                    c.pos += ch.len_utf8();
                }
                let abs = leaf.concat(v.labels());
                shape
                    .validate(&abs)
                    .map_err(|e| Error::parse(vat, e.to_string()))?;
                let cycles = parse_cycle_list(&s[start..c.pos], 0, start)?;
                let degree = shape.arity(&abs) as usize;
                let p = Perm::from_cycles(degree, &cycles)
                    .map_err(|e| Error::parse(start, e.to_string()))?;
                if tail.get(&v).is_some() {
                    return Err(Error::parse(vat, format!("vertex \"{v}\" listed twice")));
                }
                tail.set(v, p);
                if c.eat(",") {
                    continue;
                }
                c.expect(")")?;
                break;
            }
            triples[idx].2 = tail;
            if c.eat(",") {
                continue;
            }
            break;
        }
    }
    c.expect("}")?;
    finish(shape, &c, triples)
}

fn finish(shape: TreeShape, c: &Cursor<'_>, triples: Vec<(Address, Address, Portrait)>) -> Result<TreePair> {
    let mut c = Cursor { s: c.s, pos: c.pos };
    c.ws();
    if c.pos != c.s.len() {
        return Err(Error::parse(c.pos, "trailing input"));
    }
    TreePair::from_triples(shape, triples).map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(0, other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s22() -> TreeShape {
        TreeShape::new(2, 2).unwrap()
    }

    fn a(s: &str) -> Address {
        Address::parse(s).unwrap()
    }

    pub(crate) fn shift() -> AlmostAutomorphism {
        AlmostAutomorphism::parse(s22(), "{0->00, 10->01, 11->1}").unwrap()
    }

    #[test]
    fn shift_is_canonical() {
        let s = shift();
        assert_eq!(s.pieces().len(), 3);
        assert_eq!(s.to_string(), "{0->00, 10->01, 11->1}");
    }

    #[test]
    fn identity_collapses_to_root() {
        let g = AlmostAutomorphism::parse(s22(), "{00->00, 01->01, 1->1}").unwrap();
        assert!(g.is_identity());
        assert_eq!(g.to_string(), "{->}");
        assert!(AlmostAutomorphism::parse(s22(), "{->}").unwrap().is_identity());
    }

    #[test]
    fn compose_with_inverse() {
        let s = shift();
        assert!(s.compose(&s.inverse()).is_identity());
        assert!(s.inverse().compose(&s).is_identity());
    }

    #[test]
    fn shift_squared() {
        let s = shift();
        let s2 = s.compose(&s);
        let table: Vec<(String, String, i64)> = s2
            .pieces()
            .iter()
            .map(|(x, p)| (x.to_string(), p.image.to_string(), p.image.height() as i64 - x.height() as i64))
            .collect();
        assert_eq!(
            table,
            vec![
                ("0".into(), "000".into(), 2),
                ("10".into(), "001".into(), 1),
                ("110".into(), "01".into(), -1),
                ("111".into(), "1".into(), -2),
            ]
        );
    }

    #[test]
    fn evaluate_shift() {
        let s = shift();
        assert_eq!(s.evaluate_ball(&a("10")).unwrap(), (a("01"), 0));
        assert_eq!(s.evaluate_ball(&a("0")).unwrap(), (a("00"), 1));
        assert_eq!(s.evaluate_ball(&a("11")).unwrap(), (a("1"), -1));
        assert!(matches!(s.evaluate_ball(&a("1")), Err(Error::BallNotRigid(_))));
    }

    #[test]
    fn memberships() {
        let s = shift();
        assert!(!s.membership(SubgroupClass::O));
        assert!(!s.membership(SubgroupClass::K));
        assert!(!s.membership(SubgroupClass::On(1)));
        let swap = AlmostAutomorphism::from_portrait(s22(), Portrait::at(a("10"), Perm::transposition(2, 0, 1))).unwrap();
        assert!(swap.membership(SubgroupClass::O));
        assert!(swap.membership(SubgroupClass::K));
        assert!(swap.membership(SubgroupClass::Kn(1)));
        assert!(swap.membership(SubgroupClass::Kn(2)));
        assert!(!swap.membership(SubgroupClass::Kn(3)));
        let id = AlmostAutomorphism::identity(s22());
        for c in [
            SubgroupClass::N,
            SubgroupClass::O,
            SubgroupClass::K,
            SubgroupClass::Kn(4),
            SubgroupClass::On(0),
        ] {
            assert!(id.membership(c));
        }
    }

    #[test]
    fn tails_round_trip() {
        let text = "{0->00, 10->01, 11->1 | tails: 10:( : (0 1))}";
        let g = AlmostAutomorphism::parse(s22(), text).unwrap();
        assert_eq!(g.to_string(), text);
        let h = AlmostAutomorphism::parse(s22(), "{0->1, 1->0 | tails: 0:( : (0 1), 1 : (0 1))}").unwrap();
        assert!(h.membership(SubgroupClass::K));
        assert_eq!(AlmostAutomorphism::parse(s22(), &h.to_string()).unwrap(), h);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = AlmostAutomorphism::parse(s22(), "{0->00, 10=>01}").unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 10, .. }), "{e:?}");
        let e = AlmostAutomorphism::parse(s22(), "{0->00, 10->01, 11->1").unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 21, .. }), "{e:?}");
        assert!(AlmostAutomorphism::parse(s22(), "{0->00, 10->01}").is_err());
        assert!(AlmostAutomorphism::parse(s22(), "{0->0, 1->0}").is_err());
        assert!(AlmostAutomorphism::parse(s22(), "{0->00, 10->01, 11->1 | tails: 10:( : (0 2))}").is_err());
    }

    #[test]
    fn expanded_has_trivial_tails() {
        let g = AlmostAutomorphism::parse(s22(), "{0->00, 10->01, 11->1 | tails: 10:( : (0 1), 1 : (0 1))}").unwrap();
        let e = g.expanded();
        assert!(e.pieces().values().all(|p| p.tail.is_identity()));
        assert_eq!(e.canonicalize(), g);
    }

    #[test]
    fn random_elements_lie_in_class() {
        let shape = s22();
        for seed in 0..50 {
            for class in [
                SubgroupClass::N,
                SubgroupClass::O,
                SubgroupClass::K,
                SubgroupClass::Kn(2),
                SubgroupClass::On(2),
            ] {
                let g = AlmostAutomorphism::random(shape, seed, class, 2);
                assert!(g.membership(class), "{class} {g}");
            }
        }
    }
}
