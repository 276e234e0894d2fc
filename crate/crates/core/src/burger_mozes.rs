//! Burger–Mozes hypothesis checks for `F ≤ S_d`, and finite-depth elements
//! of `U(F)` on the `d`-regular tree with their local actions.
//!
//! The tree is cut at a distinguished edge `e` into two rooted halves, with
//! roots `v_1` (side 0) and `v_2` (side 1); every vertex has `d - 1`
//! children inside its half. Coloring: `col(e) = d`, and the children of a
//! vertex whose parent edge has color `c` receive the colors `≠ c` in
//! increasing order. Colors are 0-based internally and 1-based in text.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group::PermGroup;
use crate::perm::Perm;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmReport {
    pub degree: usize,
    pub order: usize,
    pub transitive: bool,
    pub f1_order: usize,
    /// Fixed points of `F_1 = Fix_F({1})`, 0-based.
    pub fp: Vec<u8>,
    pub fp_at_least_3: bool,
    /// `F` acts freely, which makes `U(F)` discrete.
    pub discrete: bool,
    /// `|Stab_F(fp)| / |F_1|`.
    pub normalizer_quotient_order: usize,
    /// `#{σ ∈ F : σ(1) ∈ fp} / |F_1|` and `|N_F(F_1)| / |F_1|`; both agree
    /// with the main value when `F` is transitive.
    pub via_image_of_1: usize,
    pub via_normalizer: usize,
    pub hypothesis_met: bool,
}

impl BmReport {
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "order": self.order,
            "transitive": self.transitive,
            "f1_order": self.f1_order,
            "fp": self.fp.iter().map(|&x| x as u32 + 1).collect::<Vec<_>>(),
            "fp_size": self.fp.len(),
            "fp_at_least_3": self.fp_at_least_3,
            "discrete": self.discrete,
            "normalizer_quotient_order": self.normalizer_quotient_order,
            "routes": {"image_of_1": self.via_image_of_1, "normalizer": self.via_normalizer},
            "hypothesis_met": self.hypothesis_met,
        })
    }
}

pub fn bm_check(f: &PermGroup) -> BmReport {
    let d = f.degree();
    let f1 = f.point_stabilizer(0);
    let fp = f1.fixed_points();
    let stab = f.set_stabilizer(&fp);
    let image_count = f.elements().iter().filter(|p| fp.contains(&p.apply(0))).count();
    let norm = f.normalizer(&f1);
    let transitive = f.is_transitive();
    let discrete = (0..d as u8).all(|x| f.point_stabilizer(x).order() == 1);
    BmReport {
        degree: d,
        order: f.order(),
        transitive,
        f1_order: f1.order(),
        fp_at_least_3: fp.len() >= 3,
        discrete,
        normalizer_quotient_order: stab.order() / f1.order(),
        via_image_of_1: image_count / f1.order(),
        via_normalizer: norm.order() / f1.order(),
        hypothesis_met: transitive && fp.len() >= 3,
        fp,
    }
}

/// `(side, path)`: `side` picks the half, `path` lists child indices `0..d-1`.
pub type BmVertex = (u8, Vec<u8>);

/// An automorphism of the ball of radius `depth` around `e` that preserves
/// `e`, given by whether it swaps the halves and its local action at every
/// vertex of depth `< depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmPortrait {
    d: usize,
    depth: usize,
    flip: bool,
    local: BTreeMap<BmVertex, Perm>,
}

fn parent_color(d: usize, v: &BmVertex) -> u8 {
    let mut c = d as u8 - 1;
    for &i in &v.1 {
        c = child_color_after(c, i);
    }
    c
}

/// Color of child `i` of a vertex whose parent edge has color `pc`.
fn child_color_after(pc: u8, i: u8) -> u8 {
    if i < pc {
        i
    } else {
        i + 1
    }
}

fn child_index_after(pc: u8, c: u8) -> u8 {
    if c < pc {
        c
    } else {
        c - 1
    }
}

impl BmPortrait {
    pub fn identity(d: usize, depth: usize) -> Self {
        Self::from_locals(d, depth, false, BTreeMap::new()).unwrap()
    }

    /// Fills unspecified vertices with the order-preserving completion of the
    /// forced parent-color assignment. Given local actions must respect it.
    pub fn from_locals(d: usize, depth: usize, flip: bool, given: BTreeMap<BmVertex, Perm>) -> Result<Self> {
        if !(2..=crate::group::MAX_DEGREE).contains(&d) {
            return Err(Error::InvalidGroup(format!("degree {d} out of range")));
        }
        let mut g = BmPortrait {
            d,
            depth,
            flip,
            local: BTreeMap::new(),
        };
        for (v, p) in &given {
            if v.1.len() >= depth || v.1.iter().any(|&i| i as usize >= d - 1) || v.0 > 1 || p.degree() != d {
                return Err(Error::InvalidElement(format!("local action at {v:?} is outside the ball")));
            }
        }
        for v in g.vertices_below(depth) {
            let pc = parent_color(d, &v);
            let target = parent_color(d, &g.apply(&v));
            let p = match given.get(&v) {
                Some(p) => {
                    if p.apply(pc) != target {
                        return Err(Error::InvalidElement(format!(
                            "local action at {v:?} must send color {} to {}",
                            pc + 1,
                            target + 1
                        )));
                    }
                    p.clone()
                }
                None => {
                    let mut images = vec![0u8; d];
                    images[pc as usize] = target;
                    let rest_src = (0..d as u8).filter(|&c| c != pc);
                    let rest_dst: Vec<u8> = (0..d as u8).filter(|&c| c != target).collect();
                    for (c, t) in rest_src.zip(rest_dst) {
                        images[c as usize] = t;
                    }
                    Perm::from_images(images)?
                }
            };
            g.local.insert(v, p);
        }
        Ok(g)
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn flips(&self) -> bool {
        self.flip
    }

    /// Vertices of depth `< limit`, halves in order, breadth first.
    pub fn vertices_below(&self, limit: usize) -> Vec<BmVertex> {
        let mut out = Vec::new();
        for side in 0..2u8 {
            let mut layer = vec![Vec::new()];
            for _ in 0..limit {
                out.extend(layer.iter().map(|p: &Vec<u8>| (side, p.clone())));
                layer = layer
                    .iter()
                    .flat_map(|p| {
                        (0..self.d as u8 - 1).map(move |i| {
                            let mut q = p.clone();
                            q.push(i);
                            q
                        })
                    })
                    .collect();
            }
        }
        out
    }

    pub fn vertices(&self) -> Vec<BmVertex> {
        self.vertices_below(self.depth + 1)
    }

    /// Image of a vertex of depth `<= depth`. Children are mapped by the local
    /// action already fixed at their parent, so this only reads entries of
    /// depth `< |path|`.
    pub fn apply(&self, v: &BmVertex) -> BmVertex {
        let side = if self.flip { 1 - v.0 } else { v.0 };
        let mut img: BmVertex = (side, Vec::with_capacity(v.1.len()));
        let mut src: BmVertex = (v.0, Vec::with_capacity(v.1.len()));
        let mut src_pc = self.d as u8 - 1;
        let mut img_pc = self.d as u8 - 1;
        for &i in &v.1 {
            let c = child_color_after(src_pc, i);
            let c2 = self.local[&src].apply(c);
            let j = child_index_after(img_pc, c2);
            src.1.push(i);
            img.1.push(j);
            src_pc = c;
            img_pc = c2;
        }
        img
    }

    fn neighbor(&self, v: &BmVertex, color: u8) -> BmVertex {
        let pc = parent_color(self.d, v);
        if color == pc {
            if v.1.is_empty() {
                (1 - v.0, Vec::new())
            } else {
                (v.0, v.1[..v.1.len() - 1].to_vec())
            }
        } else {
            let mut p = v.1.clone();
            p.push(child_index_after(pc, color));
            (v.0, p)
        }
    }

    fn color_towards(&self, v: &BmVertex, w: &BmVertex) -> Option<u8> {
        (0..self.d as u8).find(|&c| self.neighbor(v, c) == *w)
    }

    /// `σ(g, v) = col ∘ g ∘ (col|E_v)^-1`, read off the vertex map.
    pub fn local_action(&self, v: &BmVertex) -> Result<Perm> {
        if v.1.len() >= self.depth {
            return Err(Error::InvalidElement(format!("{v:?} is at the boundary of the ball")));
        }
        let gv = self.apply(v);
        let images: Option<Vec<u8>> = (0..self.d as u8)
            .map(|c| self.color_towards(&gv, &self.apply(&self.neighbor(v, c))))
            .collect();
        let images = images.ok_or_else(|| Error::Consistency("vertex map does not preserve adjacency".into()))?;
        Perm::from_images(images)
    }

    /// Stored local action, as used to build the vertex map.
    pub fn stored_local(&self, v: &BmVertex) -> Option<&Perm> {
        self.local.get(v)
    }

    /// `g ∘ h`, acting by `h` first; local actions are re-derived from the
    /// composite vertex map.
    pub fn compose(&self, h: &BmPortrait) -> Result<BmPortrait> {
        if self.d != h.d || self.depth != h.depth {
            return Err(Error::InvalidElement("portraits on different balls".into()));
        }
        let mut out = BmPortrait {
            d: self.d,
            depth: self.depth,
            flip: self.flip != h.flip,
            local: BTreeMap::new(),
        };
        for v in self.vertices_below(self.depth) {
            let gv = self.apply(&h.apply(&v));
            let images: Option<Vec<u8>> = (0..self.d as u8)
                .map(|c| self.color_towards(&gv, &self.apply(&h.apply(&self.neighbor(&v, c)))))
                .collect();
            let images = images.ok_or_else(|| Error::Consistency("composite does not preserve adjacency".into()))?;
            out.local.insert(v, Perm::from_images(images)?);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<BmPortrait> {
        let mut out = BmPortrait {
            d: self.d,
            depth: self.depth,
            flip: self.flip,
            local: BTreeMap::new(),
        };
        for v in self.vertices_below(self.depth) {
            out.local.insert(self.apply(&v), self.local[&v].inverse());
        }
        Ok(out)
    }

    pub fn in_uf(&self, f: &PermGroup) -> bool {
        self.local.values().all(|p| f.contains(p))
    }

    pub fn random<R: Rng>(f: &PermGroup, depth: usize, rng: &mut R) -> Result<BmPortrait> {
        let d = f.degree();
        let flip = rng.random_bool(0.5);
        let mut g = BmPortrait {
            d,
            depth,
            flip,
            local: BTreeMap::new(),
        };
        for v in g.vertices_below(depth) {
            let pc = parent_color(d, &v);
            let target = parent_color(d, &g.apply(&v));
            let choices: Vec<&Perm> = f.elements().iter().filter(|p| p.apply(pc) == target).collect();
            if choices.is_empty() {
                return Err(Error::InvalidGroup(format!("no element of F sends color {} to {}", pc + 1, target + 1)));
            }
            g.local.insert(v, choices[rng.random_range(0..choices.len())].clone());
        }
        Ok(g)
    }
}

/// Fixed points of `sub` computed from its element list only.
pub fn naive_fixed_points(sub: &[Perm], d: usize) -> Vec<u8> {
    (0..d as u8).filter(|&x| sub.iter().all(|p| p.apply(x) == x)).collect()
}

/// Recomputes the report by scanning element lists directly.
pub fn naive_bm_check(f: &PermGroup) -> BmReport {
    let d = f.degree();
    let els = f.elements();
    let f1: Vec<Perm> = els.iter().filter(|p| p.apply(0) == 0).cloned().collect();
    let fp = naive_fixed_points(&f1, d);
    let fp_set: BTreeSet<u8> = fp.iter().copied().collect();
    let stab = els
        .iter()
        .filter(|p| fp.iter().all(|&x| fp_set.contains(&p.apply(x))))
        .count();
    let orbit0: BTreeSet<u8> = els.iter().map(|p| p.apply(0)).collect();
    let transitive = orbit0.len() == d;
    let discrete = (0..d as u8).all(|x| els.iter().filter(|p| p.apply(x) == x).count() == 1);
    let f1_set: BTreeSet<&Perm> = f1.iter().collect();
    let norm = els
        .iter()
        .filter(|p| {
            let pi = p.inverse();
            f1.iter().all(|k| f1_set.contains(&p.compose(k).compose(&pi)))
        })
        .count();
    let image_count = els.iter().filter(|p| fp_set.contains(&p.apply(0))).count();
    BmReport {
        degree: d,
        order: els.len(),
        transitive,
        f1_order: f1.len(),
        fp_at_least_3: fp.len() >= 3,
        discrete,
        normalizer_quotient_order: stab / f1.len(),
        via_image_of_1: image_count / f1.len(),
        via_normalizer: norm / f1.len(),
        hypothesis_met: transitive && fp.len() >= 3,
        fp,
    }
}

/// `C3 × S3` acting on `{1..9}` via `(i, j) ↦ 3(i-1) + j`.
pub fn c3_times_s3() -> PermGroup {
    PermGroup::parse(9, "(1 4 7)(2 5 8)(3 6 9),(1 2 3)(4 5 6)(7 8 9),(1 2)(4 5)(7 8)").unwrap()
}
