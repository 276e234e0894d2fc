//! Finitary portraits: a rooted automorphism given by a permutation of the
//! children at finitely many vertices. Vertices are relative to a local root
//! and the permutation at `v` decides where the children of `v` go.

use std::collections::BTreeMap;

use crate::perm::Perm;
use crate::tree::Address;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Portrait {
    perms: BTreeMap<Address, Perm>,
}

impl Portrait {
    pub fn identity() -> Self {
        Portrait::default()
    }

    /// Single permutation at `v`.
    pub fn at(v: Address, p: Perm) -> Self {
        let mut out = Portrait::identity();
        out.set(v, p);
        out
    }

    pub fn is_identity(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn get(&self, v: &Address) -> Option<&Perm> {
        self.perms.get(v)
    }

    pub fn set(&mut self, v: Address, p: Perm) {
        if p.is_identity() {
            self.perms.remove(&v);
        } else {
            self.perms.insert(v, p);
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Address, &Perm)> {
        self.perms.iter()
    }

    /// One more than the deepest vertex carrying a nontrivial permutation.
    pub fn depth(&self) -> usize {
        self.perms.keys().map(|a| a.height() + 1).max().unwrap_or(0)
    }

    /// Image of the relative path `x`.
    pub fn apply(&self, x: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(x.len());
        let mut cur = Address::root();
        for &c in x {
            let img = self.perms.get(&cur).map_or(c, |p| p.apply(c));
            out.push(img);
            cur = cur.child(c);
        }
        out
    }

    /// `self ∘ first`, acting by `first` and then `self`.
    pub fn compose(&self, first: &Portrait) -> Portrait {
        let mut out = Portrait::identity();
        for (v, q) in &first.perms {
            let w = Address::new(first.apply(v.labels()));
            let p = match self.perms.get(&w) {
                Some(p) => p.compose(q),
                None => q.clone(),
            };
            out.set(v.clone(), p);
        }
        let inv = first.inverse();
        for (w, p) in &self.perms {
            let v = Address::new(inv.apply(w.labels()));
            if !first.perms.contains_key(&v) {
                out.set(v, p.clone());
            }
        }
        out
    }

    pub fn inverse(&self) -> Portrait {
        let mut out = Portrait::identity();
        for (v, p) in &self.perms {
            let w = Address::new(self.apply(v.labels()));
            out.set(w, p.inverse());
        }
        out
    }

    /// The portrait induced on the subtree below the relative vertex `x`.
    pub fn restrict(&self, x: &[u8]) -> Portrait {
        let start = Address::new(x.to_vec());
        let mut out = Portrait::identity();
        for (v, p) in self.perms.range(start.clone()..) {
            if !start.is_prefix_of(v) {
                break;
            }
            out.perms
                .insert(Address::new(v.suffix_after(&start).to_vec()), p.clone());
        }
        out
    }

    /// Prepends `x` to every vertex.
    pub fn shifted(&self, x: &[u8]) -> Portrait {
        Portrait {
            perms: self
                .perms
                .iter()
                .map(|(v, p)| (Address::new(x.to_vec()).concat(v.labels()), p.clone()))
                .collect(),
        }
    }

    /// Inserts all entries of `other`, which must have disjoint support.
    pub(crate) fn absorb(&mut self, other: Portrait) {
        for (v, p) in other.perms {
            self.perms.insert(v, p);
        }
    }
}
