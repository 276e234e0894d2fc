//! Permutations of `{0, .., n-1}` stored as image vectors.
//!
//! Composition follows function notation: `p.compose(&q)` applies `q` first.
//! Cycle notation is parsed and printed with an explicit label offset so the
//! same type serves 0-based tree labels and 1-based permutation-group points.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(Vec<u8>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n as u8).collect())
    }

    pub fn from_images(images: Vec<u8>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            let x = x as usize;
            if x >= n || seen[x] {
                return Err(Error::InvalidElement(format!(
                    "{images:?} is not a permutation"
                )));
            }
            seen[x] = true;
        }
        Ok(Perm(images))
    }

    /// Builds a permutation of `n` points from disjoint or overlapping cycles;
    /// cycles are composed right to left.
    pub fn from_cycles(n: usize, cycles: &[Vec<u8>]) -> Result<Self> {
        let mut p = Perm::identity(n);
        for cycle in cycles.iter().rev() {
            let mut c = Perm::identity(n);
            for (i, &x) in cycle.iter().enumerate() {
                let y = cycle[(i + 1) % cycle.len()];
                if x as usize >= n || y as usize >= n {
                    return Err(Error::InvalidElement(format!(
                        "cycle entry out of range for degree {n}"
                    )));
                }
                c.0[x as usize] = y;
            }
            Perm::from_images(c.0.clone())?;
            p = c.compose(&p);
        }
        Ok(p)
    }

    pub fn transposition(n: usize, a: u8, b: u8) -> Self {
        let mut p = Perm::identity(n);
        p.0.swap(a as usize, b as usize);
        p
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    #[inline]
    pub fn apply(&self, x: u8) -> u8 {
        self.0[x as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    pub fn compose(&self, first: &Perm) -> Perm {
        debug_assert_eq!(self.degree(), first.degree());
        Perm(first.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u8; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u8;
        }
        Perm(inv)
    }

    /// Nontrivial cycles, each starting at its least point, sorted by that point.
    pub fn cycles(&self) -> Vec<Vec<u8>> {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start as u8];
            seen[start] = true;
            let mut x = self.0[start] as usize;
            while x != start {
                seen[x] = true;
                cycle.push(x as u8);
                x = self.0[x] as usize;
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }

    pub fn to_cycle_string(&self, offset: u32) -> String {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return "()".to_string();
        }
        cycles
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|&x| (x as u32 + offset).to_string()).collect();
                format!("({})", inner.join(" "))
            })
            .collect()
    }

    /// Parses `(1 2 3)(4 5)` or `()`; entries may also be comma separated.
    pub fn parse_cycles(s: &str, degree: usize, offset: u32) -> Result<Perm> {
        let cycles = parse_cycle_list(s, offset, 0)?;
        Perm::from_cycles(degree, &cycles)
    }

    /// All permutations of `n` points in lexicographic order of image vectors.
    pub fn all(n: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut cur: Vec<u8> = (0..n as u8).collect();
        loop {
            out.push(Perm(cur.clone()));
            // next permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cycle_string(0))
    }
}

/// Parses a run of parenthesised cycles. `base` is added to error positions.
pub(crate) fn parse_cycle_list(s: &str, offset: u32, base: usize) -> Result<Vec<Vec<u8>>> {
    let bytes = s.as_bytes();
    let mut i = 0;
    let mut cycles = Vec::new();
    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && (bytes[*i] as char).is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    if i == bytes.len() {
        return Err(Error::parse(base + i, "expected a cycle"));
    }
    while i < bytes.len() {
        if bytes[i] != b'(' {
            return Err(Error::parse(base + i, "expected '('"));
        }
        i += 1;
        let mut cycle = Vec::new();
        loop {
            skip_ws(&mut i);
            if i < bytes.len() && bytes[i] == b',' {
                i += 1;
                continue;
            }
            if i < bytes.len() && bytes[i] == b')' {
                i += 1;
                break;
            }
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if start == i {
                return Err(Error::parse(base + i, "expected a point label"));
            }
            let v: u32 = s[start..i]
                .parse()
                .map_err(|_| Error::parse(base + start, "label too large"))?;
            if v < offset || v - offset > u8::MAX as u32 {
                return Err(Error::parse(base + start, format!("label {v} out of range")));
            }
            cycle.push((v - offset) as u8);
        }
        let mut sorted = cycle.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != cycle.len() {
            return Err(Error::parse(base + i, "repeated point inside a cycle"));
        }
        if cycle.len() > 1 {
            cycles.push(cycle);
        }
        skip_ws(&mut i);
    }
    Ok(cycles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_applies_right_factor_first() {
        let a = Perm::from_cycles(3, &[vec![0, 1]]).unwrap();
        let b = Perm::from_cycles(3, &[vec![1, 2]]).unwrap();
        // a∘b sends 1 -> 2 -> 2, 2 -> 1 -> 0
        let ab = a.compose(&b);
        assert_eq!(ab.images(), &[1, 2, 0]);
        assert_eq!(ab.compose(&ab.inverse()), Perm::identity(3));
    }

    #[test]
    fn cycle_notation_round_trip() {
        let p = Perm::parse_cycles("(1 2 3)(4 5)", 6, 1).unwrap();
        assert_eq!(p.to_cycle_string(1), "(1 2 3)(4 5)");
        assert_eq!(Perm::parse_cycles("()", 4, 1).unwrap(), Perm::identity(4));
        assert!(Perm::parse_cycles("(1 7)", 6, 1).is_err());
        assert!(Perm::parse_cycles("(1 1)", 6, 1).is_err());
    }

    #[test]
    fn all_permutations_are_listed_once() {
        let all = Perm::all(4);
        assert_eq!(all.len(), 24);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}
