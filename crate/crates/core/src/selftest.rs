//! A quick, deterministic pass over the invariants of every module.
//!
//! Each check recomputes its quantity by a second route where one exists
//! (brute force, naive scans, direct evaluation) and reports a one-line
//! detail. Sizes are kept small so the whole run finishes in seconds.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::afp::{afp_witness, case_samples, Amalgam};
use crate::bruhat::{
    conjugation_average, fourier_coefficient, fourier_support, hilbert_inequality_check, random_measure, ratio_step,
    vanishing_check,
};
use crate::burger_mozes::{bm_check, c3_times_s3, naive_bm_check};
use crate::error::Result;
use crate::group::{two_generated_subgroups, PermGroup};
use crate::haar::{coset_equal, measure_level, partition_coset, Coset};
use crate::hecke::{random_pair, DoubleCosetAlgebra};
use crate::hnn::{
    britton_reduce, hnn_witness, in_km, random_rewrite, random_word, BaumslagSolitar, FiniteBase, HnnBase, HnnWord,
};
use crate::orbit::{
    default_generators, depth_one_generators, element_closure, growth_certificate, level_permutation,
    neretin_witness_bound, orbit_lower_bound_bfs, star_table,
};
use crate::tree::factorial;
use crate::{AlmostAutomorphism, Perm, TreeShape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        outcome("index_formulas", index_formulas()),
        outcome("witness_bounds", witness_bounds()),
        outcome("fourier_identities", fourier_identities()),
        outcome("hilbert_inequality", hilbert()),
        outcome("orbit_certificates", orbits()),
        outcome("hnn_normal_forms", hnn()),
        outcome("afp_normal_forms", afp()),
        outcome("burger_mozes", burger_mozes()),
        outcome("hecke_algebras", hecke()),
    ]
}

pub fn to_json(results: &[CheckResult]) -> Value {
    json!({
        "passed": results.iter().all(|r| r.passed),
        "checks": results.iter().map(|r| json!({
            "name": r.name,
            "passed": r.passed,
            "detail": r.detail,
        })).collect::<Vec<_>>(),
    })
}

/// Leaf bijections of the height-`n` ball that preserve the height of
/// every pairwise meet, counted by backtracking.
pub fn count_ball_automorphisms(shape: TreeShape, n: u32) -> u64 {
    let leaves = shape.level(n);
    let meet = |i: usize, j: usize| {
        let (a, b) = (leaves[i].labels(), leaves[j].labels());
        a.iter().zip(b).take_while(|(x, y)| x == y).count()
    };
    fn extend(i: usize, img: &mut Vec<usize>, used: &mut Vec<bool>, meet: &dyn Fn(usize, usize) -> usize) -> u64 {
        if i == used.len() {
            return 1;
        }
        let mut total = 0;
        for c in 0..used.len() {
            if used[c] || (0..i).any(|j| meet(i, j) != meet(c, img[j])) {
                continue;
            }
            used[c] = true;
            img.push(c);
            total += extend(i + 1, img, used, meet);
            img.pop();
            used[c] = false;
        }
        total
    }
    extend(0, &mut Vec::new(), &mut vec![false; leaves.len()], &meet)
}

fn index_formulas() -> Result<(bool, String)> {
    let cases = [(2, 2, 3), (2, 3, 3), (3, 2, 2)];
    let mut ok = true;
    for (d, k, top) in cases {
        let shape = TreeShape::new(d, k)?;
        for n in 1..=top {
            ok &= BigUint::from(count_ball_automorphisms(shape, n)) == shape.ball_automorphism_count(n);
        }
    }
    Ok((ok, "ball automorphism counts match backtracking for 8 (d,k,n)".into()))
}

fn shift() -> AlmostAutomorphism {
    AlmostAutomorphism::parse(TreeShape::new(2, 2).unwrap(), "{0->00, 10->01, 11->1}").unwrap()
}

fn witness_bounds() -> Result<(bool, String)> {
    let shape = TreeShape::new(2, 2)?;
    let s = shift();
    let mut ok = true;
    for (n, lb) in [(3u32, 1u32), (4, 3), (5, 315)] {
        let m = n - 2;
        let direct = factorial(1u64 << m) / shape.ball_automorphism_count(m);
        ok &= direct == BigUint::from(lb) && neretin_witness_bound(shape, &s, n)? == direct;
    }
    for row in star_table(shape, &s, 2, 8)? {
        let count = num_bigint::BigInt::from(shape.ball_automorphism_count(row.n));
        ok &= row.product == BigRational::new(row.lower_bound.clone().into(), &count * &count);
    }
    let cert = growth_certificate(shape, &s, 12)?;
    ok &= cert.n1 <= 32;
    Ok((ok, format!("LB(3..5) = 1, 3, 315; n1 = {}", cert.n1)))
}

fn fourier_identities() -> Result<(bool, String)> {
    let shape = TreeShape::new(2, 2)?;
    let mut ok = true;
    for seed in 0..10 {
        let f = random_measure(shape, seed, 3, 2, 2)?;
        let n = (seed % 3) as u32;
        vanishing_check(&f, n)?;
        for c in fourier_support(&f, n)?.into_iter().take(3) {
            let parts: BigRational = partition_coset(&c, n + 1)?.iter().map(|p| fourier_coefficient(&f, p)).sum();
            ok &= parts == fourier_coefficient(&f, &c);
            let part = ratio_step(&f, &c, n + 1)?;
            ok &= fourier_coefficient(&f, &part).abs() / measure_level(shape, n + 1)
                >= fourier_coefficient(&f, &c).abs() / measure_level(shape, n);
        }
    }
    Ok((ok, "partition, vanishing and ratio-step on 10 seeded measures".into()))
}

fn hilbert() -> Result<(bool, String)> {
    let shape = TreeShape::new(2, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    for seed in 0..6u64 {
        let n = 1 + (seed % 3) as u32;
        let size = shape.level(n).len();
        let h = loop {
            let mut images: Vec<u8> = (0..size as u8).collect();
            images.shuffle(&mut rng);
            let g = level_permutation(shape, n, &Perm::from_images(images)?)?;
            if let Ok(h) = element_closure(shape, &[g], 24) {
                break h;
            }
        };
        let f0 = random_measure(shape, 1000 + seed, n, 1, 1)?;
        let f = conjugation_average(&f0, &h)?;
        let rep = f0.atoms().map(|(g, _)| g.clone()).next().unwrap_or_else(|| AlmostAutomorphism::identity(shape));
        let report = hilbert_inequality_check(&f, &h, &Coset::new(rep, n))?;
        ok &= report.holds;
        for (i, a) in report.orbit.iter().enumerate() {
            for b in &report.orbit[..i] {
                ok &= !coset_equal(a, b)?;
            }
        }
    }
    Ok((ok, "6 conjugation-averaged measures, distinct cosets re-verified".into()))
}

fn orbits() -> Result<(bool, String)> {
    let shape = TreeShape::new(2, 2)?;
    let s = shift();
    let deep = orbit_lower_bound_bfs(&Coset::new(s.clone(), 3), &default_generators(shape, 3)?, 16)?;
    let shallow = orbit_lower_bound_bfs(&Coset::new(s.clone(), 1), &depth_one_generators(&s)?, 16)?;
    let ok = deep.count >= 2 && deep.verify()? && shallow.count == 1 && shallow.verify()?;
    Ok((ok, format!("level 3: {} cosets; level 1: {}", deep.count, shallow.count)))
}

fn fuzz<B: HnnBase>(base: &B, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3).all(|_| {
        let w = random_word(base, &mut rng, 3);
        let r0 = britton_reduce(base, &w);
        let mut letters = w.letters();
        for _ in 0..200 {
            random_rewrite(base, &mut letters, &mut rng);
        }
        let r = britton_reduce(base, &HnnWord::from_letters(base, &letters));
        (r.sigma(), r.tau()) == (r0.sigma(), r0.tau())
    })
}

fn witness_formula<B: HnnBase>(base: &B, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut ok = true;
    while done < 5 {
        let g = random_word(base, &mut rng, 3);
        let r = britton_reduce(base, &g);
        if r.tau() == 0 && in_km(base, &r.heads[0], 1) {
            continue;
        }
        let w = hnn_witness(base, &g, 1, None, None, 20)?;
        ok &= w.matches_formula() && w.strictly_increasing();
        done += 1;
    }
    Ok(ok)
}

fn hnn() -> Result<(bool, String)> {
    let bs = BaumslagSolitar::new(2, 3)?;
    let c4 = FiniteBase::cyclic4();
    let s3 = FiniteBase::s3_transpositions();
    let ok = fuzz(&bs, 1)
        && fuzz(&c4, 2)
        && fuzz(&s3, 3)
        && witness_formula(&bs, 4)?
        && witness_formula(&c4, 5)?
        && hnn_witness(&s3, &HnnWord::base_element(&s3, 1), 1, None, None, 3).is_err();
    Ok((ok, "rewrite invariance on BS(2,3), C4, S3; witness closed form on BS(2,3), C4".into()))
}

fn afp() -> Result<(bool, String)> {
    let mut ok = true;
    for (am, strict) in [(Amalgam::s3_s3(), false), (Amalgam::c6_c4(), true)] {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let mut letters = am.random_letters(&mut rng, 6);
            let g = am.normal_form(&letters);
            ok &= am.parse(&am.format(&g))? == g;
            for _ in 0..10 {
                am.random_rewrite(&mut letters, &mut rng);
            }
            ok &= am.normal_form(&letters) == g;
        }
        let samples = case_samples(&am, 5, 3);
        ok &= samples.len() == 4;
        for g in samples.values().flatten() {
            ok &= afp_witness(&am, g, None, None, None, 10, strict)?.strictly_increasing();
        }
    }
    Ok((ok, "round trips and witness lengths on S3*C2S3 and C6*C2C4".into()))
}

fn burger_mozes() -> Result<(bool, String)> {
    let subs = two_generated_subgroups(&PermGroup::symmetric(4)?)?;
    let mut ok = subs.len() == 30 && subs.iter().all(|f| bm_check(f) == naive_bm_check(f));
    let r = bm_check(&c3_times_s3());
    ok &= r.hypothesis_met && r.fp.len() == 3 && r.normalizer_quotient_order == 3;
    Ok((ok, format!("{} subgroups of S4 match; C3xS3 quotient {}", subs.len(), r.normalizer_quotient_order)))
}

fn hecke() -> Result<(bool, String)> {
    let alg = DoubleCosetAlgebra::new(PermGroup::symmetric(3)?, PermGroup::parse(3, "(1 2)")?)?;
    let mut ok = alg.sizes() == [2, 4] && alg.consts[1][1] == [4, 2];
    for seed in 0..5 {
        let (q, k) = random_pair(seed);
        let a = DoubleCosetAlgebra::new(q, k)?;
        ok &= a.check_associative() && a.check_mass() && a.check_unit();
    }
    Ok((ok, "S3/<(1 2)> constants and 5 random pairs".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backtracking_counts() {
        let s = TreeShape::new(2, 2).unwrap();
        assert_eq!(count_ball_automorphisms(s, 1), 2);
        assert_eq!(count_ball_automorphisms(s, 2), 8);
        assert_eq!(count_ball_automorphisms(TreeShape::new(3, 2).unwrap(), 2), 72);
    }

    #[test]
    fn all_checks_pass() {
        for r in run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
