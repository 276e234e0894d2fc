use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdgroups::bruhat::{
    conjugation_average, convolve, fourier_coefficient, fourier_support, hilbert_inequality_check, random_measure,
    ratio_step, vanishing_check, BruhatMeasure,
};
use tdgroups::haar::{coset_equal, measure_level, partition_coset, Coset};
use tdgroups::orbit::{element_closure, level_permutation};
use tdgroups::{AlmostAutomorphism, Perm, TreeShape};

fn s22() -> TreeShape {
    TreeShape::new(2, 2).unwrap()
}

fn sample_cosets(f: &BruhatMeasure, n: u32) -> Vec<Coset> {
    let mut cs = fourier_support(f, n).unwrap();
    cs.truncate(4);
    cs.push(Coset::subgroup(f.shape(), n));
    cs
}

#[test]
fn partition_identity_on_random_measures() {
    for seed in 0..100 {
        let f = random_measure(s22(), seed, 3, 2, 2).unwrap();
        let n = (seed % 3) as u32;
        for c in sample_cosets(&f, n) {
            let whole = fourier_coefficient(&f, &c);
            let m = n + 1;
            let parts: BigRational = partition_coset(&c, m)
                .unwrap()
                .iter()
                .map(|p| fourier_coefficient(&f, p))
                .sum();
            assert_eq!(whole, parts, "seed {seed} coset {c}");
        }
    }
}

#[test]
fn vanishing_is_two_sided() {
    for seed in 0..100 {
        let f = random_measure(s22(), seed, 3, 2, 2).unwrap();
        for n in 0..=3 {
            vanishing_check(&f, n).unwrap();
        }
        // f - f vanishes everywhere
        let z = f.sub(&f).unwrap();
        assert!(vanishing_check(&z, 2).unwrap());
    }
}

#[test]
fn ratio_step_postcondition() {
    for seed in 0..100 {
        let f = random_measure(s22(), seed, 3, 2, 2).unwrap();
        let n = (seed % 3) as u32;
        for c in sample_cosets(&f, n) {
            let part = ratio_step(&f, &c, n + 1).unwrap();
            let before = fourier_coefficient(&f, &c).abs() / measure_level(s22(), n);
            let after = fourier_coefficient(&f, &part).abs() / measure_level(s22(), n + 1);
            assert!(after >= before);
            assert!(tdgroups::haar::coset_member(&part.rep, &c));
        }
    }
}

fn conjugator_group(rng: &mut ChaCha8Rng, n: u32) -> Vec<AlmostAutomorphism> {
    let shape = s22();
    let size = shape.level(n).len();
    loop {
        let gens: Vec<AlmostAutomorphism> = (0..rng.random_range(1..=2))
            .map(|_| {
                let mut images: Vec<u8> = (0..size as u8).collect();
                images.shuffle(rng);
                level_permutation(shape, n, &Perm::from_images(images).unwrap()).unwrap()
            })
            .collect();
        if let Ok(h) = element_closure(shape, &gens, 24) {
            return h;
        }
    }
}

#[test]
fn hilbert_inequality_on_averaged_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..100u64 {
        let n = 1 + (seed % 3) as u32;
        let f0 = random_measure(s22(), 1000 + seed, n, 1, 1).unwrap();
        let h = conjugator_group(&mut rng, n);
        assert!(h.len() <= 24);
        let f = conjugation_average(&f0, &h).unwrap();
        let rep = f0
            .atoms()
            .map(|(g, _)| g.clone())
            .next()
            .unwrap_or_else(|| AlmostAutomorphism::identity(s22()));
        let c = Coset::new(rep, n);
        let report = hilbert_inequality_check(&f, &h, &c).unwrap();
        assert!(report.holds, "seed {seed}: {} < {}", report.lhs, report.rhs);
        for (i, a) in report.orbit.iter().enumerate() {
            for b in &report.orbit[..i] {
                assert!(!coset_equal(a, b).unwrap());
            }
        }
        for x in &h {
            let cand = Coset::new(c.rep.conjugate_by(x), n);
            let hits = report.orbit.iter().filter(|o| coset_equal(o, &cand).unwrap()).count();
            assert_eq!(hits, 1);
        }
    }
}

#[test]
fn convolution_associative_and_involutive() {
    for seed in 0..20 {
        let f = random_measure(s22(), seed, 1, 1, 1).unwrap();
        let g = random_measure(s22(), seed + 100, 1, 1, 1).unwrap();
        let h = random_measure(s22(), seed + 200, 1, 1, 1).unwrap();
        let left = convolve(&convolve(&f, &g).unwrap(), &h).unwrap();
        let right = convolve(&f, &convolve(&g, &h).unwrap()).unwrap();
        assert!(left.sub(&right).unwrap().is_zero(), "seed {seed}");
        let star = convolve(&f, &g).unwrap().involution().unwrap();
        let other = convolve(&g.involution().unwrap(), &f.involution().unwrap()).unwrap();
        assert!(star.sub(&other).unwrap().is_zero());
        assert_eq!(f.involution().unwrap().involution().unwrap(), f);
    }
}

#[test]
fn averaging_projection_is_idempotent() {
    for n in 0..=3 {
        let p = BruhatMeasure::averaging_projection(s22(), n);
        assert_eq!(convolve(&p, &p).unwrap(), p);
        assert!(!fourier_coefficient(&p, &Coset::subgroup(s22(), n)).is_zero());
    }
}
