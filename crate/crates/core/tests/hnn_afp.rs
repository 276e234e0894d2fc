use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdgroups::afp::{afp_witness, case_samples, Amalgam, Side};
use tdgroups::hnn::{
    britton_reduce, first_escape, hnn_witness, in_km, in_km_by_reduction, parse_word, random_rewrite, random_word,
    BaumslagSolitar, FiniteBase, HnnBase, HnnCase, HnnWord,
};

fn fuzz_invariants<B: HnnBase>(base: &B, seed: u64)
where
    B::Elem: std::fmt::Debug,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let w = random_word(base, &mut rng, 4);
        let r0 = britton_reduce(base, &w);
        let mut letters = w.letters();
        for step in 1..=1000 {
            random_rewrite(base, &mut letters, &mut rng);
            if step % 25 == 0 {
                let r = britton_reduce(base, &HnnWord::from_letters(base, &letters));
                assert!(r.is_reduced(base));
                assert_eq!((r.sigma(), r.tau()), (r0.sigma(), r0.tau()), "{} after {step}", base.name());
            }
        }
    }
}

#[test]
fn rewrite_invariance_baumslag_solitar() {
    fuzz_invariants(&BaumslagSolitar::new(2, 3).unwrap(), 1);
}

#[test]
fn rewrite_invariance_cyclic_base() {
    fuzz_invariants(&FiniteBase::cyclic4(), 2);
}

#[test]
fn rewrite_invariance_s3_base() {
    fuzz_invariants(&FiniteBase::s3_transpositions(), 3);
}

#[test]
fn reduction_is_idempotent_and_inverts() {
    let b = BaumslagSolitar::new(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let w = random_word(&b, &mut rng, 5);
        let r = britton_reduce(&b, &w);
        assert_eq!(britton_reduce(&b, &r), r);
        let e = britton_reduce(&b, &w.concat(&b, &w.inverse(&b)));
        assert_eq!(e.tau(), 0);
        assert_eq!(e.format(&b), "e");
        let text = r.format(&b);
        assert_eq!(britton_reduce(&b, &parse_word(&b, &text).unwrap()), r);
    }
}

fn witness_sweep<B: HnnBase>(base: &B, seed: u64, words: usize)
where
    B::Elem: Clone + Eq + std::fmt::Debug,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = [false; 4];
    let mut tried = 0;
    while tried < words {
        let g = random_word(base, &mut rng, 3);
        let r = britton_reduce(base, &g);
        let m = 1;
        if r.tau() == 0 && in_km(base, &r.heads[0], m) {
            continue;
        }
        tried += 1;
        let w = hnn_witness(base, &g, m, None, None, 50).unwrap();
        assert!(w.matches_formula(), "{} {:?} vs {:?}", g.format(base), w.taus, w.expected);
        assert!(w.strictly_increasing());
        let slot = match w.case {
            HnnCase::Base { s } => {
                assert_eq!(Some(s), first_escape(base, &r.heads[0], m));
                assert_eq!(w.taus[1], 2 * (s.unsigned_abs() as usize + 1));
                0
            }
            HnnCase::OppositeEnds => 1,
            HnnCase::EqualEndsInside => 2,
            HnnCase::EqualEndsOutside => 3,
        };
        seen[slot] = true;
    }
    assert!(seen.iter().all(|&s| s), "cases seen: {seen:?}");
}

#[test]
fn witnesses_match_closed_form_bs() {
    witness_sweep(&BaumslagSolitar::new(2, 3).unwrap(), 5, 40);
}

#[test]
fn witnesses_match_closed_form_cyclic() {
    witness_sweep(&FiniteBase::cyclic4(), 6, 40);
}

#[test]
fn km_membership_matches_brute_force() {
    let b = FiniteBase::cyclic4();
    for m in 0..4 {
        for g in 0..4usize {
            assert_eq!(in_km(&b, &g, m), in_km_by_reduction(&b, &g, m));
        }
    }
    let bs = BaumslagSolitar::new(2, 3).unwrap();
    for m in 0..3 {
        for a in -40i64..=40 {
            let g = a.into();
            assert_eq!(in_km(&bs, &g, m), in_km_by_reduction(&bs, &g, m), "a^{a} m={m}");
        }
    }
}

#[test]
fn afp_round_trip_and_uniqueness() {
    for am in [Amalgam::s3_s3(), Amalgam::c6_c4()] {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let mut letters = am.random_letters(&mut rng, 8);
            let g = am.normal_form(&letters);
            assert_eq!(am.parse(&am.format(&g)).unwrap(), g);
            assert_eq!(am.normal_form(&am.letters(&g)), g);
            for w in g.syllables.windows(2) {
                assert_ne!(w[0].0, w[1].0);
            }
            for &(s, x) in &g.syllables {
                assert!(!am.in_k(s, x));
            }
            for _ in 0..30 {
                am.random_rewrite(&mut letters, &mut rng);
            }
            assert_eq!(am.normal_form(&letters), g);
            let h = am.normal_form(&am.random_letters(&mut rng, 5));
            let k = am.normal_form(&am.random_letters(&mut rng, 5));
            assert_eq!(am.mul(&am.mul(&g, &h), &k), am.mul(&g, &am.mul(&h, &k)));
            assert_eq!(am.mul(&g, &am.inverse(&g)), am.identity());
        }
    }
}

#[test]
fn afp_witness_lengths_increase() {
    for (am, strict) in [(Amalgam::s3_s3(), false), (Amalgam::c6_c4(), true)] {
        let samples = case_samples(&am, 21, 6);
        assert_eq!(samples.len(), 4);
        for (case, gs) in samples {
            for g in gs {
                let w = afp_witness(&am, &g, None, None, None, 10, strict).unwrap();
                assert_eq!(w.case, case);
                assert!(w.strictly_increasing(), "{}: {:?}", am.format(&g), w.lengths);
            }
        }
    }
    let am = Amalgam::c6_c4();
    assert!(!am.normalizing_outside(Side::B).is_empty());
}
