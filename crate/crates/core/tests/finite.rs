use std::collections::BTreeSet;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdgroups::burger_mozes::{bm_check, c3_times_s3, naive_bm_check, BmPortrait};
use tdgroups::group::{two_generated_subgroups, PermGroup};
use tdgroups::hecke::{commutant_dimension_bruteforce, convolve_functions, random_pair, DoubleCosetAlgebra};
use tdgroups::Perm;

fn naive_closure(d: usize, gens: &[Perm]) -> BTreeSet<Perm> {
    let mut set = BTreeSet::from([Perm::identity(d)]);
    loop {
        let next: BTreeSet<Perm> = set
            .iter()
            .flat_map(|a| gens.iter().map(move |g| g.compose(a)))
            .chain(set.iter().cloned())
            .collect();
        if next.len() == set.len() {
            return set;
        }
        set = next;
    }
}

fn random_perm(d: usize, rng: &mut ChaCha8Rng) -> Perm {
    let mut v: Vec<u8> = (0..d as u8).collect();
    for i in (1..d).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    Perm::from_images(v).unwrap()
}

#[test]
fn closure_orbits_stabilizers_match_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let d = rng.random_range(2..=6);
        let gens: Vec<Perm> = (0..rng.random_range(1..=2)).map(|_| random_perm(d, &mut rng)).collect();
        let g = PermGroup::closure(d, gens.clone()).unwrap();
        let naive = naive_closure(d, &gens);
        assert_eq!(g.elements().iter().cloned().collect::<BTreeSet<_>>(), naive);
        for x in 0..d as u8 {
            let orbit: BTreeSet<u8> = naive.iter().map(|p| p.apply(x)).collect();
            assert!(g.orbits().iter().any(|o| o.iter().copied().collect::<BTreeSet<_>>() == orbit));
            let stab: BTreeSet<Perm> = naive.iter().filter(|p| p.apply(x) == x).cloned().collect();
            let got: BTreeSet<Perm> = g.point_stabilizer(x).elements().iter().cloned().collect();
            assert_eq!(got, stab);
            assert_eq!(orbit.len() * stab.len(), naive.len());
        }
    }
}

#[test]
fn bm_check_matches_naive_on_s4_subgroups() {
    let s4 = PermGroup::symmetric(4).unwrap();
    let subs = two_generated_subgroups(&s4).unwrap();
    assert_eq!(subs.len(), 30);
    for f in &subs {
        let r = bm_check(f);
        assert_eq!(r, naive_bm_check(f), "{}", f.gens_string());
        assert_eq!(r.normalizer_quotient_order, r.via_image_of_1);
        if r.hypothesis_met {
            assert!(r.normalizer_quotient_order >= 3);
        }
    }
}

#[test]
fn bm_check_matches_naive_on_random_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let d = rng.random_range(3..=7);
        let gens: Vec<Perm> = (0..2).map(|_| random_perm(d, &mut rng)).collect();
        let f = PermGroup::closure(d, gens).unwrap();
        let r = bm_check(&f);
        assert_eq!(r, naive_bm_check(&f));
        if r.transitive {
            assert_eq!(r.normalizer_quotient_order, r.via_normalizer);
        }
    }
}

#[test]
fn product_action_instance() {
    let f = c3_times_s3();
    let r = bm_check(&f);
    assert_eq!(f.order(), 18);
    assert!(r.transitive && r.hypothesis_met && !r.discrete);
    assert_eq!(r.f1_order, 2);
    assert_eq!(r.fp, vec![0, 3, 6]);
    assert_eq!(r.normalizer_quotient_order, 3);
}

#[test]
fn local_action_cocycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut pairs = 0;
    while pairs < 200 {
        let d = rng.random_range(3..=5);
        let f = PermGroup::closure(d, vec![random_perm(d, &mut rng), random_perm(d, &mut rng)]).unwrap();
        if !f.is_transitive() {
            continue;
        }
        let depth = rng.random_range(1..=3);
        let g = BmPortrait::random(&f, depth, &mut rng).unwrap();
        let h = BmPortrait::random(&f, depth, &mut rng).unwrap();
        let gh = g.compose(&h).unwrap();
        assert!(gh.in_uf(&f));
        for v in g.vertices_below(depth) {
            let lhs = gh.local_action(&v).unwrap();
            let rhs = g.local_action(&h.apply(&v)).unwrap().compose(&h.local_action(&v).unwrap());
            assert_eq!(lhs, rhs);
        }
        pairs += 1;
    }
}

#[test]
fn hecke_random_pairs() {
    for seed in 0..20 {
        let (q, k) = random_pair(seed);
        assert!(q.order() <= 5000);
        let alg = DoubleCosetAlgebra::new(q.clone(), k.clone()).unwrap();
        assert!(alg.check_associative(), "seed {seed}");
        assert!(alg.check_mass());
        assert!(alg.check_unit());
        assert_eq!(alg.sizes().iter().sum::<usize>(), q.order());
        // structure constants against pointwise convolution over Q
        let n = q.order();
        let ind = |i: usize| -> Vec<i64> {
            let mut v = vec![0i64; n];
            for &x in &alg.cosets[i] {
                v[x] = 1;
            }
            v
        };
        let r = alg.dim().min(4);
        for i in 0..r {
            for j in 0..r {
                let conv = convolve_functions(&q, &ind(i), &ind(j));
                for x in 0..n {
                    let l = alg.coset_of(x);
                    assert_eq!(conv[x] as u64, alg.consts[i][j][l]);
                }
            }
        }
    }
}

#[test]
fn hecke_s3_example() {
    let q = PermGroup::symmetric(3).unwrap();
    let k = PermGroup::parse(3, "(1 2)").unwrap();
    let alg = DoubleCosetAlgebra::new(q.clone(), k.clone()).unwrap();
    assert_eq!(alg.sizes(), vec![2, 4]);
    assert_eq!(alg.consts[1][1], vec![4, 2]);
    let two = BigRational::from_integer(2.into());
    let prod = alg.mul(&alg.basis_vector(1), &alg.basis_vector(1));
    assert_eq!(prod, vec![&two * &two, two.clone()]);
    assert_eq!(alg.commutant_dimension(&k).unwrap(), 2);
}

#[test]
fn commutant_is_antitone_and_matches_bruteforce() {
    let mut checked = 0;
    for seed in 0..40 {
        let (q, k) = random_pair(seed);
        if q.order() > 120 {
            continue;
        }
        let alg = DoubleCosetAlgebra::new(q.clone(), k.clone()).unwrap();
        let norm = q.normalizer(&k);
        let chain = [PermGroup::trivial(q.degree()), k.clone(), norm];
        let dims: Vec<usize> = chain.iter().map(|h| alg.commutant_dimension(h).unwrap()).collect();
        assert_eq!(dims[0], alg.dim());
        assert!(dims.windows(2).all(|w| w[0] >= w[1]), "{dims:?}");
        for (h, &dim) in chain.iter().zip(&dims) {
            assert_eq!(dim, commutant_dimension_bruteforce(&q, &k, h), "seed {seed}");
            assert!(dim >= 1);
        }
        checked += 1;
    }
    assert!(checked >= 5);
}
