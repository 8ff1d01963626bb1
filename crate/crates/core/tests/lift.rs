mod common;

use common::{fp, make_sym_instance, random_symmetric};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symsub::catalog;
use symsub::restrict::{restriction_exists, verify_certificate};
use symsub::symlift::{
    block_lift, create_t, fully_symmetric, h_trivial_witness, make_sym, remove_powers, symmetrize_certificate,
    symrank_upper, verify_factorized, Factorization,
};
use symsub::{Certificate, ScalarDomain, SearchOptions, Tensor};

#[test]
fn lift_reproduces_target_with_unit_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dom in [fp(5), fp(7), ScalarDomain::complex()] {
        for k in [2, 3] {
            for _ in 0..17 {
                let (maps, f, g) = make_sym_instance(k, dom, &mut rng);
                let cert = make_sym(&maps, &f, &g).unwrap();
                assert!(cert.verified);
                let source = f.tensor_product(&fully_symmetric(k, dom)).unwrap();
                assert!(verify_certificate(&cert, &source).unwrap());
                let b = block_lift(&maps).unwrap();
                assert_eq!(b.rows(), maps[0].rows() * k);
                assert_eq!(b.cols(), maps[0].cols() * k);
            }
        }
    }
}

#[test]
fn lift_rejects_asymmetric_source() {
    let d = fp(5);
    let f = Tensor::from_ints(vec![2, 2], d, &[1, 1, 0, 1]).unwrap();
    let id = symsub::LinearMap::identity(2, d);
    assert!(matches!(make_sym(&[id.clone(), id], &f, &f), Err(symsub::Error::PremiseFails(_))));
}

#[test]
fn chain_for_w_square_verifies_both_ways() {
    let d = fp(5);
    let w = catalog::w_tensor(d);
    let mut rc = restriction_exists(&Tensor::unit(2, 3, d).unwrap(), &w.power(2).unwrap(), &SearchOptions::default())
        .unwrap()
        .unwrap();
    rc.source_power = 2;
    let sc = symmetrize_certificate(&w, &rc).unwrap();
    assert_eq!(sc.certificate.source_power, 5);
    assert!(verify_certificate(&sc.certificate, &w).unwrap());
    let json = sc.to_json();
    let back = Certificate::from_json(&json).unwrap();
    let fz = Factorization::from_json(&json["factorization"], d).unwrap();
    assert!(verify_factorized(&back, &fz, &w).unwrap());
    assert!(verify_certificate(&back, &w).unwrap());
}

#[test]
fn chain_for_h_uses_factorized_check() {
    let d = ScalarDomain::complex();
    let h = fully_symmetric(3, d);
    let a1 = symsub::LinearMap::from_ints(2, 3, d, &[1, 0, 0, 0, 1, 0]).unwrap();
    let a2 = symsub::LinearMap::from_ints(2, 3, d, &[0, 1, 0, 0, 0, 1]).unwrap();
    let a3 = symsub::LinearMap::from_ints(2, 3, d, &[0, 0, 1, 1, 0, 0]).unwrap();
    let rc = Certificate::restriction(Tensor::unit(2, 3, d).unwrap(), vec![a1, a2, a3]).verified_against(&h).unwrap();
    assert!(rc.verified);
    let sc = symmetrize_certificate(&h, &rc).unwrap();
    assert_eq!(sc.certificate.source_power, 7);
    assert_eq!(sc.verified_by, "factorized");
    let json = sc.to_json();
    let fz = Factorization::from_json(&json["factorization"], d).unwrap();
    assert!(verify_factorized(&Certificate::from_json(&json).unwrap(), &fz, &h).unwrap());
}

#[test]
fn chain_rejects_rank_one_input() {
    let d = fp(5);
    let v = Tensor::rank_one(&[d.one(), d.from_int(2)], 3, d).unwrap();
    let rc = Certificate::restriction(
        Tensor::unit(1, 3, d).unwrap(),
        vec![symsub::LinearMap::from_ints(1, 2, d, &[1, 0]).unwrap(); 3],
    );
    assert!(symmetrize_certificate(&v, &rc).is_err());
}

#[test]
fn upper_bound_for_powers_and_matrices() {
    let d = fp(7);
    let h = fully_symmetric(3, d);
    let up = symrank_upper(&h, &h_trivial_witness(3, d).unwrap()).unwrap();
    assert_eq!((up.from_witness, up.bound), (24, 4));
    let c = ScalarDomain::complex();
    let m = Tensor::from_ints(vec![3, 3], c, &[2, 1, 0, 1, 2, 0, 0, 0, 0]).unwrap();
    let a = symsub::LinearMap::from_ints(3, 2, c, &[1, 1, 1, -1, 0, 0]).unwrap();
    let s = symsub::LinearMap::from_ints(3, 2, c, &[3, 1, 3, -1, 0, 0]).unwrap();
    // m = a diag(3/2, 1/2) aᵀ, split as (a)(s/2)ᵀ
    let witness = Certificate::restriction(m.clone(), vec![a, s.scale(c.from_complex(0.5, 0.0).unwrap())]);
    assert!(verify_certificate(&witness, &Tensor::unit(2, 2, c).unwrap()).unwrap());
    assert_eq!(symrank_upper(&m, &witness).unwrap().bound, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn selection_certificates_are_sound(seed in any::<u64>(), complex in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = if complex { ScalarDomain::complex() } else { fp(7) };
        let f = random_symmetric(2, 3, dom, &mut rng);
        prop_assume!(f.max_flattening_rank() >= 2);
        match create_t(&f) {
            Ok(ct) => {
                prop_assert!(ct.sound);
                prop_assert_ne!(ct.materialized, Some(false));
                prop_assert!(ct.y[0] >= 1 && ct.y[0] < 3);
            }
            Err(symsub::Error::MissingKthRoot(_)) => prop_assert!(!complex),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn cleared_diagonal_stays_cleared(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = ScalarDomain::complex();
        let f = random_symmetric(3, 3, dom, &mut rng);
        let rp = remove_powers(&f).unwrap();
        prop_assert!(rp.a.is_invertible());
        for i in 0..2 {
            prop_assert!(rp.g.get(&[i, i, i]).complex().norm() < 1e-7);
        }
    }
}
