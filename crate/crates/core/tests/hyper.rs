use ncpg::hyper::*;
use ncpg::kernel::{cr, frobenius, identity, max_abs_diff, random_matrix};
use ncpg::lp::twisted_embed;
use ncpg::model::{QuasiFreeModel, WickBasis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const P: f64 = 4.0 / 3.0;

fn setup() -> (QuasiFreeModel, WickBasis) {
    let m = QuasiFreeModel::scalar(0.5, 2).unwrap();
    let wb = WickBasis::new(&m).unwrap();
    (m, wb)
}

fn prescribed(mu: f64, p: f64) -> f64 {
    -0.5 * (0.1 * mu.powf(8.0 / p - 4.0) * (p - 1.0)).ln()
}

#[test]
fn identity_is_fixed_with_unit_ratio() {
    let (m, wb) = setup();
    for t in [0.0, 0.2, 1.0] {
        let r = hyper_ratio(&m, &wb, &identity(4), t, P, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "t={t}: {r}");
    }
}

#[test]
fn wick_monomials_decay_by_degree_in_every_twist() {
    let (m, wb) = setup();
    let t = 0.45;
    for mask in 0..wb.len() {
        let n = WickBasis::legs_of(mask).len() as f64;
        for tau in [-0.5, 0.0, 0.3] {
            let x = wb.monomial(mask);
            let lhs = twisted_embed(&m, x, 2.0, tau).unwrap() * cr((-t * n).exp());
            let rhs = ou_twisted_map(&m, &wb, &twisted_embed(&m, x, P, tau).unwrap(), t, P, 2.0, tau).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * frobenius(&lhs).max(1.0), "mask {mask} tau {tau}");
        }
    }
}

#[test]
fn untwisted_map_matches_twist_zero_composition() {
    let (m, wb) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = random_matrix(&mut rng, 4);
        let a = m.sandwich(0.0, &x, 1.0 / P);
        let y = ou_lp_map(&m, &wb, &a, 0.3, P, 2.0).unwrap();
        let want = m.sandwich(0.0, &wb.ou_semigroup(&m, &x, 0.3).unwrap(), 0.5);
        assert!(max_abs_diff(&y, &want) < 1e-10);
    }
}

#[test]
fn norm_exceeds_one_at_zero_and_contracts_at_prescribed_time() {
    let (m, wb) = setup();
    let at0 = hyper_norm_estimate(&m, &wb, 0.0, P, 2.0, 60, 1).unwrap();
    assert!(at0.estimate > 1.0 + 1e-3);
    let t = prescribed(0.5, P);
    let e = hyper_norm_estimate(&m, &wb, t, P, 2.0, 120, 2).unwrap();
    assert!(e.estimate <= 1.0 + 1e-6, "estimate {}", e.estimate);
    let r = hyper_ratio(&m, &wb, &e.argmax, t, P, 2.0).unwrap();
    assert_eq!(r, e.estimate);
}

#[test]
fn estimate_is_seed_deterministic_and_validates() {
    let (m, wb) = setup();
    let a = hyper_norm_estimate(&m, &wb, 0.2, P, 2.0, 30, 9).unwrap();
    let b = hyper_norm_estimate(&m, &wb, 0.2, P, 2.0, 30, 9).unwrap();
    assert_eq!(a.estimate, b.estimate);
    assert!(hyper_norm_estimate(&m, &wb, 0.2, 1.0, 2.0, 30, 9).is_err());
    assert!(hyper_norm_estimate(&m, &wb, 0.2, P, 2.0, 0, 9).is_err());
}

#[test]
fn threshold_lies_below_prescribed_time() {
    let (m, wb) = setup();
    let ts = empirical_threshold(&m, &wb, P, 2.0, 40, 4, 5.0, 1e-6).unwrap().expect("threshold within [0, 5]");
    assert!(ts > 0.0 && ts <= prescribed(0.5, P));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_elements_contract_at_prescribed_time(seed in any::<u64>()) {
        let (m, wb) = setup();
        let x = random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), 4);
        let r = hyper_ratio(&m, &wb, &x, prescribed(0.5, P), P, 2.0).unwrap();
        prop_assert!(r <= 1.0 + 1e-9);
    }

    #[test]
    fn ratio_is_nonincreasing_in_time(seed in any::<u64>(), s in 0.0f64..1.0, dt in 0.0f64..1.0) {
        let (m, wb) = setup();
        let x = random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), 4);
        let a = hyper_ratio(&m, &wb, &x, s, 2.0, 2.0).unwrap();
        let b = hyper_ratio(&m, &wb, &x, s + dt, 2.0, 2.0).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
    }
}
