use ncpg::gbm::*;
use ncpg::kernel::*;
use ncpg::model::FieldModel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gbm(n_t: usize) -> GbmProcess {
    build_gbm(GbmSpec::standard(0.5, n_t, 0)).unwrap()
}

fn f0() -> Vec<C64> {
    vec![c(0.8, 0.3), c(-0.2, 0.5)]
}

#[test]
fn rejects_bad_specs() {
    let ok = GbmSpec::standard(0.5, 2, 0);
    for bad in [
        GbmSpec { mu: 1.0, ..ok.clone() },
        GbmSpec { h_dim: 3, c: vec![1.0], ..ok.clone() },
        GbmSpec { c: vec![0.0], ..ok.clone() },
        GbmSpec { n_t: 0, ..ok.clone() },
        GbmSpec { horizon: -1.0, ..ok.clone() },
    ] {
        assert!(build_gbm(bad).is_err());
    }
    let g = gbm(4);
    assert!(g.field(0.3, &f0()).is_err());
    assert!(g.field_index(5, &f0()).is_err());
    assert!(g.increment_index(3, 1, &f0()).is_err());
    assert!(g.field_index(1, &[cr(1.0)]).is_err());
}

#[test]
fn starts_at_zero_and_is_centred() {
    let g = gbm(4);
    assert_eq!(op_norm(&g.field_index(0, &f0()).unwrap()), 0.0);
    for j in 0..=4 {
        assert!(g.model().state(&g.field_index(j, &f0()).unwrap()).norm() < 1e-15);
    }
}

#[test]
fn seventeen_fifteenths_at_unit_time() {
    let g = gbm(4);
    let f = f0();
    let x = g.field(1.0, &f).unwrap();
    let lhs = g.model().state(&matmul(&x.adjoint(), &x)).re;
    let cf = vnorm(&g.spec().c_apply(&f)).powi(2);
    assert!((lhs - 17.0 / 15.0 * cf).abs() <= 1e-10 * lhs);
}

#[test]
fn split_relation_and_beta_form() {
    let g = gbm(3);
    for tau in [-0.5, -0.25, 0.0, 0.25, 0.5] {
        assert!(g.split_relation_defect(&f0(), tau).unwrap() < 1e-10, "tau {tau}");
    }
    assert!(g.eigen_relation_defect(&f0(), 0.0).unwrap() < 1e-15);
    for j in 0..=3 {
        let a = g.field_index(j, &f0()).unwrap();
        let b = g.field_via_beta(j, &f0()).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12);
    }
}

#[test]
fn increments_are_additive_and_independent() {
    let g = gbm(4);
    let (f, h) = (f0(), vec![c(0.1, -0.6), c(0.7, 0.2)]);
    let sum = g.increment_index(0, 2, &f).unwrap() + g.increment_index(2, 4, &f).unwrap();
    assert!(max_abs_diff(&sum, &g.field_index(4, &f).unwrap()) < 1e-14);
    let a = g.increment_index(0, 2, &f).unwrap();
    let b = g.increment_index(2, 3, &h).unwrap();
    assert!(g.model().state(&matmul(&a.adjoint(), &b)).norm() < 1e-14);
    assert!(g.model().state(&matmul(&a, &b)).norm() < 1e-14);
}

#[test]
fn increment_norm_slope_is_one_half() {
    let g = gbm(4);
    let dyadic: Vec<(f64, f64)> = g
        .increment_norms(&f0(), 2.0)
        .unwrap()
        .into_iter()
        .filter(|(w, _)| [0.25, 0.5, 1.0].iter().any(|d| (w - d).abs() < 1e-12))
        .collect();
    assert_eq!(dyadic.len(), 4 + 3 + 1);
    assert!((log_log_slope(&dyadic) - 0.5).abs() <= 0.05);
    assert!((g.increment_slope(&f0(), 2.0).unwrap() - 0.5).abs() <= 0.05);
}

#[test]
fn split_constant_matches_cell_oracle() {
    let g = gbm(4);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = vec![c(h, 0.0), c(h, 0.0)];
    for tau in [0.0, 0.25, -0.25, 0.75, -0.75] {
        let k = g.isometry_constant(&v, tau).unwrap();
        assert!((k - c_tau_split_form(0.5, tau)).abs() <= 1e-9 * k, "tau {tau}");
    }
    assert!((c_tau_closed_form(0.5, -0.25) - c_tau_split_form(0.5, -0.25)).abs() < 1e-12);
}

#[test]
fn anticommuting_with_unit_time_constant() {
    let g = gbm(2);
    let (f, h) = (f0(), vec![c(0.1, -0.6), c(0.7, 0.2)]);
    assert!(g.anticommutator_defect(&f, &h).unwrap() < 1e-13);
    let rep = gbm_covariance_report(&g, &f, &h, &[0.0]).unwrap();
    assert!((rep.c_prime_00 - rep.c_prime_00_expected).abs() <= 1e-10 * rep.c_prime_00_expected);
    assert!((rep.c_prime_00_expected - 17.0 / 15.0).abs() < 1e-14);
    assert_eq!(rep.rows.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covariance_at_all_grid_pairs(seed in any::<u64>(), mu in 0.4f64..0.8, n_t in 1usize..5) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = build_gbm(GbmSpec::standard(mu, n_t, 0)).unwrap();
        let f = random_vec(&mut r, 2);
        let h = random_vec(&mut r, 2);
        let scale = vnorm(&f) * vnorm(&h);
        prop_assert!(g.covariance_defect(&f, &h).unwrap() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn split_relation_random_vectors(seed in any::<u64>(), tau in -0.75f64..0.75) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = gbm(2);
        let f = random_vec(&mut r, 2);
        let scale = op_norm(&g.field_index(2, &f).unwrap()) * 0.5f64.powf(-4.0 * tau.abs());
        prop_assert!(g.split_relation_defect(&f, tau).unwrap() <= 1e-12 * scale.max(1.0));
    }
}
