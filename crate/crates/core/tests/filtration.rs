use ncpg::filtration::{pairing, Filtration};
use ncpg::kernel::*;
use ncpg::lp::{half_inv, twisted_embed};
use ncpg::model::{Conjugation, FieldModel, QuasiFreeModel, WickBasis};
use ncpg::process::AdaptedSimpleProcess;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model() -> QuasiFreeModel {
    QuasiFreeModel::build(&[0.4, 0.4, 0.7], Conjugation::new(vec![1, 0, 2]).unwrap()).unwrap()
}

fn level_element(m: &QuasiFreeModel, filt: &Filtration, rng: &mut ChaCha8Rng, level: usize) -> Mat {
    let x = random_matrix(rng, m.dim());
    filt.cond_exp(&x, level).unwrap()
}

#[test]
fn partial_trace_matches_wick_truncation() {
    let m = model();
    let wb = WickBasis::new(&m).unwrap();
    let filt = Filtration::by_modes(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for level in 0..filt.n_levels() {
        for _ in 0..10 {
            let x = random_matrix(&mut rng, m.dim());
            let a = filt.cond_exp(&x, level).unwrap();
            let b = filt.cond_exp_wick(&wb, &x, level).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-10, "level {level}");
        }
    }
}

#[test]
fn conditional_expectation_axioms() {
    let m = model();
    let filt = Filtration::by_modes(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = m.dim();
    for level in 0..filt.n_levels() {
        let one = identity(n);
        assert!(max_abs_diff(&filt.cond_exp(&one, level).unwrap(), &one) < 1e-12);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, n);
            let e = filt.cond_exp(&x, level).unwrap();
            assert!(max_abs_diff(&filt.cond_exp(&e, level).unwrap(), &e) < 1e-12);
            assert!((m.state(&e) - m.state(&x)).norm() < 1e-12);
            let flow = filt.cond_exp(&m.modular_flow(&x, 0.7), level).unwrap();
            assert!(max_abs_diff(&flow, &m.modular_flow(&e, 0.7)) < 1e-12);
            let a = level_element(&m, &filt, &mut rng, level);
            let b = level_element(&m, &filt, &mut rng, level);
            let lhs = filt.cond_exp(&product(&[&a, &x, &b]), level).unwrap();
            assert!(max_abs_diff(&lhs, &product(&[&a, &e, &b])) < 1e-10);
            let schwarz = filt.cond_exp(&abs_sq(&x), level).unwrap() - abs_sq(&e);
            let schwarz = hermitize(&((&schwarz + schwarz.adjoint()) * cr(0.5))).unwrap();
            assert!(min_eigenvalue(&schwarz).unwrap() > -1e-12);
            if level > 0 {
                let tower = filt.cond_exp(&filt.cond_exp(&x, level).unwrap(), level - 1).unwrap();
                assert!(max_abs_diff(&tower, &filt.cond_exp(&x, level - 1).unwrap()) < 1e-12);
            }
        }
    }
}

#[test]
fn lp_extension_is_twist_independent_and_dual() {
    let m = model();
    let filt = Filtration::by_modes(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (p, q) = (3.0, 1.5);
    for level in 0..filt.n_levels() {
        let x = random_matrix(&mut rng, m.dim());
        let y = random_matrix(&mut rng, m.dim());
        let ex = filt.cond_exp(&x, level).unwrap();
        for tau in [-0.5, 0.0, 0.3] {
            let a = twisted_embed(&m, &x, p, tau).unwrap();
            let got = filt.cond_exp_lp(&a, level, p, tau).unwrap();
            assert!(max_abs_diff(&got, &twisted_embed(&m, &ex, p, tau).unwrap()) < 1e-10);
        }
        let a = twisted_embed(&m, &x, p, -half_inv(p)).unwrap();
        let b = twisted_embed(&m, &y, q, -half_inv(q)).unwrap();
        let lhs = pairing(&b, &filt.cond_exp_lp(&a, level, p, -half_inv(p)).unwrap());
        let rhs = pairing(&filt.cond_exp_lp(&b, level, q, -half_inv(q)).unwrap(), &a);
        assert!((lhs - rhs).norm() < 1e-10);
        let na = schatten_norm(&a, p).unwrap();
        let ne = schatten_norm(&filt.cond_exp_lp(&a, level, p, -half_inv(p)).unwrap(), p).unwrap();
        assert!(ne <= na * (1.0 + 1e-10));
    }
}

#[test]
fn martingale_and_hardy_norms() {
    let m = model();
    let filt = Filtration::by_modes(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_matrix(&mut rng, m.dim());
    let a = twisted_embed(&m, &x, 4.0, -half_inv(4.0)).unwrap();
    let mart = filt.martingale_from_terminal(&a, 4.0).unwrap();
    assert!(max_abs_diff(mart.values.last().unwrap(), &a) < 1e-12);
    let norms = mart.norms().unwrap();
    assert!(norms.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-10)));
    let diffs = mart.differences();
    let h = filt.hardy_norms(&diffs, 4.0, true).unwrap();
    assert!(h.hc.unwrap().is_finite() && h.hd > 0.0);
    let single = filt.hardy_norms(&diffs[..1], 4.0, true).unwrap();
    assert!((single.hc_big - schatten_norm(&diffs[0], 4.0).unwrap()).abs() < 1e-10);
    let zero = filt.hardy_norms(&[Mat::zeros(m.dim(), m.dim())], 4.0, true).unwrap();
    assert!(zero.hc_big.abs() < 1e-12 && zero.hd.abs() < 1e-12 && zero.hc.unwrap().abs() < 1e-12);
    assert!(filt.hardy_norms(&diffs, 1.5, true).is_err());
    assert!(filt.hardy_norms(&diffs, 1.5, false).is_ok());
}

#[test]
fn q_sigma_is_a_projection() {
    let m = QuasiFreeModel::scalar(0.5, 4).unwrap();
    let filt = Filtration::by_modes(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid: Vec<f64> = (0..=4).map(|j| j as f64).collect();
    let values: Vec<Mat> = (0..4).map(|j| level_element(&m, &filt, &mut rng, j)).collect();
    let f = AdaptedSimpleProcess::scalar(grid.clone(), values).unwrap();
    f.certify_adapted(&filt, 1e-10).unwrap();
    let sigma = [0.0, 2.0, 4.0];
    let q = filt.q_sigma(&f, &sigma).unwrap();
    let qq = filt.q_sigma(&q, &sigma).unwrap();
    for (a, b) in q.values.iter().zip(&qq.values) {
        assert!(max_abs_diff(&a[0], &b[0]) < 1e-10);
    }
    let fine = filt.q_sigma(&f, &grid).unwrap();
    for (a, b) in fine.values.iter().zip(&f.values) {
        assert!(max_abs_diff(&a[0], &b[0]) < 1e-12);
    }
    assert!(filt.q_sigma(&f, &[0.0, 1.5, 4.0]).is_err());
    assert!(filt.q_sigma(&f, &[1.0, 4.0]).is_err());
}
