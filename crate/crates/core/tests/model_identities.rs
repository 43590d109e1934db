use ncpg::kernel::{anticommutator, cr, identity, inner, matmul, max_abs_diff, random_matrix, random_vec, C64};
use ncpg::matching::matching_sum;
use ncpg::model::{gns_doubled_oracle, wedge_inner, wick, Conjugation, FieldModel, QuasiFreeModel, WickBasis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn single_mode_density() {
    let m = QuasiFreeModel::scalar(0.5, 1).unwrap();
    assert!((m.w_diag()[0] - 1.0 / 17.0).abs() < 1e-15);
    assert!((m.w_diag()[1] - 16.0 / 17.0).abs() < 1e-15);
    let a = m.basis().lowering(0);
    let n = matmul(&a.adjoint(), &a);
    assert!((m.state(&n).re - 16.0 / 17.0).abs() < 1e-15);
    assert!((m.state(&identity(2)) - cr(1.0)).norm() < 1e-15);
}

#[test]
fn rejects_symbol_outside_unit_interval() {
    assert!(QuasiFreeModel::scalar(1.0, 1).is_err());
    assert!(QuasiFreeModel::scalar(0.0, 2).is_err());
    assert!(QuasiFreeModel::build(&[0.3, 0.5], Conjugation::new(vec![1, 0]).unwrap()).is_err());
}

#[test]
fn gamma_relations_and_two_point() {
    let mut r = rng(1);
    for mu in [0.25, 0.5, 0.75] {
        let m = QuasiFreeModel::scalar(mu, 3).unwrap();
        let s = mu * mu + 1.0 / (mu * mu);
        for _ in 0..10 {
            let f = random_vec(&mut r, 3);
            let g = random_vec(&mut r, 3);
            let gs = m.gamma_star(&f).unwrap();
            let gg = m.gamma(&g).unwrap();
            let ac = anticommutator(&gs, &gg);
            let expect = inner(&g, &f) * s;
            assert!(max_abs_diff(&ac, &(identity(8) * expect)) < 1e-12 * (1.0 + expect.norm()));
            let two = m.state(&matmul(&gs, &gg));
            let expect2 = inner(&g, &f) / (mu * mu);
            assert!((two - expect2).norm() < 1e-12 * (1.0 + expect2.norm()));
            let gf = m.gamma(&f).unwrap();
            assert!(max_abs_diff(&anticommutator(&gf, &gg), &ncpg::kernel::Mat::zeros(8, 8)) < 1e-14);
        }
    }
}

#[test]
fn beta_two_point_functions() {
    let mut r = rng(2);
    let theta = Conjugation::new(vec![1, 0, 2]).unwrap();
    let m = QuasiFreeModel::build(&[0.4, 0.4, 0.7], theta).unwrap();
    for _ in 0..10 {
        let f = random_vec(&mut r, 6);
        let g = random_vec(&mut r, 6);
        let bf = m.beta(&f).unwrap();
        let bg = m.beta(&g).unwrap();
        let star = m.state(&matmul(&bf.adjoint(), &bg));
        assert!((star - inner(&f, &g)).norm() < 1e-12 * (1.0 + inner(&f, &g).norm()));
        let plain = m.state(&matmul(&bf, &bg));
        let closed = m.beta_two_point(&f, &g);
        assert!((plain - closed).norm() < 1e-12 * (1.0 + closed.norm()));
    }
}

#[test]
fn modular_flow_of_beta_and_kms() {
    let mut r = rng(3);
    let mu = 0.5;
    let m = QuasiFreeModel::scalar(mu, 2).unwrap();
    let f = random_vec(&mut r, 2);
    let fp = random_vec(&mut r, 2);
    let t = 0.37;
    let b = m.beta_from_parts(&f, &fp).unwrap();
    let flowed = m.modular_flow(&b, t);
    let ph = C64::from_polar(1.0, -4.0 * t * mu.ln());
    let f2: Vec<C64> = f.iter().map(|z| z * ph).collect();
    let fp2: Vec<C64> = fp.iter().map(|z| z / ph).collect();
    let expect = m.beta_from_parts(&f2, &fp2).unwrap();
    assert!(max_abs_diff(&flowed, &expect) < 1e-10);
    for _ in 0..20 {
        let x = random_matrix(&mut r, 4);
        let y = random_matrix(&mut r, 4);
        let lhs = m.state(&matmul(&x, &m.continuation(&y, 1.0)));
        let rhs = m.state(&matmul(&y, &x));
        assert!((lhs - rhs).norm() < 1e-9);
    }
}

#[test]
fn quasi_free_matching_sums() {
    let mut r = rng(4);
    let m = QuasiFreeModel::scalar(0.6, 2).unwrap();
    for n in [4usize, 6] {
        let fs: Vec<Vec<C64>> = (0..n).map(|_| random_vec(&mut r, 4)).collect();
        let ops: Vec<_> = fs.iter().map(|f| m.beta(f).unwrap()).collect();
        let mut prod = ops[0].clone();
        for o in &ops[1..] {
            prod = matmul(&prod, o);
        }
        let direct = m.state(&prod);
        let oracle = matching_sum(n, &|i, j| m.beta_two_point(&fs[i], &fs[j]));
        assert!((direct - oracle).norm() < 1e-9 * (1.0 + oracle.norm()), "{direct} vs {oracle}");
    }
}

#[test]
fn wick_vector_identity_in_doubled_model() {
    let mut r = rng(5);
    let m = QuasiFreeModel::scalar(0.5, 2).unwrap();
    let dbl = gns_doubled_oracle(&m).unwrap();
    for n in 0..=4 {
        let fs: Vec<Vec<C64>> = (0..n).map(|_| random_vec(&mut r, 4)).collect();
        let wk = wick(&dbl, &fs).unwrap();
        let lhs = &wk * dbl.basis().vacuum();
        let rhs = dbl.wedge_vector(&fs).unwrap();
        let err = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "n={n} err={err}");
    }
}

#[test]
fn wick_gram_identity() {
    let mut r = rng(6);
    let m = QuasiFreeModel::scalar(0.7, 2).unwrap();
    for n in 1..=4 {
        let fs: Vec<Vec<C64>> = (0..n).map(|_| random_vec(&mut r, 4)).collect();
        let gs: Vec<Vec<C64>> = (0..n).map(|_| random_vec(&mut r, 4)).collect();
        let a = wick(&m, &fs).unwrap();
        let b = wick(&m, &gs).unwrap();
        let lhs = m.state(&matmul(&a.adjoint(), &b));
        let rhs = wedge_inner(&fs, &gs);
        assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()), "n={n}: {lhs} vs {rhs}");
    }
}

#[test]
fn doubled_model_moments_agree() {
    let mut r = rng(7);
    let m = QuasiFreeModel::scalar(0.5, 2).unwrap();
    let dbl = gns_doubled_oracle(&m).unwrap();
    for _ in 0..10 {
        let fs: Vec<Vec<C64>> = (0..4).map(|_| random_vec(&mut r, 2)).collect();
        let pick = |md: &dyn FieldModel, k: usize, f: &[C64]| {
            if k % 2 == 0 {
                md.gamma(f).unwrap()
            } else {
                md.gamma_star(f).unwrap()
            }
        };
        let mut a = pick(&m, 1, &fs[0]);
        let mut b = pick(&dbl, 1, &fs[0]);
        for (k, f) in fs.iter().enumerate().skip(1) {
            a = matmul(&a, &pick(&m, k + 1, f));
            b = matmul(&b, &pick(&dbl, k + 1, f));
        }
        assert!((m.state(&a) - dbl.state(&b)).norm() < 1e-10);
    }
}

#[test]
fn wick_basis_round_trip_and_ou() {
    let mut r = rng(8);
    let m = QuasiFreeModel::scalar(0.5, 2).unwrap();
    let wb = WickBasis::new(&m).unwrap();
    assert_eq!(wb.len(), 16);
    for _ in 0..5 {
        let x = random_matrix(&mut r, 4);
        let c = wb.decompose(&m, &x);
        assert!(max_abs_diff(&wb.recompose(&c), &x) < 1e-9);
        let a = wb.ou_semigroup(&m, &wb.ou_semigroup(&m, &x, 0.3).unwrap(), 0.5).unwrap();
        let b = wb.ou_semigroup(&m, &x, 0.8).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-10);
        let s1 = m.modular_flow(&wb.ou_semigroup(&m, &x, 0.4).unwrap(), 0.9);
        let s2 = wb.ou_semigroup(&m, &m.modular_flow(&x, 0.9), 0.4).unwrap();
        assert!(max_abs_diff(&s1, &s2) < 1e-10);
    }
    let gram_err = (0..16)
        .flat_map(|i| (0..16).map(move |j| (i, j)))
        .map(|(i, j)| {
            let g = m.state(&matmul(&wb.monomial(i).adjoint(), wb.monomial(j)));
            (g - if i == j { cr(1.0) } else { cr(0.0) }).norm()
        })
        .fold(0.0, f64::max);
    assert!(gram_err < 1e-9);
}
