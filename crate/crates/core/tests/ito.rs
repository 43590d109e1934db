use ncpg::filtration::Filtration;
use ncpg::gbm::*;
use ncpg::grassmann::GrassmannPolynomial;
use ncpg::ito::*;
use ncpg::kernel::*;
use ncpg::process::AdaptedSimpleProcess;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gbm(n_t: usize, reserved: usize) -> GbmProcess {
    build_gbm(GbmSpec::standard(0.5, n_t, reserved)).unwrap()
}

fn constant_indexed(g: &GbmProcess, u: &[C64]) -> AdaptedSimpleProcess {
    let basis = real_theta_basis(g.spec()).unwrap();
    let coeffs = real_coefficients(&basis, u);
    let n = g.model().dim();
    let vals: Vec<Mat> = coeffs.iter().map(|c| identity(n) * *c).collect();
    AdaptedSimpleProcess::indexed(g.times().to_vec(), vec![vals; g.n_t()]).unwrap()
}

/// Even adapted integrand `X_{t_j}(u1) X_{t_j}(u2)` times the coefficients of `u3`.
fn product_indexed(g: &GbmProcess, u1: &[C64], u2: &[C64], u3: &[C64]) -> AdaptedSimpleProcess {
    let basis = real_theta_basis(g.spec()).unwrap();
    let coeffs = real_coefficients(&basis, u3);
    let vals = (0..g.n_t())
        .map(|j| {
            let e = matmul(&g.field_index(j, u1).unwrap(), &g.field_index(j, u2).unwrap());
            coeffs.iter().map(|c| &e * *c).collect()
        })
        .collect();
    AdaptedSimpleProcess::indexed(g.times().to_vec(), vals).unwrap()
}

fn field_indexed(g: &GbmProcess, u1: &[C64], u3: &[C64]) -> AdaptedSimpleProcess {
    let basis = real_theta_basis(g.spec()).unwrap();
    let coeffs = real_coefficients(&basis, u3);
    let vals = (0..g.n_t())
        .map(|j| {
            let e = g.field_index(j, u1).unwrap();
            coeffs.iter().map(|c| &e * *c).collect()
        })
        .collect();
    AdaptedSimpleProcess::indexed(g.times().to_vec(), vals).unwrap()
}

fn u(a: f64, b: f64, cc: f64, d: f64) -> Vec<C64> {
    vec![c(a, b), c(cc, d)]
}

#[test]
fn real_basis_properties() {
    let spec = GbmSpec::standard(0.5, 1, 0);
    let b = real_theta_basis(&spec).unwrap();
    for (i, v) in b.iter().enumerate() {
        let tv = spec.theta(v);
        assert!(tv.iter().zip(v).all(|(a, b)| (a - b).norm() < 1e-15));
        for (j, w) in b.iter().enumerate() {
            let g = inner(v, w);
            assert!((g - cr(if i == j { 1.0 } else { 0.0 })).norm() < 1e-15);
        }
    }
}

#[test]
fn constant_integrand_telescopes_and_is_basis_independent() {
    let g = gbm(3, 0);
    let v = u(0.3, 0.2, -0.5, 0.1);
    let f = constant_indexed(&g, &v);
    for (k, y) in ito_path(&g, &f).unwrap().iter().enumerate() {
        assert!(max_abs_diff(y, &g.field_index(k, &v).unwrap()) < 1e-12);
    }
    let fe = product_indexed(&g, &u(1.0, 0.0, 0.3, 0.0), &u(0.0, 1.0, 0.2, 0.5), &v);
    let y1 = ito_integral(&g, &fe, 1.0).unwrap();
    let th = 0.7f64;
    let o = vec![vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]];
    let basis = real_theta_basis(g.spec()).unwrap();
    let rb = rotate_basis(&basis, &o);
    let mut y2 = Mat::zeros(g.model().dim(), g.model().dim());
    for k in 0..g.n_t() {
        let rv = rotate_values(&fe.values[k], &o);
        for (a, w) in rb.iter().enumerate() {
            y2 += matmul(&rv[a], &g.increment_index(k, k + 1, w).unwrap());
        }
    }
    assert!(max_abs_diff(&y1, &y2) < 1e-12);
    let filt = g.filtration();
    let path = ito_path(&g, &fe).unwrap();
    for s in 0..=g.n_t() {
        let e = filt.cond_exp(path.last().unwrap(), s).unwrap();
        assert!(max_abs_diff(&e, &path[s]) < 1e-10);
    }
}

#[test]
fn non_adapted_integrand_is_rejected() {
    let g = gbm(2, 0);
    let v = u(1.0, 0.0, 0.0, 0.0);
    let future = g.field_index(2, &v).unwrap();
    let n = g.model().dim();
    let f = AdaptedSimpleProcess::scalar(g.times().to_vec(), vec![future, identity(n)]).unwrap();
    assert!(matches!(ito_integral_along(&g, &f, &v, 1.0), Err(ncpg::Error::NotAdapted(_))));
}

#[test]
fn isometry_with_oracle_constant() {
    let g = gbm(4, 0);
    let v = u(std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let filt: Filtration = g.filtration();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vals: Vec<Mat> =
        (0..4).map(|j| filt.cond_exp(&random_matrix(&mut rng, g.model().dim()), j).unwrap()).collect();
    let f = AdaptedSimpleProcess::scalar(g.times().to_vec(), vals).unwrap();
    for tau in [0.0, 0.25, -0.25, 0.75, -0.75] {
        let k = g.isometry_constant(&v, tau).unwrap();
        assert!((k - c_tau_split_form(0.5, tau)).abs() < 1e-10 * k);
        let chk = isometry_check(&g, &f, &v, tau, k).unwrap();
        assert!(chk.rel_defect < 1e-9, "tau {tau}: {chk:?}");
    }
}

#[test]
fn bracket_of_fields_and_compensator() {
    let g = gbm(3, 0);
    let v = u(0.4, 0.1, -0.3, 0.8);
    let w = u(-0.2, 0.5, 0.6, 0.0);
    let n = g.model().dim();
    let yv = ItoProcess::new(&g, Mat::zeros(n, n), constant_indexed(&g, &v), None).unwrap();
    let yw = ItoProcess::new(&g, Mat::zeros(n, n), constant_indexed(&g, &w), None).unwrap();
    let qv = quadratic_variation(&g, &yv, &yw).unwrap();
    let want = g.spec().bilinear(&v, &w);
    for (k, b) in qv.bracket.iter().enumerate() {
        assert!(max_abs_diff(b, &(identity(n) * (want * g.times()[k]))) < 1e-12);
    }
    assert!(qv.compensator_defect < 1e-9);
    let ye = ItoProcess::new(&g, Mat::zeros(n, n), product_indexed(&g, &v, &w, &v), None).unwrap();
    let qv = quadratic_variation(&g, &ye, &yw).unwrap();
    assert!(qv.compensator_defect < 1e-9, "{}", qv.compensator_defect);
}

#[test]
fn taylor_formula_is_exact() {
    let g = gbm(2, 0);
    let n = g.model().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut rand_odd = || {
        let a = u(rng.gen(), rng.gen(), rng.gen(), rng.gen());
        let b = u(rng.gen(), rng.gen(), rng.gen(), rng.gen());
        g.field_index(1, &a).unwrap() + g.increment_index(1, 2, &b).unwrap()
    };
    let z: Vec<Mat> = (0..3).map(|_| rand_odd()).collect();
    let r: Vec<Mat> = (0..3).map(|_| rand_odd()).collect();
    let zp = vec![matmul(&z[0], &z[1])];
    let rp = vec![matmul(&r[1], &r[2])];
    let mut f = GrassmannPolynomial::zero(3, 1);
    f.add_term(&[0, 1, 2], &[], c(1.0, 0.5));
    f.add_term(&[2, 0], &[0], cr(-2.0));
    f.add_term(&[1], &[0, 0], cr(0.7));
    f.add_term(&[], &[0], cr(0.3));
    let lhs = f.eval_checked(&z, &zp, n, 1e-12).unwrap() - f.eval(&r, &rp, n).unwrap();
    let rhs = f.taylor(&z, &zp, &r, &rp, n).unwrap();
    assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
    let prod = f.mul(&f.derivative_sym(0));
    let lhs = prod.eval(&z, &zp, n).unwrap();
    let rhs = matmul(&f.eval(&z, &zp, n).unwrap(), &f.derivative_sym(0).eval(&z, &zp, n).unwrap());
    assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
}

fn odd_family(g: &GbmProcess) -> ItoFamily {
    let n = g.model().dim();
    let u1 = u(1.0, 0.0, 0.3, 0.0);
    let u2 = u(0.0, 1.0, 0.2, 0.5);
    let u3 = u(0.6, -0.2, -0.4, 0.1);
    let y1 = ItoProcess::new(g, Mat::zeros(n, n), constant_indexed(g, &u1), None).unwrap();
    let y2 = ItoProcess::new(g, Mat::zeros(n, n), constant_indexed(g, &u2), None).unwrap();
    let y3 = ItoProcess::new(g, Mat::zeros(n, n), product_indexed(g, &u1, &u2, &u3), None).unwrap();
    ItoFamily { odd: vec![y1, y2, y3], even: vec![] }
}

#[test]
fn ito_formula_residuals() {
    let mut lin = GrassmannPolynomial::zero(3, 0);
    lin.add_term(&[0], &[], cr(1.0));
    lin.add_term(&[2], &[], cr(-2.0));
    let mut cubic = GrassmannPolynomial::zero(3, 0);
    cubic.add_term(&[0, 1], &[], cr(1.0));
    cubic.add_term(&[0, 1, 2], &[], cr(0.5));
    cubic.add_term(&[1, 2], &[], cr(-1.0));
    let build = |n_t: usize| -> ncpg::Result<(GbmProcess, ItoFamily)> {
        let g = gbm(n_t, 0);
        let fam = odd_family(&g);
        Ok((g, fam))
    };
    let rows = residual_table(&[2, 3, 4], build, &lin).unwrap();
    assert!(rows.iter().all(|r| r.residual < 1e-10));
    let rows = residual_table(&[2, 3, 4], build, &cubic).unwrap();
    print!("{}", residual_csv(&rows));
    assert!(rows.windows(2).all(|w| w[1].residual < w[0].residual));
}

#[test]
fn mixed_parity_ito_formula() {
    let mut f = GrassmannPolynomial::zero(1, 1);
    f.add_term(&[0], &[0], cr(1.0));
    f.add_term(&[], &[0], cr(0.5));
    let build = |n_t: usize| -> ncpg::Result<(GbmProcess, ItoFamily)> {
        let g = gbm(n_t, 0);
        let n = g.model().dim();
        let u1 = u(1.0, 0.0, 0.3, 0.0);
        let u2 = u(0.0, 1.0, 0.2, 0.5);
        let y = ItoProcess::new(&g, Mat::zeros(n, n), constant_indexed(&g, &u1), None)?;
        let e = ItoProcess::new(&g, Mat::zeros(n, n), field_indexed(&g, &u1, &u2), None)?;
        Ok((g, ItoFamily { odd: vec![y], even: vec![e] }))
    };
    let rows = residual_table(&[2, 3, 4], build, &f).unwrap();
    print!("{}", residual_csv(&rows));
    assert!(rows.windows(2).all(|w| w[1].residual < w[0].residual));
}
