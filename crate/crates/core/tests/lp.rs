use ncpg::kernel::{cr, identity, matmul, max_abs_diff, random_hermitian, random_matrix, Mat};
use ncpg::lp::*;
use ncpg::model::{FieldModel, QuasiFreeModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INF: f64 = f64::INFINITY;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn number_projector() -> Mat {
    let mut n = Mat::zeros(2, 2);
    n[(1, 1)] = cr(1.0);
    n
}

#[test]
fn number_projector_norm() {
    let m = QuasiFreeModel::scalar(0.5, 1).unwrap();
    assert!((m.w_diag()[1] - 16.0 / 17.0).abs() < 1e-15);
    for p in [1.0, 4.0 / 3.0, 2.0, 3.0, 4.0, INF] {
        let want = if p.is_infinite() { 1.0 } else { (16.0f64 / 17.0).powf(1.0 / p) };
        let got = twisted_norm(&m, &number_projector(), p).unwrap();
        assert!((got - want).abs() < 1e-12, "p={p}: {got} vs {want}");
    }
}

#[test]
fn unit_and_embedding_of_one() {
    let m = QuasiFreeModel::scalar(0.3, 2).unwrap();
    let one = identity(m.dim());
    for p in [1.0, 2.0, 4.0, INF] {
        assert!((twisted_norm(&m, &one, p).unwrap() - 1.0).abs() < 1e-12);
        for tau in [-tau_max(p), 0.0, 0.4] {
            let e = twisted_embed(&m, &one, p, tau).unwrap();
            assert!(max_abs_diff(&e, &m.w_power(1.0 / p)) < 1e-14);
        }
    }
    assert!((haagerup_norm(&m.w_power(0.5), 2.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn twist_range_is_enforced() {
    let m = QuasiFreeModel::scalar(0.5, 1).unwrap();
    let x = number_projector();
    assert!(twisted_embed(&m, &x, 2.0, 0.76).is_err());
    assert!(twisted_embed(&m, &x, INF, 1.0).is_ok());
    assert!(twisted_embed(&m, &x, INF, 1.01).is_err());
    assert!(twisted_norm(&m, &x, 0.5).is_err());
}

#[test]
fn product_splitting() {
    let mut r = rng(1);
    let m = QuasiFreeModel::scalar(0.4, 2).unwrap();
    for (p, q) in [(4.0, 4.0), (3.0, 6.0), (2.0, INF)] {
        let rr = product_exponent(p, q).unwrap();
        for t in [-0.2, 0.0, 0.15] {
            let x = random_matrix(&mut r, 4);
            let y = random_matrix(&mut r, 4);
            let lhs = twisted_embed(&m, &matmul(&x, &y), rr, t).unwrap();
            let rhs = matmul(
                &twisted_embed(&m, &x, p, t + half_inv(q)).unwrap(),
                &twisted_embed(&m, &y, q, t - half_inv(p)).unwrap(),
            );
            assert!(max_abs_diff(&lhs, &rhs) < 1e-10, "p={p} q={q} t={t}");
        }
    }
}

#[test]
fn product_exponent_bookkeeping() {
    assert_eq!(product_exponent(2.0, 2.0).unwrap(), 1.0);
    assert_eq!(product_exponent(INF, INF).unwrap(), INF);
    assert!(product_exponent(1.5, 2.0).is_err());
    let m = QuasiFreeModel::scalar(0.5, 2).unwrap();
    let mut r = rng(2);
    let x = TwistedElement::new(&m, random_matrix(&mut r, 4), 4.0).unwrap();
    let one = TwistedElement::new(&m, identity(4), INF).unwrap();
    let c = lp_product(&x, &one).unwrap();
    assert_eq!(c.product.p(), 4.0);
    assert!(max_abs_diff(c.product.x(), x.x()) == 0.0);
    assert!(c.holds());
    assert!(TwistedElement::new(&m, identity(2), 2.0).is_err());
}

#[test]
fn expectation_bound_and_trace_form() {
    let m = QuasiFreeModel::scalar(0.6, 2).unwrap();
    let mut r = rng(3);
    let (one, bound) = expectation_extend(&m, &identity(4)).unwrap();
    assert!((one - cr(1.0)).norm() < 1e-14 && (bound - 1.0).abs() < 1e-12);
    for _ in 0..20 {
        let x = random_matrix(&mut r, 4);
        let (w, b) = expectation_extend(&m, &x).unwrap();
        assert!(w.norm() <= b * (1.0 + 1e-12));
        let tr = haagerup_trace(&lp_representative(&m, &x, 1.0));
        assert!((tr - w).norm() < 1e-12);
    }
}

#[test]
fn spectral_law_of_projector_is_bernoulli() {
    let m = QuasiFreeModel::scalar(0.5, 1).unwrap();
    let law = spectral_law(&m, &number_projector()).unwrap();
    assert_eq!(law.atoms.len(), 2);
    assert!((law.atoms[0].0).abs() < 1e-14 && (law.atoms[0].1 - 1.0 / 17.0).abs() < 1e-14);
    assert!((law.atoms[1].0 - 1.0).abs() < 1e-14 && (law.atoms[1].1 - 16.0 / 17.0).abs() < 1e-14);
    assert!(spectral_law(&m, &Mat::from_fn(2, 2, |i, j| cr((i + 2 * j) as f64))).is_err());
}

fn pair(seed: u64) -> (QuasiFreeModel, Mat, Mat) {
    let mut r = rng(seed);
    let mu = 0.2 + 0.6 * (seed % 7) as f64 / 7.0;
    let m = QuasiFreeModel::scalar(mu, 2).unwrap();
    let x = random_matrix(&mut r, 4);
    let y = random_matrix(&mut r, 4);
    (m, x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adjoint_relation_and_star_invariance(seed in any::<u64>(), tau in -0.7f64..0.7) {
        let (m, x, _) = pair(seed);
        let a = twisted_embed(&m, &x.adjoint(), 4.0, tau).unwrap();
        let b = twisted_embed(&m, &x, 4.0, -tau).unwrap().adjoint();
        prop_assert!(max_abs_diff(&a, &b) <= 1e-15 * a.iter().map(|z| z.norm()).fold(1.0, f64::max));
        let n = twisted_norm(&m, &x, 3.0).unwrap();
        let ns = twisted_norm(&m, &x.adjoint(), 3.0).unwrap();
        prop_assert!((n - ns).abs() <= 1e-11 * n);
    }

    #[test]
    fn trace_property_and_duality(seed in any::<u64>(), p in 1.1f64..6.0) {
        let (m, x, y) = pair(seed);
        let q = p / (p - 1.0);
        let a = lp_representative(&m, &x, p);
        let b = lp_representative(&m, &y, q);
        let ab = haagerup_trace(&matmul(&a, &b));
        let ba = haagerup_trace(&matmul(&b, &a));
        prop_assert!((ab - ba).norm() <= 1e-10 * ab.norm().max(1.0));
        prop_assert!(ab.norm() <= haagerup_norm(&a, p).unwrap() * haagerup_norm(&b, q).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn holder_and_monotonicity(seed in any::<u64>()) {
        let (m, x, y) = pair(seed);
        for (p, q) in [(2.0, 2.0), (4.0, 4.0), (3.0, 6.0), (INF, 4.0)] {
            let xe = TwistedElement::new(&m, x.clone(), p).unwrap();
            let ye = TwistedElement::new(&m, y.clone(), q).unwrap();
            prop_assert!(lp_product(&xe, &ye).unwrap().holds());
        }
        let norms: Vec<f64> = [1.0, 2.0, 4.0, INF].iter().map(|&p| twisted_norm(&m, &x, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn endpoint_guard(seed in any::<u64>(), p in 1.0f64..8.0) {
        let (m, x, _) = pair(seed);
        let r = twisted_norm_report(&m, &x, p).unwrap();
        prop_assert!(r.guard_ok);
        prop_assert!(r.interior_max <= r.endpoint_max + 1e-9);
    }

    #[test]
    fn spectral_law_moments(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = QuasiFreeModel::scalar(0.5, 2).unwrap();
        let x = random_hermitian(&mut r, 4);
        let law = spectral_law(&m, &x).unwrap();
        prop_assert!((law.total_weight() - 1.0).abs() <= 1e-10);
        let x2 = m.state(&matmul(&x, &x)).re;
        prop_assert!((law.moment(2) - x2).abs() <= 1e-10 * x2.max(1.0));
        let neg = spectral_law(&m, &(-&x)).unwrap();
        let refl = law.reflect();
        for (a, b) in neg.atoms.iter().zip(&refl.atoms) {
            prop_assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
        }
        for n in [1, 2] {
            let k = 2.0 * n as f64;
            prop_assert!(law.abs_moment(k) <= twisted_norm(&m, &x, k).unwrap().powf(k) * (1.0 + 1e-10));
        }
    }
}
