use rand_chacha::ChaCha8Rng;

use super::Ctx;
use crate::error::Result;
use crate::filtration::{pairing, Filtration};
use crate::kernel::*;
use crate::lp::{half_inv, lp_product, spectral_law, twisted_embed, twisted_norm, twisted_norm_report, TwistedElement};
use crate::matching::matching_sum;
use crate::model::{gns_doubled_oracle, wedge_inner, wick, Conjugation, FieldModel, QuasiFreeModel};
use crate::process::AdaptedSimpleProcess;
use crate::report::Recorder;

const MUS: [f64; 3] = [0.25, 0.5, 0.75];

/// Quasi-free model with two paired modes and one self-conjugate mode.
fn mixed_model() -> Result<QuasiFreeModel> {
    QuasiFreeModel::build(&[0.4, 0.4, 0.7], Conjugation::new(vec![1, 0, 2])?)
}

fn scaled(err: f64, reference: C64) -> f64 {
    err / (1.0 + reference.norm())
}

fn chain(ops: &[Mat]) -> Mat {
    ops[1..].iter().fold(ops[0].clone(), |acc, o| matmul(&acc, o))
}

pub(super) fn car(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(1);
    let (mut ac, mut cc, mut gamma2, mut beta_star, mut beta_plain) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut four, mut six) = (0.0f64, 0.0f64);
    for d in 1..=4 {
        for mu in MUS {
            let m = QuasiFreeModel::scalar(mu, d)?;
            let n = m.dim();
            let s = mu * mu + mu.powi(-2);
            for k in 0..100 {
                let f = random_vec(&mut rng, d);
                let g = random_vec(&mut rng, d);
                let gs = m.gamma_star(&f)?;
                let gg = m.gamma(&g)?;
                let want = inner(&g, &f) * s;
                ac = ac.max(scaled(max_abs_diff(&anticommutator(&gs, &gg), &(identity(n) * want)), want));
                cc = cc.max(max_abs_diff(&anticommutator(&m.gamma(&f)?, &gg), &Mat::zeros(n, n)));
                let two = inner(&g, &f) / (mu * mu);
                gamma2 = gamma2.max(scaled((m.state(&matmul(&gs, &gg)) - two).norm(), two));

                let bf_vec = random_vec(&mut rng, 2 * d);
                let bg_vec = random_vec(&mut rng, 2 * d);
                let bf = m.beta(&bf_vec)?;
                let bg = m.beta(&bg_vec)?;
                let star = inner(&bf_vec, &bg_vec);
                beta_star = beta_star.max(scaled((m.state(&matmul(&bf.adjoint(), &bg)) - star).norm(), star));
                let plain = m.beta_two_point(&bf_vec, &bg_vec);
                beta_plain = beta_plain.max(scaled((m.state(&matmul(&bf, &bg)) - plain).norm(), plain));

                if k % 10 == 0 {
                    for (len, worst) in [(4usize, &mut four), (6, &mut six)] {
                        let fs: Vec<Vec<C64>> = (0..len).map(|_| random_vec(&mut rng, 2 * d)).collect();
                        let ops = fs.iter().map(|f| m.beta(f)).collect::<Result<Vec<_>>>()?;
                        let direct = m.state(&chain(&ops));
                        let oracle = matching_sum(len, &|i, j| m.beta_two_point(&fs[i], &fs[j]));
                        *worst = worst.max(scaled((direct - oracle).norm(), oracle));
                    }
                }
            }
        }
    }
    r.at_most("anticommutator_gamma_star_gamma", ac, 1e-12);
    r.at_most("anticommutator_gamma_gamma", cc, 1e-12);
    r.at_most("two_point_gamma", gamma2, 1e-12);
    r.at_most("two_point_beta_star", beta_star, 1e-12);
    r.at_most("two_point_beta", beta_plain, 1e-12);
    r.at_most("four_point_matching", four, 1e-9);
    r.at_most("six_point_matching", six, 1e-9);
    Ok(())
}

pub(super) fn wick_suite(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(2);
    let (mut vector, mut gram) = (0.0f64, 0.0f64);
    for d in 1..=4 {
        for mu in MUS {
            let m = QuasiFreeModel::scalar(mu, d)?;
            let dbl = gns_doubled_oracle(&m)?;
            for n in 0..=(2 * d).min(4) {
                let fs: Vec<Vec<C64>> = (0..n).map(|_| random_vec(&mut rng, 2 * d)).collect();
                let lhs = &wick(&dbl, &fs)? * dbl.basis().vacuum();
                let rhs = dbl.wedge_vector(&fs)?;
                vector = vector.max((&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max));
                if n > 0 {
                    let gs: Vec<Vec<C64>> = (0..n).map(|_| random_vec(&mut rng, 2 * d)).collect();
                    let a = wick(&m, &fs)?;
                    let b = wick(&m, &gs)?;
                    let want = wedge_inner(&fs, &gs);
                    gram = gram.max(scaled((m.state(&matmul(&a.adjoint(), &b)) - want).norm(), want));
                }
            }
        }
    }
    r.at_most("wick_vector_identity", vector, 1e-10);
    r.at_most("wick_gram", gram, 1e-10);

    let mut kms = 0.0f64;
    for m in [QuasiFreeModel::scalar(0.5, 2)?, mixed_model()?] {
        for _ in 0..100 {
            let x = random_matrix(&mut rng, m.dim());
            let y = random_matrix(&mut rng, m.dim());
            let lhs = m.state(&matmul(&x, &m.continuation(&y, 1.0)));
            kms = kms.max((lhs - m.state(&matmul(&y, &x))).norm());
        }
    }
    r.at_most("kms_defect", kms, 1e-9);

    // Every ordered product of gamma / gamma* of degree <= 4.
    let mut doubled = 0.0f64;
    for d in 1..=2 {
        for mu in MUS {
            let m = QuasiFreeModel::scalar(mu, d)?;
            let dbl = gns_doubled_oracle(&m)?;
            for deg in 1..=4usize {
                for pattern in 0..(1usize << deg) {
                    let fs: Vec<Vec<C64>> = (0..deg).map(|_| random_vec(&mut rng, d)).collect();
                    let pick = |md: &dyn FieldModel, k: usize| {
                        if pattern >> k & 1 == 1 {
                            md.gamma_star(&fs[k])
                        } else {
                            md.gamma(&fs[k])
                        }
                    };
                    let a = chain(&(0..deg).map(|k| pick(&m, k)).collect::<Result<Vec<_>>>()?);
                    let b = chain(&(0..deg).map(|k| pick(&dbl, k)).collect::<Result<Vec<_>>>()?);
                    doubled = doubled.max((m.state(&a) - dbl.state(&b)).norm());
                }
            }
        }
    }
    r.at_most("doubled_oracle_moments", doubled, 1e-10);
    Ok(())
}

fn lp_sample(models: &[QuasiFreeModel], k: usize, rng: &mut ChaCha8Rng) -> (usize, Mat) {
    let i = k % models.len();
    (i, random_matrix(rng, models[i].dim()))
}

pub(super) fn lp(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(3);
    let models = [QuasiFreeModel::scalar(0.5, 2)?, mixed_model()?];
    let inf = f64::INFINITY;
    let mut guard = f64::NEG_INFINITY;
    for (p, q, ex) in [(2.0, 2.0, "2_2_1"), (4.0, 4.0, "4_4_2"), (3.0, 6.0, "3_6_2"), (inf, 4.0, "inf_4_4")] {
        let (mut violations, mut worst) = (0.0, 0.0f64);
        for k in 0..200 {
            let (i, x) = lp_sample(&models, k, &mut rng);
            let y = random_matrix(&mut rng, models[i].dim());
            let cert = lp_product(&TwistedElement::new(&models[i], x, p)?, &TwistedElement::new(&models[i], y, q)?)?;
            if !cert.holds() {
                violations += 1.0;
            }
            worst = worst.max(cert.lhs / cert.rhs);
        }
        r.at_most(&format!("holder_violations_{ex}"), violations, 0.0);
        r.report(&format!("holder_worst_ratio_{ex}"), worst);
    }

    let ps = [1.0, 4.0 / 3.0, 2.0, 3.0, 4.0, inf];
    let mut violations = 0.0;
    for k in 0..100 {
        let (i, x) = lp_sample(&models, k, &mut rng);
        let mut norms = Vec::new();
        for &p in &ps {
            let rep = twisted_norm_report(&models[i], &x, p)?;
            guard = guard.max(rep.interior_max - rep.endpoint_max);
            norms.push(rep.value);
        }
        violations += norms.windows(2).filter(|w| w[0] > w[1] * (1.0 + 1e-12)).count() as f64;
    }
    r.at_most("monotonicity_violations", violations, 0.0);

    let mut unit = 0.0f64;
    for m in &models {
        for &p in &ps {
            unit = unit.max((twisted_norm(m, &identity(m.dim()), p)? - 1.0).abs());
        }
    }
    r.at_most("unit_norm", unit, 1e-12);
    r.at_most("endpoint_guard_excess", guard, 1e-9);
    Ok(())
}

fn level_element(filt: &Filtration, rng: &mut ChaCha8Rng, level: usize) -> Result<Mat> {
    filt.cond_exp(&random_matrix(rng, filt.model().dim()), level)
}

pub(super) fn filtration(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(4);
    let m = mixed_model()?;
    let filt = Filtration::by_modes(&m);
    let n = m.dim();
    let one = identity(n);
    let (p, q) = (3.0, 1.5);
    let mut w = [0.0f64; 8];
    for level in 0..filt.n_levels() {
        w[0] = w[0].max(max_abs_diff(&filt.cond_exp(&one, level)?, &one));
        for _ in 0..100 {
            let x = random_matrix(&mut rng, n);
            let e = filt.cond_exp(&x, level)?;
            w[1] = w[1].max(max_abs_diff(&filt.cond_exp(&e, level)?, &e));
            let a = level_element(&filt, &mut rng, level)?;
            let b = level_element(&filt, &mut rng, level)?;
            let lhs = filt.cond_exp(&product(&[&a, &x, &b]), level)?;
            w[2] = w[2].max(max_abs_diff(&lhs, &product(&[&a, &e, &b])));
            let gap = filt.cond_exp(&abs_sq(&x), level)? - abs_sq(&e);
            let gap = hermitize(&((&gap + gap.adjoint()) * cr(0.5)))?;
            w[3] = w[3].max(-min_eigenvalue(&gap)?);
            w[4] = w[4].max((m.state(&e) - m.state(&x)).norm());
            let flow = filt.cond_exp(&m.modular_flow(&x, 0.7), level)?;
            w[5] = w[5].max(max_abs_diff(&flow, &m.modular_flow(&e, 0.7)));

            let y = random_matrix(&mut rng, n);
            let ap = twisted_embed(&m, &x, p, -half_inv(p))?;
            let bq = twisted_embed(&m, &y, q, -half_inv(q))?;
            let lhs = pairing(&bq, &filt.cond_exp_lp(&ap, level, p, -half_inv(p))?);
            let rhs = pairing(&filt.cond_exp_lp(&bq, level, q, -half_inv(q))?, &ap);
            w[6] = w[6].max((lhs - rhs).norm());
            for tau in [-0.5, 0.0, 0.3] {
                let embedded = twisted_embed(&m, &x, p, tau)?;
                let got = filt.cond_exp_lp(&embedded, level, p, tau)?;
                w[7] = w[7].max(max_abs_diff(&got, &twisted_embed(&m, &e, p, tau)?));
            }
        }
    }
    let names = ["unital", "idempotent", "module", "schwarz_negativity", "state_preserving", "modular_preserving", "duality", "lp_compatibility"];
    for (name, v) in names.iter().zip(w) {
        r.at_most(name, v, 1e-10);
    }
    Ok(())
}

pub(super) fn spectral(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(12);
    let models = [QuasiFreeModel::scalar(0.5, 2)?, mixed_model()?];
    let (mut weights, mut second, mut reflect) = (0.0f64, 0.0f64, 0.0f64);
    let mut violations = [0.0; 2];
    let mut worst = [0.0f64; 2];
    for k in 0..100 {
        let m = &models[k % 2];
        let x = random_hermitian(&mut rng, m.dim());
        let law = spectral_law(m, &x)?;
        weights = weights.max((law.total_weight() - 1.0).abs());
        reflect = reflect.max((law.reflect().moment(3) + law.moment(3)).abs());
        let y2 = law.moment(2);
        for p in [2.0, 4.0, f64::INFINITY] {
            let a = m.sandwich(0.0, &x, 1.0 / p);
            let hs = frobenius(&matmul(&a, &m.w_power(0.5 - 1.0 / p))).powi(2);
            second = second.max((y2 - hs).abs() / (1.0 + y2));
        }
        for (i, n) in [1i32, 2].into_iter().enumerate() {
            let lhs = law.abs_moment(2.0 * n as f64);
            let rhs = twisted_norm(m, &x, 2.0 * n as f64)?.powi(2 * n);
            if lhs > rhs * (1.0 + 1e-10) {
                violations[i] += 1.0;
            }
            worst[i] = worst[i].max(lhs / rhs);
        }
    }
    r.at_most("weight_sum", weights, 1e-10);
    r.at_most("second_moment_identity", second, 1e-10);
    r.at_most("reflection_odd_moment", reflect, 1e-10);
    for (i, n) in [1, 2].into_iter().enumerate() {
        r.at_most(&format!("moment_bound_violations_n{n}"), violations[i], 0.0);
        r.report(&format!("moment_bound_worst_ratio_n{n}"), worst[i]);
    }
    Ok(())
}

/// `(sum_j width_j omega(|F_j - G_j|^2))^{1/2}`.
fn l2_distance(m: &QuasiFreeModel, f: &AdaptedSimpleProcess, g: &AdaptedSimpleProcess) -> f64 {
    let mut s = 0.0;
    for j in 0..f.cells() {
        s += f.width(j) * m.state(&abs_sq(&(&f.values[j][0] - &g.values[j][0]))).re;
    }
    s.sqrt()
}

pub(super) fn martingale(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(13);
    let m = QuasiFreeModel::scalar(0.5, 4)?;
    let filt = Filtration::by_modes(&m);
    let grid: Vec<f64> = (0..=4).map(|j| j as f64).collect();
    let sigmas: [&[f64]; 3] = [&[0.0, 4.0], &[0.0, 2.0, 4.0], &[0.0, 1.0, 2.0, 3.0, 4.0]];
    let mut idem = 0.0f64;
    let mut dist = vec![0.0; sigmas.len()];
    let samples = 10;
    for _ in 0..samples {
        let values = (0..4).map(|j| level_element(&filt, &mut rng, j)).collect::<Result<Vec<_>>>()?;
        let f = AdaptedSimpleProcess::scalar(grid.clone(), values)?;
        for (k, sigma) in sigmas.iter().enumerate() {
            let q = filt.q_sigma(&f, sigma)?;
            let qq = filt.q_sigma(&q, sigma)?;
            for (a, b) in q.values.iter().zip(&qq.values) {
                idem = idem.max(max_abs_diff(&a[0], &b[0]));
            }
            dist[k] += l2_distance(&m, &q, &f) / samples as f64;
        }
    }
    r.at_most("q_sigma_idempotent", idem, 1e-10);
    for (k, d) in dist.iter().enumerate() {
        r.report(&format!("q_sigma_distance_cells_{}", sigmas[k].len() - 1), *d);
    }
    r.report("q_sigma_refinement_monotone", if dist.windows(2).all(|w| w[1] <= w[0]) { 1.0 } else { 0.0 });

    let p = 4.0;
    let mut burk = Vec::new();
    let mut stein = Vec::new();
    for d in 2..=4 {
        let m = QuasiFreeModel::scalar(0.5, d)?;
        let filt = Filtration::by_modes(&m);
        let (mut bmax, mut bmin, mut smax) = (0.0f64, f64::INFINITY, 0.0f64);
        for _ in 0..20 {
            let a = twisted_embed(&m, &random_matrix(&mut rng, m.dim()), p, -half_inv(p))?;
            let diffs = filt.martingale_from_terminal(&a, p)?.differences();
            let h = filt.hardy_norms(&diffs, p, true)?.h_norm().unwrap_or(f64::NAN);
            let ratio = schatten_norm(&a, p)? / h;
            bmax = bmax.max(ratio);
            bmin = bmin.min(ratio);
            let xs = (0..filt.n_levels())
                .map(|_| twisted_embed(&m, &random_matrix(&mut rng, m.dim()), p, -half_inv(p)))
                .collect::<Result<Vec<_>>>()?;
            smax = smax.max(filt.column_norm(&filt.stein_projection(&xs, p)?, p)? / filt.column_norm(&xs, p)?);
        }
        r.report(&format!("burkholder_max_d{d}"), bmax);
        r.report(&format!("burkholder_min_d{d}"), bmin);
        r.report(&format!("stein_max_d{d}"), smax);
        burk.push(bmax);
        stein.push(smax);
    }
    let spread = |v: &[f64]| {
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            v.iter().fold(0.0f64, |a, b| a.max(*b)) / v.iter().fold(f64::INFINITY, |a, b| a.min(*b))
        } else {
            f64::INFINITY
        }
    };
    r.at_most("burkholder_spread_across_d", spread(&burk), 3.0);
    r.at_most("stein_spread_across_d", spread(&stein), 3.0);
    Ok(())
}
