use super::{rel, Ctx};
use crate::error::Result;
use crate::formal::{Formal, FormalGbm};
use crate::gbm::{build_gbm, c_tau_closed_form, c_tau_split_form, log_log_slope, GbmProcess, GbmSpec};
use crate::girsanov::*;
use crate::grassmann::GrassmannPolynomial;
use crate::hyper::{empirical_threshold, hyper_norm_estimate, ou_twisted_map};
use crate::ito::*;
use crate::kernel::*;
use crate::lp::twisted_embed;
use crate::model::{FieldModel, QuasiFreeModel, WickBasis};
use crate::process::AdaptedSimpleProcess;
use crate::report::{worst_ratio, Recorder};
use crate::sde::*;

const TAUS: [f64; 5] = [0.0, 0.25, -0.25, 0.75, -0.75];

/// Residuals below this level are treated as exact when forming
/// refinement ratios.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

fn gbm_std(n_t: usize, reserved: usize) -> Result<GbmProcess> {
    build_gbm(GbmSpec::standard(0.5, n_t, reserved))
}

fn u(a: f64, b: f64, cc: f64, d: f64) -> Vec<C64> {
    vec![c(a, b), c(cc, d)]
}

fn pair() -> (Vec<C64>, Vec<C64>) {
    (u(0.8, 0.3, -0.2, 0.5), u(0.1, -0.6, 0.7, 0.2))
}

pub(super) fn gbm(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(5);
    let g = gbm_std(4, 0)?;
    let mut cov = 0.0f64;
    for _ in 0..10 {
        let f = random_vec(&mut rng, 2);
        let h = random_vec(&mut rng, 2);
        cov = cov.max(g.covariance_defect(&f, &h)?);
    }
    r.at_most("covariance", cov, 1e-10);

    let (f, _) = pair();
    let (mut eigen, mut split) = (0.0f64, 0.0f64);
    for tau in [0.25, -0.25, 0.5] {
        eigen = eigen.max(g.eigen_relation_defect(&f, tau)?);
        split = split.max(g.split_relation_defect(&f, tau)?);
    }
    r.at_most("eigen_relation", eigen, 1e-10);
    r.report("split_relation", split);

    let x = g.field(1.0, &f)?;
    let lhs = g.model().state(&matmul(&x.adjoint(), &x)).re;
    let cf = vnorm(&g.spec().c_apply(&f)).powi(2);
    r.at_most("seventeen_fifteenths", rel(lhs, 17.0 / 15.0 * cf), 1e-10);

    let dyadic: Vec<(f64, f64)> = g
        .increment_norms(&f, 2.0)?
        .into_iter()
        .filter(|(w, _)| [0.25, 0.5, 1.0].iter().any(|d| (w - d).abs() < 1e-12))
        .collect();
    r.at_most("increment_slope_gap", (log_log_slope(&dyadic) - 0.5).abs(), 0.05);
    r.report("increment_bound_ratio", g.increment_bound_ratio(&f)?);
    Ok(())
}

pub(super) fn ito_isometry(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut rng = ctx.rng(6);
    let g = gbm_std(4, 0)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = u(h, 0.0, h, 0.0);
    let filt = g.filtration();
    let mut constants = Vec::new();
    for tau in TAUS {
        constants.push(g.isometry_constant(&v, tau)?);
    }
    let mut defect = 0.0f64;
    for _ in 0..20 {
        let vals = (0..4)
            .map(|j| filt.cond_exp(&random_matrix(&mut rng, g.model().dim()), j))
            .collect::<Result<Vec<_>>>()?;
        let f = AdaptedSimpleProcess::scalar(g.times().to_vec(), vals)?;
        for (tau, k) in TAUS.iter().zip(&constants) {
            defect = defect.max(isometry_check(&g, &f, &v, *tau, *k)?.rel_defect);
        }
    }
    r.at_most("isometry_rel_defect", defect, 1e-9);
    let (mut closed, mut split) = (0.0f64, 0.0f64);
    for (tau, k) in TAUS.iter().zip(&constants) {
        let gap = rel(c_tau_closed_form(0.5, *tau), *k);
        r.report(&format!("closed_form_gap_tau_{tau:+.2}"), gap);
        closed = closed.max(gap);
        split = split.max(rel(c_tau_split_form(0.5, *tau), *k));
    }
    r.at_most("closed_form_constant", closed, 1e-9);
    r.at_most("split_form_constant", split, 1e-9);
    Ok(())
}

pub(crate) fn constant_indexed(g: &GbmProcess, v: &[C64]) -> Result<AdaptedSimpleProcess> {
    let basis = real_theta_basis(g.spec())?;
    let n = g.model().dim();
    let vals: Vec<Mat> = real_coefficients(&basis, v).iter().map(|c| identity(n) * *c).collect();
    AdaptedSimpleProcess::indexed(g.times().to_vec(), vec![vals; g.n_t()])
}

/// `E_j` times the coefficients of `v`, with `E_j` built per cell.
fn cell_indexed(g: &GbmProcess, v: &[C64], e: impl Fn(usize) -> Result<Mat>) -> Result<AdaptedSimpleProcess> {
    let coeffs = real_coefficients(&real_theta_basis(g.spec())?, v);
    let vals = (0..g.n_t())
        .map(|j| {
            let e = e(j)?;
            Ok(coeffs.iter().map(|c| &e * *c).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    AdaptedSimpleProcess::indexed(g.times().to_vec(), vals)
}

fn odd_family(g: &GbmProcess) -> Result<ItoFamily> {
    let n = g.model().dim();
    let u1 = u(1.0, 0.0, 0.3, 0.0);
    let u2 = u(0.0, 1.0, 0.2, 0.5);
    let u3 = u(0.6, -0.2, -0.4, 0.1);
    let prod = cell_indexed(g, &u3, |j| Ok(matmul(&g.field_index(j, &u1)?, &g.field_index(j, &u2)?)))?;
    Ok(ItoFamily {
        odd: vec![
            ItoProcess::new(g, Mat::zeros(n, n), constant_indexed(g, &u1)?, None)?,
            ItoProcess::new(g, Mat::zeros(n, n), constant_indexed(g, &u2)?, None)?,
            ItoProcess::new(g, Mat::zeros(n, n), prod, None)?,
        ],
        even: vec![],
    })
}

fn mixed_family(g: &GbmProcess) -> Result<ItoFamily> {
    let n = g.model().dim();
    let u1 = u(1.0, 0.0, 0.3, 0.0);
    let u2 = u(0.0, 1.0, 0.2, 0.5);
    let y = ItoProcess::new(g, Mat::zeros(n, n), constant_indexed(g, &u1)?, None)?;
    let e = ItoProcess::new(g, Mat::zeros(n, n), cell_indexed(g, &u2, |j| g.field_index(j, &u1))?, None)?;
    Ok(ItoFamily { odd: vec![y], even: vec![e] })
}

pub const ITO_GRIDS: [usize; 4] = [2, 3, 4, 5];

pub(super) fn ito_formula(_ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut lin = GrassmannPolynomial::zero(3, 0);
    lin.add_term(&[0], &[], cr(1.0));
    lin.add_term(&[2], &[], cr(-2.0));
    let mut cubic = GrassmannPolynomial::zero(3, 0);
    cubic.add_term(&[0, 1], &[], cr(1.0));
    cubic.add_term(&[0, 1, 2], &[], cr(0.5));
    cubic.add_term(&[1, 2], &[], cr(-1.0));
    let mut mixed = GrassmannPolynomial::zero(1, 1);
    mixed.add_term(&[0], &[0], cr(1.0));
    mixed.add_term(&[], &[0], cr(0.5));

    let odd = |n_t: usize| -> Result<(GbmProcess, ItoFamily)> {
        let g = gbm_std(n_t, 0)?;
        let fam = odd_family(&g)?;
        Ok((g, fam))
    };
    let even = |n_t: usize| -> Result<(GbmProcess, ItoFamily)> {
        let g = gbm_std(n_t, 0)?;
        let fam = mixed_family(&g)?;
        Ok((g, fam))
    };
    let rows = residual_table(&ITO_GRIDS, odd, &lin)?;
    r.at_most("linear_residual", rows.iter().map(|x| x.residual).fold(0.0, f64::max), 1e-10);
    for (name, rows) in [("cubic", residual_table(&ITO_GRIDS, odd, &cubic)?), ("mixed", residual_table(&ITO_GRIDS, even, &mixed)?)] {
        let res: Vec<f64> = rows.iter().map(|x| x.residual).collect();
        for row in &rows {
            r.report(&format!("{name}_residual_nt{}", row.n_t), row.residual);
        }
        r.at_most(&format!("{name}_refinement_ratio"), worst_ratio(&res, RESIDUAL_FLOOR), 0.8);
    }
    Ok(())
}

fn moment_points(n_t: usize) -> Vec<Vec<(usize, Vec<C64>)>> {
    let (v, w) = pair();
    let half = n_t / 2;
    vec![
        vec![(n_t, v.clone()), (half, w.clone())],
        vec![(half, v.clone()), (n_t, w.clone())],
        vec![(n_t, v.clone()), (n_t, w.clone())],
        vec![(n_t, v.clone()), (half, w.clone()), (n_t, w.clone()), (1, v)],
    ]
}

pub const GIRSANOV_GRIDS: [usize; 3] = [2, 3, 4];

pub(super) fn girsanov(_ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let (v, w) = pair();
    let mut w_ = [0.0f64; 4];
    let mut moments = Vec::new();
    for n_t in GIRSANOV_GRIDS {
        let g = gbm_std(n_t, 1)?;
        let h = reserved_linear_integrand(&g, 0, 0.3, &w)?;
        let z = stochastic_exponential(&g, &h, 1.0)?;
        w_[0] = w_[0].max(z.report.series_vs_matrix);
        let path = stochastic_exponential_path(&g, &h, Compensator::Bracket)?;
        w_[1] = w_[1].max(martingale_defect(&g.filtration(), &path)?);
        let shift = girsanov_shift(&g, h)?;
        w_[2] = w_[2].max(shift.martingale_defect(&v)?.max(shift.martingale_defect(&w)?));
        w_[3] = w_[3].max(shift.bracket_defect(&v, &w)?);
        let m = shift.moment_residual(&moment_points(n_t))?;
        r.report(&format!("moment_residual_nt{n_t}"), m);
        moments.push(m);
    }
    r.at_most("moment_refinement_ratio", worst_ratio(&moments, RESIDUAL_FLOOR), 0.8);
    r.at_most("series_vs_matrix", w_[0], 1e-10);
    r.at_most("z_martingale_defect", w_[1], 1e-9);
    r.at_most("shifted_martingale_defect", w_[2], 1e-9);
    r.at_most("bracket_preservation", w_[3], 1e-10);
    Ok(())
}

fn sde_spec(h_dim: usize, n_t: usize) -> GbmSpec {
    let c = if h_dim == 2 { vec![1.0] } else { vec![1.0, 0.7] };
    GbmSpec { mu: 0.5, n_t, horizon: 1.0, h_dim, c, n_reserved: 0 }
}

fn a2() -> Vec<Vec<f64>> {
    vec![vec![-0.7, 0.3], vec![-0.3, -0.5]]
}

fn a4() -> Vec<Vec<f64>> {
    vec![
        vec![-0.5, 0.2, 0.0, 0.1],
        vec![-0.2, -0.4, 0.1, 0.0],
        vec![0.0, -0.1, -0.6, 0.3],
        vec![0.1, 0.0, -0.3, -0.5],
    ]
}

pub(crate) fn cubic_drift(eps: f64) -> Result<DriftSpec> {
    DriftSpec::cubic(
        a4(),
        eps,
        &[(0, [1, 2, 3], 1.0), (1, [0, 2, 3], -0.8), (2, [0, 1, 3], 0.6), (3, [0, 1, 2], 1.2), (0, [0, 1, 2], 0.5)],
    )
}

/// Two-point and one four-point test products of field values.
pub(crate) fn battery() -> Vec<Vec<FieldPoint>> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            if a < b {
                out.push(vec![(1.0, a), (1.0, b)]);
            }
            out.push(vec![(0.0, a), (1.0, b)]);
        }
    }
    out.push(vec![(0.0, 0), (0.0, 1), (1.0, 2), (1.0, 3)]);
    out
}

fn initial(fg: &FormalGbm) -> Vec<Formal> {
    (0..fg.h_dim()).map(|a| fg.initial(a)).collect()
}

pub const WEAK_GRIDS: [usize; 4] = [1, 2, 3, 4];

pub(super) fn sde(_ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let g = build_gbm(GbmSpec { n_reserved: 2, ..sde_spec(2, 3) })?;
    let basis = real_theta_basis(g.spec())?;
    let psi0 = vec![g.reserved_generator(0)?, g.reserved_generator(1)? * c(0.3, -0.4)];
    let sol = sde_strong_solve(&g, &DriftSpec::zero(2), &psi0, 1e-12)?;
    let mut zero = 0.0f64;
    for k in 0..=g.n_t() {
        for b in 0..2 {
            let expected = &psi0[b] + g.field_index(k, &basis[b])?;
            zero = zero.max(op_norm(&(&sol.path[k][b] - &expected)));
        }
    }
    r.at_most("zero_drift_gap", zero, 1e-9);

    let drift = DriftSpec::linear(a2())?;
    let sol = sde_strong_solve(&g, &drift, &psi0, 1e-13)?;
    let noise = operator_noise(&g)?;
    let closed = linear_scheme_closed_form(&a2(), g.delta(), &psi0, &noise);
    r.at_most("linear_drift_gap", path_gap(&sol.path, &closed), 1e-9);
    let mut formal = 0.0f64;
    let mut ou = Vec::new();
    for n_t in [2, 4, 8, 16] {
        let fg = FormalGbm::new(sde_spec(2, n_t), 0.5)?;
        let noise = formal_noise(&fg);
        let s = sde_strong_solve_formal(&fg, &drift, &initial(&fg), 1e-13)?;
        let closed = linear_scheme_closed_form(&a2(), fg.delta(), &initial(&fg), &noise);
        formal = formal.max(formal_path_gap(&s.path, &closed, fg.weights()));
        ou.push(formal_path_gap(&s.path, &ou_closed_form(&a2(), fg.delta(), &initial(&fg), &noise), fg.weights()));
    }
    r.at_most("linear_drift_formal_gap", formal, 1e-9);
    r.report("linear_drift_ou_gap_ratio", worst_ratio(&ou, RESIDUAL_FLOOR));

    let fg = FormalGbm::new(sde_spec(4, 4), 0.5)?;
    let sol = sde_strong_solve_formal(&fg, &cubic_drift(0.5)?, &initial(&fg), 1e-8)?;
    r.at_most("cubic_picard_residual", sol.residual, 1e-8);
    r.at_most("cubic_picard_iterations", sol.iterations as f64, 30.0);

    let h0 = vec![Formal::zero(); 4];
    let opts = WeakOptions { density: Density::Recursion, propagator: Propagator::Ou };
    let mut weak = Vec::new();
    for n_t in WEAK_GRIDS {
        let fg = FormalGbm::new(sde_spec(4, n_t), 0.5)?;
        let w = sde_weak_represent(&fg, &cubic_drift(0.5)?, &h0, &battery(), opts)?;
        r.report(&format!("weak_residual_nt{n_t}"), w.max_residual);
        weak.push(w.max_residual);
    }
    r.at_most("weak_refinement_ratio", worst_ratio(&weak, RESIDUAL_FLOOR), 0.8);
    Ok(())
}

/// `t` with `e^{-2t} = 0.1 mu^{8/p - 4} (p - 1)`.
pub fn prescribed_time(mu: f64, p: f64) -> f64 {
    -0.5 * (0.1 * mu.powf(8.0 / p - 4.0) * (p - 1.0)).ln()
}

pub(super) fn hyper(ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mu = 0.5;
    let p = 4.0 / 3.0;
    let m = QuasiFreeModel::scalar(mu, 2)?;
    let wb = WickBasis::new(&m)?;
    let t = 0.7;
    let mut identity_gap = 0.0f64;
    for mask in 0..wb.len() {
        let x = wb.monomial(mask);
        let n = WickBasis::legs_of(mask).len() as f64;
        for tau in [-0.6, -0.25, 0.0, 0.25, 0.6] {
            let lhs = twisted_embed(&m, x, 2.0, tau)?;
            let rhs = ou_twisted_map(&m, &wb, &twisted_embed(&m, x, p, tau)?, t, p, 2.0, tau)? * cr((t * n).exp());
            identity_gap = identity_gap.max(max_abs_diff(&lhs, &rhs) / frobenius(&lhs));
        }
    }
    r.at_most("ou_twisted_identity", identity_gap, 1e-10);

    let seed = ctx.sub_seed(10);
    let tc = prescribed_time(mu, p);
    let est = hyper_norm_estimate(&m, &wb, tc, p, 2.0, 500, seed)?;
    r.report("prescribed_time", tc);
    r.at_most("norm_at_prescribed_time", est.estimate, 1.0 + 1e-6);
    let t_star = empirical_threshold(&m, &wb, p, 2.0, 500, seed, 5.0, 1e-6)?.unwrap_or(f64::INFINITY);
    r.at_most("empirical_threshold", t_star, 5.0);
    r.report("norm_at_zero", hyper_norm_estimate(&m, &wb, 0.0, p, 2.0, 500, seed)?.estimate);
    Ok(())
}
