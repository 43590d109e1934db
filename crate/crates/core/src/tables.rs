//! Machine-readable tables behind the `norms`, `ito`, `girsanov`, `sde` and
//! `phi4` subcommands.

use std::io::Write;

use serde::Serialize;

use crate::config::{ModelParams, Phi4Params};
use crate::error::{Error, Result};
use crate::formal::{Formal, FormalGbm};
use crate::gbm::{build_gbm, c_tau_closed_form, c_tau_split_form, GbmSpec};
use crate::girsanov::*;
use crate::ito::{isometry_check, real_theta_basis};
use crate::kernel::{random_matrix, random_vec, C64};
use crate::lp::twisted_norm_report;
use crate::model::QuasiFreeModel;
use crate::phi4::{covariance_growth, difference_decay, scan, DecayFit, GrowthFit, LatticeSpec, ScanRow};
use crate::process::AdaptedSimpleProcess;
use crate::sde::{sde_strong_solve_formal, sde_weak_represent, Density, Propagator, WeakOptions};
use crate::suites::calculus::{battery, cubic_drift};
use crate::suites::Ctx;

pub const NORM_EXPONENTS: [f64; 6] = [1.0, 4.0 / 3.0, 2.0, 3.0, 4.0, f64::INFINITY];
pub const NORM_SAMPLES: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub sample: usize,
    pub p: f64,
    pub value: f64,
    pub endpoint_max: f64,
    pub interior_max: f64,
    pub guard_ok: bool,
}

pub fn norms(m: &ModelParams, ctx: &Ctx) -> Result<Vec<NormRow>> {
    let model = QuasiFreeModel::scalar(m.mu, m.d)?;
    let mut rng = ctx.rng(100);
    let mut rows = Vec::new();
    for sample in 0..NORM_SAMPLES {
        let x = random_matrix(&mut rng, model.dim());
        for p in NORM_EXPONENTS {
            let r = twisted_norm_report(&model, &x, p)?;
            rows.push(NormRow {
                sample,
                p,
                value: r.value,
                endpoint_max: r.endpoint_max,
                interior_max: r.interior_max,
                guard_ok: r.guard_ok,
            });
        }
    }
    Ok(rows)
}

pub fn norms_csv(rows: &[NormRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "sample,p,value,endpoint_max,interior_max,guard_ok")?;
    for r in rows {
        writeln!(w, "{},{},{:.17e},{:.17e},{:.17e},{}", r.sample, r.p, r.value, r.endpoint_max, r.interior_max, r.guard_ok)?;
    }
    Ok(())
}

fn gbm_spec(m: &ModelParams) -> GbmSpec {
    GbmSpec { mu: m.mu, n_t: m.n_t, horizon: m.horizon, h_dim: m.h_dim, c: vec![1.0; m.h_dim / 2], n_reserved: m.n_reserved }
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometryRow {
    pub tau: f64,
    /// Read off a single cell of the realization.
    pub constant: f64,
    pub closed_form: f64,
    pub split_form: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_defect: f64,
}

pub const ISOMETRY_TAUS: [f64; 5] = [-0.75, -0.25, 0.0, 0.25, 0.75];

/// Isometry along the first real basis vector for one seeded adapted
/// process.
pub fn ito(m: &ModelParams, ctx: &Ctx) -> Result<Vec<IsometryRow>> {
    let g = build_gbm(gbm_spec(m))?;
    let v = real_theta_basis(g.spec())?.swap_remove(0);
    let filt = g.filtration();
    let mut rng = ctx.rng(101);
    let vals = (0..g.n_t())
        .map(|j| filt.cond_exp(&random_matrix(&mut rng, g.model().dim()), j))
        .collect::<Result<Vec<_>>>()?;
    let f = AdaptedSimpleProcess::scalar(g.times().to_vec(), vals)?;
    ISOMETRY_TAUS
        .iter()
        .map(|&tau| {
            let k = g.isometry_constant(&v, tau)?;
            let chk = isometry_check(&g, &f, &v, tau, k)?;
            Ok(IsometryRow {
                tau,
                constant: k,
                closed_form: c_tau_closed_form(m.mu, tau),
                split_form: c_tau_split_form(m.mu, tau),
                lhs: chk.lhs,
                rhs: chk.rhs,
                rel_defect: chk.rel_defect,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GirsanovRow {
    pub n_t: usize,
    pub lambda: f64,
    pub series_vs_matrix: f64,
    pub inverse_defect: f64,
    pub z_martingale_defect: f64,
    pub shifted_martingale_defect: f64,
    pub bracket_defect: f64,
    pub moment_residual: f64,
}

pub const GIRSANOV_LAMBDA: f64 = 0.3;

/// Shift by `H(v) = lambda theta_0 <w, v>` on grids `1..=n_t`.
pub fn girsanov(m: &ModelParams, ctx: &Ctx) -> Result<Vec<GirsanovRow>> {
    if m.n_reserved == 0 {
        return Err(Error::Config("the girsanov table needs model.n_reserved >= 1".into()));
    }
    let mut rng = ctx.rng(102);
    let v: Vec<C64> = random_vec(&mut rng, m.h_dim);
    let w: Vec<C64> = random_vec(&mut rng, m.h_dim);
    (1..=m.n_t)
        .map(|n_t| {
            let g = build_gbm(GbmSpec { n_t, ..gbm_spec(m) })?;
            let h = reserved_linear_integrand(&g, 0, GIRSANOV_LAMBDA, &w)?;
            let z = stochastic_exponential(&g, &h, g.times()[n_t])?;
            let path = stochastic_exponential_path(&g, &h, Compensator::Bracket)?;
            let zm = martingale_defect(&g.filtration(), &path)?;
            let shift = girsanov_shift(&g, h)?;
            let half = (n_t / 2).max(1);
            let points = vec![
                vec![(n_t, v.clone()), (half, w.clone())],
                vec![(n_t, v.clone()), (n_t, w.clone())],
                vec![(n_t, v.clone()), (half, w.clone()), (n_t, w.clone()), (1, v.clone())],
            ];
            Ok(GirsanovRow {
                n_t,
                lambda: GIRSANOV_LAMBDA,
                series_vs_matrix: z.report.series_vs_matrix,
                inverse_defect: z.report.inverse_defect,
                z_martingale_defect: zm,
                shifted_martingale_defect: shift.martingale_defect(&v)?.max(shift.martingale_defect(&w)?),
                bracket_defect: shift.bracket_defect(&v, &w)?,
                moment_residual: shift.moment_residual(&points)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SdeRow {
    pub n_t: usize,
    pub picard_iterations: usize,
    pub picard_residual: f64,
    pub weak_residual: f64,
}

/// Cubic-drift SDE on `h = C^4` over grids `1..=n_t`.
pub fn sde(m: &ModelParams) -> Result<Vec<SdeRow>> {
    let drift = cubic_drift(0.5)?;
    let opts = WeakOptions { density: Density::Recursion, propagator: Propagator::Ou };
    (1..=m.n_t)
        .map(|n_t| {
            let spec = GbmSpec { mu: m.mu, n_t, horizon: m.horizon, h_dim: 4, c: vec![1.0, 0.7], n_reserved: 0 };
            let fg = FormalGbm::new(spec, 0.5)?;
            let init: Vec<Formal> = (0..fg.h_dim()).map(|a| fg.initial(a)).collect();
            let strong = sde_strong_solve_formal(&fg, &drift, &init, 1e-8)?;
            let weak = sde_weak_represent(&fg, &drift, &vec![Formal::zero(); 4], &battery(), opts)?;
            Ok(SdeRow {
                n_t,
                picard_iterations: strong.iterations,
                picard_residual: strong.residual,
                weak_residual: weak.max_residual,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Phi4Fit {
    pub theta: f64,
    pub growth: GrowthFit,
    /// Absent with fewer than three cutoffs.
    pub decay: Option<DecayFit>,
}

fn lattice(p: &Phi4Params, theta: f64) -> Result<LatticeSpec> {
    LatticeSpec::new(theta, p.cutoffs.clone())
}

pub fn phi4_scan(p: &Phi4Params) -> Result<Vec<ScanRow>> {
    scan(&lattice(p, p.thetas[0])?, &p.thetas, &p.taus)
}

/// Growth over all cutoffs and decay of the lower cutoffs against the
/// largest, per `theta`.
pub fn phi4_fits(p: &Phi4Params) -> Result<Vec<Phi4Fit>> {
    let mut cuts = p.cutoffs.clone();
    cuts.sort_by(f64::total_cmp);
    let (&t, ss) = cuts.split_last().expect("validated cutoffs");
    p.thetas
        .iter()
        .map(|&theta| {
            let spec = lattice(p, theta)?;
            let decay = if ss.len() >= 2 { Some(difference_decay(&spec, ss, t)?) } else { None };
            Ok(Phi4Fit { theta, growth: covariance_growth(&spec, &cuts)?, decay })
        })
        .collect()
}
