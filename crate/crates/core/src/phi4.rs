//! Momentum-lattice diagnostics for the Wick quartic of a cut-off
//! two-component fermion field on the torus, and tiny-cutoff operator
//! checks on an exact quasi-free model.
//!
//! Lattice conventions: `g_t(k) = chi(|k|/t) (1 + |k|^2)^(theta - 1)` on
//! `Z^2`, `C_t = sum_k g_t(k)` and
//! `S_t = sum_{k1 + k2 + k3 + k4 = 0} prod_i g_t(k_i)`.

use std::io::Write;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::DEFAULT_MODE_CAP;
use crate::gbm::log_log_slope;
use crate::kernel::{cr, frobenius, op_norm, C64, Mat};
use crate::lp::{haagerup_norm, twisted_embed};
use crate::model::{wick, FieldModel, QuasiFreeModel};

/// Largest box radius accepted by the brute-force quadruple sum.
pub const BRUTE_RADIUS_MAX: usize = 8;
/// Largest mode set accepted by [`tiny_cutoff_v`].
pub const TINY_MODES_MAX: usize = 3;

/// Cutoff profile. Both variants equal 1 on `[0, start]`, vanish on
/// `[1, inf)` and are smooth in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Chi {
    /// Plateau on `[0, 1/2]`.
    Smooth,
    Plateau { start: f64 },
}

impl Default for Chi {
    fn default() -> Self {
        Chi::Smooth
    }
}

fn bump_tail(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        (-1.0 / y).exp()
    }
}

impl Chi {
    pub fn start(&self) -> f64 {
        match self {
            Chi::Smooth => 0.5,
            Chi::Plateau { start } => *start,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = self.start();
        if x <= a {
            return 1.0;
        }
        if x >= 1.0 {
            return 0.0;
        }
        let u = (x - a) / (1.0 - a);
        let (l, r) = (bump_tail(1.0 - u), bump_tail(u));
        l / (l + r)
    }

    /// `chi(|k|/t)` with `|k|^2 = k2`; at `t = 0` this is `1_{k = 0}`.
    pub fn weight(&self, k2: i64, t: f64) -> f64 {
        if t == 0.0 {
            return if k2 == 0 { 1.0 } else { 0.0 };
        }
        self.eval((k2 as f64).sqrt() / t)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LatticeSpec {
    pub theta: f64,
    pub chi: Chi,
    pub cutoffs: Vec<f64>,
    pub mode_box: usize,
    pub tau: f64,
    /// Free parameter of the decay exponent `nu = (1 - 2 eps - 3 theta)/(1 + eps)`.
    pub eps: f64,
    /// Symbol of the scalar quasi-free model carrying one field leg.
    pub mu: f64,
    pub spins: usize,
}

impl LatticeSpec {
    pub fn new(theta: f64, cutoffs: Vec<f64>) -> Result<Self> {
        let mode_box = cutoffs.iter().fold(0.0f64, |m, t| m.max(*t)).ceil() as usize;
        let spec = Self {
            theta,
            chi: Chi::Smooth,
            cutoffs,
            mode_box,
            tau: 0.0,
            eps: 0.05,
            mu: 0.5,
            spins: 2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.theta) {
            return invalid(format!("theta = {} outside [0, 1/2)", self.theta));
        }
        let a = self.chi.start();
        if !(a > 0.0 && a < 1.0) {
            return invalid(format!("cutoff plateau end {a} outside (0, 1)"));
        }
        if let Some(t) = self.cutoffs.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return invalid(format!("cutoff {t} is not a nonnegative number"));
        }
        if self.cutoffs.iter().any(|t| *t > self.mode_box as f64) {
            return invalid(format!("mode box {} smaller than a cutoff", self.mode_box));
        }
        if self.tau.abs() > 0.75 {
            return invalid(format!("twist {} outside [-3/4, 3/4]", self.tau));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return invalid(format!("eps = {} must be nonnegative", self.eps));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return invalid(format!("symbol {} outside (0, 1)", self.mu));
        }
        if self.spins == 0 {
            return invalid("at least one spin component is required");
        }
        Ok(())
    }

    pub fn nu_eps(&self) -> f64 {
        (1.0 - 2.0 * self.eps - 3.0 * self.theta) / (1.0 + self.eps)
    }

    /// `(1 + k^2)^(theta - 1) chi(|k|/t)`.
    pub fn g(&self, k: [i64; 2], t: f64) -> f64 {
        let k2 = k[0] * k[0] + k[1] * k[1];
        self.chi.weight(k2, t) * (1.0 + k2 as f64).powf(self.theta - 1.0)
    }

    fn check_cutoff(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return invalid(format!("cutoff {t} is not a nonnegative number"));
        }
        if t > self.mode_box as f64 {
            return invalid(format!("cutoff {t} exceeds the mode box {}", self.mode_box));
        }
        Ok(())
    }
}

/// Values of `g_t` on the square `[-radius, radius]^2`, row-major in `k_x`.
#[derive(Clone, Debug)]
pub struct Profile {
    pub radius: usize,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn at(&self, k: [i64; 2]) -> f64 {
        let r = self.radius as i64;
        if k[0].abs() > r || k[1].abs() > r {
            return 0.0;
        }
        self.values[((k[0] + r) * (2 * r + 1) + k[1] + r) as usize]
    }
}

/// Smallest radius containing the support of `g_t`.
pub fn support_radius(t: f64) -> usize {
    t.ceil() as usize
}

pub fn profile(spec: &LatticeSpec, t: f64) -> Result<Profile> {
    spec.check_cutoff(t)?;
    let radius = support_radius(t).min(spec.mode_box);
    let r = radius as i64;
    let mut values = Vec::with_capacity((2 * radius + 1).pow(2));
    for kx in -r..=r {
        for ky in -r..=r {
            values.push(spec.g([kx, ky], t));
        }
    }
    Ok(Profile { radius, values })
}

pub fn covariance_sum(spec: &LatticeSpec, t: f64) -> Result<f64> {
    Ok(profile(spec, t)?.values.iter().sum())
}

/// Smallest FFT side that avoids wrap-around for a fourfold convolution.
pub fn min_grid(radius: usize) -> usize {
    4 * radius + 1
}

/// `sum_{k1+..+k4 = 0} prod g(k_i)` as `N^-2 sum_x ghat(x)^4` on an
/// `N x N` periodic grid.
pub fn zero_momentum_sum_fft(p: &Profile, n: usize) -> Result<f64> {
    if n < min_grid(p.radius) {
        return invalid(format!(
            "grid side {n} aliases a profile of radius {} (need at least {})",
            p.radius,
            min_grid(p.radius)
        ));
    }
    let r = p.radius as i64;
    let ni = n as i64;
    let mut grid = vec![Complex::new(0.0, 0.0); n * n];
    for kx in -r..=r {
        for ky in -r..=r {
            let ix = kx.rem_euclid(ni) as usize;
            let iy = ky.rem_euclid(ni) as usize;
            grid[ix * n + iy] = Complex::new(p.at([kx, ky]), 0.0);
        }
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let rows = |buf: &mut Vec<Complex<f64>>| {
        buf.par_chunks_mut(n).for_each(|row| fft.process(row));
    };
    rows(&mut grid);
    let mut tr = vec![Complex::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            tr[j * n + i] = grid[i * n + j];
        }
    }
    rows(&mut tr);
    let total: f64 = tr.par_iter().map(|z| (z * z * z * z).re).sum();
    Ok(total / (n * n) as f64)
}

/// Direct quadruple sum over the profile box.
pub fn zero_momentum_sum_brute(p: &Profile) -> Result<f64> {
    if p.radius > BRUTE_RADIUS_MAX {
        return Err(Error::Resource(format!(
            "brute-force quadruple sum limited to radius {BRUTE_RADIUS_MAX}"
        )));
    }
    let r = p.radius as i64;
    let ks: Vec<[i64; 2]> = (-r..=r).flat_map(|x| (-r..=r).map(move |y| [x, y])).collect();
    let total = ks
        .par_iter()
        .map(|a| {
            let ga = p.at(*a);
            let mut acc = 0.0;
            for b in &ks {
                let gb = ga * p.at(*b);
                if gb == 0.0 {
                    continue;
                }
                for c in &ks {
                    acc += gb * p.at(*c) * p.at([-a[0] - b[0] - c[0], -a[1] - b[1] - c[1]]);
                }
            }
            acc
        })
        .sum();
    Ok(total)
}

pub fn quartic_sum(spec: &LatticeSpec, t: f64) -> Result<f64> {
    let p = profile(spec, t)?;
    let n = min_grid(p.radius).next_power_of_two();
    zero_momentum_sum_fft(&p, n)
}

/// Twisted `L^2` norms squared of the two leg fields `beta(e + 0)` and
/// `beta(0 + e)` in the one-mode scalar model.
pub fn leg_constants(mu: f64, tau: f64) -> Result<(f64, f64)> {
    let model = QuasiFreeModel::scalar(mu, 1)?;
    let norm2 = |f: [f64; 2]| -> Result<f64> {
        let b = model.beta(&[cr(f[0]), cr(f[1])])?;
        Ok(haagerup_norm(&twisted_embed(&model, &b, 2.0, tau)?, 2.0)?.powi(2))
    };
    Ok((norm2([1.0, 0.0])?, norm2([0.0, 1.0])?))
}

/// `C_tau` in `||T_tau(V_t)||_2^2 = C_tau S_t`.
pub fn quartic_constant(mu: f64, tau: f64, spins: usize) -> Result<f64> {
    let (kb, k) = leg_constants(mu, tau)?;
    let n = spins as f64;
    Ok(2.0 * n * (n - 1.0) * kb * kb * k * k)
}

pub fn v_l2_norm_sq(spec: &LatticeSpec, t: f64) -> Result<f64> {
    Ok(quartic_constant(spec.mu, spec.tau, spec.spins)? * quartic_sum(spec, t)?)
}

/// `||T_tau(V_t - V_s)||_2^2`.
pub fn v_l2_difference(spec: &LatticeSpec, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return invalid(format!("s = {s} exceeds t = {t}"));
    }
    if s == t {
        spec.check_cutoff(t)?;
        return Ok(0.0);
    }
    let c = quartic_constant(spec.mu, spec.tau, spec.spins)?;
    Ok(c * (quartic_sum(spec, t)? - quartic_sum(spec, s)?))
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub points: Vec<(f64, f64)>,
    /// Slope of `ln C_t` against `ln t`.
    pub power_slope: f64,
    /// Slope of `C_t` against `ln t`.
    pub log_slope: f64,
    /// Slope of `ln(C_2t - C_t)` against `ln t`; insensitive to the additive
    /// constant in `C_t`.
    pub increment_slope: f64,
    pub prefactor: f64,
    pub log_regime: bool,
}

pub fn covariance_growth(spec: &LatticeSpec, ts: &[f64]) -> Result<GrowthFit> {
    if ts.len() < 2 || ts.iter().any(|t| *t <= 0.0) {
        return invalid("growth fit needs at least two positive cutoffs");
    }
    let points: Vec<(f64, f64)> =
        ts.par_iter().map(|t| Ok((*t, covariance_sum(spec, *t)?))).collect::<Result<_>>()?;
    let logs: Vec<(f64, f64)> = points.iter().map(|(t, c)| (t.ln(), c.ln())).collect();
    let (power_slope, icpt) = linear_fit(&logs);
    let (log_slope, _) = linear_fit(&points.iter().map(|(t, c)| (t.ln(), *c)).collect::<Vec<_>>());
    let mut incs = Vec::with_capacity(ts.len());
    for (t, c) in &points {
        if let Some(c2) = points.iter().find(|p| p.0 == 2.0 * t) {
            incs.push((*t, c2.1 - c));
        }
    }
    let increment_slope = if incs.len() >= 2 { log_log_slope(&incs) } else { f64::NAN };
    Ok(GrowthFit {
        points,
        power_slope,
        log_slope,
        increment_slope,
        prefactor: icpt.exp(),
        log_regime: spec.theta == 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub t: f64,
    pub points: Vec<(f64, f64)>,
    /// Slope of `ln ||T(V_t - V_s)||_2^2` against `ln s`.
    pub slope: f64,
    pub prefactor: f64,
    pub nu_fit: f64,
    pub nu_eps: f64,
}

pub fn difference_decay(spec: &LatticeSpec, ss: &[f64], t: f64) -> Result<DecayFit> {
    if ss.len() < 2 || ss.iter().any(|s| *s <= 0.0 || *s >= t) {
        return invalid("decay fit needs at least two cutoffs in (0, t)");
    }
    let c = quartic_constant(spec.mu, spec.tau, spec.spins)?;
    let st = quartic_sum(spec, t)?;
    let points: Vec<(f64, f64)> = ss
        .par_iter()
        .map(|s| Ok((*s, c * (st - quartic_sum(spec, *s)?))))
        .collect::<Result<_>>()?;
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return invalid(format!("nonpositive difference {} at s = {}", p.1, p.0));
    }
    let slope = log_log_slope(&points);
    let logs: Vec<(f64, f64)> = points.iter().map(|(s, d)| (s.ln(), d.ln())).collect();
    let (_, icpt) = linear_fit(&logs);
    Ok(DecayFit {
        t,
        points,
        slope,
        prefactor: icpt.exp(),
        nu_fit: -slope / 2.0,
        nu_eps: spec.nu_eps(),
    })
}

/// Constants entering the `L^p` growth bound:
/// `b(s) = s^(4 theta) + c h(p) s^(-nu)` with `h(p) = (p/2)^2`.
#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub theta: f64,
    pub c: f64,
    pub nu: f64,
    pub decay: DecayFit,
}

/// Calibrates on the lattice cutoffs: the largest is `t`, the rest are `s`.
pub fn calibrate(spec: &LatticeSpec) -> Result<Calibration> {
    let mut cuts = spec.cutoffs.clone();
    cuts.sort_by(f64::total_cmp);
    let Some((&t, ss)) = cuts.split_last() else {
        return invalid("no cutoffs to calibrate on");
    };
    let decay = difference_decay(spec, ss, t)?;
    let nu = decay.nu_fit;
    if !(nu > 0.0) {
        return invalid(format!("fitted decay exponent {nu} is not positive"));
    }
    Ok(Calibration { theta: spec.theta, c: decay.prefactor.sqrt(), nu, decay })
}

pub fn hyper_factor(p: f64) -> f64 {
    (p / 2.0).powi(2)
}

#[derive(Clone, Debug, Serialize)]
pub struct LpGrowth {
    pub p: f64,
    pub bound: f64,
    pub s_opt: f64,
    pub exponent: f64,
    pub hyper_factor: f64,
    pub log_regime: bool,
}

const S_SEARCH_MAX: f64 = 1e12;

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    (a + b) / 2.0
}

pub fn v_lp_growth(cal: &Calibration, p: f64) -> Result<LpGrowth> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::UnsupportedExponent(format!("p = {p} must lie in [2, inf)")));
    }
    let (th, nu) = (cal.theta, cal.nu);
    let h = hyper_factor(p);
    let log_regime = th == 0.0;
    let head = |s: f64| if log_regime { (1.0 + s.ln()).powi(2) } else { s.powf(4.0 * th) };
    let bound_at = |s: f64| head(s) + cal.c * h * s.powf(-nu);
    let s_opt = if log_regime {
        golden_min(|u| bound_at(u.exp()), 0.0, S_SEARCH_MAX.ln()).exp()
    } else {
        (nu * cal.c * h / (4.0 * th)).powf(1.0 / (4.0 * th + nu)).max(1.0)
    };
    Ok(LpGrowth {
        p,
        bound: bound_at(s_opt),
        s_opt,
        exponent: 8.0 * th / (4.0 * th + nu),
        hyper_factor: h,
        log_regime,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionSeries {
    pub lambda: f64,
    pub p: f64,
    pub sum: f64,
    /// The `n >= 1` part of the series; infinite when it overflows.
    pub tail: f64,
    pub log_tail: f64,
    pub terms: usize,
    pub converged: bool,
    pub hypothesis_ok: bool,
    pub exponent: f64,
    pub c: f64,
    pub lambda_star: f64,
}

/// Terms summed exactly before switching to a Stirling integral.
const SERIES_EXACT_TERMS: usize = 100_000;
const SERIES_CUT: f64 = 40.0;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// The series `sum_n (|lambda| c)^n (p n)^(g n) / n!`.
#[derive(Clone, Copy, Debug)]
struct Series {
    log_tail: f64,
    terms: usize,
    converged: bool,
}

fn series(lambda: f64, c: f64, g: f64, p: f64) -> Series {
    let x = lambda.abs() * c;
    if x == 0.0 {
        return Series { log_tail: f64::NEG_INFINITY, terms: 1, converged: true };
    }
    // Ratio of consecutive terms tends to zero for g < 1, to x p e for g = 1.
    let converged = g < 1.0 || (g == 1.0 && x * p * std::f64::consts::E < 1.0);
    if !converged {
        return Series { log_tail: f64::INFINITY, terms: 0, converged };
    }
    let lx = x.ln();
    let (mut lfact, mut lt_sum, mut prev) = (0.0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for n in 1..=SERIES_EXACT_TERMS {
        let nf = n as f64;
        lfact += nf.ln();
        let lt = nf * lx + g * nf * (p * nf).ln() - lfact;
        lt_sum = log_add(lt_sum, lt);
        if lt < prev && lt < lt_sum - SERIES_CUT {
            return Series { log_tail: lt_sum, terms: n, converged };
        }
        prev = lt;
    }
    // Log-concave tail: trapezoid rule on a geometric grid with Stirling.
    let l = |n: f64| {
        n * lx + g * n * (p * n).ln() - (n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln())
    };
    let mut n0 = SERIES_EXACT_TERMS as f64;
    let mut l0 = l(n0);
    loop {
        let n1 = n0 * 1.001;
        let l1 = l(n1);
        let seg = (n1 - n0).ln() + log_add(l0, l1) - 2f64.ln();
        lt_sum = log_add(lt_sum, seg);
        if l1 < l0 && l1 < lt_sum - SERIES_CUT {
            return Series { log_tail: lt_sum, terms: n1 as usize, converged };
        }
        if !n1.is_finite() {
            return Series { log_tail: f64::INFINITY, terms: usize::MAX, converged: false };
        }
        (n0, l0) = (n1, l1);
    }
}

/// Coefficient `c` with `c p^g` equal to the growth bound at `p = 2`.
pub fn series_constant(cal: &Calibration) -> Result<(f64, f64)> {
    let g2 = v_lp_growth(cal, 2.0)?;
    Ok((g2.bound / 2f64.powf(g2.exponent), g2.exponent))
}

fn lambda_star(c: f64, g: f64, p: f64) -> f64 {
    let below = |l: f64| series(l, c, g, p).log_tail < 0.0;
    let mut hi = 1.0;
    while below(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = (lo + hi) / 2.0;
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn partition_series(cal: &Calibration, lambda: f64, p: f64) -> Result<PartitionSeries> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::UnsupportedExponent(format!("p = {p} must lie in [1, inf)")));
    }
    let (c, g) = series_constant(cal)?;
    let r = series(lambda, c, g, p);
    let tail = r.log_tail.exp();
    Ok(PartitionSeries {
        lambda,
        p,
        sum: 1.0 + tail,
        tail,
        log_tail: r.log_tail,
        terms: r.terms,
        converged: r.converged,
        hypothesis_ok: 7.0 * cal.theta < 1.0,
        exponent: g,
        c,
        lambda_star: lambda_star(c, g, p),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearFit {
    pub lambdas: Vec<f64>,
    /// Tail over `|lambda|` at `p = 1`.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub all_converged: bool,
}

pub fn partition_linear_fit(cal: &Calibration, lambdas: &[f64]) -> Result<LinearFit> {
    let rows: Vec<PartitionSeries> =
        lambdas.par_iter().map(|l| partition_series(cal, *l, 1.0)).collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.lambda != 0.0)
        .map(|r| r.tail / r.lambda.abs())
        .collect();
    Ok(LinearFit {
        lambdas: lambdas.to_vec(),
        min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
        all_converged: rows.iter().all(|r| r.converged),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub theta: f64,
    pub tau: f64,
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

/// `||T_tau(V_t - V_s)||_2^2` over all `s < t` pairs of the lattice cutoffs,
/// for every `(theta, tau)`.
pub fn scan(spec: &LatticeSpec, thetas: &[f64], taus: &[f64]) -> Result<Vec<ScanRow>> {
    let mut cuts = spec.cutoffs.clone();
    cuts.sort_by(f64::total_cmp);
    let mut jobs = Vec::new();
    for &theta in thetas {
        for &tau in taus {
            for (i, &s) in cuts.iter().enumerate() {
                for &t in &cuts[i + 1..] {
                    jobs.push((theta, tau, s, t));
                }
            }
        }
    }
    jobs.par_iter()
        .map(|&(theta, tau, s, t)| {
            let sp = LatticeSpec { theta, tau, ..spec.clone() };
            sp.validate()?;
            Ok(ScanRow { theta, tau, s, t, value: v_l2_difference(&sp, s, t)? })
        })
        .collect()
}

pub fn write_csv(rows: &[ScanRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "theta,tau,s,t,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{:.17e}", r.theta, r.tau, r.s, r.t, r.value)?;
    }
    Ok(())
}

/// Operator-level quartic on a finite mode set. The lattice cutoffs, sorted,
/// index independent cells: a leg at cutoff `t_j` is
/// `sum_{c <= j} (g_{t_c} - g_{t_{c-1}})^(1/2) e_(c, k, sigma)`, placed in
/// the first summand for the barred field and the second for the other.
#[derive(Clone, Debug)]
pub struct TinyCutoff {
    pub model: QuasiFreeModel,
    pub modes: Vec<[i64; 2]>,
    pub cutoffs: Vec<f64>,
    /// `V_t` for each cutoff.
    pub v: Vec<Mat>,
    /// `||T_tau(V_t)||_2^2` from the operators.
    pub twisted: Vec<f64>,
    /// `C_tau S_t` restricted to the mode set.
    pub formula: Vec<f64>,
    pub linf: Vec<f64>,
    /// Triangle-inequality bound from the Wick expansion.
    pub linf_bound: Vec<f64>,
    pub self_adjoint_defect: Vec<f64>,
}

impl TinyCutoff {
    /// Operator value of `||T_tau(V_t - V_s)||_2^2` for cutoff indices `i, j`.
    pub fn difference(&self, i: usize, j: usize, tau: f64) -> Result<f64> {
        let dv = &self.v[j] - &self.v[i];
        Ok(haagerup_norm(&twisted_embed(&self.model, &dv, 2.0, tau)?, 2.0)?.powi(2))
    }
}

/// Zero-total-momentum quadruples drawn from `modes`.
pub fn momentum_quadruples(modes: &[[i64; 2]]) -> Vec<[usize; 4]> {
    let m = modes.len();
    let mut out = Vec::new();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let s = [a, b, c, d].iter().fold([0i64; 2], |acc, &i| {
                        [acc[0] + modes[i][0], acc[1] + modes[i][1]]
                    });
                    if s == [0, 0] {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

/// `S_t` restricted to a finite momentum set.
pub fn restricted_quartic_sum(spec: &LatticeSpec, modes: &[[i64; 2]], t: f64) -> f64 {
    momentum_quadruples(modes)
        .iter()
        .map(|q| q.iter().map(|&i| spec.g(modes[i], t)).product::<f64>())
        .sum()
}

/// `sum over partial pairings of prod |omega(pair)| prod ||beta(f)||`,
/// an upper bound for `||[[beta(f_1) ... beta(f_n)]]||`.
pub fn wick_norm_bound<M: FieldModel + ?Sized>(model: &M, fs: &[Vec<C64>]) -> Result<f64> {
    let norms: Vec<f64> =
        fs.iter().map(|f| Ok(op_norm(&model.beta(f)?))).collect::<Result<_>>()?;
    fn rec(mask: u64, norms: &[f64], pair: &dyn Fn(usize, usize) -> f64) -> f64 {
        if mask == 0 {
            return 1.0;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut acc = norms[i] * rec(rest, norms, pair);
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            acc += pair(i, j) * rec(rest & !(1 << j), norms, pair);
        }
        acc
    }
    let pair = |i: usize, j: usize| model.beta_two_point(&fs[i], &fs[j]).norm();
    Ok(rec((1u64 << fs.len()) - 1, &norms, &pair))
}

pub fn tiny_cutoff_v(spec: &LatticeSpec, modes: &[[i64; 2]]) -> Result<TinyCutoff> {
    if modes.is_empty() || modes.len() > TINY_MODES_MAX {
        return invalid(format!("mode set of size {} outside 1..={TINY_MODES_MAX}", modes.len()));
    }
    let mut cutoffs = spec.cutoffs.clone();
    cutoffs.sort_by(f64::total_cmp);
    if cutoffs.is_empty() {
        return invalid("no cutoffs");
    }
    let (nc, nm, ns) = (cutoffs.len(), modes.len(), spec.spins);
    let d = nc * nm * ns;
    if d > DEFAULT_MODE_CAP {
        return Err(Error::Resource(format!(
            "{d} one-particle modes exceed the cap of {DEFAULT_MODE_CAP}"
        )));
    }
    let model = QuasiFreeModel::scalar(spec.mu, d)?;
    let idx = |c: usize, m: usize, s: usize| (c * nm + m) * ns + s;
    let leg = |j: usize, m: usize, s: usize, barred: bool| -> Vec<C64> {
        let mut v = vec![cr(0.0); 2 * d];
        let off = if barred { 0 } else { d };
        let mut prev = 0.0;
        for (c, &t) in cutoffs.iter().enumerate().take(j + 1) {
            let g = spec.g(modes[m], t);
            v[off + idx(c, m, s)] = cr((g - prev).max(0.0).sqrt());
            prev = g;
        }
        v
    };
    let quads = momentum_quadruples(modes);
    let cl = quartic_constant(spec.mu, spec.tau, ns)?;
    let dim = 1usize << d;
    let per_cutoff: Vec<(Mat, f64)> = (0..nc)
        .into_par_iter()
        .map(|j| {
            let mut v = Mat::zeros(dim, dim);
            let mut bound = 0.0;
            for q in &quads {
                for s1 in 0..ns {
                    for s2 in 0..ns {
                        let fs = vec![
                            leg(j, q[0], s1, true),
                            leg(j, q[1], s1, false),
                            leg(j, q[2], s2, true),
                            leg(j, q[3], s2, false),
                        ];
                        // Quartic monomials on fewer than two modes vanish.
                        if 2 * d >= fs.len() {
                            v += wick(&model, &fs)?;
                            bound += wick_norm_bound(&model, &fs)?;
                        }
                    }
                }
            }
            Ok((v, bound))
        })
        .collect::<Result<_>>()?;
    let mut out = TinyCutoff {
        model,
        modes: modes.to_vec(),
        cutoffs: cutoffs.clone(),
        v: Vec::new(),
        twisted: Vec::new(),
        formula: Vec::new(),
        linf: Vec::new(),
        linf_bound: Vec::new(),
        self_adjoint_defect: Vec::new(),
    };
    for (j, (v, bound)) in per_cutoff.into_iter().enumerate() {
        let tw = twisted_embed(&out.model, &v, 2.0, spec.tau)?;
        out.twisted.push(haagerup_norm(&tw, 2.0)?.powi(2));
        out.formula.push(cl * restricted_quartic_sum(spec, modes, cutoffs[j]));
        out.linf.push(op_norm(&v));
        out.linf_bound.push(bound);
        let fro = frobenius(&v);
        let adj = frobenius(&(&v - v.adjoint()));
        out.self_adjoint_defect.push(if fro == 0.0 { adj } else { adj / fro });
        out.v.push(v);
    }
    Ok(out)
}
