//! Discretized Grassmann Brownian martingales inside a scalar quasi-free
//! model. Modes are laid out as reserved modes first, then `h_dim` modes
//! per time cell in time order, so each filtration level is a low-bit
//! prefix.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::filtration::Filtration;
use crate::kernel::{anticommutator, cr, inner, max_abs_diff, op_norm, schatten_norm, vnorm, Mat, C64};
use crate::lp::twisted_embed;
use crate::model::{Conjugation, FieldModel, QuasiFreeModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmSpec {
    pub mu: f64,
    pub n_t: usize,
    pub horizon: f64,
    /// Dimension of `h = h~ (+) h~`; even.
    pub h_dim: usize,
    /// Diagonal of `C` on `h~`; `C` acts as `diag(c) (+) diag(c)`.
    pub c: Vec<f64>,
    pub n_reserved: usize,
}

impl GbmSpec {
    /// `h_dim = 2`, `C = 1`, horizon 1.
    pub fn standard(mu: f64, n_t: usize, n_reserved: usize) -> Self {
        Self { mu, n_t, horizon: 1.0, h_dim: 2, c: vec![1.0], n_reserved }
    }

    pub fn half(&self) -> usize {
        self.h_dim / 2
    }

    pub fn modes(&self) -> usize {
        self.n_reserved + self.n_t * self.h_dim
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return invalid(format!("mu = {} outside (0,1)", self.mu));
        }
        if self.h_dim == 0 || self.h_dim % 2 != 0 {
            return invalid("h_dim must be even and positive");
        }
        if self.c.len() != self.half() || self.c.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return invalid("C needs h_dim/2 positive entries");
        }
        if self.n_t == 0 || !(self.horizon > 0.0) {
            return invalid("need at least one cell and a positive horizon");
        }
        Ok(())
    }

    /// `Theta (a (+) b) = conj(b) (+) conj(a)`.
    pub fn theta(&self, f: &[C64]) -> Vec<C64> {
        let m = self.half();
        (0..self.h_dim).map(|i| f[(i + m) % self.h_dim].conj()).collect()
    }

    /// `U = 1 (+) -1`.
    pub fn u(&self, f: &[C64]) -> Vec<C64> {
        let m = self.half();
        f.iter().enumerate().map(|(i, z)| if i < m { *z } else { -*z }).collect()
    }

    pub fn c_apply(&self, f: &[C64]) -> Vec<C64> {
        let m = self.half();
        f.iter().enumerate().map(|(i, z)| z * self.c[i % m]).collect()
    }

    /// `G = C^2 U`.
    pub fn g_apply(&self, f: &[C64]) -> Vec<C64> {
        self.c_apply(&self.c_apply(&self.u(f)))
    }

    /// Antisymmetric bilinear form `B(f, g) = <Theta f, G g>`.
    pub fn bilinear(&self, f: &[C64], g: &[C64]) -> C64 {
        inner(&self.theta(f), &self.g_apply(g))
    }

    /// `(mu^-2 - mu^2)^{-1/2}`.
    pub fn embed_norm(&self) -> f64 {
        (self.mu.powi(-2) - self.mu.powi(2)).powf(-0.5)
    }
}

pub struct GbmProcess {
    spec: GbmSpec,
    model: QuasiFreeModel,
    times: Vec<f64>,
    delta: f64,
}

pub fn build_gbm(spec: GbmSpec) -> Result<GbmProcess> {
    spec.validate()?;
    let d = spec.modes();
    if d > crate::fock::DEFAULT_MODE_CAP {
        return Err(Error::Resource(format!(
            "{d} modes exceed the dense cap of {}",
            crate::fock::DEFAULT_MODE_CAP
        )));
    }
    let m = spec.half();
    let mut perm: Vec<usize> = (0..spec.n_reserved).collect();
    for k in 0..spec.n_t {
        let base = spec.n_reserved + k * spec.h_dim;
        perm.extend((0..spec.h_dim).map(|a| base + (a + m) % spec.h_dim));
    }
    let model = QuasiFreeModel::build(&vec![spec.mu; d], Conjugation::new(perm)?)?;
    let delta = spec.horizon / spec.n_t as f64;
    let times = (0..=spec.n_t).map(|j| j as f64 * delta).collect();
    Ok(GbmProcess { spec, model, times, delta })
}

impl GbmProcess {
    pub fn spec(&self) -> &GbmSpec {
        &self.spec
    }

    pub fn model(&self) -> &QuasiFreeModel {
        &self.model
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_t(&self) -> usize {
        self.spec.n_t
    }

    /// Grid levels `K_{t_j}` = reserved modes plus the first `j` cells.
    pub fn filtration(&self) -> Filtration<'_> {
        let levels = (0..=self.spec.n_t).map(|j| self.spec.n_reserved + j * self.spec.h_dim).collect();
        Filtration::new(&self.model, self.times.clone(), levels).expect("grid levels are nested")
    }

    /// Grid index of a time; off-grid times are rejected.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .ok_or_else(|| Error::InvalidInput(format!("time {t} is not a grid time")))
    }

    fn check_f(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.spec.h_dim {
            return invalid(format!("vector of length {} in h of dimension {}", f.len(), self.spec.h_dim));
        }
        Ok(())
    }

    /// Sum over cells `[i, j)` of `sqrt(delta) e_k (x) v`, scaled by the
    /// embedding normalization.
    fn cells_vector(&self, i: usize, j: usize, v: &[C64]) -> Vec<C64> {
        let mut out = vec![cr(0.0); self.model.d()];
        let s = self.spec.embed_norm() * self.delta.sqrt();
        for k in i..j {
            let base = self.spec.n_reserved + k * self.spec.h_dim;
            for (a, z) in v.iter().enumerate() {
                out[base + a] = z * s;
            }
        }
        out
    }

    /// `E_t f` at grid index `j`.
    pub fn embedding(&self, j: usize, f: &[C64]) -> Result<Vec<C64>> {
        self.check_f(f)?;
        self.check_index(j)?;
        Ok(self.cells_vector(0, j, &self.spec.c_apply(&self.spec.u(f))))
    }

    /// `E~_t f` at grid index `j`.
    pub fn embedding_tilde(&self, j: usize, f: &[C64]) -> Result<Vec<C64>> {
        self.check_f(f)?;
        self.check_index(j)?;
        Ok(self.cells_vector(0, j, &self.spec.c_apply(&self.spec.theta(f))))
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j > self.spec.n_t {
            return invalid(format!("grid index {j} beyond {}", self.spec.n_t));
        }
        Ok(())
    }

    /// `X_{t_i, t_j}(f) = gamma*(E f) - gamma(E~ f)` restricted to cells `[i, j)`.
    pub fn increment_index(&self, i: usize, j: usize, f: &[C64]) -> Result<Mat> {
        self.check_f(f)?;
        self.check_index(j)?;
        if i > j {
            return invalid("increment with reversed times");
        }
        let e = self.cells_vector(i, j, &self.spec.c_apply(&self.spec.u(f)));
        let et = self.cells_vector(i, j, &self.spec.c_apply(&self.spec.theta(f)));
        Ok(self.model.gamma_star(&e)? - self.model.gamma(&et)?)
    }

    pub fn field_index(&self, j: usize, f: &[C64]) -> Result<Mat> {
        self.increment_index(0, j, f)
    }

    /// `X_t(f)` at a grid time.
    pub fn field(&self, t: f64, f: &[C64]) -> Result<Mat> {
        self.field_index(self.grid_index(t)?, f)
    }

    pub fn increment(&self, s: f64, t: f64, f: &[C64]) -> Result<Mat> {
        self.increment_index(self.grid_index(s)?, self.grid_index(t)?, f)
    }

    /// The same field written as `beta(mu E f (+) -mu^-1 Theta E~ f)`.
    pub fn field_via_beta(&self, j: usize, f: &[C64]) -> Result<Mat> {
        let mu = self.spec.mu;
        let e: Vec<C64> = self.embedding(j, f)?.iter().map(|z| z * mu).collect();
        let et = self.model.theta().apply(&self.embedding_tilde(j, f)?);
        let et: Vec<C64> = et.iter().map(|z| -z / mu).collect();
        self.model.beta_from_parts(&e, &et)
    }

    /// `theta_j = beta(e_{r_j} (+) 0)`.
    pub fn reserved_generator(&self, j: usize) -> Result<Mat> {
        if j >= self.spec.n_reserved {
            return invalid(format!("reserved index {j} out of range ({})", self.spec.n_reserved));
        }
        let d = self.model.d();
        let mut e = vec![cr(0.0); d];
        e[j] = cr(1.0);
        self.model.beta_from_parts(&e, &vec![cr(0.0); d])
    }

    /// `<Theta f, G g> (s ^ t)`.
    pub fn covariance(&self, s: f64, t: f64, f: &[C64], g: &[C64]) -> C64 {
        self.spec.bilinear(f, g) * s.min(t)
    }

    /// Right-hand side of the operator-norm bound on `X_{s,t}(f)`.
    pub fn increment_bound(&self, i: usize, j: usize, f: &[C64]) -> f64 {
        let a = vnorm(&self.spec.c_apply(&self.spec.u(f))).powi(2);
        let b = vnorm(&self.spec.c_apply(&self.spec.theta(f))).powi(2);
        self.spec.mu * (a + b) * (j - i) as f64 * self.delta
    }

    /// Largest deviation of `omega(X_t(f) X_s(g))` from the covariance over
    /// all grid pairs.
    pub fn covariance_defect(&self, f: &[C64], g: &[C64]) -> Result<f64> {
        let xf: Vec<Mat> = (0..=self.n_t()).map(|j| self.field_index(j, f)).collect::<Result<_>>()?;
        let xg: Vec<Mat> = (0..=self.n_t()).map(|j| self.field_index(j, g)).collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for (a, x) in xf.iter().enumerate() {
            for (b, y) in xg.iter().enumerate() {
                let lhs = self.model.state_product(x, y);
                let rhs = self.covariance(self.times[b], self.times[a], f, g);
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok(worst)
    }

    /// Largest `||{X_t(f), X_s(g)}||` over grid pairs.
    pub fn anticommutator_defect(&self, f: &[C64], g: &[C64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for a in 0..=self.n_t() {
            let x = self.field_index(a, f)?;
            for b in 0..=self.n_t() {
                let y = self.field_index(b, g)?;
                worst = worst.max(anticommutator(&x, &y).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        Ok(worst)
    }

    /// Largest `||[X_t(f)]_tau - mu^{-4 tau} X_t(f)||` over the grid.
    pub fn eigen_relation_defect(&self, f: &[C64], tau: f64) -> Result<f64> {
        let s = self.spec.mu.powf(-4.0 * tau);
        let mut worst: f64 = 0.0;
        for j in 0..=self.n_t() {
            let x = self.field_index(j, f)?;
            let cont = self.model.continuation(&x, tau);
            worst = worst.max(max_abs_diff(&cont, &(&x * cr(s))));
        }
        Ok(worst)
    }

    /// Largest `||[X_t(f)]_tau - (mu^{-4 tau} gamma*(E f) - mu^{4 tau} gamma(E~ f))||`.
    pub fn split_relation_defect(&self, f: &[C64], tau: f64) -> Result<f64> {
        let mu = self.spec.mu;
        let mut worst: f64 = 0.0;
        for j in 0..=self.n_t() {
            let x = self.field_index(j, f)?;
            let up = self.model.gamma_star(&self.embedding(j, f)?)?;
            let down = self.model.gamma(&self.embedding_tilde(j, f)?)?;
            let want = up * cr(mu.powf(-4.0 * tau)) - down * cr(mu.powf(4.0 * tau));
            worst = worst.max(max_abs_diff(&self.model.continuation(&x, tau), &want));
        }
        Ok(worst)
    }

    /// Twisted `L^p` norm of `X_{s,t}(f)` for every grid pair, as
    /// `(t - s, norm)`.
    pub fn increment_norms(&self, f: &[C64], p: f64) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for i in 0..self.n_t() {
            for j in i + 1..=self.n_t() {
                let x = self.increment_index(i, j, f)?;
                out.push((self.times[j] - self.times[i], crate::lp::twisted_norm(&self.model, &x, p)?));
            }
        }
        Ok(out)
    }

    /// Least-squares slope of `log norm` against `log |t - s|`.
    pub fn increment_slope(&self, f: &[C64], p: f64) -> Result<f64> {
        let pts = self.increment_norms(f, p)?;
        Ok(log_log_slope(&pts))
    }

    /// Largest ratio `||X_{s,t}(f)||^2 / bound` over grid pairs; at most 1
    /// when the operator-norm bound holds.
    pub fn increment_bound_ratio(&self, f: &[C64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_t() {
            for j in i + 1..=self.n_t() {
                let x = self.increment_index(i, j, f)?;
                worst = worst.max(op_norm(&x).powi(2) / self.increment_bound(i, j, f));
            }
        }
        Ok(worst)
    }

    /// `||T_tau^{(2)}(X_{0,delta}(v))||_2^2 / delta`, the isometry constant
    /// read off a single cell.
    pub fn isometry_constant(&self, v: &[C64], tau: f64) -> Result<f64> {
        let x = self.increment_index(0, 1, v)?;
        Ok(schatten_norm(&twisted_embed(&self.model, &x, 2.0, tau)?, 2.0)?.powi(2) / self.delta)
    }
}

/// `mu^{-4(1/2 + 2 tau)} (mu^2 + mu^-2) / (mu^-2 - mu^2)`.
pub fn c_tau_closed_form(mu: f64, tau: f64) -> f64 {
    mu.powf(-4.0 * (0.5 + 2.0 * tau)) * (mu * mu + mu.powi(-2)) / (mu.powi(-2) - mu * mu)
}

/// Value obtained by expanding the continuation of the field into its
/// creation and annihilation parts, for `||C U v|| = ||C Theta v|| = 1`.
pub fn c_tau_split_form(mu: f64, tau: f64) -> f64 {
    (mu.powf(-8.0 * tau) + mu.powf(8.0 * tau)) / (mu.powi(-2) - mu * mu)
}

pub fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One row of the modular covariance table.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceRow {
    pub r: f64,
    pub r_prime: f64,
    /// `omega([X_t(f)]_r [X_s(g)]_r') / ((s ^ t) B(f, g))`.
    pub c: f64,
    /// `omega([X_t*(f)]_r [X_s(g)]_r') / ((s ^ t) <f, C^2 g>)`.
    pub c_prime: f64,
    /// `mu^{4(r - r')} c'_{0,0}`.
    pub c_prime_scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub c_prime_00: f64,
    pub c_prime_00_expected: f64,
    pub rows: Vec<CovarianceRow>,
    /// Largest `|c'_{r,r'} - mu^{4(r-r')} c'_{0,0}|` over the table.
    pub scaling_defect: f64,
}

/// Tabulates the modular covariance constants at `t = s = T` for the given
/// test vectors.
pub fn gbm_covariance_report(gbm: &GbmProcess, f: &[C64], g: &[C64], grid: &[f64]) -> Result<CovarianceReport> {
    let spec = gbm.spec();
    let n = gbm.n_t();
    let t = gbm.times()[n];
    let model = gbm.model();
    let xf = gbm.field_index(n, f)?;
    let xg = gbm.field_index(n, g)?;
    let xfs = xf.adjoint();
    let b = spec.bilinear(f, g) * t;
    let cc = inner(f, &spec.c_apply(&spec.c_apply(g))) * t;
    let val = |a: &Mat, r: f64, rp: f64| -> C64 {
        model.state_product(&model.continuation(a, r), &model.continuation(&xg, rp))
    };
    let c00 = (val(&xfs, 0.0, 0.0) / cc).re;
    let mu = spec.mu;
    let expected = (mu * mu + mu.powi(-2)) / (mu.powi(-2) - mu * mu);
    let mut rows = Vec::new();
    let mut scaling_defect: f64 = 0.0;
    for &r in grid {
        for &rp in grid {
            let c = if b.norm() > 1e-14 { (val(&xf, r, rp) / b).re } else { f64::NAN };
            let c_prime = (val(&xfs, r, rp) / cc).re;
            let c_prime_scaled = mu.powf(4.0 * (r - rp)) * c00;
            scaling_defect = scaling_defect.max((c_prime - c_prime_scaled).abs());
            rows.push(CovarianceRow { r, r_prime: rp, c, c_prime, c_prime_scaled });
        }
    }
    Ok(CovarianceReport { c_prime_00: c00, c_prime_00_expected: expected, rows, scaling_defect })
}
