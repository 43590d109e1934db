//! Filtrations by mode prefixes: state-preserving conditional
//! expectations, their L^p extensions, martingales, Hardy norms and the
//! averaging projection onto coarser grids.

use crate::error::{invalid, Error, Result};
use crate::kernel::{abs_sq, cr, matmul, psd_sqrt, schatten_norm, Mat, C64};
use crate::lp::{half_inv, twisted_embed, twisted_unembed};
use crate::model::{FieldModel, QuasiFreeModel, WickBasis};
use crate::process::AdaptedSimpleProcess;

/// Level `j` is the subalgebra generated by the fields of the lowest
/// `levels[j]` modes; these act on the low bits of the occupation index
/// without Jordan-Wigner strings, so the subalgebra is `B(H_low) (x) 1`.
#[derive(Clone, Debug)]
pub struct Filtration<'a> {
    model: &'a QuasiFreeModel,
    times: Vec<f64>,
    levels: Vec<usize>,
}

impl<'a> Filtration<'a> {
    pub fn new(model: &'a QuasiFreeModel, times: Vec<f64>, levels: Vec<usize>) -> Result<Self> {
        if times.len() != levels.len() || times.is_empty() {
            return invalid("one mode count per grid time is required");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("times must be strictly increasing");
        }
        if levels.windows(2).any(|w| w[1] < w[0]) || *levels.last().unwrap() > model.d() {
            return invalid("mode counts must be nested and within the model");
        }
        let perm = model.theta().perm();
        for &k in &levels {
            if perm[..k].iter().any(|&j| j >= k) {
                return invalid(format!("the first {k} modes are not closed under the conjugation"));
            }
        }
        Ok(Self { model, times, levels })
    }

    /// Every conjugation-closed prefix, one per unit time.
    pub fn by_modes(model: &'a QuasiFreeModel) -> Self {
        let perm = model.theta().perm();
        let levels: Vec<usize> =
            (0..=model.d()).filter(|&k| perm[..k].iter().all(|&j| j < k)).collect();
        Self { model, times: (0..levels.len()).map(|j| j as f64).collect(), levels }
    }

    pub fn model(&self) -> &QuasiFreeModel {
        self.model
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn modes_at(&self, level: usize) -> usize {
        self.levels[level]
    }

    /// Level index of a grid time.
    pub fn level_at(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .ok_or_else(|| Error::InvalidInput(format!("time {t} is not on the grid")))
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.levels.len() {
            return invalid(format!("level {level} out of range"));
        }
        Ok(())
    }

    /// State weights of the modes above the level, indexed by the high bits.
    fn high_weights(&self, k: usize) -> Vec<f64> {
        let d = self.model.d();
        let nu: Vec<f64> = (0..d).map(|i| self.model.occupation(i)).collect();
        (0..1usize << (d - k))
            .map(|h| {
                (k..d)
                    .map(|i| if h >> (i - k) & 1 == 1 { nu[i] } else { 1.0 - nu[i] })
                    .product()
            })
            .collect()
    }

    /// `omega_j(x) = (id (x) omega_high)(x) (x) 1`.
    pub fn cond_exp(&self, x: &Mat, level: usize) -> Result<Mat> {
        self.check_level(level)?;
        let n = self.model.dim();
        if x.nrows() != n || x.ncols() != n {
            return invalid("operator does not act on the model's Fock space");
        }
        let k = self.levels[level];
        let low = 1usize << k;
        let wh = self.high_weights(k);
        let mut reduced = Mat::zeros(low, low);
        for (h, &w) in wh.iter().enumerate() {
            let off = h * low;
            for j in 0..low {
                for i in 0..low {
                    reduced[(i, j)] += x[(off + i, off + j)] * w;
                }
            }
        }
        Ok(Mat::from_fn(n, n, |r, c| {
            if r / low == c / low {
                reduced[(r % low, c % low)]
            } else {
                cr(0.0)
            }
        }))
    }

    /// Low-mode block `A` of a level element `A (x) 1`.
    pub fn reduce(&self, x: &Mat, level: usize) -> Result<Mat> {
        self.check_level(level)?;
        let low = 1usize << self.levels[level];
        Ok(x.view((0, 0), (low, low)).into_owned())
    }

    /// `A (x) 1` for a low-mode block `A`.
    pub fn lift(&self, a: &Mat, level: usize) -> Result<Mat> {
        self.check_level(level)?;
        let low = 1usize << self.levels[level];
        if a.nrows() != low || a.ncols() != low {
            return invalid("block does not match the level");
        }
        let n = self.model.dim();
        Ok(Mat::from_fn(n, n, |r, c| if r / low == c / low { a[(r % low, c % low)] } else { cr(0.0) }))
    }

    /// Wick-coefficient truncation onto monomials whose legs all lie in the
    /// level's modes; used as an independent route to `cond_exp`.
    pub fn cond_exp_wick(&self, wb: &WickBasis, x: &Mat, level: usize) -> Result<Mat> {
        self.check_level(level)?;
        let d = self.model.d();
        let k = self.levels[level];
        let allowed: usize = ((1usize << k) - 1) | (((1usize << k) - 1) << d);
        let mut coeffs = wb.decompose(self.model, x);
        for (mask, c) in coeffs.iter_mut().enumerate() {
            if mask & !allowed != 0 {
                *c = cr(0.0);
            }
        }
        Ok(wb.recompose(&coeffs))
    }

    /// `omega^{(p)}(W^{1/2p+tau} x W^{1/2p-tau}) = W^{1/2p+tau} omega(x) W^{1/2p-tau}`.
    pub fn cond_exp_lp(&self, a: &Mat, level: usize, p: f64, tau: f64) -> Result<Mat> {
        let x = twisted_unembed(self.model, a, p, tau);
        let e = self.cond_exp(&x, level)?;
        twisted_embed(self.model, &e, p, tau)
    }

    /// Symmetric form of the `L^p` extension (`tau = 0`), which preserves
    /// positivity.
    pub fn cond_exp_sym(&self, a: &Mat, level: usize, p: f64) -> Result<Mat> {
        let h = half_inv(p);
        let x = self.model.sandwich(-h, a, -h);
        let e = self.cond_exp(&x, level)?;
        Ok(self.model.sandwich(h, &e, h))
    }

    /// `x_j = omega_j^{(p)}(x)` for a representative `x W^{1/p}`-style
    /// element `a`.
    pub fn martingale_from_terminal(&self, a: &Mat, p: f64) -> Result<MartingaleSequence> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::UnsupportedExponent(format!("martingales need p in (1, inf), got {p}")));
        }
        let values = (0..self.n_levels())
            .map(|j| self.cond_exp_lp(a, j, p, -half_inv(p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MartingaleSequence { values, p })
    }

    /// The five martingale-difference norms of a sequence of `L^p`
    /// elements; `diffs[n]` is conditioned on level `n - 1` (level 0 for
    /// `n = 0`).
    pub fn hardy_norms(&self, diffs: &[Mat], p: f64, conditioned: bool) -> Result<HardyNorms> {
        if p < 1.0 {
            return Err(Error::UnsupportedExponent(format!("p = {p} < 1")));
        }
        if conditioned && p < 2.0 {
            return Err(Error::UnsupportedExponent(format!(
                "conditioned brackets are only supported for p >= 2, got {p}"
            )));
        }
        if diffs.len() > self.n_levels() {
            return invalid("more differences than filtration levels");
        }
        let n = self.model.dim();
        if diffs.is_empty() {
            return Ok(HardyNorms::default());
        }
        let mut col = Mat::zeros(n, n);
        let mut row = Mat::zeros(n, n);
        for dx in diffs {
            col += abs_sq(dx);
            row += abs_sq(&dx.adjoint());
        }
        let big_c = schatten_norm(&psd_sqrt(&col)?, p)?;
        let big_r = schatten_norm(&psd_sqrt(&row)?, p)?;
        let hd = if p.is_infinite() {
            diffs.iter().map(|d| schatten_norm(d, p)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max)
        } else {
            diffs
                .iter()
                .map(|d| schatten_norm(d, p).map(|v| v.powf(p)))
                .sum::<Result<f64>>()?
                .powf(1.0 / p)
        };
        let (hc, hr) = if conditioned {
            let mut ccol = Mat::zeros(n, n);
            let mut crow = Mat::zeros(n, n);
            for (k, dx) in diffs.iter().enumerate() {
                let lvl = k.saturating_sub(1);
                ccol += self.cond_exp_sym(&abs_sq(dx), lvl, p / 2.0)?;
                crow += self.cond_exp_sym(&abs_sq(&dx.adjoint()), lvl, p / 2.0)?;
            }
            let hc = schatten_norm(&psd_sqrt(&((&ccol + ccol.adjoint()).scale(0.5)))?, p)?;
            let hr = schatten_norm(&psd_sqrt(&((&crow + crow.adjoint()).scale(0.5)))?, p)?;
            (Some(hc), Some(hr))
        } else {
            (None, None)
        };
        Ok(HardyNorms { hc_big: big_c, hr_big: big_r, hc, hr, hd })
    }

    /// Column square function `||(sum |x_n|^2)^{1/2}||_p`.
    pub fn column_norm(&self, xs: &[Mat], p: f64) -> Result<f64> {
        let n = self.model.dim();
        let mut s = Mat::zeros(n, n);
        for x in xs {
            s += abs_sq(x);
        }
        schatten_norm(&psd_sqrt(&s)?, p)
    }

    /// Stein projection `(omega_n^{(p)}(x_n))_n`.
    pub fn stein_projection(&self, xs: &[Mat], p: f64) -> Result<Vec<Mat>> {
        xs.iter()
            .enumerate()
            .map(|(k, x)| self.cond_exp_lp(x, k.min(self.n_levels() - 1), p, -half_inv(p)))
            .collect()
    }

    /// Averaged conditional expectation onto a coarser grid `sigma`.
    pub fn q_sigma(&self, f: &AdaptedSimpleProcess, sigma: &[f64]) -> Result<AdaptedSimpleProcess> {
        let marks: Vec<usize> = sigma
            .iter()
            .map(|&s| {
                f.grid
                    .iter()
                    .position(|&g| (g - s).abs() <= 1e-12 * (1.0 + s.abs()))
                    .ok_or_else(|| Error::InvalidInput(format!("subdivision point {s} is not on the grid")))
            })
            .collect::<Result<_>>()?;
        if marks.first() != Some(&0) || marks.last() != Some(&(f.grid.len() - 1)) || marks.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("subdivision must be an increasing sub-grid sharing both endpoints");
        }
        let mut values = f.values.clone();
        for win in marks.windows(2) {
            let (a, b) = (win[0], win[1]);
            let level = self.level_at(f.grid[a])?;
            let span = f.grid[b] - f.grid[a];
            let k = f.index_dim();
            let n = self.model.dim();
            let mut avg = vec![Mat::zeros(n, n); k];
            for j in a..b {
                let w = f.width(j) / span;
                for (slot, v) in f.values[j].iter().enumerate() {
                    avg[slot] += self.cond_exp(v, level)? * cr(w);
                }
            }
            for v in values.iter_mut().take(b).skip(a) {
                *v = avg.clone();
            }
        }
        Ok(AdaptedSimpleProcess { grid: f.grid.clone(), values, indexed: f.indexed })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HardyNorms {
    /// `||(sum |dx_n|^2)^{1/2}||_p`.
    pub hc_big: f64,
    /// `||(sum |dx_n^*|^2)^{1/2}||_p`.
    pub hr_big: f64,
    pub hc: Option<f64>,
    pub hr: Option<f64>,
    pub hd: f64,
}

impl HardyNorms {
    /// `max(hc, hr, hd)` for `p >= 2`.
    pub fn h_norm(&self) -> Option<f64> {
        Some(self.hc?.max(self.hr?).max(self.hd))
    }

    pub fn big_h_norm(&self) -> f64 {
        self.hc_big.max(self.hr_big)
    }
}

#[derive(Clone, Debug)]
pub struct MartingaleSequence {
    pub values: Vec<Mat>,
    pub p: f64,
}

impl MartingaleSequence {
    pub fn differences(&self) -> Vec<Mat> {
        let mut out = Vec::with_capacity(self.values.len());
        for (k, v) in self.values.iter().enumerate() {
            if k == 0 {
                out.push(v.clone());
            } else {
                out.push(v - &self.values[k - 1]);
            }
        }
        out
    }

    pub fn norms(&self) -> Result<Vec<f64>> {
        self.values.iter().map(|v| schatten_norm(v, self.p)).collect()
    }
}

/// `tr(y x)` (Haagerup duality pairing).
pub fn pairing(y: &Mat, x: &Mat) -> C64 {
    crate::kernel::trace(&matmul(y, x))
}
