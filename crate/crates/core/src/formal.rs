//! Sparse Grassmann algebra on bitmask monomials and the Gaussian state of a
//! discretized Brownian motion on it. Generators are the cell increments
//! `xi_{k,a} = dX_k(v_a)` in cell-major order, so the state factorizes over
//! contiguous blocks.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use crate::error::{invalid, Result};
use crate::gbm::{build_gbm, GbmProcess, GbmSpec};
use crate::ito::real_theta_basis;
use crate::kernel::{cr, identity, matmul, op_norm, Mat, C64};
use crate::matching::matching_sum;

type Map = HashMap<u64, C64, BuildHasherDefault<DefaultHasher>>;

/// Element of the Grassmann algebra on at most 64 generators.
#[derive(Clone, Debug, Default)]
pub struct Formal {
    terms: Map,
}

/// Sign of `m1 * m2` after sorting, zero when they overlap.
fn product_sign(m1: u64, m2: u64) -> f64 {
    if m1 & m2 != 0 {
        return 0.0;
    }
    let mut swaps = 0u32;
    let mut rest = m2;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (m1 >> j).count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Formal {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: C64) -> Self {
        let mut f = Self::zero();
        f.add_term(0, c);
        f
    }

    pub fn one() -> Self {
        Self::scalar(cr(1.0))
    }

    pub fn generator(i: usize) -> Self {
        assert!(i < 64, "at most 64 generators");
        let mut f = Self::zero();
        f.add_term(1u64 << i, cr(1.0));
        f
    }

    pub fn add_term(&mut self, mask: u64, c: C64) {
        if c == cr(0.0) {
            return;
        }
        let e = self.terms.entry(mask).or_insert(cr(0.0));
        *e += c;
        if *e == cr(0.0) {
            self.terms.remove(&mask);
        }
    }

    /// Monomials in increasing mask order.
    pub fn terms(&self) -> Vec<(u64, C64)> {
        let mut v: Vec<(u64, C64)> = self.terms.iter().map(|(m, c)| (*m, *c)).collect();
        v.sort_by_key(|(m, _)| *m);
        v
    }

    pub fn coefficient(&self, mask: u64) -> C64 {
        self.terms.get(&mask).copied().unwrap_or(cr(0.0))
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            out.add_term(m, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(cr(-1.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for z in out.terms.values_mut() {
            *z *= c;
        }
        out.terms.retain(|_, z| *z != cr(0.0));
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut acc = Map::default();
        acc.reserve(self.terms.len().max(other.terms.len()));
        for (&m1, &c1) in &self.terms {
            for (&m2, &c2) in &other.terms {
                let s = product_sign(m1, m2);
                if s != 0.0 {
                    *acc.entry(m1 | m2).or_insert(cr(0.0)) += c1 * c2 * s;
                }
            }
        }
        acc.retain(|_, c| *c != cr(0.0));
        Self { terms: acc }
    }

    /// `true` when every monomial has odd degree.
    pub fn is_odd(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 1)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.count_ones() as usize).max().unwrap_or(0)
    }

    /// `sum |c_m| prod_{i in m} w_i`: an upper bound for the operator norm of
    /// any realization whose generators have norms at most `w_i`.
    pub fn weighted_l1(&self, weights: &[f64]) -> f64 {
        self.terms()
            .iter()
            .map(|(m, c)| {
                let mut w = c.norm();
                let mut rest = *m;
                while rest != 0 {
                    let j = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    w *= weights[j];
                }
                w
            })
            .fold(0.0, |a, b| a + b)
    }
}

/// Gaussian state on the increments of a Brownian motion with covariance
/// `<Theta v_a, G v_b> w_k` on cell `k` of width `w_k`. An optional first
/// cell represents an independent initial field. Parameter generators sit
/// above the noise generators and are left untouched by the state.
#[derive(Clone, Debug)]
pub struct FormalGbm {
    spec: GbmSpec,
    widths: Vec<f64>,
    has_initial: bool,
    basis: Vec<Vec<C64>>,
    /// `pf[k][s]`: state of the ordered product of the generators of cell
    /// `k` selected by the bitmask `s`.
    pf: Vec<Vec<C64>>,
    weights: Vec<f64>,
    n_params: usize,
}

impl FormalGbm {
    /// Uniform grid of `spec.n_t` cells on `[0, horizon]`, preceded by an
    /// initial cell of width `initial` when it is positive.
    pub fn new(spec: GbmSpec, initial: f64) -> Result<Self> {
        spec.validate()?;
        let h = spec.h_dim;
        let delta = spec.horizon / spec.n_t as f64;
        let has_initial = initial > 0.0;
        let mut widths = Vec::new();
        if has_initial {
            widths.push(initial);
        }
        widths.extend(std::iter::repeat(delta).take(spec.n_t));
        if widths.len() * h > 64 {
            return invalid("at most 64 formal generators");
        }
        let basis = real_theta_basis(&spec)?;
        let cov: Vec<Vec<C64>> = (0..h).map(|a| (0..h).map(|b| spec.bilinear(&basis[a], &basis[b])).collect()).collect();
        let unit: Vec<C64> = (0..1usize << h)
            .map(|s| {
                let idx: Vec<usize> = (0..h).filter(|a| s >> a & 1 == 1).collect();
                matching_sum(idx.len(), &|i, j| cov[idx[i]][idx[j]])
            })
            .collect();
        let pf = widths
            .iter()
            .map(|w| {
                unit.iter()
                    .enumerate()
                    .map(|(s, z)| z * w.powi((s.count_ones() / 2) as i32))
                    .collect()
            })
            .collect();
        // Generator norms from a realized single cell of unit width.
        let one_cell = build_gbm(GbmSpec { n_t: 1, horizon: 1.0, n_reserved: 0, ..spec.clone() })?;
        let unit_norms: Vec<f64> =
            basis.iter().map(|v| one_cell.increment_index(0, 1, v).map(|x| op_norm(&x))).collect::<Result<_>>()?;
        let weights = widths.iter().flat_map(|w| unit_norms.iter().map(move |n| n * w.sqrt())).collect();
        Ok(Self { spec, widths, has_initial, basis, pf, weights, n_params: 0 })
    }

    /// Adds `n` parameter generators with norm bound 1.
    pub fn with_parameters(mut self, n: usize) -> Result<Self> {
        if self.noise_generators() + n > 64 {
            return invalid("at most 64 formal generators");
        }
        self.n_params = n;
        self.weights.truncate(self.noise_generators());
        self.weights.extend(std::iter::repeat(1.0).take(n));
        Ok(self)
    }

    pub fn noise_generators(&self) -> usize {
        self.widths.len() * self.spec.h_dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn parameter(&self, i: usize) -> Formal {
        assert!(i < self.n_params, "parameter index out of range");
        Formal::generator(self.noise_generators() + i)
    }

    pub fn spec(&self) -> &GbmSpec {
        &self.spec
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.basis
    }

    pub fn h_dim(&self) -> usize {
        self.spec.h_dim
    }

    pub fn n_t(&self) -> usize {
        self.spec.n_t
    }

    pub fn delta(&self) -> f64 {
        self.spec.horizon / self.spec.n_t as f64
    }

    pub fn has_initial(&self) -> bool {
        self.has_initial
    }

    /// Operator-norm bounds of the generators.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn cell_offset(&self, k: usize) -> usize {
        k + usize::from(self.has_initial)
    }

    /// `dX_k(v_a)` for time cell `k`.
    pub fn increment(&self, k: usize, a: usize) -> Formal {
        Formal::generator(self.cell_offset(k) * self.spec.h_dim + a)
    }

    /// Initial field `X~_0(v_a)`, zero without an initial cell.
    pub fn initial(&self, a: usize) -> Formal {
        if self.has_initial {
            Formal::generator(a)
        } else {
            Formal::zero()
        }
    }

    /// Gaussian state of a polynomial, with parameter monomials kept as
    /// right coefficients.
    pub fn state(&self, x: &Formal) -> Formal {
        let h = self.spec.h_dim;
        let block = (1u64 << h) - 1;
        let noise = self.noise_generators();
        let mut out = Formal::zero();
        for (m, c) in x.terms() {
            let mut v = c;
            for (k, pf) in self.pf.iter().enumerate() {
                let s = ((m >> (k * h)) & block) as usize;
                v *= pf[s];
                if v == cr(0.0) {
                    break;
                }
            }
            let params = if noise == 64 { 0 } else { m >> noise << noise };
            out.add_term(params, v);
        }
        out
    }

    /// `state(x y)` without forming the product.
    pub fn state_of_product(&self, x: &Formal, y: &Formal) -> Formal {
        let h = self.spec.h_dim;
        let block = (1u64 << h) - 1;
        let noise = self.noise_generators();
        let noise_mask = if noise == 64 { u64::MAX } else { (1u64 << noise) - 1 };
        let xs = x.terms();
        let mut acc: Map = Map::default();
        for (&m2, &c2) in &y.terms {
            for &(m1, c1) in &xs {
                let s = product_sign(m1, m2);
                if s == 0.0 {
                    continue;
                }
                let m = m1 | m2;
                let mut v = c1 * c2 * s;
                let mut noise_bits = m & noise_mask;
                let mut k = 0;
                while noise_bits != 0 && v != cr(0.0) {
                    v *= self.pf[k][(noise_bits & block) as usize];
                    noise_bits >>= h;
                    k += 1;
                }
                if v != cr(0.0) {
                    *acc.entry(m & !noise_mask).or_insert(cr(0.0)) += v;
                }
            }
        }
        let mut out = Formal::zero();
        let mut keys: Vec<u64> = acc.keys().copied().collect();
        keys.sort_unstable();
        for m in keys {
            out.add_term(m, acc[&m]);
        }
        out
    }

    /// Conditional state integrating out the generators of cell `cell`
    /// (counting the initial cell), which must be the highest noise cell
    /// present in `x`.
    pub fn integrate_cell(&self, x: &Formal, cell: usize) -> Formal {
        let h = self.spec.h_dim;
        let shift = cell * h;
        let block = (1u64 << h) - 1;
        let mut out = Formal::zero();
        for (&m, &c) in &x.terms {
            let s = ((m >> shift) & block) as usize;
            let v = c * self.pf[cell][s];
            if v != cr(0.0) {
                out.add_term(m & !(block << shift), v);
            }
        }
        out
    }

    /// `state(x f_0 f_1 ... f_{n-1})` for even factors where `f_k` involves
    /// only generators up to time cell `k`, integrating one cell at a time.
    pub fn state_of_factors(&self, x: &Formal, factors: &[Formal]) -> Formal {
        let offset = usize::from(self.has_initial);
        let mut g = x.clone();
        for k in (0..factors.len()).rev() {
            g = self.integrate_cell(&g.mul(&factors[k]), k + offset);
        }
        self.state(&g)
    }

    /// Scalar part of [`state`](Self::state).
    pub fn expect(&self, x: &Formal) -> C64 {
        self.state(x).coefficient(0)
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Substitutes the increments of an operator GBM with the same spec and
    /// no initial cell or parameters.
    pub fn realize(&self, x: &Formal, gbm: &GbmProcess) -> Result<Mat> {
        if self.has_initial || self.n_params > 0 || gbm.spec().h_dim != self.spec.h_dim || gbm.n_t() != self.spec.n_t {
            return invalid("realization needs matching grids and no initial cell");
        }
        let h = self.spec.h_dim;
        let gens: Vec<Mat> = (0..self.spec.n_t * h)
            .map(|g| gbm.increment_index(g / h, g / h + 1, &self.basis[g % h]))
            .collect::<Result<_>>()?;
        let n = gbm.model().dim();
        let mut out = Mat::zeros(n, n);
        for (m, c) in x.terms() {
            let mut acc = identity(n);
            let mut rest = m;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                acc = matmul(&acc, &gens[j]);
            }
            out += acc * c;
        }
        Ok(out)
    }
}
