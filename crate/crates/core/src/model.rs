//! Quasi-free thermal model of the CAR algebra: field operators, the
//! reference density, modular flow, Wick polynomials and the
//! Ornstein-Uhlenbeck semigroup.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::fock::FockBasis;
use crate::kernel::{cr, diag_sandwich, inner, Mat, PositiveOperator, C64};

/// Antilinear conjugation `(Theta f)_i = conj(f_{perm[i]})` with `perm` an
/// involution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conjugation {
    perm: Vec<usize>,
}

impl Conjugation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || perm[p] != i {
                return invalid("conjugation permutation must be an involution");
            }
        }
        Ok(Self { perm })
    }

    /// Plain entrywise complex conjugation.
    pub fn kappa(n: usize) -> Self {
        Self { perm: (0..n).collect() }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.perm.iter().map(|&p| f[p].conj()).collect()
    }
}

/// Common interface of the density-matrix model and the doubled vacuum
/// model, so that moments can be compared across realizations.
pub trait FieldModel {
    /// Dimension `d` of the one-particle space.
    fn one_particle_dim(&self) -> usize;
    fn gamma(&self, f: &[C64]) -> Result<Mat>;
    fn gamma_star(&self, f: &[C64]) -> Result<Mat> {
        Ok(self.gamma(f)?.adjoint())
    }
    fn beta(&self, f: &[C64]) -> Result<Mat>;
    fn state(&self, x: &Mat) -> C64;
    fn rho(&self) -> &[f64];
    fn theta(&self) -> &Conjugation;

    /// `omega(beta(F) beta(G)) = <Theta^ F, (rho^2 + rho^-2) G>`.
    fn beta_two_point(&self, f: &[C64], g: &[C64]) -> C64 {
        beta_two_point(self.rho(), self.theta(), f, g)
    }
}

/// Closed form of `omega(beta(f + f') beta(g + g'))` where
/// `Theta^(f + f') = Theta f' + Theta f`.
pub fn beta_two_point(rho: &[f64], theta: &Conjugation, f: &[C64], g: &[C64]) -> C64 {
    let d = rho.len();
    let (f1, f2) = f.split_at(d);
    let (g1, g2) = g.split_at(d);
    let tf2 = theta.apply(f2);
    let tf1 = theta.apply(f1);
    let a: C64 = (0..d).map(|i| tf2[i].conj() * g1[i] * rho[i].powi(2)).sum();
    let b: C64 = (0..d).map(|i| tf1[i].conj() * g2[i] * rho[i].powi(-2)).sum();
    a + b
}

fn exp_key(z: f64) -> u64 {
    z.to_bits()
}

/// The algebra of the CAR over `H = C^d` in the thermal state
/// `omega(x) = tr(W x)`.
#[derive(Clone, Debug)]
pub struct QuasiFreeModel {
    d: usize,
    rho: Vec<f64>,
    theta: Conjugation,
    basis: FockBasis,
    w_diag: Vec<f64>,
    w: PositiveOperator,
    power_cache: BTreeMap<u64, Vec<f64>>,
}

impl QuasiFreeModel {
    pub fn build(rho: &[f64], theta: Conjugation) -> Result<Self> {
        Self::build_with_cap(rho, theta, crate::fock::DEFAULT_MODE_CAP)
    }

    pub fn build_with_cap(rho: &[f64], theta: Conjugation, cap: usize) -> Result<Self> {
        let d = rho.len();
        if d == 0 {
            return invalid("empty symbol");
        }
        if theta.dim() != d {
            return invalid("conjugation dimension does not match the symbol");
        }
        if let Some(r) = rho.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return invalid(format!("symbol value {r} outside (0,1)"));
        }
        for i in 0..d {
            if (rho[theta.perm()[i]] - rho[i]).abs() > 1e-15 {
                return invalid("symbol does not commute with the conjugation");
            }
        }
        let basis = FockBasis::with_cap(d, cap)?;
        let nu: Vec<f64> = rho.iter().map(|r| 1.0 / (1.0 + r.powi(4))).collect();
        let w_diag: Vec<f64> = (0..basis.dim())
            .map(|s| {
                (0..d)
                    .map(|i| if s >> i & 1 == 1 { nu[i] } else { 1.0 - nu[i] })
                    .product()
            })
            .collect();
        let w = PositiveOperator::from_diagonal(&w_diag)?;
        let mut power_cache = BTreeMap::new();
        for z in [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0] {
            power_cache.insert(exp_key(z), w_diag.iter().map(|x: &f64| x.powf(z)).collect());
        }
        Ok(Self { d, rho: rho.to_vec(), theta, basis, w_diag, w, power_cache })
    }

    /// Scalar symbol `mu` on `C^d` with plain complex conjugation.
    pub fn scalar(mu: f64, d: usize) -> Result<Self> {
        Self::build(&vec![mu; d], Conjugation::kappa(d))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn w(&self) -> &PositiveOperator {
        &self.w
    }

    pub fn w_diag(&self) -> &[f64] {
        &self.w_diag
    }

    /// Mode occupation `nu_i = 1/(1 + rho_i^4)`.
    pub fn occupation(&self, i: usize) -> f64 {
        1.0 / (1.0 + self.rho[i].powi(4))
    }

    /// Diagonal of `W^z`.
    pub fn w_power_diag(&self, z: f64) -> Vec<f64> {
        match self.power_cache.get(&exp_key(z)) {
            Some(v) => v.clone(),
            None => self.w_diag.iter().map(|x| x.powf(z)).collect(),
        }
    }

    pub fn w_power(&self, z: f64) -> Mat {
        let d = self.w_power_diag(z);
        let n = d.len();
        Mat::from_fn(n, n, |i, j| if i == j { cr(d[i]) } else { cr(0.0) })
    }

    /// `(rho^2 + rho^-2)^{1/2} f`.
    fn rescale(&self, f: &[C64]) -> Vec<C64> {
        f.iter()
            .zip(&self.rho)
            .map(|(z, r)| z * (r * r + 1.0 / (r * r)).sqrt())
            .collect()
    }

    fn check_h(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.d {
            return invalid(format!("vector of length {} on a {}-dimensional space", f.len(), self.d));
        }
        Ok(())
    }

    /// `W^z x W^{-z}` for complex `z`; real `z = tau` is the analytic
    /// continuation `[x]_tau`, and `z = i t` is the modular flow.
    pub fn modular(&self, x: &Mat, z: C64) -> Mat {
        let logs: Vec<f64> = self.w_diag.iter().map(|w| w.ln()).collect();
        let n = x.nrows();
        Mat::from_fn(n, n, |i, j| x[(i, j)] * (z * (logs[i] - logs[j])).exp())
    }

    /// `sigma_t(x) = W^{it} x W^{-it}`.
    pub fn modular_flow(&self, x: &Mat, t: f64) -> Mat {
        self.modular(x, C64::new(0.0, t))
    }

    /// `[x]_tau = W^tau x W^{-tau}`.
    pub fn continuation(&self, x: &Mat, tau: f64) -> Mat {
        self.modular(x, cr(tau))
    }

    /// `omega(x y)` without forming the product.
    pub fn state_product(&self, x: &Mat, y: &Mat) -> C64 {
        let n = x.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let col = y.column(i);
            let mut row = C64::new(0.0, 0.0);
            for k in 0..n {
                row += x[(i, k)] * col[k];
            }
            acc += row * self.w_diag[i];
        }
        acc
    }

    /// `W^a x W^b` using the diagonal form of `W`.
    pub fn sandwich(&self, a: f64, x: &Mat, b: f64) -> Mat {
        diag_sandwich(&self.w_power_diag(a), x, &self.w_power_diag(b))
    }

    pub fn beta_from_parts(&self, f: &[C64], fp: &[C64]) -> Result<Mat> {
        let mut v = f.to_vec();
        v.extend_from_slice(fp);
        self.beta(&v)
    }
}

impl FieldModel for QuasiFreeModel {
    fn one_particle_dim(&self) -> usize {
        self.d
    }

    /// `gamma(f) = c((rho^2 + rho^-2)^{1/2} f)`.
    fn gamma(&self, f: &[C64]) -> Result<Mat> {
        self.check_h(f)?;
        self.basis.annihilator(&self.rescale(f))
    }

    fn gamma_star(&self, f: &[C64]) -> Result<Mat> {
        self.check_h(f)?;
        self.basis.creator(&self.rescale(f))
    }

    /// `beta(f + f') = gamma*(rho^-1 f) + gamma(Theta rho f')`.
    fn beta(&self, f: &[C64]) -> Result<Mat> {
        if f.len() != 2 * self.d {
            return invalid(format!("vector of length {} on K of dimension {}", f.len(), 2 * self.d));
        }
        let (f1, f2) = f.split_at(self.d);
        let a: Vec<C64> = f1.iter().zip(&self.rho).map(|(z, r)| z / r).collect();
        let b: Vec<C64> = f2.iter().zip(&self.rho).map(|(z, r)| z * r).collect();
        let b = self.theta.apply(&b);
        Ok(self.gamma_star(&a)? + self.gamma(&b)?)
    }

    fn state(&self, x: &Mat) -> C64 {
        self.w_diag.iter().enumerate().map(|(i, w)| x[(i, i)] * *w).sum()
    }

    fn rho(&self) -> &[f64] {
        &self.rho
    }

    fn theta(&self) -> &Conjugation {
        &self.theta
    }
}

/// The literal construction on `Gamma_a(H + H)` with the vacuum state:
/// `gamma(f) = a(rho f + 0) + a*(0 + rho^-1 Theta f)`.
#[derive(Clone, Debug)]
pub struct DoubledModel {
    d: usize,
    rho: Vec<f64>,
    theta: Conjugation,
    basis: FockBasis,
}

pub fn gns_doubled_oracle(model: &QuasiFreeModel) -> Result<DoubledModel> {
    let basis = FockBasis::new(2 * model.d)?;
    Ok(DoubledModel { d: model.d, rho: model.rho.clone(), theta: model.theta.clone(), basis })
}

impl DoubledModel {
    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    /// Embeds `f + f'` into `C^{2d}`.
    fn pair(&self, f: &[C64], fp: &[C64]) -> Vec<C64> {
        let mut v = f.to_vec();
        v.extend_from_slice(fp);
        v
    }

    /// `a*(F) Omega` in the doubled Fock space.
    pub fn wedge_vector(&self, fs: &[Vec<C64>]) -> Result<crate::kernel::Vector> {
        self.basis.wedge_vector(fs)
    }
}

impl FieldModel for DoubledModel {
    fn one_particle_dim(&self) -> usize {
        self.d
    }

    fn gamma(&self, f: &[C64]) -> Result<Mat> {
        if f.len() != self.d {
            return invalid("length mismatch");
        }
        let zero = vec![cr(0.0); self.d];
        let rf: Vec<C64> = f.iter().zip(&self.rho).map(|(z, r)| z * r).collect();
        let tf = self.theta.apply(f);
        let rtf: Vec<C64> = tf.iter().zip(&self.rho).map(|(z, r)| z / r).collect();
        Ok(self.basis.annihilator(&self.pair(&rf, &zero))? + self.basis.creator(&self.pair(&zero, &rtf))?)
    }

    fn beta(&self, f: &[C64]) -> Result<Mat> {
        if f.len() != 2 * self.d {
            return invalid("length mismatch");
        }
        let (f1, f2) = f.split_at(self.d);
        let a: Vec<C64> = f1.iter().zip(&self.rho).map(|(z, r)| z / r).collect();
        let b: Vec<C64> = f2.iter().zip(&self.rho).map(|(z, r)| z * r).collect();
        let b = self.theta.apply(&b);
        Ok(self.gamma_star(&a)? + self.gamma(&b)?)
    }

    fn state(&self, x: &Mat) -> C64 {
        x[(0, 0)]
    }

    fn rho(&self) -> &[f64] {
        &self.rho
    }

    fn theta(&self) -> &Conjugation {
        &self.theta
    }
}

/// `[[beta(f_1) ... beta(f_n)]]` by the recursive centring rule,
/// memoized over sub-lists.
pub fn wick<M: FieldModel + ?Sized>(model: &M, fs: &[Vec<C64>]) -> Result<Mat> {
    let n = fs.len();
    if n > 2 * model.one_particle_dim() {
        return invalid("Wick degree exceeds 2d");
    }
    if n >= 63 {
        return Err(Error::Resource("Wick degree too large".into()));
    }
    let betas: Vec<Mat> = fs.iter().map(|f| model.beta(f)).collect::<Result<_>>()?;
    let pair = |i: usize, j: usize| model.beta_two_point(&fs[i], &fs[j]);
    let dim = betas.first().map(|b| b.nrows());
    let mut memo: BTreeMap<u64, Mat> = BTreeMap::new();
    let full: u64 = if n == 0 { 0 } else { (1u64 << n) - 1 };
    let dim = match dim {
        Some(d) => d,
        None => {
            let probe = model.beta(&vec![cr(0.0); 2 * model.one_particle_dim()])?;
            probe.nrows()
        }
    };
    Ok(wick_rec(full, &betas, &pair, dim, &mut memo))
}

fn wick_rec(
    mask: u64,
    betas: &[Mat],
    pair: &dyn Fn(usize, usize) -> C64,
    dim: usize,
    memo: &mut BTreeMap<u64, Mat>,
) -> Mat {
    if mask == 0 {
        return Mat::identity(dim, dim);
    }
    if let Some(m) = memo.get(&mask) {
        return m.clone();
    }
    let first = mask.trailing_zeros() as usize;
    let rest = mask & !(1u64 << first);
    let mut out = crate::kernel::matmul(&betas[first], &wick_rec(rest, betas, pair, dim, memo));
    let mut pos = 0;
    let mut r = rest;
    while r != 0 {
        let j = r.trailing_zeros() as usize;
        r &= r - 1;
        pos += 1;
        let w = pair(first, j);
        if w != C64::new(0.0, 0.0) {
            let sign = if pos % 2 == 1 { -1.0 } else { 1.0 };
            let sub = wick_rec(rest & !(1u64 << j), betas, pair, dim, memo);
            out += sub * (w * sign);
        }
    }
    memo.insert(mask, out.clone());
    out
}

/// Wick monomials over the standard orthonormal basis of `K = H + H`:
/// leg `l < d` is `e_l + 0`, leg `l >= d` is `0 + e_{l-d}`. Monomial `F` is
/// stored at the bitmask of its legs.
#[derive(Clone, Debug)]
pub struct WickBasis {
    legs: usize,
    monomials: Vec<Mat>,
}

/// Largest one-particle dimension for which the full Wick basis is built.
pub const WICK_BASIS_MAX_D: usize = 5;

impl WickBasis {
    pub fn new(model: &QuasiFreeModel) -> Result<Self> {
        let d = model.d();
        if d > WICK_BASIS_MAX_D {
            return Err(Error::Resource(format!("Wick basis needs d <= {WICK_BASIS_MAX_D}")));
        }
        let legs = 2 * d;
        let leg_vec = |l: usize| {
            let mut v = vec![cr(0.0); legs];
            v[l] = cr(1.0);
            v
        };
        let betas: Vec<Mat> = (0..legs).map(|l| model.beta(&leg_vec(l))).collect::<Result<_>>()?;
        let two: Vec<Vec<C64>> = (0..legs)
            .map(|i| (0..legs).map(|j| model.beta_two_point(&leg_vec(i), &leg_vec(j))).collect())
            .collect();
        let dim = model.dim();
        let count = 1usize << legs;
        let mut monomials: Vec<Mat> = Vec::with_capacity(count);
        for mask in 0..count {
            if mask == 0 {
                monomials.push(Mat::identity(dim, dim));
                continue;
            }
            let first = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << first);
            let mut out = crate::kernel::matmul(&betas[first], &monomials[rest]);
            let mut pos = 0;
            let mut r = rest;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                r &= r - 1;
                pos += 1;
                let w = two[first][j];
                if w != C64::new(0.0, 0.0) {
                    let sign = if pos % 2 == 1 { -1.0 } else { 1.0 };
                    out += &monomials[rest & !(1 << j)] * (w * sign);
                }
            }
            monomials.push(out);
        }
        Ok(Self { legs, monomials })
    }

    pub fn legs(&self) -> usize {
        self.legs
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, mask: usize) -> &Mat {
        &self.monomials[mask]
    }

    /// Leg list of a monomial index (strictly increasing).
    pub fn legs_of(mask: usize) -> Vec<usize> {
        (0..usize::BITS as usize).filter(|l| mask >> l & 1 == 1).collect()
    }

    /// `c_F = omega([[beta(e_F)]]* x)`.
    pub fn decompose(&self, model: &QuasiFreeModel, x: &Mat) -> Vec<C64> {
        let w = model.w_diag();
        self.monomials
            .iter()
            .map(|m| {
                // tr(W m* x) = sum_{i,j} w_j conj(m_ij) x_ij
                let mut t = cr(0.0);
                for j in 0..x.ncols() {
                    for i in 0..x.nrows() {
                        t += m[(i, j)].conj() * x[(i, j)] * w[j];
                    }
                }
                t
            })
            .collect()
    }

    pub fn recompose(&self, coeffs: &[C64]) -> Mat {
        let dim = self.monomials[0].nrows();
        let mut out = Mat::zeros(dim, dim);
        for (cf, m) in coeffs.iter().zip(&self.monomials) {
            if *cf != C64::new(0.0, 0.0) {
                out += m * *cf;
            }
        }
        out
    }

    /// `P_t` as Wick-coefficient scaling by `exp(-t deg)`.
    pub fn ou_semigroup(&self, model: &QuasiFreeModel, x: &Mat, t: f64) -> Result<Mat> {
        if !(t >= 0.0) {
            return invalid("OU time must be nonnegative");
        }
        let mut coeffs = self.decompose(model, x);
        for (mask, cf) in coeffs.iter_mut().enumerate() {
            *cf *= (-t * mask.count_ones() as f64).exp();
        }
        Ok(self.recompose(&coeffs))
    }
}

/// Inner product on `Gamma_a(K)` of two wedge monomials, as a Gram
/// determinant.
pub fn wedge_inner(fs: &[Vec<C64>], gs: &[Vec<C64>]) -> C64 {
    if fs.len() != gs.len() {
        return cr(0.0);
    }
    let n = fs.len();
    if n == 0 {
        return cr(1.0);
    }
    Mat::from_fn(n, n, |i, j| inner(&fs[i], &gs[j])).determinant()
}
