//! Haagerup and twisted L^p norms in the density-matrix realization, where
//! an element `x` of the algebra is represented in `L^p` by `x W^{1/p}`.

use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::kernel::{eigh, schatten_norm, trace, Mat, C64};
use crate::model::{FieldModel, QuasiFreeModel};

/// Slack allowed on the admissible twist range.
const TAU_SLACK: f64 = 1e-12;

/// Excess of an interior grid value over the endpoint maximum that
/// trips the guard.
pub const GUARD_TOL: f64 = 1e-9;

/// `1/(2p)`, zero for `p = inf`.
pub fn half_inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        0.5 / p
    }
}

/// Largest admissible twist `1 - 1/(2p)`.
pub fn tau_max(p: f64) -> f64 {
    1.0 - half_inv(p)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::UnsupportedExponent(format!("p = {p} must lie in [1, inf]")));
    }
    Ok(())
}

/// `T_tau^{(p)}(x) = W^{1/2p + tau} x W^{1/2p - tau}`.
pub fn twisted_embed(model: &QuasiFreeModel, x: &Mat, p: f64, tau: f64) -> Result<Mat> {
    check_p(p)?;
    if tau.abs() > tau_max(p) + TAU_SLACK {
        return invalid(format!("twist {tau} outside [-{0}, {0}]", tau_max(p)));
    }
    let h = half_inv(p);
    Ok(model.sandwich(h + tau, x, h - tau))
}

/// Inverse of [`twisted_embed`].
pub fn twisted_unembed(model: &QuasiFreeModel, a: &Mat, p: f64, tau: f64) -> Mat {
    let h = half_inv(p);
    model.sandwich(-(h + tau), a, -(h - tau))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistedNorm {
    pub value: f64,
    pub endpoint_max: f64,
    pub interior_max: f64,
    /// True when no interior grid point beats the endpoints by more than
    /// [`GUARD_TOL`].
    pub guard_ok: bool,
}

/// Number of points on the uniform twist grid.
pub const TAU_GRID: usize = 9;

pub fn tau_grid(p: f64) -> Vec<f64> {
    let m = tau_max(p);
    (0..TAU_GRID)
        .map(|k| -m + 2.0 * m * k as f64 / (TAU_GRID - 1) as f64)
        .collect()
}

/// `sup_{|tau| <= 1 - 1/2p} ||T_tau^{(p)}(x)||_p`, evaluated at the
/// endpoints and on the uniform grid.
pub fn twisted_norm_report(model: &QuasiFreeModel, x: &Mat, p: f64) -> Result<TwistedNorm> {
    check_p(p)?;
    let m = tau_max(p);
    let at = |tau: f64| -> Result<f64> { schatten_norm(&twisted_embed(model, x, p, tau)?, p) };
    let endpoint_max = at(-m)?.max(at(m)?);
    let grid = tau_grid(p);
    let mut interior_max: f64 = 0.0;
    for &tau in &grid[1..grid.len() - 1] {
        interior_max = interior_max.max(at(tau)?);
    }
    Ok(TwistedNorm {
        value: endpoint_max.max(interior_max),
        endpoint_max,
        interior_max,
        guard_ok: interior_max <= endpoint_max + GUARD_TOL,
    })
}

pub fn twisted_norm(model: &QuasiFreeModel, x: &Mat, p: f64) -> Result<f64> {
    Ok(twisted_norm_report(model, x, p)?.value)
}

/// Haagerup norm of an `L^p` representative.
pub fn haagerup_norm(a: &Mat, p: f64) -> Result<f64> {
    schatten_norm(a, p)
}

/// Haagerup trace of a representative.
pub fn haagerup_trace(a: &Mat) -> C64 {
    trace(a)
}

/// `L^p` representative `x W^{1/p}` of an algebra element.
pub fn lp_representative(model: &QuasiFreeModel, x: &Mat, p: f64) -> Mat {
    model.sandwich(0.0, x, 1.0 / p)
}

/// An element of the algebra regarded in the twisted space of exponent `p`.
#[derive(Debug)]
pub struct TwistedElement<'a> {
    model: &'a QuasiFreeModel,
    x: Mat,
    p: f64,
    norm_cache: OnceLock<f64>,
}

impl<'a> TwistedElement<'a> {
    pub fn new(model: &'a QuasiFreeModel, x: Mat, p: f64) -> Result<Self> {
        check_p(p)?;
        if x.nrows() != model.dim() || x.ncols() != model.dim() {
            return invalid("element does not act on the model's Fock space");
        }
        Ok(Self { model, x, p, norm_cache: OnceLock::new() })
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn norm(&self) -> Result<f64> {
        if let Some(v) = self.norm_cache.get() {
            return Ok(*v);
        }
        let v = twisted_norm(self.model, &self.x, self.p)?;
        Ok(*self.norm_cache.get_or_init(|| v))
    }

    pub fn adjoint(&self) -> Self {
        Self { model: self.model, x: self.x.adjoint(), p: self.p, norm_cache: OnceLock::new() }
    }
}

/// Product `x . y` of exponents `p, q` landing in exponent `r`, with the
/// Hoelder certificate `||xy||_r <= ||x||_p ||y||_q`.
#[derive(Debug)]
pub struct ProductCertificate<'a> {
    pub product: TwistedElement<'a>,
    pub lhs: f64,
    pub rhs: f64,
}

impl ProductCertificate<'_> {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-14
    }
}

pub fn product_exponent(p: f64, q: f64) -> Result<f64> {
    let s = 1.0 / p + 1.0 / q;
    if s > 1.0 + 1e-12 {
        return invalid(format!("1/p + 1/q = {s} exceeds 1"));
    }
    Ok(if s == 0.0 { f64::INFINITY } else { 1.0 / s })
}

pub fn lp_product<'a>(x: &TwistedElement<'a>, y: &TwistedElement<'a>) -> Result<ProductCertificate<'a>> {
    let r = product_exponent(x.p, y.p)?;
    let prod = crate::kernel::matmul(&x.x, &y.x);
    let product = TwistedElement::new(x.model, prod, r)?;
    let lhs = product.norm()?;
    let rhs = x.norm()? * y.norm()?;
    Ok(ProductCertificate { product, lhs, rhs })
}

/// `omega(x)` together with the continuity bound `||x||_{L^1}`.
pub fn expectation_extend(model: &QuasiFreeModel, x: &Mat) -> Result<(C64, f64)> {
    Ok((model.state(x), twisted_norm(model, x, 1.0)?))
}

/// Finite spectral measure of a self-adjoint element in the state.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralLaw {
    pub atoms: Vec<(f64, f64)>,
}

impl SpectralLaw {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|(y, w)| y.powi(k) * w).sum()
    }

    pub fn abs_moment(&self, k: f64) -> f64 {
        self.atoms.iter().map(|(y, w)| y.abs().powf(k) * w).sum()
    }

    /// Law of `-x`.
    pub fn reflect(&self) -> Self {
        let mut atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(y, w)| (-y, w)).collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Self { atoms }
    }

    /// `int g dmu`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(y, w)| g(y) * w).sum()
    }
}

/// Atoms at the eigenvalues of `x`, weighted by `<v, W v>` summed over
/// each eigenspace.
pub fn spectral_law(model: &QuasiFreeModel, x: &Mat) -> Result<SpectralLaw> {
    let (vals, vecs) = eigh(x)?;
    let w = model.w_diag();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (k, &l) in vals.iter().enumerate() {
        let weight: f64 = (0..vecs.nrows()).map(|i| vecs[(i, k)].norm_sqr() * w[i]).sum();
        match atoms.last_mut() {
            Some(last) if (l - last.0).abs() <= 1e-10 * scale => last.1 += weight,
            _ => atoms.push((l, weight)),
        }
    }
    Ok(SpectralLaw { atoms })
}
