//! Additive-noise Grassmann SDEs `dPsi(v) = mu(v)(Psi) dt + dB(v)`: Picard
//! solution of the explicit left-endpoint scheme and the Girsanov weak
//! representation through the linear part of the drift.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::formal::{Formal, FormalGbm};
use crate::gbm::GbmProcess;
use crate::girsanov::Compensator;
use crate::grassmann::GrassmannPolynomial;
use crate::ito::{g_theta_kernel, real_theta_basis};
use crate::kernel::{cr, matmul, op_norm, Mat, C64};

pub const DEFAULT_MAX_ITER: usize = 50;

/// Algebra in which odd fields are evaluated.
pub trait FieldAlgebra: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn scaled(&self, c: C64) -> Self;
}

impl FieldAlgebra for Mat {
    fn zero_like(&self) -> Self {
        Mat::zeros(self.nrows(), self.ncols())
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        matmul(self, other)
    }
    fn scaled(&self, c: C64) -> Self {
        self * c
    }
}

impl FieldAlgebra for Formal {
    fn zero_like(&self) -> Self {
        Formal::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn times(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scaled(&self, c: C64) -> Self {
        self.scale(c)
    }
}

/// Evaluates a purely anticommuting polynomial on odd fields `z`.
pub fn eval_odd<T: FieldAlgebra>(p: &GrassmannPolynomial, z: &[T]) -> Result<T> {
    if p.n_sym() != 0 || p.n_anti() != z.len() {
        return invalid("drift polynomials take one odd field per basis vector");
    }
    let mut out = z[0].zero_like();
    for ((anti, _), c) in p.terms() {
        let Some((first, rest)) = anti.split_first() else {
            return invalid("drift polynomials have no scalar part");
        };
        let mut acc = z[*first].clone();
        for &i in rest {
            acc = acc.times(&z[i]);
        }
        out = out.plus(&acc.scaled(*c));
    }
    Ok(out)
}

/// `psi(M v_b) = sum_c M[c][b] psi(v_c)`.
pub fn apply_matrix<T: FieldAlgebra>(m: &[Vec<f64>], psi: &[T]) -> Vec<T> {
    (0..psi.len())
        .map(|b| {
            let mut acc = psi[0].zero_like();
            for (c, p) in psi.iter().enumerate() {
                if m[c][b] != 0.0 {
                    acc = acc.plus(&p.scaled(cr(m[c][b])));
                }
            }
            acc
        })
        .collect()
}

/// Drift `mu(v_b)` on the real basis as odd polynomials in
/// `z_c = psi(v_c)`, together with the linear map `A` used by the weak
/// representation (`A v_b = sum_c a[c][b] v_c`).
#[derive(Clone, Debug)]
pub struct DriftSpec {
    mu: Vec<GrassmannPolynomial>,
    a: Vec<Vec<f64>>,
}

impl DriftSpec {
    pub fn new(mu: Vec<GrassmannPolynomial>, a: Vec<Vec<f64>>) -> Result<Self> {
        let h = mu.len();
        if h == 0 || a.len() != h || a.iter().any(|r| r.len() != h) {
            return invalid("drift needs one polynomial per basis vector and a square A");
        }
        for (b, p) in mu.iter().enumerate() {
            if p.n_anti() != h || p.n_sym() != 0 {
                return invalid(format!("drift polynomial {b} has the wrong index sets"));
            }
            if p.terms().keys().any(|(anti, _)| anti.len() % 2 == 0) {
                return Err(Error::Parity(format!("drift polynomial {b} is not odd")));
            }
        }
        Ok(Self { mu, a })
    }

    /// `mu = 0`, with `A = 0`.
    pub fn zero(h: usize) -> Self {
        Self { mu: vec![GrassmannPolynomial::zero(h, 0); h], a: vec![vec![0.0; h]; h] }
    }

    /// `mu(v)(psi) = psi(A v)`.
    pub fn linear(a: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(linear_polynomials(&a), a)
    }

    /// `psi(A v_b) + eps sum c z_i z_j z_k` over `(b, [i, j, k], c)` entries.
    pub fn cubic(a: Vec<Vec<f64>>, eps: f64, monomials: &[(usize, [usize; 3], f64)]) -> Result<Self> {
        let mut mu = linear_polynomials(&a);
        let h = a.len();
        for &(b, idx, c) in monomials {
            if b >= h || idx.iter().any(|&i| i >= h) {
                return invalid("cubic monomial index out of range");
            }
            mu[b].add_term(&idx, &[], cr(eps * c));
        }
        Self::new(mu, a)
    }

    pub fn h_dim(&self) -> usize {
        self.mu.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn mu(&self) -> &[GrassmannPolynomial] {
        &self.mu
    }

    /// `mu^A(v) = mu(v) - psi(A v)`.
    pub fn residual(&self) -> Vec<GrassmannPolynomial> {
        self.mu
            .iter()
            .zip(linear_polynomials(&self.a))
            .map(|(m, l)| m.add(&l.scale(cr(-1.0))))
            .collect()
    }

    pub fn evaluate<T: FieldAlgebra>(&self, psi: &[T]) -> Result<Vec<T>> {
        self.mu.iter().map(|p| eval_odd(p, psi)).collect()
    }
}

fn linear_polynomials(a: &[Vec<f64>]) -> Vec<GrassmannPolynomial> {
    let h = a.len();
    (0..h)
        .map(|b| {
            let mut p = GrassmannPolynomial::zero(h, 0);
            for (c, row) in a.iter().enumerate() {
                if row[b] != 0.0 {
                    p.add_term(&[c], &[], cr(row[b]));
                }
            }
            p
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StrongSolution<T> {
    /// `path[k][b] = Psi_{t_k}(v_b)`.
    pub path: Vec<Vec<T>>,
    pub iterations: usize,
    /// Size of the update at every Picard iteration.
    pub increments: Vec<f64>,
    /// Size of `Psi - Phi(Psi)` for the returned path.
    pub residual: f64,
}

/// Picard iteration of `Psi_k = Psi_0 + delta sum_{j<k} mu(Psi_j) + B_{t_k}`
/// with `noise[k][b] = dB_k(v_b)`, until the update is below `tol` in `size`.
pub fn picard_solve<T: FieldAlgebra>(
    drift: &DriftSpec,
    psi0: &[T],
    noise: &[Vec<T>],
    delta: f64,
    size: &(dyn Fn(&T) -> f64 + Sync),
    tol: f64,
    max_iter: usize,
) -> Result<StrongSolution<T>> {
    let h = drift.h_dim();
    if psi0.len() != h || noise.iter().any(|n| n.len() != h) {
        return invalid("fields need one value per basis vector");
    }
    let mut driving = vec![psi0.to_vec()];
    for (k, dn) in noise.iter().enumerate() {
        let next: Vec<T> = driving[k].iter().zip(dn).map(|(x, d)| x.plus(d)).collect();
        driving.push(next);
    }
    let map = |path: &[Vec<T>]| -> Result<Vec<Vec<T>>> {
        let mut out = vec![driving[0].clone()];
        let mut acc: Vec<T> = psi0.iter().map(|p| p.zero_like()).collect();
        for k in 0..noise.len() {
            let mu = drift.evaluate(&path[k])?;
            acc = acc.iter().zip(&mu).map(|(a, m)| a.plus(&m.scaled(cr(delta)))).collect();
            out.push(driving[k + 1].iter().zip(&acc).map(|(d, a)| d.plus(a)).collect());
        }
        Ok(out)
    };
    let gap = |x: &[Vec<T>], y: &[Vec<T>]| -> f64 {
        x.par_iter()
            .zip(y)
            .map(|(u, w)| u.iter().zip(w).map(|(p, q)| size(&p.plus(&q.scaled(cr(-1.0))))).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    };
    let mut path = driving.clone();
    let mut increments = Vec::new();
    for it in 1..=max_iter {
        let next = map(&path)?;
        let inc = gap(&next, &path);
        increments.push(inc);
        path = next;
        if inc < tol {
            let residual = gap(&map(&path)?, &path);
            return Ok(StrongSolution { path, iterations: it, increments, residual });
        }
    }
    Err(Error::Divergence(format!(
        "Picard iteration did not reach {tol:e} in {max_iter} iterations (last update {:e})",
        increments.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Driving increments `dX_k(v_b)` of an operator GBM on its real basis.
pub fn operator_noise(gbm: &GbmProcess) -> Result<Vec<Vec<Mat>>> {
    let basis = real_theta_basis(gbm.spec())?;
    (0..gbm.n_t()).map(|k| basis.iter().map(|v| gbm.increment_index(k, k + 1, v)).collect()).collect()
}

pub fn formal_noise(fg: &FormalGbm) -> Vec<Vec<Formal>> {
    (0..fg.n_t()).map(|k| (0..fg.h_dim()).map(|a| fg.increment(k, a)).collect()).collect()
}

/// Strong solution driven by the GBM itself, sizes in operator norm.
pub fn sde_strong_solve(gbm: &GbmProcess, drift: &DriftSpec, psi0: &[Mat], tol: f64) -> Result<StrongSolution<Mat>> {
    check_dims(drift, gbm.spec().h_dim)?;
    picard_solve(drift, psi0, &operator_noise(gbm)?, gbm.delta(), &op_norm, tol, DEFAULT_MAX_ITER)
}

/// Strong solution in the formal algebra; sizes are the operator-norm bounds
/// from [`Formal::weighted_l1`].
pub fn sde_strong_solve_formal(
    fg: &FormalGbm,
    drift: &DriftSpec,
    psi0: &[Formal],
    tol: f64,
) -> Result<StrongSolution<Formal>> {
    check_dims(drift, fg.h_dim())?;
    let weights = fg.weights().to_vec();
    let size = move |x: &Formal| x.weighted_l1(&weights);
    picard_solve(drift, psi0, &formal_noise(fg), fg.delta(), &size, tol, DEFAULT_MAX_ITER)
}

fn check_dims(drift: &DriftSpec, h: usize) -> Result<()> {
    if drift.h_dim() != h {
        return invalid(format!("drift acts on dimension {} but the noise has {h}", drift.h_dim()));
    }
    Ok(())
}

/// Closed form of the linear scheme:
/// `Psi_n(v) = Psi_0(M^n v) + sum_k dX_k(M^{n-1-k} v)` with `M = 1 + delta A`.
pub fn linear_scheme_closed_form<T: FieldAlgebra>(
    a: &[Vec<f64>],
    delta: f64,
    psi0: &[T],
    noise: &[Vec<T>],
) -> Vec<Vec<T>> {
    let h = a.len();
    let m = DMatrix::<f64>::from_fn(h, h, |i, j| a[i][j] * delta + if i == j { 1.0 } else { 0.0 });
    let powers: Vec<DMatrix<f64>> =
        std::iter::successors(Some(DMatrix::<f64>::identity(h, h)), |p| Some(&m * p)).take(noise.len() + 1).collect();
    propagate(&powers, psi0, noise)
}

/// Left-point form of `X~_0(e^{At} v) + int <e^{A(t-s)} v, dX_s>`.
pub fn ou_closed_form<T: FieldAlgebra>(a: &[Vec<f64>], delta: f64, psi0: &[T], noise: &[Vec<T>]) -> Vec<Vec<T>> {
    let h = a.len();
    let am = DMatrix::<f64>::from_fn(h, h, |i, j| a[i][j]);
    let powers: Vec<DMatrix<f64>> = (0..=noise.len()).map(|k| (&am * (k as f64 * delta)).exp()).collect();
    propagate(&powers, psi0, noise)
}

fn propagate<T: FieldAlgebra>(powers: &[DMatrix<f64>], psi0: &[T], noise: &[Vec<T>]) -> Vec<Vec<T>> {
    let rows = |p: &DMatrix<f64>| -> Vec<Vec<f64>> { (0..p.nrows()).map(|i| p.row(i).iter().copied().collect()).collect() };
    (0..=noise.len())
        .map(|n| {
            let mut out = apply_matrix(&rows(&powers[n]), psi0);
            for (k, dn) in noise.iter().enumerate().take(n) {
                let add = apply_matrix(&rows(&powers[n - 1 - k]), dn);
                out = out.iter().zip(&add).map(|(x, y)| x.plus(y)).collect();
            }
            out
        })
        .collect()
}

/// Largest operator-norm gap between two operator paths.
pub fn path_gap(x: &[Vec<Mat>], y: &[Vec<Mat>]) -> f64 {
    x.iter()
        .zip(y)
        .flat_map(|(u, w)| u.iter().zip(w).map(|(p, q)| op_norm(&(p - q))))
        .fold(0.0, f64::max)
}

/// Largest weighted gap between two formal paths.
pub fn formal_path_gap(x: &[Vec<Formal>], y: &[Vec<Formal>], weights: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .flat_map(|(u, w)| u.iter().zip(w).map(|(p, q)| p.sub(q).weighted_l1(weights)))
        .fold(0.0, f64::max)
}

/// Density used for the weak representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Density {
    /// Product of cell exponentials of `<H, dX> + s/2 Tr(H (x) H) delta`.
    Exponential(Compensator),
    /// `Z_{k+1} = Z_k (1 + <H_k, dX_k>)`.
    Recursion,
}

/// Linear process carrying the weak representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Propagator {
    /// Left-point form of `X~_0(e^{At} v) + int <e^{A(t-s)} v, dX_s>`.
    Ou,
    /// Explicit scheme `Y_{k+1}(v) = Y_k(v) + delta Y_k(A v) + dX_k(v)`.
    Scheme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WeakOptions {
    pub density: Density,
    pub propagator: Propagator,
}

impl Default for WeakOptions {
    fn default() -> Self {
        Self { density: Density::Exponential(Compensator::Bracket), propagator: Propagator::Ou }
    }
}

/// Field point `Psi_t(v_b)` with `t` on the grid.
pub type FieldPoint = (f64, usize);

#[derive(Clone, Debug, Serialize)]
pub struct WeakRow {
    pub test: String,
    /// Largest coefficient gap between strong and weak values.
    pub residual: f64,
    /// Scalar parts of the two sides.
    pub strong: (f64, f64),
    pub weak: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct WeakRepresentation {
    /// `path[k][b] = Y_{t_k}(v_b)`, the linear process started at
    /// `X~_0 + h_0`.
    pub path: Vec<Vec<Formal>>,
    /// `Z_T = z_factors[0] ... z_factors[n-1]`, one even factor per cell.
    pub z_factors: Vec<Formal>,
    /// `omega(Z_T)`.
    pub normalization: Formal,
    /// `max |G~ G~^{-1} - 1|` on the real basis.
    pub gbar_residual: f64,
    pub strong: StrongSolution<Formal>,
    pub rows: Vec<WeakRow>,
    pub max_residual: f64,
}

impl WeakRepresentation {
    /// The full product `Z_T`; its size grows quickly with the grid.
    pub fn z(&self) -> Formal {
        self.z_factors.iter().fold(Formal::one(), |acc, f| acc.mul(f))
    }
}

/// Compares `omega(F(Psi))` for the strong solution with
/// `omega(F(Y) Z_T)`, where `Y` is the linear process, `B = X - int mu^A(Y)`
/// and `Z` is the density of the shift `H_k(u) = mu^A(G~^{-1} u)(Y_k)`.
/// Tests are ordered products of field points.
pub fn sde_weak_represent(
    fg: &FormalGbm,
    drift: &DriftSpec,
    h0: &[Formal],
    tests: &[Vec<FieldPoint>],
    options: WeakOptions,
) -> Result<WeakRepresentation> {
    let h = fg.h_dim();
    check_dims(drift, h)?;
    if h0.len() != h || h0.iter().any(|x| !x.is_odd()) {
        return invalid("h_0 needs one odd value per basis vector");
    }
    let kernel = g_theta_kernel(fg.spec(), fg.basis());
    let (ginv, gbar_residual) = invert_gbar(&kernel)?;
    let psi0: Vec<Formal> = (0..h).map(|a| fg.initial(a).add(&h0[a])).collect();
    let noise = formal_noise(fg);
    let delta = fg.delta();
    let path = match options.propagator {
        Propagator::Ou => ou_closed_form(drift.a(), delta, &psi0, &noise),
        Propagator::Scheme => linear_scheme_closed_form(drift.a(), delta, &psi0, &noise),
    };
    let resid = drift.residual();
    let mut z_factors = Vec::with_capacity(noise.len());
    for (k, dn) in noise.iter().enumerate() {
        let mu_a: Vec<Formal> = resid.iter().map(|p| eval_odd(p, &path[k])).collect::<Result<_>>()?;
        let hk: Vec<Formal> = (0..h)
            .map(|c| {
                let mut acc = Formal::zero();
                for (e, m) in mu_a.iter().enumerate() {
                    acc = acc.add(&m.scale(ginv[e][c]));
                }
                acc
            })
            .collect();
        let mut step = Formal::zero();
        for (hc, d) in hk.iter().zip(dn) {
            step = step.add(&hc.mul(d));
        }
        let factor = match options.density {
            Density::Recursion => Formal::one().add(&step),
            Density::Exponential(comp) => {
                let sign = match comp {
                    Compensator::Bracket => 0.5,
                    Compensator::Literal => -0.5,
                };
                let mut tr = Formal::zero();
                for (a, ha) in hk.iter().enumerate() {
                    for (b, hb) in hk.iter().enumerate() {
                        if kernel[a][b].norm() > 0.0 {
                            tr = tr.add(&ha.mul(hb).scale(kernel[a][b]));
                        }
                    }
                }
                formal_exp(&step)?.mul(&formal_exp(&tr.scale(cr(sign * delta)))?)
            }
        };
        z_factors.push(factor);
    }
    let strong = sde_strong_solve_formal(fg, drift, &psi0, 1e-13)?;
    let index = |t: f64| -> Result<usize> {
        let x = t / delta;
        let k = x.round();
        if (x - k).abs() > 1e-9 || k < 0.0 || k as usize > fg.n_t() {
            return invalid(format!("time {t} is not on the grid"));
        }
        Ok(k as usize)
    };
    let product = |p: &[Vec<Formal>], test: &[FieldPoint]| -> Result<Formal> {
        let mut acc = Formal::one();
        for &(t, b) in test {
            if b >= h {
                return invalid("test direction out of range");
            }
            acc = acc.mul(&p[index(t)?][b]);
        }
        Ok(acc)
    };
    let rows: Vec<WeakRow> = tests
        .par_iter()
        .map(|test| -> Result<WeakRow> {
            let s = fg.state(&product(&strong.path, test)?);
            let w = fg.state_of_factors(&product(&path, test)?, &z_factors);
            let label: Vec<String> = test.iter().map(|(t, b)| format!("psi({t})(v{b})")).collect();
            let (s0, w0) = (s.coefficient(0), w.coefficient(0));
            Ok(WeakRow { test: label.join(" "), residual: s.sub(&w).max_abs(), strong: (s0.re, s0.im), weak: (w0.re, w0.im) })
        })
        .collect::<Result<_>>()?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let normalization = fg.state_of_factors(&Formal::one(), &z_factors);
    Ok(WeakRepresentation { path, z_factors, normalization, gbar_residual, strong, rows, max_residual })
}

/// Exponential of a formal element without scalar part.
pub fn formal_exp(e: &Formal) -> Result<Formal> {
    if e.coefficient(0).norm() > 0.0 {
        return invalid("formal exponent has a scalar part");
    }
    let mut sum = Formal::one();
    let mut term = Formal::one();
    for j in 1..=64 {
        term = term.mul(e).scale(cr(1.0 / j as f64));
        if term.is_empty() {
            return Ok(sum);
        }
        sum = sum.add(&term);
    }
    Err(Error::Divergence("formal exponent is not nilpotent".into()))
}

/// Solves `G~ x = v_c` for every basis vector; `G~ v_b = sum_a B(v_a, v_b) v_a`.
pub fn invert_gbar(kernel: &[Vec<C64>]) -> Result<(Vec<Vec<C64>>, f64)> {
    let h = kernel.len();
    let g = DMatrix::<C64>::from_fn(h, h, |i, j| kernel[i][j]);
    let lu = g.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| Error::Singular("G~ is not invertible".into()))?;
    let resid = (&g * &inv - DMatrix::<C64>::identity(h, h)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if resid > 1e-8 {
        return Err(Error::Singular(format!("G~ inverse residual {resid:e}")));
    }
    Ok(((0..h).map(|i| (0..h).map(|j| inv[(i, j)]).collect()).collect(), resid))
}
