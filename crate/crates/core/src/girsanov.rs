//! Stochastic exponentials, signed expectations `a -> omega(a Z)`, the
//! Brownian matching oracle, Girsanov shifts and the Levy-type check.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::filtration::Filtration;
use crate::fock::{parity_of, Parity};
use crate::gbm::{GbmProcess, GbmSpec};
use crate::grassmann::GrassmannPolynomial;
use crate::ito::{g_theta_kernel, ito_path, real_theta_basis, trace_pairing};
use crate::kernel::{cr, frobenius, identity, inner, matmul, max_abs_diff, op_norm, Mat, C64};
use crate::matching::matching_sum;
use crate::model::FieldModel;
use crate::process::AdaptedSimpleProcess;

const MAX_ORDER: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    /// Number of series terms used, counting the constant term.
    pub order: usize,
    /// `Some(j)` when `e^j` vanished numerically.
    pub nilpotency: Option<usize>,
    /// `sum_j ||e^j||_2 / j!` (Frobenius) over the terms used.
    pub novikov_sum: f64,
}

/// `exp(e)` by its power series. Stops when `e^j` vanishes or the next term
/// is below `tol` relative to the partial sum, both in Frobenius norm; the
/// summability certificate uses the same norm, which dominates every
/// `L^p` norm of the finite model up to the dimension factor.
pub fn exp_series(e: &Mat, tol: f64) -> Result<(Mat, SeriesReport)> {
    let n = e.nrows();
    let mut sum = identity(n);
    let mut novikov = 1.0;
    let mut power = identity(n);
    let ne = frobenius(e);
    let mut fact = 1.0;
    for j in 1..=MAX_ORDER {
        power = matmul(&power, e);
        fact *= j as f64;
        let size_f = frobenius(&power);
        if size_f <= 1e-13 && size_f <= 1e-13 * ne.powi(j as i32) {
            return Ok((sum, SeriesReport { order: j, nilpotency: Some(j), novikov_sum: novikov }));
        }
        let term = &power * cr(1.0 / fact);
        let size = frobenius(&term);
        novikov += size;
        sum += &term;
        if size <= tol * frobenius(&sum) {
            return Ok((sum, SeriesReport { order: j + 1, nilpotency: None, novikov_sum: novikov }));
        }
    }
    Err(Error::Novikov(format!("no convergence within {MAX_ORDER} terms")))
}

/// Dense matrix exponential by scaling and squaring.
pub fn exp_matrix(e: &Mat) -> Mat {
    crate::kernel::expm(e)
}

/// Sign convention for the compensator in the exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Compensator {
    /// `e = int <H, dX> - 1/2 [int <H, dX>]`. For odd `H` the bracket is
    /// `-Tr(H (x) H)`, so this adds `+1/2 int Tr(H (x) H) ds`.
    Bracket,
    /// `e = int <H, dX> - 1/2 int Tr(H (x) H) ds` read with the trace kernel
    /// as written.
    Literal,
}

/// Compensated exponent at every grid index.
pub fn exponent_path(gbm: &GbmProcess, h: &AdaptedSimpleProcess, comp: Compensator) -> Result<Vec<Mat>> {
    let path = ito_path(gbm, h)?;
    let kernel = g_theta_kernel(gbm.spec(), &real_theta_basis(gbm.spec())?);
    let sign = match comp {
        Compensator::Bracket => 0.5,
        Compensator::Literal => -0.5,
    };
    let mut acc = Mat::zeros(path[0].nrows(), path[0].ncols());
    let mut out = vec![path[0].clone()];
    for k in 0..path.len() - 1 {
        let hk = cell_values(gbm, h, k)?;
        acc += trace_pairing(&kernel, hk, hk)? * cr(sign * gbm.delta());
        out.push(&path[k + 1] + &acc);
    }
    Ok(out)
}

/// Grid solution of `Z = 1 + int <Z H, dX>`:
/// `Z_{k+1} = Z_k + sum_a Z_k H_k(v_a) dX_k(v_a)`.
pub fn exponential_recursion_path(gbm: &GbmProcess, h: &AdaptedSimpleProcess) -> Result<Vec<Mat>> {
    check_odd(h)?;
    h.certify_adapted(&gbm.filtration(), 1e-10)?;
    let basis = real_theta_basis(gbm.spec())?;
    let mut z = vec![identity(gbm.model().dim())];
    for k in 0..gbm.n_t() {
        let mut step = Mat::zeros(z[k].nrows(), z[k].ncols());
        for (ha, v) in cell_values(gbm, h, k)?.iter().zip(&basis) {
            step += matmul(ha, &gbm.increment_index(k, k + 1, v)?);
        }
        let next = &z[k] + matmul(&z[k], &step);
        z.push(next);
    }
    Ok(z)
}

/// Values of `h` on GBM cell `k`.
fn cell_values<'h>(gbm: &GbmProcess, h: &'h AdaptedSimpleProcess, k: usize) -> Result<&'h [Mat]> {
    let t = gbm.times()[k];
    let j = h
        .grid
        .windows(2)
        .position(|w| w[0] <= t + 1e-12 && t < w[1] - 1e-12)
        .ok_or_else(|| Error::InvalidInput(format!("cell starting at {t} not covered")))?;
    Ok(&h.values[j])
}

fn check_odd(h: &AdaptedSimpleProcess) -> Result<()> {
    for vals in &h.values {
        for v in vals {
            if parity_of(v, 1e-10) != Parity::Odd && v.iter().any(|z| z.norm() > 1e-10) {
                return Err(Error::Parity("integrand of a stochastic exponential must be odd".into()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentialReport {
    pub series: SeriesReport,
    /// `||series - expm||_inf`.
    pub series_vs_matrix: f64,
    /// `sup_s ||Tr(H_s (x) H_s)||_2` (Frobenius, an upper bound for the
    /// operator norm); finite for simple bounded `H`.
    pub trace_bound: f64,
    /// `||Z^{-1} (series) - Z^{-1} (matrix inverse)||_inf`.
    pub inverse_defect: f64,
    pub condition: f64,
}

pub struct StochasticExponential {
    pub z: Mat,
    pub inverse: Mat,
    pub exponent: Mat,
    pub report: ExponentialReport,
}

/// `Z_t = exp(e_t)` at a grid time, with the series cross-checked against a
/// dense exponential and the inverse against the matrix inverse.
pub fn stochastic_exponential(gbm: &GbmProcess, h: &AdaptedSimpleProcess, t: f64) -> Result<StochasticExponential> {
    check_odd(h)?;
    let k = gbm.grid_index(t)?;
    let e = exponent_path(gbm, h, Compensator::Bracket)?.swap_remove(k);
    exponential_of(gbm, h, e)
}

fn exponential_of(gbm: &GbmProcess, h: &AdaptedSimpleProcess, e: Mat) -> Result<StochasticExponential> {
    let (z, series) = exp_series(&e, 1e-17)?;
    let series_vs_matrix = max_abs_diff(&z, &exp_matrix(&e));
    let (zi_series, _) = exp_series(&(-&e), 1e-17)?;
    let (inverse, condition) = invert(&z)?;
    let inverse_defect = max_abs_diff(&zi_series, &inverse);
    let kernel = g_theta_kernel(gbm.spec(), &real_theta_basis(gbm.spec())?);
    let mut trace_bound: f64 = 0.0;
    for vals in &h.values {
        trace_bound = trace_bound.max(frobenius(&trace_pairing(&kernel, vals, vals)?));
    }
    let report = ExponentialReport { series, series_vs_matrix, trace_bound, inverse_defect, condition };
    Ok(StochasticExponential { z, inverse, exponent: e, report })
}

/// `Z_{t_k} = exp(e_{t_k})` at every grid index.
pub fn stochastic_exponential_path(gbm: &GbmProcess, h: &AdaptedSimpleProcess, comp: Compensator) -> Result<Vec<Mat>> {
    check_odd(h)?;
    exponent_path(gbm, h, comp)?.iter().map(|e| exp_series(e, 1e-17).map(|(z, _)| z)).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquationResidual {
    /// `max_k ||R_k||_inf`.
    pub sup: f64,
    /// `max_k omega(R_k^* R_k)^{1/2}`.
    pub l2: f64,
}

/// Residual `R_k = Z_{t_k} - 1 - int_0^{t_k} <Z H, dX>` with left-endpoint
/// integrands.
pub fn exponential_equation_residual(gbm: &GbmProcess, h: &AdaptedSimpleProcess, z: &[Mat]) -> Result<EquationResidual> {
    let n = gbm.n_t().min(z.len() - 1);
    let times = gbm.times()[..=n].to_vec();
    let values = (0..n)
        .map(|k| Ok(cell_values(gbm, h, k)?.iter().map(|hv| matmul(&z[k], hv)).collect()))
        .collect::<Result<Vec<Vec<Mat>>>>()?;
    let zh = AdaptedSimpleProcess::indexed(times, values)?;
    let path = ito_path(gbm, &zh)?;
    let one = identity(z[0].nrows());
    let mut out = EquationResidual { sup: 0.0, l2: 0.0 };
    for k in 0..=n {
        let r = &z[k] - &one - &path[k];
        out.sup = out.sup.max(op_norm(&r));
        out.l2 = out.l2.max(gbm.model().state_product(&r.adjoint(), &r).re.max(0.0).sqrt());
    }
    Ok(out)
}

/// `max_{s <= t} ||omega_s(Z_t) - Z_s||_inf` over grid levels.
pub fn martingale_defect(filt: &Filtration, z: &[Mat]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in 0..z.len() {
        for s in 0..=t {
            worst = worst.max(max_abs_diff(&filt.cond_exp(&z[t], s)?, &z[s]));
        }
    }
    Ok(worst)
}

/// Matrix inverse with the condition number `||Z|| ||Z^{-1}||` in operator
/// norm.
fn invert(z: &Mat) -> Result<(Mat, f64)> {
    let inv = z.clone().try_inverse().ok_or_else(|| Error::Singular("density is not invertible".into()))?;
    if !crate::kernel::is_finite(&inv) {
        return Err(Error::Singular("density inverse is not finite".into()));
    }
    let cond = op_norm(z) * op_norm(&inv);
    if !(cond < 1e13) {
        return Err(Error::Singular(format!("density with condition number {cond:.3e}")));
    }
    Ok((inv, cond))
}

/// `E(a) = omega(a Z_inf)` and `E_t(a) = omega_t(a Z_inf) Z_t^{-1}`.
pub struct SignedExpectation<'a> {
    filt: Filtration<'a>,
    z_inf: Mat,
    z: Vec<Mat>,
    z_inv: Vec<Mat>,
    condition: Vec<f64>,
}

impl<'a> SignedExpectation<'a> {
    pub fn new(filt: Filtration<'a>, z_inf: Mat) -> Result<Self> {
        let norm = filt.model().state(&z_inf);
        if (norm - cr(1.0)).norm() > 1e-9 {
            return invalid(format!("density has omega(Z) = {norm}"));
        }
        if parity_of(&z_inf, 1e-10) != Parity::Even {
            return Err(Error::Parity("density must be even".into()));
        }
        let mut z = Vec::with_capacity(filt.n_levels());
        let mut z_inv = Vec::with_capacity(filt.n_levels());
        let mut condition = Vec::with_capacity(filt.n_levels());
        for l in 0..filt.n_levels() {
            let zt = filt.cond_exp(&z_inf, l)?;
            let block = filt.reduce(&zt, l)?;
            let (inv, c) = invert(&block)?;
            if max_abs_diff(&matmul(&block, &inv), &identity(block.nrows())) > 1e-9 {
                return Err(Error::Singular(format!("inverse of Z at level {l} is inaccurate")));
            }
            z_inv.push(filt.lift(&inv, l)?);
            z.push(zt);
            condition.push(c);
        }
        Ok(Self { filt, z_inf, z, z_inv, condition })
    }

    /// The unweighted state, `Z = 1`.
    pub fn unit(filt: Filtration<'a>) -> Result<Self> {
        let n = filt.model().dim();
        Self::new(filt, identity(n))
    }

    pub fn filtration(&self) -> &Filtration<'a> {
        &self.filt
    }

    pub fn density(&self) -> &Mat {
        &self.z_inf
    }

    pub fn density_at(&self, level: usize) -> &Mat {
        &self.z[level]
    }

    pub fn inverse_at(&self, level: usize) -> &Mat {
        &self.z_inv[level]
    }

    pub fn condition_numbers(&self) -> &[f64] {
        &self.condition
    }

    pub fn expect(&self, a: &Mat) -> C64 {
        self.filt.model().state_product(a, &self.z_inf)
    }

    pub fn cond_exp(&self, a: &Mat, level: usize) -> Result<Mat> {
        if level >= self.z.len() {
            return invalid(format!("level {level} out of range"));
        }
        Ok(matmul(&self.filt.cond_exp(&matmul(a, &self.z_inf), level)?, &self.z_inv[level]))
    }
}

/// Alias matching the operation name used in reports.
pub fn signed_cond_exp(se: &SignedExpectation, a: &Mat, level: usize) -> Result<Mat> {
    se.cond_exp(a, level)
}

/// Signed sum over perfect matchings of `<Theta v_i, G v_j> (t_i ^ t_j)`.
pub fn matching_moment(spec: &GbmSpec, points: &[(f64, Vec<C64>)]) -> C64 {
    matching_sum(points.len(), &|i, j| {
        let (ti, vi) = &points[i];
        let (tj, vj) = &points[j];
        spec.bilinear(vi, vj) * ti.min(*tj)
    })
}

/// `H_s(v) = lambda theta_j <w, v>` with `theta_j` a reserved generator,
/// constant in time.
pub fn reserved_linear_integrand(gbm: &GbmProcess, j: usize, lambda: f64, w: &[C64]) -> Result<AdaptedSimpleProcess> {
    let theta = gbm.reserved_generator(j)?;
    let basis = real_theta_basis(gbm.spec())?;
    let vals: Vec<Mat> = basis.iter().map(|v| &theta * (inner(w, v) * lambda)).collect();
    AdaptedSimpleProcess::indexed(gbm.times().to_vec(), vec![vals; gbm.n_t()])
}

/// `H_s(v) = lambda X_{s-}(u) <w, v>` evaluated at the left endpoint of each
/// cell. Its exponential is not nilpotent.
pub fn field_linear_integrand(gbm: &GbmProcess, lambda: f64, u: &[C64], w: &[C64]) -> Result<AdaptedSimpleProcess> {
    let basis = real_theta_basis(gbm.spec())?;
    let values = (0..gbm.n_t())
        .map(|k| {
            let x = gbm.field_index(k, u)?;
            Ok(basis.iter().map(|v| &x * (inner(w, v) * lambda)).collect())
        })
        .collect::<Result<Vec<Vec<Mat>>>>()?;
    AdaptedSimpleProcess::indexed(gbm.times().to_vec(), values)
}

/// `H_s(v_a) = lambda (r theta_a + X_{s-}(u_a))` on the real basis `v_a`, one
/// vector `u_a` per basis element. A nonzero weight `r` needs one reserved
/// mode per basis vector.
pub fn field_integrand(gbm: &GbmProcess, lambda: f64, r: f64, us: &[Vec<C64>]) -> Result<AdaptedSimpleProcess> {
    let basis = real_theta_basis(gbm.spec())?;
    if us.len() != basis.len() {
        return invalid("one field direction per real basis vector");
    }
    let thetas: Vec<Option<Mat>> = (0..us.len())
        .map(|a| if r != 0.0 { gbm.reserved_generator(a).map(|t| Some(t * cr(r))) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let values = (0..gbm.n_t())
        .map(|k| {
            us.iter()
                .zip(&thetas)
                .map(|(u, th)| {
                    let mut x = gbm.field_index(k, u)?;
                    if let Some(th) = th {
                        x += th;
                    }
                    Ok(x * cr(lambda))
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<Mat>>>>()?;
    AdaptedSimpleProcess::indexed(gbm.times().to_vec(), values)
}

/// `B_t(v) = X_t(v) - int_0^t H_s(g(v)) ds` together with the signed
/// expectation built from the grid solution of `Z = 1 + int <Z H, dX>`
/// (it equals the exponential series whenever the latter is exact). The drift
/// argument is `g(v) = sum_a <Theta v_a, G v> v_a`, the vector whose
/// `H`-image is the bracket `[X(v), int <H, dX>]` per unit time.
pub struct GirsanovShift<'g> {
    gbm: &'g GbmProcess,
    h: AdaptedSimpleProcess,
    basis: Vec<Vec<C64>>,
    z_path: Vec<Mat>,
    se: SignedExpectation<'g>,
}

pub fn girsanov_shift<'g>(gbm: &'g GbmProcess, h: AdaptedSimpleProcess) -> Result<GirsanovShift<'g>> {
    check_odd(&h)?;
    let z_path = exponential_recursion_path(gbm, &h)?;
    let zt = z_path.last().unwrap().clone();
    let se = SignedExpectation::new(gbm.filtration(), zt)?;
    let basis = real_theta_basis(gbm.spec())?;
    Ok(GirsanovShift { gbm, h, basis, z_path, se })
}

impl<'g> GirsanovShift<'g> {
    pub fn signed_expectation(&self) -> &SignedExpectation<'g> {
        &self.se
    }

    pub fn z_path(&self) -> &[Mat] {
        &self.z_path
    }

    pub fn integrand(&self) -> &AdaptedSimpleProcess {
        &self.h
    }

    /// `int_0^{t_j} H_s(g(v)) ds`.
    pub fn drift(&self, j: usize, v: &[C64]) -> Result<Mat> {
        let n = self.gbm.model().dim();
        let mut out = Mat::zeros(n, n);
        let coeffs: Vec<C64> = self.basis.iter().map(|va| self.gbm.spec().bilinear(va, v)).collect();
        for k in 0..j {
            let hk = cell_values(self.gbm, &self.h, k)?;
            for (c, ha) in coeffs.iter().zip(hk) {
                if c.norm() > 0.0 {
                    out += ha * (*c * self.gbm.delta());
                }
            }
        }
        Ok(out)
    }

    /// `B_{t_j}(v)`.
    pub fn field(&self, j: usize, v: &[C64]) -> Result<Mat> {
        Ok(self.gbm.field_index(j, v)? - self.drift(j, v)?)
    }

    /// `max_{s < t} ||E_s(B_t(v)) - B_s(v)||_inf`.
    pub fn martingale_defect(&self, v: &[C64]) -> Result<f64> {
        let fields: Vec<Mat> = (0..=self.gbm.n_t()).map(|j| self.field(j, v)).collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for t in 0..fields.len() {
            for s in 0..=t {
                worst = worst.max(max_abs_diff(&self.se.cond_exp(&fields[t], s)?, &fields[s]));
            }
        }
        Ok(worst)
    }

    /// `E(B_{t_1}(v_1) ... B_{t_n}(v_n))` at grid indices.
    pub fn moment(&self, points: &[(usize, Vec<C64>)]) -> Result<C64> {
        let mut acc: Option<Mat> = None;
        for (j, v) in points {
            let b = self.field(*j, v)?;
            acc = Some(match acc {
                None => b,
                Some(a) => matmul(&a, &b),
            });
        }
        let n = self.gbm.model().dim();
        Ok(self.se.expect(&acc.unwrap_or_else(|| identity(n))))
    }

    /// Largest deviation of the signed moments from the matching oracle.
    pub fn moment_residual(&self, points: &[Vec<(usize, Vec<C64>)>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pts in points {
            let lhs = self.moment(pts)?;
            let timed: Vec<(f64, Vec<C64>)> = pts.iter().map(|(j, v)| (self.gbm.times()[*j], v.clone())).collect();
            worst = worst.max((lhs - matching_moment(self.gbm.spec(), &timed)).norm());
        }
        Ok(worst)
    }

    /// `max_k ||E_{t_k}(dB_k(v) dB_k(v')) - omega_{t_k}(dX_k(v) dX_k(v'))||_inf`:
    /// the cell compensators of the shifted field under the signed
    /// expectation against those of `X` under `omega`.
    pub fn bracket_defect(&self, v: &[C64], vp: &[C64]) -> Result<f64> {
        let filt = self.gbm.filtration();
        let mut worst: f64 = 0.0;
        for k in 0..self.gbm.n_t() {
            let db = self.field(k + 1, v)? - self.field(k, v)?;
            let dbp = self.field(k + 1, vp)? - self.field(k, vp)?;
            let dx = self.gbm.increment_index(k, k + 1, v)?;
            let dxp = self.gbm.increment_index(k, k + 1, vp)?;
            let lhs = self.se.cond_exp(&matmul(&db, &dbp), k)?;
            let rhs = filt.cond_exp(&matmul(&dx, &dxp), k)?;
            worst = worst.max(max_abs_diff(&lhs, &rhs));
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevyReport {
    /// Max coefficient deviation at each grid time.
    pub per_time: Vec<f64>,
    pub deviation: f64,
}

/// Reference `S_N(t)` for a Brownian motion: the solution of
/// `S_A(t) = 1 + sum_{i<j in A} int_0^t c_ij theta_j theta_i S_{A \ {i,j}}(s) ds`,
/// stored as Grassmann coefficients of each power of `t`.
pub fn levy_reference(c: &[Vec<C64>]) -> Vec<GrassmannPolynomial> {
    let n = c.len();
    // S_A as polynomial in t: index = power.
    let mut table: BTreeMap<u32, Vec<GrassmannPolynomial>> = BTreeMap::new();
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        let mut s = vec![GrassmannPolynomial::constant(n, 0, cr(1.0))];
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                let rest = &table[&(mask & !(1 << i) & !(1 << j))];
                let mut pair = GrassmannPolynomial::zero(n, 0);
                pair.add_term(&[j, i], &[], c[i][j]);
                for (p, coef) in rest.iter().enumerate() {
                    let integrated = pair.mul(coef).scale(cr(1.0 / (p + 1) as f64));
                    if s.len() < p + 2 {
                        s.resize(p + 2, GrassmannPolynomial::zero(n, 0));
                    }
                    s[p + 1] = s[p + 1].add(&integrated);
                }
            }
        }
        table.insert(mask, s);
    }
    table.remove(&((1u32 << n) - 1)).unwrap()
}

/// Compares `E_0(prod_i (1 + theta_i int <f_i, dB>))` for the candidate
/// field `b(j, f)` with the Brownian reference, over every grid time. The
/// `theta_i` are formal odd generators; expanding the product gives the
/// coefficient `(-1)^{k(k-1)/2} E_0(I_{i_1} ... I_{i_k})` of
/// `theta_{i_1} ... theta_{i_k}`.
pub fn levy_check(
    gbm: &GbmProcess,
    b: &dyn Fn(usize, &[C64]) -> Result<Mat>,
    se: &SignedExpectation,
    directions: &[Vec<C64>],
) -> Result<LevyReport> {
    let n = directions.len();
    if n == 0 {
        return Ok(LevyReport { per_time: vec![0.0; gbm.n_t() + 1], deviation: 0.0 });
    }
    if n > 8 {
        return invalid("at most 8 directions");
    }
    let spec = gbm.spec();
    let c: Vec<Vec<C64>> =
        (0..n).map(|i| (0..n).map(|j| spec.bilinear(&directions[i], &directions[j])).collect()).collect();
    let reference = levy_reference(&c);
    let dim = gbm.model().dim();
    let one = identity(dim);
    let mut per_time = Vec::with_capacity(gbm.n_t() + 1);
    for j in 0..=gbm.n_t() {
        let t = gbm.times()[j];
        let fields: Vec<Mat> = directions.iter().map(|f| b(j, f)).collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for mask in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let k = members.len();
            let mut prod = one.clone();
            for &i in &members {
                prod = matmul(&prod, &fields[i]);
            }
            let sign = if (k * (k.saturating_sub(1)) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let cand = se.cond_exp(&prod, 0)? * cr(sign);
            let mut expected = cr(0.0);
            for (p, coef) in reference.iter().enumerate() {
                if let Some(z) = coef.terms().get(&(members.clone(), Vec::new())) {
                    expected += z * t.powi(p as i32);
                }
            }
            worst = worst.max(max_abs_diff(&cand, &(&one * expected)));
        }
        per_time.push(worst);
    }
    let deviation = per_time.iter().cloned().fold(0.0, f64::max);
    Ok(LevyReport { per_time, deviation })
}
