//! Itô integrals against a discretized GBM, trace pairings, twisted Hardy
//! norms, quadratic variation and the Itô-formula residual engine.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gbm::{GbmProcess, GbmSpec};
use crate::grassmann::GrassmannPolynomial;
use crate::kernel::{abs_sq, cr, hermitize, inner, matmul, max_abs_diff, psd_sqrt, schatten_norm, Mat, C64};
use crate::lp::{tau_grid, twisted_embed, twisted_norm};
use crate::process::AdaptedSimpleProcess;

/// `(e_j (+) e_j)/sqrt 2` and `(i e_j (+) -i e_j)/sqrt 2`; each vector is
/// fixed by the swap conjugation.
pub fn real_theta_basis(spec: &GbmSpec) -> Result<Vec<Vec<C64>>> {
    if spec.h_dim % 2 != 0 || spec.h_dim == 0 {
        return invalid("the swap conjugation needs an even dimension");
    }
    let m = spec.half();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(spec.h_dim);
    for j in 0..m {
        let mut a = vec![cr(0.0); spec.h_dim];
        a[j] = cr(s);
        a[j + m] = cr(s);
        let mut b = vec![cr(0.0); spec.h_dim];
        b[j] = C64::new(0.0, s);
        b[j + m] = C64::new(0.0, -s);
        out.push(a);
        out.push(b);
    }
    Ok(out)
}

/// Real orthonormal basis rotated by the real orthogonal matrix `o`
/// (`v'_a = sum_g o[g][a] v_g`).
pub fn rotate_basis(basis: &[Vec<C64>], o: &[Vec<f64>]) -> Vec<Vec<C64>> {
    let k = basis.len();
    (0..k)
        .map(|a| {
            let mut v = vec![cr(0.0); basis[0].len()];
            for (g, bg) in basis.iter().enumerate() {
                for (vi, b) in v.iter_mut().zip(bg) {
                    *vi += b * o[g][a];
                }
            }
            v
        })
        .collect()
}

/// Values `F(v'_a)` of a linear map on a rotated basis.
pub fn rotate_values(values: &[Mat], o: &[Vec<f64>]) -> Vec<Mat> {
    let k = values.len();
    (0..k)
        .map(|a| {
            let mut acc = values[0].scale(0.0);
            for (g, vg) in values.iter().enumerate() {
                acc += vg * cr(o[g][a]);
            }
            acc
        })
        .collect()
}

/// `c_a = <v_a, v>`, so `v = sum c_a v_a`.
pub fn real_coefficients(basis: &[Vec<C64>], v: &[C64]) -> Vec<C64> {
    basis.iter().map(|b| inner(b, v)).collect()
}

/// Kernel `K[a][b] = <A v_a, v_b>` of a linear operator.
pub fn operator_kernel(a: &Mat, basis: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let av: Vec<Vec<C64>> = basis
        .iter()
        .map(|v| {
            let x = a * crate::kernel::Vector::from_column_slice(v);
            x.as_slice().to_vec()
        })
        .collect();
    (0..basis.len()).map(|i| (0..basis.len()).map(|j| inner(&av[i], &basis[j])).collect()).collect()
}

/// Kernel of `G* Theta`: `<G* Theta v_a, v_b> = <Theta v_a, G v_b>`.
pub fn g_theta_kernel(spec: &GbmSpec, basis: &[Vec<C64>]) -> Vec<Vec<C64>> {
    (0..basis.len()).map(|i| (0..basis.len()).map(|j| spec.bilinear(&basis[i], &basis[j])).collect()).collect()
}

/// `Tr_A(F (x) H) = sum K[a][b] F(v_a) H(v_b)`.
pub fn trace_pairing(kernel: &[Vec<C64>], f: &[Mat], h: &[Mat]) -> Result<Mat> {
    if f.len() != kernel.len() || h.len() != kernel.len() {
        return invalid("indexed maps must have one value per basis vector");
    }
    let mut out = f[0].scale(0.0);
    for (a, fa) in f.iter().enumerate() {
        for (b, hb) in h.iter().enumerate() {
            let k = kernel[a][b];
            if k.norm() > 0.0 {
                out += matmul(fa, hb) * k;
            }
        }
    }
    Ok(out)
}

/// `|F|_A^2 = Tr_A(F* (x) F)`.
pub fn abs_sq_a(kernel: &[Vec<C64>], f: &[Mat]) -> Result<Mat> {
    let fs: Vec<Mat> = f.iter().map(|x| x.adjoint()).collect();
    trace_pairing(kernel, &fs, f)
}

/// Cell mapping between a process grid and the GBM grid: for each GBM cell
/// the process cell containing it.
fn cell_map(gbm: &GbmProcess, f: &AdaptedSimpleProcess) -> Result<Vec<usize>> {
    let mut marks = Vec::with_capacity(f.grid.len());
    for &g in &f.grid {
        marks.push(gbm.grid_index(g)?);
    }
    if marks[0] != 0 {
        return invalid("process grid must start at 0");
    }
    let mut out = Vec::new();
    for (j, w) in marks.windows(2).enumerate() {
        out.extend(std::iter::repeat(j).take(w[1] - w[0]));
    }
    Ok(out)
}

/// `Y_{t_k}` for every GBM grid index `k` covered by the process, for an
/// integrand indexed on the real basis.
pub fn ito_path(gbm: &GbmProcess, f: &AdaptedSimpleProcess) -> Result<Vec<Mat>> {
    let basis = real_theta_basis(gbm.spec())?;
    if !f.indexed || f.index_dim() != basis.len() {
        return invalid("indexed integrand expected with one value per real basis vector");
    }
    f.certify_adapted(&gbm.filtration(), 1e-10)?;
    let map = cell_map(gbm, f)?;
    let n = gbm.model().dim();
    let mut path = vec![Mat::zeros(n, n)];
    for (k, &j) in map.iter().enumerate() {
        let mut step = Mat::zeros(n, n);
        for (a, v) in basis.iter().enumerate() {
            let val = &f.values[j][a];
            if val.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            step += matmul(val, &gbm.increment_index(k, k + 1, v)?);
        }
        let next = path.last().unwrap() + step;
        path.push(next);
    }
    Ok(path)
}

/// Path of `int F dX(v)` for a scalar integrand.
pub fn ito_path_along(gbm: &GbmProcess, f: &AdaptedSimpleProcess, v: &[C64]) -> Result<Vec<Mat>> {
    if f.indexed {
        return invalid("scalar integrand expected");
    }
    f.certify_adapted(&gbm.filtration(), 1e-10)?;
    let map = cell_map(gbm, f)?;
    let n = gbm.model().dim();
    let mut path = vec![Mat::zeros(n, n)];
    for (k, &j) in map.iter().enumerate() {
        let step = matmul(&f.values[j][0], &gbm.increment_index(k, k + 1, v)?);
        let next = path.last().unwrap() + step;
        path.push(next);
    }
    Ok(path)
}

/// `int_0^t <F_s, dX_s>` at a grid time.
pub fn ito_integral(gbm: &GbmProcess, f: &AdaptedSimpleProcess, t: f64) -> Result<Mat> {
    let k = gbm.grid_index(t)?;
    let path = ito_path(gbm, f)?;
    path.get(k).cloned().ok_or_else(|| Error::InvalidInput(format!("time {t} beyond the integrand's grid")))
}

/// `int_0^t F_s dX_s(v)` at a grid time.
pub fn ito_integral_along(gbm: &GbmProcess, f: &AdaptedSimpleProcess, v: &[C64], t: f64) -> Result<Mat> {
    let k = gbm.grid_index(t)?;
    let path = ito_path_along(gbm, f, v)?;
    path.get(k).cloned().ok_or_else(|| Error::InvalidInput(format!("time {t} beyond the integrand's grid")))
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometryCheck {
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub rel_defect: f64,
}

/// `||T_tau(Y_t)||_2^2` against `c int ||T_tau(F_r)||_2^2 dr` for a scalar
/// integrand along `v`, with the supplied constant.
pub fn isometry_check(
    gbm: &GbmProcess,
    f: &AdaptedSimpleProcess,
    v: &[C64],
    tau: f64,
    constant: f64,
) -> Result<IsometryCheck> {
    let model = gbm.model();
    let y = ito_path_along(gbm, f, v)?;
    let lhs = schatten_norm(&twisted_embed(model, y.last().unwrap(), 2.0, tau)?, 2.0)?.powi(2);
    let mut integral = 0.0;
    for (j, vals) in f.values.iter().enumerate() {
        integral += f.width(j) * schatten_norm(&twisted_embed(model, &vals[0], 2.0, tau)?, 2.0)?.powi(2);
    }
    let rhs = constant * integral;
    Ok(IsometryCheck { tau, lhs, rhs, constant, rel_defect: (lhs - rhs).abs() / lhs.abs().max(1e-300) })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HardyTwistedNorm {
    pub hc: f64,
    pub hr: f64,
    pub combined: f64,
}

/// `sup_tau ||(int |T_tau^{(p)}(F)^#|_A^2 ds)^{1/2}||_p` over the twist grid,
/// for the cells of `f` up to grid index `upto` of the process grid.
pub fn hardy_twisted_norm(
    gbm: &GbmProcess,
    f: &AdaptedSimpleProcess,
    p: f64,
    upto: usize,
    kernel: &[Vec<C64>],
) -> Result<HardyTwistedNorm> {
    if p < 2.0 {
        return Err(Error::UnsupportedExponent(format!("twisted Hardy norms need p >= 2, got {p}")));
    }
    let model = gbm.model();
    let n = model.dim();
    let mut hc: f64 = 0.0;
    let mut hr: f64 = 0.0;
    for tau in tau_grid(p) {
        let mut col = Mat::zeros(n, n);
        let mut row = Mat::zeros(n, n);
        for j in 0..upto.min(f.cells()) {
            let tv: Vec<Mat> = f.values[j].iter().map(|x| twisted_embed(model, x, p, tau)).collect::<Result<_>>()?;
            let w = cr(f.width(j));
            col += abs_sq_a(kernel, &tv)? * w;
            let ts: Vec<Mat> = tv.iter().map(|x| x.adjoint()).collect();
            row += abs_sq_a(kernel, &ts)? * w;
        }
        hc = hc.max(schatten_norm(&psd_sqrt(&hermitize(&sym(&col))?)?, p)?);
        hr = hr.max(schatten_norm(&psd_sqrt(&hermitize(&sym(&row))?)?, p)?);
    }
    Ok(HardyTwistedNorm { hc, hr, combined: hc.max(hr) })
}

fn sym(a: &Mat) -> Mat {
    (a + a.adjoint()) * cr(0.5)
}

/// `(int ||F_s||_{L^p}^2 ds)^{1/2}` for a scalar integrand.
pub fn l2_lp_norm(gbm: &GbmProcess, f: &AdaptedSimpleProcess, p: f64) -> Result<f64> {
    let mut s = 0.0;
    for (j, vals) in f.values.iter().enumerate() {
        let mut cell: f64 = 0.0;
        for v in vals {
            cell += twisted_norm(gbm.model(), v, p)?.powi(2);
        }
        s += f.width(j) * cell;
    }
    Ok(s.sqrt())
}

/// An Itô process `Y = Y_0 + int <H, dX> + int K ds` on the GBM grid.
#[derive(Clone, Debug)]
pub struct ItoProcess {
    pub y0: Mat,
    /// Indexed integrand on the GBM grid.
    pub h: AdaptedSimpleProcess,
    /// Drift on the GBM grid, if any.
    pub k: Option<AdaptedSimpleProcess>,
    pub path: Vec<Mat>,
}

impl ItoProcess {
    pub fn new(gbm: &GbmProcess, y0: Mat, h: AdaptedSimpleProcess, k: Option<AdaptedSimpleProcess>) -> Result<Self> {
        let filt = gbm.filtration();
        if max_abs_diff(&filt.cond_exp(&y0, 0)?, &y0) > 1e-10 {
            return Err(Error::NotAdapted("initial value outside the time-zero algebra".into()));
        }
        let mut path = ito_path(gbm, &h)?;
        if let Some(k) = &k {
            k.certify_adapted(&filt, 1e-10)?;
            let map = cell_map(gbm, k)?;
            let mut acc = Mat::zeros(y0.nrows(), y0.ncols());
            for (c, &j) in map.iter().enumerate() {
                acc += &k.values[j][0] * cr(gbm.delta());
                path[c + 1] += &acc;
            }
        }
        for p in path.iter_mut() {
            *p += &y0;
        }
        Ok(Self { y0, h, k, path })
    }

    /// Increment over GBM cell `c`.
    pub fn increment(&self, c: usize) -> Mat {
        &self.path[c + 1] - &self.path[c]
    }

    pub fn h_cell(&self, gbm: &GbmProcess, c: usize) -> Result<&[Mat]> {
        let map = cell_map(gbm, &self.h)?;
        Ok(&self.h.values[map[c]])
    }
}

#[derive(Clone, Debug)]
pub struct QuadraticVariation {
    /// `[Y, Y']_{t_k}` by the trace-pairing formula.
    pub bracket: Vec<Mat>,
    /// `sup_{s <= t} ||omega_s(Y_t Y'_t - [Y,Y']_t) - (Y_s Y'_s - [Y,Y']_s)||`.
    pub compensator_defect: f64,
}

/// Bracket of two Itô processes with simple integrands on the GBM grid.
pub fn quadratic_variation(gbm: &GbmProcess, y: &ItoProcess, yp: &ItoProcess) -> Result<QuadraticVariation> {
    let basis = real_theta_basis(gbm.spec())?;
    let kernel = g_theta_kernel(gbm.spec(), &basis);
    let n = gbm.model().dim();
    let cells = y.path.len().min(yp.path.len()) - 1;
    let mut bracket = vec![Mat::zeros(n, n)];
    for c in 0..cells {
        let tr = trace_pairing(&kernel, y.h_cell(gbm, c)?, yp.h_cell(gbm, c)?)?;
        let next = bracket.last().unwrap() + tr * cr(gbm.delta());
        bracket.push(next);
    }
    let filt = gbm.filtration();
    let comp: Vec<Mat> = (0..=cells).map(|k| matmul(&y.path[k], &yp.path[k]) - &bracket[k]).collect();
    let mut defect: f64 = 0.0;
    for t in 0..=cells {
        for s in 0..=t {
            let e = filt.cond_exp(&comp[t], filt.level_at(gbm.times()[s])?)?;
            defect = defect.max(max_abs_diff(&e, &comp[s]));
        }
    }
    Ok(QuadraticVariation { bracket, compensator_defect: defect })
}

/// Odd and even Itô fields indexed by the anticommuting and commuting
/// generators of a polynomial.
#[derive(Clone, Debug)]
pub struct ItoFamily {
    pub odd: Vec<ItoProcess>,
    pub even: Vec<ItoProcess>,
}

impl ItoFamily {
    fn values_at(&self, k: usize) -> (Vec<Mat>, Vec<Mat>) {
        (
            self.odd.iter().map(|y| y.path[k].clone()).collect(),
            self.even.iter().map(|y| y.path[k].clone()).collect(),
        )
    }
}

/// `||F(Y_T) - F(Y_0) - sum int dF dY - brackets||_{L^2}` on the GBM grid,
/// with left-endpoint evaluation of every integrand.
pub fn ito_formula_residual(gbm: &GbmProcess, family: &ItoFamily, f: &GrassmannPolynomial) -> Result<f64> {
    let x = ito_formula_defect(gbm, family, f)?;
    twisted_norm(gbm.model(), &x, 2.0)
}

/// The operator whose norm is [`ito_formula_residual`].
pub fn ito_formula_defect(gbm: &GbmProcess, family: &ItoFamily, f: &GrassmannPolynomial) -> Result<Mat> {
    if f.n_anti() != family.odd.len() || f.n_sym() != family.even.len() {
        return invalid("polynomial index sets do not match the family");
    }
    let n = gbm.model().dim();
    let basis = real_theta_basis(gbm.spec())?;
    let kernel = g_theta_kernel(gbm.spec(), &basis);
    let cells = gbm.n_t();
    let (zm, zp) = family.values_at(cells);
    let (rm, rp) = family.values_at(0);
    let mut out = f.eval(&zm, &zp, n)? - f.eval(&rm, &rp, n)?;
    let d_odd: Vec<GrassmannPolynomial> = (0..f.n_anti()).map(|a| f.derivative_right(a)).collect();
    let d_even: Vec<GrassmannPolynomial> = (0..f.n_sym()).map(|a| f.derivative_sym(a)).collect();
    let delta = cr(gbm.delta());
    for c in 0..cells {
        let (ym, yp) = family.values_at(c);
        for (a, d) in d_odd.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            out -= matmul(&d.eval(&ym, &yp, n)?, &family.odd[a].increment(c));
            for (b, yb) in family.odd.iter().enumerate() {
                let dd = d.derivative_right(b);
                if dd.is_zero() {
                    continue;
                }
                let tr = trace_pairing(&kernel, yb.h_cell(gbm, c)?, family.odd[a].h_cell(gbm, c)?)?;
                out -= matmul(&dd.eval(&ym, &yp, n)?, &tr) * (delta * 0.5);
            }
        }
        for (a, d) in d_even.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            out -= matmul(&d.eval(&ym, &yp, n)?, &family.even[a].increment(c));
            for b in 0..family.even.len() {
                let dd = d.derivative_sym(b);
                if dd.is_zero() {
                    continue;
                }
                let tr = trace_pairing(&kernel, family.even[b].h_cell(gbm, c)?, family.even[a].h_cell(gbm, c)?)?;
                out -= matmul(&dd.eval(&ym, &yp, n)?, &tr) * (delta * 0.5);
            }
            for b in 0..family.odd.len() {
                let dd = d.derivative_right(b);
                if dd.is_zero() {
                    continue;
                }
                let tr = trace_pairing(&kernel, family.even[a].h_cell(gbm, c)?, family.odd[b].h_cell(gbm, c)?)?;
                out -= matmul(&dd.eval(&ym, &yp, n)?, &tr) * delta;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub n_t: usize,
    pub delta: f64,
    pub residual: f64,
    /// `residual / previous residual`; `None` on the first row.
    pub ratio: Option<f64>,
}

/// Residual table over a sequence of grids.
pub fn residual_table(
    n_ts: &[usize],
    build: impl Fn(usize) -> Result<(GbmProcess, ItoFamily)>,
    f: &GrassmannPolynomial,
) -> Result<Vec<ResidualRow>> {
    let mut rows: Vec<ResidualRow> = Vec::new();
    for &n_t in n_ts {
        let (gbm, fam) = build(n_t)?;
        let residual = ito_formula_residual(&gbm, &fam, f)?;
        let ratio = rows.last().map(|r| residual / r.residual);
        rows.push(ResidualRow { n_t, delta: gbm.delta(), residual, ratio });
    }
    Ok(rows)
}

/// CSV rendering `n_t,delta,residual,ratio`.
pub fn residual_csv(rows: &[ResidualRow]) -> String {
    let mut s = String::from("n_t,delta,residual,ratio\n");
    for r in rows {
        let ratio = r.ratio.map(|x| format!("{x:.6}")).unwrap_or_default();
        s.push_str(&format!("{},{:.6},{:.6e},{}\n", r.n_t, r.delta, r.residual, ratio));
    }
    s
}

/// `||(sum |x|^2)^{1/2}||_p` helper for column brackets of one operator.
pub fn column_abs(x: &Mat, p: f64) -> Result<f64> {
    schatten_norm(&psd_sqrt(&abs_sq(x))?, p)
}
