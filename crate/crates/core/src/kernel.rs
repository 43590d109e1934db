//! Dense complex-matrix numerics: products, Schatten norms, fractional powers
//! of positive operators and Hermitian functional calculus.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Vector = DVector<C64>;

/// Tolerance used for Hermiticity checks, relative to the operator scale.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

const ZGEMM_THRESHOLD: usize = 24;

/// Matrix product; large products go through a blocked zgemm kernel.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m.min(k).min(n) < ZGEMM_THRESHOLD {
        return a * b;
    }
    let mut out = Mat::zeros(m, n);
    // nalgebra storage is column-major: element (i,j) at i + j*nrows.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// Matrix exponential by scaling and squaring: `exp(A) = T(A / 2^s)^(2^s)`
/// with a degree-16 Taylor polynomial evaluated by Horner's rule and
/// `||A / 2^s||_1 <= 1/4`.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm1 = (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm1 / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let b = a * cr(0.5f64.powi(s));
    let mut acc = identity(n);
    for k in (1..=16).rev() {
        acc = identity(n) + matmul(&b, &acc) * cr(1.0 / k as f64);
    }
    for _ in 0..s {
        acc = matmul(&acc, &acc);
    }
    acc
}

/// Product of a chain of matrices, left to right.
pub fn product(ops: &[&Mat]) -> Mat {
    let mut it = ops.iter();
    let first = it.next().expect("empty product");
    let mut acc = (*first).clone();
    for op in it {
        acc = matmul(&acc, op);
    }
    acc
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    matmul(a, b) - matmul(b, a)
}

pub fn anticommutator(a: &Mat, b: &Mat) -> Mat {
    matmul(a, b) + matmul(b, a)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn trace(a: &Mat) -> C64 {
    a.diagonal().iter().sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &Mat, b: &Mat) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Inner product linear in the second argument.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    assert_eq!(u.len(), v.len(), "inner product length mismatch");
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vnorm(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(a: &Mat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermitian_defect(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

/// Symmetrizes `a` when its Hermiticity defect is below tolerance,
/// otherwise rejects it.
pub fn hermitize(a: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return invalid("operator must be square and non-empty");
    }
    if !is_finite(a) {
        return invalid("non-finite entries");
    }
    let scale = 1.0f64.max(a.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL * scale {
        return invalid(format!("operator is not Hermitian (defect {defect:.3e})"));
    }
    Ok((a + a.adjoint()).scale(0.5))
}

/// Singular values in decreasing order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let n = a.nrows().max(a.ncols());
    let mut s: Vec<f64> = if n <= 128 {
        a.clone().singular_values().iter().copied().collect()
    } else {
        let g = matmul(&a.adjoint(), a);
        let g = (&g + g.adjoint()).scale(0.5);
        g.symmetric_eigenvalues()
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .collect()
    };
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::UnsupportedExponent(format!("p = {p} must lie in [1, inf]")));
    }
    Ok(())
}

/// `(sum sigma_i^p)^(1/p)`; `p = f64::INFINITY` gives the operator norm.
pub fn schatten_norm(a: &Mat, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !is_finite(a) {
        return invalid("non-finite entries");
    }
    if p == 2.0 {
        return Ok(frobenius(a));
    }
    let s = singular_values(a);
    if p.is_infinite() {
        return Ok(s.first().copied().unwrap_or(0.0));
    }
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = s.iter().map(|x| (x / top).powf(p)).sum();
    Ok(top * sum.powf(1.0 / p))
}

pub fn op_norm(a: &Mat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Hermitian eigendecomposition with eigenvalues sorted increasingly.
pub fn eigh(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    let h = hermitize(a)?;
    let e = h.symmetric_eigen();
    let n = e.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].partial_cmp(&e.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &e.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// `V diag(d) V*`.
pub fn from_spectrum(vecs: &Mat, d: &[C64]) -> Mat {
    let mut scaled = vecs.clone();
    for (j, &dj) in d.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= dj;
        }
    }
    matmul(&scaled, &vecs.adjoint())
}

/// Applies `f` to the spectrum of a Hermitian operator.
pub fn matrix_function(a: &Mat, f: impl Fn(f64) -> C64) -> Result<Mat> {
    let (vals, vecs) = eigh(a)?;
    let d: Vec<C64> = vals.iter().map(|&l| f(l)).collect();
    Ok(from_spectrum(&vecs, &d))
}

pub fn min_eigenvalue(a: &Mat) -> Result<f64> {
    let h = hermitize(a)?;
    Ok(h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

/// Square root of a positive semidefinite operator; slightly negative
/// eigenvalues from rounding are clipped to zero.
pub fn psd_sqrt(a: &Mat) -> Result<Mat> {
    matrix_function(a, |l| cr(l.max(0.0).sqrt()))
}

/// `|a|^2 = a* a`.
pub fn abs_sq(a: &Mat) -> Mat {
    matmul(&a.adjoint(), a)
}

/// Multiplies row i by `left[i]` and column j by `right[j]`.
pub fn diag_sandwich(left: &[f64], x: &Mat, right: &[f64]) -> Mat {
    let n = x.nrows();
    assert_eq!(left.len(), n);
    assert_eq!(right.len(), x.ncols());
    Mat::from_fn(n, x.ncols(), |i, j| x[(i, j)] * (left[i] * right[j]))
}

/// A strictly positive Hermitian operator with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct PositiveOperator {
    base: Mat,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat,
    diagonal: bool,
}

impl PositiveOperator {
    pub fn new(a: &Mat) -> Result<Self> {
        let h = hermitize(a)?;
        let n = h.nrows();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)].norm() == 0.0));
        let (vals, vecs) = if diagonal {
            ((0..n).map(|i| h[(i, i)].re).collect::<Vec<_>>(), identity(n))
        } else {
            eigh(&h)?
        };
        Self::check_spectrum(&vals)?;
        Ok(Self { base: h, eigenvalues: vals, eigenvectors: vecs, diagonal })
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        if d.is_empty() {
            return invalid("empty spectrum");
        }
        Self::check_spectrum(d)?;
        let n = d.len();
        let base = Mat::from_fn(n, n, |i, j| if i == j { cr(d[i]) } else { cr(0.0) });
        Ok(Self { base, eigenvalues: d.to_vec(), eigenvectors: identity(n), diagonal: true })
    }

    fn check_spectrum(vals: &[f64]) -> Result<()> {
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let low = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if !(top > 0.0) || low < 1e-14 * top {
            return Err(Error::Singular(format!(
                "smallest eigenvalue {low:.3e} below 1e-14 of largest {top:.3e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.base
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat {
        &self.eigenvectors
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Diagonal of `W^z` when the operator is diagonal in the working basis.
    pub fn diagonal_power(&self, z: f64) -> Option<Vec<f64>> {
        self.diagonal
            .then(|| self.eigenvalues.iter().map(|l| l.powf(z)).collect())
    }

    pub fn power(&self, z: f64) -> Mat {
        if z == 0.0 {
            return identity(self.dim());
        }
        let d: Vec<C64> = self.eigenvalues.iter().map(|l| cr(l.powf(z))).collect();
        if self.diagonal {
            let n = self.dim();
            return Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { cr(0.0) });
        }
        from_spectrum(&self.eigenvectors, &d)
    }

    /// `W^{it}` for real t.
    pub fn imaginary_power(&self, t: f64) -> Mat {
        let d: Vec<C64> = self
            .eigenvalues
            .iter()
            .map(|l| C64::from_polar(1.0, t * l.ln()))
            .collect();
        if self.diagonal {
            let n = self.dim();
            return Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { cr(0.0) });
        }
        from_spectrum(&self.eigenvectors, &d)
    }
}

/// `W^z` for a strictly positive operator.
pub fn frac_power(w: &PositiveOperator, z: f64) -> Mat {
    w.power(z)
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    random_vector(rng, n).iter().copied().collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> Mat {
    Mat::from_fn(n, n, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let a = random_matrix(rng, n);
    (&a + a.adjoint()).scale(0.5)
}

/// Haar-distributed unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let qr = random_matrix(rng, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { cr(1.0) };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schatten_trivial_values() {
        let id = identity(2);
        assert!((schatten_norm(&id, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let d = Mat::from_diagonal(&Vector::from_vec(vec![cr(3.0), cr(4.0)]));
        assert!((schatten_norm(&d, f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn schatten_two_matches_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [3, 7, 30] {
            let a = random_matrix(&mut rng, n);
            let direct = trace(&matmul(&a.adjoint(), &a)).re.sqrt();
            let via_svd = {
                let s = singular_values(&a);
                s.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
            assert!((schatten_norm(&a, 2.0).unwrap() - direct).abs() < 1e-12 * direct);
            assert!((via_svd - direct).abs() < 1e-11 * direct);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = identity(2);
        a[(0, 1)] = cr(f64::NAN);
        assert!(schatten_norm(&a, 2.0).is_err());
        assert!(schatten_norm(&identity(2), 0.5).is_err());
        let mut b = identity(2);
        b[(0, 1)] = cr(1.0);
        assert!(matrix_function(&b, |l| cr(l)).is_err());
    }

    #[test]
    fn zgemm_agrees_with_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Mat::from_fn(40, 33, |_, _| random_vec(&mut rng, 1)[0]);
        let b = Mat::from_fn(33, 50, |_, _| random_vec(&mut rng, 1)[0]);
        assert!(max_abs_diff(&matmul(&a, &b), &(&a * &b)) < 1e-12);
    }

    #[test]
    fn frac_power_examples() {
        let w = PositiveOperator::from_diagonal(&[1.0 / 17.0, 16.0 / 17.0]).unwrap();
        let h = w.power(0.5);
        assert!((h[(0, 0)].re - 1.0 / 17f64.sqrt()).abs() < 1e-15);
        assert!((h[(1, 1)].re - 4.0 / 17f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.power(0.0), identity(2));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 6);
        let pos = matmul(&a.adjoint(), &a) + identity(6).scale(0.1);
        let w = PositiveOperator::new(&pos).unwrap();
        let prod = matmul(&w.power(1.0 / 3.0), &w.power(2.0 / 3.0));
        assert!(max_abs_diff(&prod, w.matrix()) < 1e-10 * op_norm(w.matrix()));
    }

    #[test]
    fn singular_positive_operator_is_rejected() {
        assert!(matches!(
            PositiveOperator::from_diagonal(&[1.0, 1e-16]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn matrix_function_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hermitian(&mut rng, 5);
        let same = matrix_function(&a, cr).unwrap();
        assert!(max_abs_diff(&same, &a) < 1e-12 * op_norm(&a));
        let one = matrix_function(&a, |_| cr(1.0)).unwrap();
        assert!(max_abs_diff(&one, &identity(5)) < 1e-12);
        let sq = matrix_function(&a, |l| cr(l * l)).unwrap();
        assert!(max_abs_diff(&sq, &matmul(&a, &a)) < 1e-12 * op_norm(&a).powi(2));
    }
}
