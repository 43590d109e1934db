//! Antisymmetric Fock space over a finite one-particle space in the
//! occupation-bitmask basis with Jordan-Wigner signs.

use crate::error::{invalid, Error, Result};
use crate::kernel::{cr, matmul, Mat, Vector, C64};

/// Default cap on the number of modes (Fock dimension 4096).
pub const DEFAULT_MODE_CAP: usize = 12;

/// Basis state `S` (a bitmask) is `a*_{s_1} ... a*_{s_k} Omega` with
/// `s_1 < ... < s_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockBasis {
    modes: usize,
}

impl FockBasis {
    pub fn new(modes: usize) -> Result<Self> {
        Self::with_cap(modes, DEFAULT_MODE_CAP)
    }

    pub fn with_cap(modes: usize, cap: usize) -> Result<Self> {
        if modes > cap {
            return Err(Error::Resource(format!("{modes} modes exceed the cap of {cap}")));
        }
        if modes >= usize::BITS as usize - 1 {
            return Err(Error::Resource(format!("{modes} modes do not fit a bitmask")));
        }
        Ok(Self { modes })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        1usize << self.modes
    }

    pub fn vacuum(&self) -> Vector {
        let mut v = Vector::zeros(self.dim());
        v[0] = cr(1.0);
        v
    }

    fn check_len(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.modes {
            return invalid(format!(
                "one-particle vector has length {}, expected {}",
                f.len(),
                self.modes
            ));
        }
        Ok(())
    }

    /// `a(f) = sum_i conj(f_i) a_i`, antilinear in `f`.
    pub fn annihilator(&self, f: &[C64]) -> Result<Mat> {
        self.check_len(f)?;
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        for (i, fi) in f.iter().enumerate() {
            if *fi == C64::new(0.0, 0.0) {
                continue;
            }
            let coeff = fi.conj();
            let bit = 1usize << i;
            for s in 0..n {
                if s & bit != 0 {
                    out[(s ^ bit, s)] += coeff * jw_sign(s, i);
                }
            }
        }
        Ok(out)
    }

    /// `a*(f) = a(f)*`, linear in `f`.
    pub fn creator(&self, f: &[C64]) -> Result<Mat> {
        Ok(self.annihilator(f)?.adjoint())
    }

    /// Single-mode lowering operator `a_i`.
    pub fn lowering(&self, i: usize) -> Mat {
        let mut e = vec![cr(0.0); self.modes];
        e[i] = cr(1.0);
        self.annihilator(&e).expect("length matches")
    }

    /// Applies `a*(f)` to a state vector in `O(m 2^m)`.
    pub fn apply_creator(&self, f: &[C64], psi: &Vector) -> Result<Vector> {
        self.check_len(f)?;
        let mut out = Vector::zeros(self.dim());
        for (i, fi) in f.iter().enumerate() {
            if *fi == C64::new(0.0, 0.0) {
                continue;
            }
            let bit = 1usize << i;
            for s in 0..self.dim() {
                if s & bit == 0 && psi[s] != C64::new(0.0, 0.0) {
                    out[s | bit] += fi * psi[s] * jw_sign(s, i);
                }
            }
        }
        Ok(out)
    }

    /// `a*(f_1) ... a*(f_n) Omega`.
    pub fn wedge_vector(&self, fs: &[Vec<C64>]) -> Result<Vector> {
        if fs.len() > self.modes {
            return invalid("more wedge factors than modes");
        }
        let mut psi = self.vacuum();
        for f in fs.iter().rev() {
            psi = self.apply_creator(f, &psi)?;
        }
        Ok(psi)
    }

    /// `Gamma(B)`, acting on wedges as `Bf_1 ^ ... ^ Bf_n`.
    pub fn second_quantization(&self, b: &Mat) -> Result<Mat> {
        if b.nrows() != self.modes || b.ncols() != self.modes {
            return invalid("second quantization expects an m x m matrix");
        }
        let cols: Vec<Vec<C64>> = (0..self.modes)
            .map(|j| b.column(j).iter().copied().collect())
            .collect();
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        for t in 0..n {
            let factors: Vec<Vec<C64>> = (0..self.modes)
                .filter(|j| t >> j & 1 == 1)
                .map(|j| cols[j].clone())
                .collect();
            let v = self.wedge_vector(&factors)?;
            out.set_column(t, &v);
        }
        Ok(out)
    }

    pub fn number_operator(&self) -> Mat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                cr(i.count_ones() as f64)
            } else {
                cr(0.0)
            }
        })
    }

    /// Parity operator `(-1)^N`.
    pub fn parity_operator(&self) -> Mat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                cr(parity_sign(i))
            } else {
                cr(0.0)
            }
        })
    }
}

/// `(-1)^{#occupied modes strictly below i}`.
#[inline]
pub fn jw_sign(s: usize, i: usize) -> f64 {
    let below = s & ((1usize << i) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn parity_sign(s: usize) -> f64 {
    if s.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Grading of an operator with respect to fermion parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Splits `x` into even and odd parts and reports its grade.
pub fn parity_of(x: &Mat, tol: f64) -> Parity {
    let mut even: f64 = 0.0;
    let mut odd: f64 = 0.0;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let v = x[(i, j)].norm();
            if (i ^ j).count_ones() % 2 == 0 {
                even = even.max(v);
            } else {
                odd = odd.max(v);
            }
        }
    }
    match (even > tol, odd > tol) {
        (_, false) => Parity::Even,
        (false, true) => Parity::Odd,
        (true, true) => Parity::Mixed,
    }
}

/// `Gamma(B1) Gamma(B2)` convenience used by functoriality checks.
pub fn gamma_product(basis: &FockBasis, b1: &Mat, b2: &Mat) -> Result<Mat> {
    Ok(matmul(&basis.second_quantization(b1)?, &basis.second_quantization(b2)?))
}
