//! Polynomials in anticommuting and commuting indeterminates, their
//! derivatives and their evaluation on Grassmann-valued fields.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::fock::{parity_of, Parity};
use crate::kernel::{anticommutator, cr, identity, matmul, Mat, C64};

/// Key of a monomial: strictly increasing anticommuting indices and a
/// sorted multiset of commuting indices.
pub type MonomialKey = (Vec<usize>, Vec<usize>);

#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannPolynomial {
    n_anti: usize,
    n_sym: usize,
    terms: BTreeMap<MonomialKey, C64>,
}

/// Sorts `idx` in place and returns the permutation sign, or `None` when
/// an index repeats.
fn sort_with_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

impl GrassmannPolynomial {
    pub fn zero(n_anti: usize, n_sym: usize) -> Self {
        Self { n_anti, n_sym, terms: BTreeMap::new() }
    }

    pub fn constant(n_anti: usize, n_sym: usize, c: C64) -> Self {
        let mut p = Self::zero(n_anti, n_sym);
        p.add_term(&[], &[], c);
        p
    }

    /// The linear anticommuting generator `w_i`.
    pub fn anti(n_anti: usize, n_sym: usize, i: usize) -> Self {
        let mut p = Self::zero(n_anti, n_sym);
        p.add_term(&[i], &[], cr(1.0));
        p
    }

    /// The linear commuting generator `w_i`.
    pub fn sym(n_anti: usize, n_sym: usize, i: usize) -> Self {
        let mut p = Self::zero(n_anti, n_sym);
        p.add_term(&[], &[i], cr(1.0));
        p
    }

    pub fn n_anti(&self) -> usize {
        self.n_anti
    }

    pub fn n_sym(&self) -> usize {
        self.n_sym
    }

    pub fn terms(&self) -> &BTreeMap<MonomialKey, C64> {
        &self.terms
    }

    /// Adds `c w_{anti[0]} ... w_{anti[k]} (x) w_{sym...}`, reordering the
    /// anticommuting factors with the corresponding sign.
    pub fn add_term(&mut self, anti: &[usize], sym: &[usize], c: C64) {
        assert!(anti.iter().all(|&i| i < self.n_anti) && sym.iter().all(|&i| i < self.n_sym));
        let mut a = anti.to_vec();
        let Some(sign) = sort_with_sign(&mut a) else { return };
        let mut s = sym.to_vec();
        s.sort_unstable();
        let e = self.terms.entry((a, s)).or_insert(cr(0.0));
        *e += c * sign;
        self.prune();
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > 1e-300);
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|(a, s)| a.len() + s.len()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_shape(&self, other: &Self) {
        assert!(self.n_anti == other.n_anti && self.n_sym == other.n_sym, "polynomial index sets differ");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_shape(other);
        let mut out = self.clone();
        for (k, c) in &other.terms {
            *out.terms.entry(k.clone()).or_insert(cr(0.0)) += c;
        }
        out.prune();
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out.prune();
        out
    }

    /// Product `(A (x) S)(A' (x) S') = (A ^ A') (x) (S S')`.
    pub fn mul(&self, other: &Self) -> Self {
        self.check_shape(other);
        let mut out = Self::zero(self.n_anti, self.n_sym);
        for ((a1, s1), c1) in &self.terms {
            for ((a2, s2), c2) in &other.terms {
                let a: Vec<usize> = a1.iter().chain(a2).copied().collect();
                let s: Vec<usize> = s1.iter().chain(s2).copied().collect();
                out.add_term(&a, &s, c1 * c2);
            }
        }
        out
    }

    /// Anticommuting derivative peeling factors from the left:
    /// `d_w (v ^ F) = <w, v> F - v ^ d_w F`.
    pub fn derivative_anti(&self, w: usize) -> Self {
        let mut out = Self::zero(self.n_anti, self.n_sym);
        for ((a, s), c) in &self.terms {
            if let Some(m) = a.iter().position(|&i| i == w) {
                let mut rest = a.clone();
                rest.remove(m);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out.add_term(&rest, s, c * sign);
            }
        }
        out
    }

    /// Anticommuting derivative peeling factors from the right; this is
    /// the derivative for which the Taylor formula carries the increments
    /// to the right of the derivative.
    pub fn derivative_right(&self, w: usize) -> Self {
        let mut out = Self::zero(self.n_anti, self.n_sym);
        for ((a, s), c) in &self.terms {
            if let Some(m) = a.iter().position(|&i| i == w) {
                let mut rest = a.clone();
                rest.remove(m);
                let sign = if (a.len() - 1 - m) % 2 == 0 { 1.0 } else { -1.0 };
                out.add_term(&rest, s, c * sign);
            }
        }
        out
    }

    /// Commuting derivative.
    pub fn derivative_sym(&self, w: usize) -> Self {
        let mut out = Self::zero(self.n_anti, self.n_sym);
        for ((a, s), c) in &self.terms {
            let mult = s.iter().filter(|&&i| i == w).count();
            if mult > 0 {
                let mut rest = s.clone();
                let m = rest.iter().position(|&i| i == w).unwrap();
                rest.remove(m);
                out.add_term(a, &rest, c * mult as f64);
            }
        }
        out
    }

    /// `F(Z) = sum F^{anti}(Z_-) F^{sym}(Z_+)`.
    pub fn eval(&self, z_minus: &[Mat], z_plus: &[Mat], n: usize) -> Result<Mat> {
        if z_minus.len() != self.n_anti || z_plus.len() != self.n_sym {
            return invalid("field count does not match the polynomial's index sets");
        }
        let mut out = Mat::zeros(n, n);
        let mut cache: BTreeMap<MonomialKey, Mat> = BTreeMap::new();
        for ((a, s), c) in &self.terms {
            let key = (a.clone(), s.clone());
            let m = match cache.get(&key) {
                Some(m) => m.clone(),
                None => {
                    let mut acc: Option<Mat> = None;
                    for &i in a {
                        acc = Some(match acc {
                            None => z_minus[i].clone(),
                            Some(x) => matmul(&x, &z_minus[i]),
                        });
                    }
                    for &i in s {
                        acc = Some(match acc {
                            None => z_plus[i].clone(),
                            Some(x) => matmul(&x, &z_plus[i]),
                        });
                    }
                    let m = acc.unwrap_or_else(|| identity(n));
                    cache.insert(key, m.clone());
                    m
                }
            };
            out += m * *c;
        }
        Ok(out)
    }

    /// [`eval`](Self::eval) after checking parities and pairwise
    /// anticommutation of the odd fields.
    pub fn eval_checked(&self, z_minus: &[Mat], z_plus: &[Mat], n: usize, tol: f64) -> Result<Mat> {
        for (i, z) in z_minus.iter().enumerate() {
            if parity_of(z, tol) != Parity::Odd && z.iter().any(|v| v.norm() > tol) {
                return Err(Error::Parity(format!("odd field {i} is not odd")));
            }
            for (j, y) in z_minus.iter().enumerate().skip(i) {
                if anticommutator(z, y).iter().any(|v| v.norm() > tol) {
                    return Err(Error::Parity(format!("odd fields {i} and {j} do not anticommute")));
                }
            }
        }
        for (i, z) in z_plus.iter().enumerate() {
            if parity_of(z, tol) == Parity::Odd || parity_of(z, tol) == Parity::Mixed {
                return Err(Error::Parity(format!("even field {i} is not even")));
            }
        }
        self.eval(z_minus, z_plus, n)
    }

    /// Right-hand side of the Taylor formula expanded at `R`:
    /// `sum 1/(k! l!) d..d F(R) prod (Z_- - R_-) prod (Z_+ - R_+)`.
    pub fn taylor(&self, z_minus: &[Mat], z_plus: &[Mat], r_minus: &[Mat], r_plus: &[Mat], n: usize) -> Result<Mat> {
        let dm: Vec<Mat> = z_minus.iter().zip(r_minus).map(|(z, r)| z - r).collect();
        let dp: Vec<Mat> = z_plus.iter().zip(r_plus).map(|(z, r)| z - r).collect();
        let mut out = Mat::zeros(n, n);
        let k_max = self.degree();
        let mut fact = vec![1.0; k_max + 1];
        for i in 1..=k_max {
            fact[i] = fact[i - 1] * i as f64;
        }
        for n_tot in 1..=k_max {
            for l in 0..=n_tot {
                let k = n_tot - l;
                for anti in tuples(self.n_anti, k) {
                    for sym in tuples(self.n_sym, l) {
                        let mut d = self.clone();
                        for &j in sym.iter().rev() {
                            d = d.derivative_sym(j);
                        }
                        for &j in anti.iter().rev() {
                            d = d.derivative_right(j);
                        }
                        if d.is_zero() {
                            continue;
                        }
                        let mut term = d.eval(r_minus, r_plus, n)?;
                        for &j in &anti {
                            term = matmul(&term, &dm[j]);
                        }
                        for &j in &sym {
                            term = matmul(&term, &dp[j]);
                        }
                        out += term * cr(1.0 / (fact[k] * fact[l]));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// All `k`-tuples over `0..n`.
pub fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * n);
        for t in &out {
            for i in 0..n {
                let mut u = t.clone();
                u.push(i);
                next.push(u);
            }
        }
        out = next;
    }
    out
}
