//! Ornstein-Uhlenbeck maps between Haagerup spaces and randomized lower
//! estimates of their norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::kernel::{cr, random_matrix, schatten_norm, Mat};
use crate::lp::{twisted_embed, twisted_unembed};
use crate::model::{QuasiFreeModel, WickBasis};

/// `x W^{1/p} -> P_t(x) W^{1/q}`.
pub fn ou_lp_map(model: &QuasiFreeModel, wb: &WickBasis, a: &Mat, t: f64, p: f64, q: f64) -> Result<Mat> {
    let x = model.sandwich(0.0, a, -1.0 / p);
    let y = wb.ou_semigroup(model, &x, t)?;
    Ok(model.sandwich(0.0, &y, 1.0 / q))
}

/// Twisted variant `T_tau^{(p)}(x) -> T_tau^{(q)}(P_t(x))`.
pub fn ou_twisted_map(
    model: &QuasiFreeModel,
    wb: &WickBasis,
    a: &Mat,
    t: f64,
    p: f64,
    q: f64,
    tau: f64,
) -> Result<Mat> {
    let x = twisted_unembed(model, a, p, tau);
    let y = wb.ou_semigroup(model, &x, t)?;
    twisted_embed(model, &y, q, tau)
}

/// `||P_t(x) W^{1/q}||_q / ||x W^{1/p}||_p`.
pub fn hyper_ratio(model: &QuasiFreeModel, wb: &WickBasis, x: &Mat, t: f64, p: f64, q: f64) -> Result<f64> {
    let den = schatten_norm(&model.sandwich(0.0, x, 1.0 / p), p)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let y = wb.ou_semigroup(model, x, t)?;
    let num = schatten_norm(&model.sandwich(0.0, &y, 1.0 / q), q)?;
    Ok(num / den)
}

#[derive(Clone, Debug)]
pub struct HyperEstimate {
    pub estimate: f64,
    pub argmax: Mat,
}

/// Number of best probes refined by local ascent.
const ASCENT_CANDIDATES: usize = 8;
const ASCENT_STEPS: usize = 200;

/// Lower estimate of `||P_t^{(p,q)}||` from random probes refined by a
/// stochastic hill climb. Deterministic for a fixed seed.
pub fn hyper_norm_estimate(
    model: &QuasiFreeModel,
    wb: &WickBasis,
    t: f64,
    p: f64,
    q: f64,
    probes: usize,
    seed: u64,
) -> Result<HyperEstimate> {
    if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
        return invalid("exponents must lie in (1, inf)");
    }
    if probes == 0 {
        return invalid("at least one probe is required");
    }
    let n = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scored: Vec<(f64, Mat)> = Vec::with_capacity(probes + 1);
    let one = Mat::identity(n, n);
    scored.push((hyper_ratio(model, wb, &one, t, p, q)?, one.clone()));
    for k in 0..probes {
        let g = random_matrix(&mut rng, n);
        let x = match k % 3 {
            0 => {
                let eps = 10f64.powf(rng.gen_range(-2.0..0.0));
                &one + g.scale(eps / crate::kernel::frobenius(&g))
            }
            1 => g,
            _ => {
                let h = (&g + g.adjoint()).scale(0.5);
                let shift = rng.gen_range(0.0..2.0);
                h + &one * cr(shift * crate::kernel::op_norm(&g))
            }
        };
        scored.push((hyper_ratio(model, wb, &x, t, p, q)?, x));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut best = scored[0].clone();
    for (r0, x0) in scored.into_iter().take(ASCENT_CANDIDATES) {
        let (r, x) = ascend(model, wb, x0, r0, t, p, q, &mut rng)?;
        if r > best.0 {
            best = (r, x);
        }
    }
    Ok(HyperEstimate { estimate: best.0, argmax: best.1 })
}

#[allow(clippy::too_many_arguments)]
fn ascend(
    model: &QuasiFreeModel,
    wb: &WickBasis,
    mut x: Mat,
    mut r: f64,
    t: f64,
    p: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Mat)> {
    let n = x.nrows();
    let mut step = 0.1;
    for _ in 0..ASCENT_STEPS {
        let dir = random_matrix(rng, n);
        let scale = crate::kernel::frobenius(&x) / crate::kernel::frobenius(&dir);
        let cand = &x + dir.scale(step * scale);
        let rc = hyper_ratio(model, wb, &cand, t, p, q)?;
        if rc > r {
            r = rc;
            x = cand;
            step = (step * 1.3).min(1.0);
        } else {
            step *= 0.8;
            if step < 1e-6 {
                step = 0.05;
            }
        }
    }
    Ok((r, x))
}

/// Smallest `t` on `[0, t_hi]` (located by bisection) at which the
/// estimate drops to `1 + tol`.
pub fn empirical_threshold(
    model: &QuasiFreeModel,
    wb: &WickBasis,
    p: f64,
    q: f64,
    probes: usize,
    seed: u64,
    t_hi: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let est = |t: f64| -> Result<f64> { Ok(hyper_norm_estimate(model, wb, t, p, q, probes, seed)?.estimate) };
    if est(t_hi)? > 1.0 + tol {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, t_hi);
    if est(lo)? <= 1.0 + tol {
        return Ok(Some(0.0));
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if est(mid)? <= 1.0 + tol {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    Ok(Some(hi))
}
