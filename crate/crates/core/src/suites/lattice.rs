use super::{rel, Ctx};
use crate::error::Result;
use crate::phi4::*;
use crate::report::Recorder;

/// Cutoffs used to calibrate the decay constants of the series bounds.
pub const CALIBRATION_CUTOFFS: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 256.0];
pub const LINEAR_FIT_LAMBDAS: [f64; 4] = [0.01, 0.02, 0.05, 0.1];

pub(super) fn phi4(_ctx: &Ctx, r: &mut Recorder) -> Result<()> {
    let mut fft = 0.0f64;
    for theta in [0.0, 0.1, 0.25, 0.4] {
        let spec = LatticeSpec::new(theta, vec![4.0])?;
        for t in [0.0, 1.0, 1.5, 2.0, 3.0, 4.0] {
            let p = profile(&spec, t)?;
            let brute = zero_momentum_sum_brute(&p)?;
            let n = min_grid(p.radius);
            for grid in [n, n.next_power_of_two()] {
                fft = fft.max(rel(zero_momentum_sum_fft(&p, grid)?, brute));
            }
        }
    }
    r.at_most("fft_vs_brute", fft, 1e-10);

    for theta in [0.1, 0.25] {
        let spec = LatticeSpec::new(theta, vec![128.0])?;
        let fit = covariance_growth(&spec, &[8.0, 16.0, 32.0, 64.0, 128.0])?;
        r.at_most(&format!("covariance_exponent_gap_theta{theta}"), (fit.increment_slope - 2.0 * theta).abs(), 0.1);
        r.report(&format!("covariance_raw_slope_theta{theta}"), fit.power_slope);
    }

    let spec = LatticeSpec::new(0.1, vec![1024.0])?;
    let short = difference_decay(&spec, &[8.0, 16.0, 32.0, 64.0], 256.0)?;
    r.at_most("decay_slope_theta0.1", short.slope, -1.0);
    let long = difference_decay(&spec, &[64.0, 128.0, 256.0], 1024.0)?;
    r.report("decay_slope_theta0.1_s64_256", long.slope);
    r.report("decay_nu_fit", short.nu_fit);

    let (s, t) = (8.0, 32.0);
    let tele = v_l2_difference(&spec, s, t)? + v_l2_norm_sq(&spec, s)?;
    r.at_most("telescoping", rel(tele, v_l2_norm_sq(&spec, t)?), 1e-10);

    let cal = calibrate(&LatticeSpec::new(0.1, CALIBRATION_CUTOFFS.to_vec())?)?;
    let mut diverged = 0.0;
    let mut hypothesis = true;
    for i in 0..=10 {
        let row = partition_series(&cal, i as f64 * 0.01, 1.0)?;
        hypothesis &= row.hypothesis_ok;
        if !row.converged {
            diverged += 1.0;
        }
    }
    r.at_least("series_hypothesis_theta0.1", if hypothesis { 1.0 } else { 0.0 }, 1.0);
    r.at_most("series_divergent_lambdas", diverged, 0.0);
    let fit = partition_linear_fit(&cal, &LINEAR_FIT_LAMBDAS)?;
    r.report("linear_fit_min_ratio", fit.min_ratio);
    r.report("linear_fit_max_ratio", fit.max_ratio);
    r.at_most("linear_fit_spread", fit.max_ratio / fit.min_ratio, 3.0);
    Ok(())
}
