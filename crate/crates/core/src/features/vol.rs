//! Volatility measures: the realized variance family, noise-robust
//! kernel and pre-averaged estimators, semivariances, bipower variation,
//! jump variation, and spot volatility.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Bandwidth and kernel choice for the realized kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub bandwidth: usize,
}

impl KernelSpec {
    /// Default bandwidth H = ceil(n^(3/5)).
    pub fn for_length(n: usize) -> Self {
        KernelSpec {
            bandwidth: (n as f64).powf(0.6).ceil() as usize,
        }
    }
}

/// Pre-averaging configuration: H = ceil(theta * sqrt(n)) with weight
/// g(x) = min(x, 1-x), for which psi1 = 1 and psi2 = 1/12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreAvgSpec {
    pub theta: f64,
    pub window: usize,
}

impl PreAvgSpec {
    pub const PSI1: f64 = 1.0;
    pub const PSI2: f64 = 1.0 / 12.0;

    pub fn for_length(n: usize, theta: f64) -> Self {
        let window = ((theta * (n as f64).sqrt()).ceil() as usize).max(2);
        PreAvgSpec { theta, window }
    }

    fn g(x: f64) -> f64 {
        x.min(1.0 - x)
    }
}

/// Sum of squared returns.
pub fn realized_variance(r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::Empty("returns"));
    }
    Ok(r.iter().map(|x| x * x).sum())
}

/// Upside and downside squared-return sums.
pub fn realized_semivariance(r: &[f64]) -> Result<(f64, f64)> {
    if r.is_empty() {
        return Err(Error::Empty("returns"));
    }
    let mut plus = 0.0;
    let mut minus = 0.0;
    for &x in r {
        if x > 0.0 {
            plus += x * x;
        } else if x < 0.0 {
            minus += x * x;
        }
    }
    Ok((plus, minus))
}

/// (pi/2) * sum of |r_i| |r_{i-lag}| products; lag 1 or 2.
pub fn bipower_variation(r: &[f64], lag: usize) -> Result<f64> {
    if lag == 0 || lag > 2 {
        return Err(Error::InvalidParam {
            name: "lag",
            reason: format!("must be 1 or 2, got {lag}"),
        });
    }
    if r.len() < lag + 1 {
        return Err(Error::SeriesTooShort {
            need: lag + 1,
            got: r.len(),
        });
    }
    let sum: f64 = (lag..r.len()).map(|i| r[i].abs() * r[i - lag].abs()).sum();
    Ok(PI / 2.0 * sum)
}

/// Bipower variation split by the sign of the leading return.
pub fn bipower_semivariance(r: &[f64]) -> Result<(f64, f64)> {
    if r.len() < 2 {
        return Err(Error::SeriesTooShort {
            need: 2,
            got: r.len(),
        });
    }
    let mut plus = 0.0;
    let mut minus = 0.0;
    for i in 1..r.len() {
        let term = r[i].abs() * r[i - 1].abs();
        if r[i] > 0.0 {
            plus += term;
        } else if r[i] < 0.0 {
            minus += term;
        }
    }
    Ok((PI / 2.0 * plus, PI / 2.0 * minus))
}

/// Non-negative jump component max(rv - bv, 0).
pub fn jump_variation(rv: f64, bv: f64) -> f64 {
    (rv - bv).max(0.0)
}

/// Non-flat-top Parzen weight.
pub fn parzen(x: f64) -> f64 {
    if x < 0.0 || x > 1.0 {
        0.0
    } else if x <= 0.5 {
        1.0 - 6.0 * x * x + 6.0 * x * x * x
    } else {
        2.0 * (1.0 - x).powi(3)
    }
}

/// Parzen realized kernel: gamma_0 + sum_h k(h/H) (gamma_h + gamma_{-h}).
pub fn realized_kernel(r: &[f64], spec: KernelSpec) -> Result<f64> {
    let n = r.len();
    let h_max = spec.bandwidth;
    if n == 0 {
        return Err(Error::Empty("returns"));
    }
    if h_max >= n {
        return Err(Error::InvalidParam {
            name: "bandwidth",
            reason: format!("H={h_max} must be < n={n}"),
        });
    }
    let gamma = |h: usize| -> f64 { (h..n).map(|i| r[i] * r[i - h]).sum() };
    let mut rk = gamma(0);
    for h in 1..=h_max {
        // realized autocovariance is symmetric in h
        rk += parzen(h as f64 / h_max as f64) * 2.0 * gamma(h);
    }
    Ok(rk)
}

/// Pre-averaged realized variance with bias correction.
pub fn preaveraged_rv(r: &[f64], spec: &PreAvgSpec) -> Result<f64> {
    let n = r.len();
    let h = spec.window;
    if n <= h {
        return Err(Error::SeriesTooShort { need: h + 1, got: n });
    }
    let delta = 1.0 / n as f64;
    let mut pre_sq = 0.0;
    // summation range as printed; windows past the end are truncated
    for i in 0..=(n - h + 1) {
        let mut bar = 0.0;
        for j in 1..h {
            if i + j >= n {
                break;
            }
            bar += PreAvgSpec::g(j as f64 / h as f64) * r[i + j];
        }
        pre_sq += bar * bar;
    }
    let rv: f64 = r.iter().map(|x| x * x).sum();
    Ok(delta.sqrt() / (spec.theta * PreAvgSpec::PSI2) * pre_sq
        - PreAvgSpec::PSI1 * delta / (2.0 * spec.theta * spec.theta * PreAvgSpec::PSI2) * rv)
}

/// Block realized variance per unit time. A zero-duration block falls
/// back to event-time scaled by the day's median inter-event gap.
pub fn spot_volatility(block_returns: &[f64], block_duration_secs: f64, median_gap_secs: f64) -> Result<f64> {
    if block_returns.is_empty() {
        return Err(Error::Empty("block returns"));
    }
    let rv: f64 = block_returns.iter().map(|x| x * x).sum();
    let horizon = if block_duration_secs > 0.0 {
        block_duration_secs
    } else {
        (block_returns.len() as f64) * median_gap_secs.max(f64::MIN_POSITIVE)
    };
    Ok(rv / horizon)
}

/// Arithmetic mean of the spot-volatility history.
pub fn average_spot_volatility(history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Empty("spot volatility history"));
    }
    Ok(history.iter().sum::<f64>() / history.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rv_direct_summation() {
        assert_eq!(realized_variance(&[0.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(
            realized_variance(&[0.01, -0.02, 0.005]).unwrap(),
            0.000525,
            max_relative = 1e-12
        );
        assert!(realized_variance(&[]).is_err());
    }

    #[test]
    fn rsv_partition() {
        let (p, m) = realized_semivariance(&[0.01, -0.02]).unwrap();
        assert_relative_eq!(p, 1e-4, max_relative = 1e-12);
        assert_relative_eq!(m, 4e-4, max_relative = 1e-12);
        let (p, m) = realized_semivariance(&[0.1, 0.2]).unwrap();
        assert_eq!(m, 0.0);
        assert_relative_eq!(p, realized_variance(&[0.1, 0.2]).unwrap());
    }

    #[test]
    fn bv_single_term() {
        assert_eq!(bipower_variation(&[0.0, 0.0, 0.0], 1).unwrap(), 0.0);
        assert_relative_eq!(bipower_variation(&[1.0, 1.0], 1).unwrap(), PI / 2.0);
        assert!(bipower_variation(&[1.0], 1).is_err());
        assert!(bipower_variation(&[1.0, 1.0], 2).is_err());
        assert_relative_eq!(
            bipower_variation(&[1.0, 0.5, 2.0], 2).unwrap(),
            PI / 2.0 * 2.0
        );
    }

    #[test]
    fn bsv_sign_on_leading_return() {
        let (p, m) = bipower_semivariance(&[1.0, -1.0]).unwrap();
        assert_eq!(p, 0.0);
        assert_relative_eq!(m, PI / 2.0);
        let (p, m) = bipower_semivariance(&[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(m, 0.0);
        assert_relative_eq!(p, bipower_variation(&[0.5, 1.0, 2.0], 1).unwrap());
    }

    #[test]
    fn jv_truncates_at_zero() {
        assert_eq!(jump_variation(1.0, 2.0), 0.0);
        assert_eq!(jump_variation(1.0, 1.0), 0.0);
        assert_eq!(jump_variation(3.0, 1.0), 2.0);
    }

    #[test]
    fn parzen_polynomial_values() {
        assert_eq!(parzen(0.0), 1.0);
        assert_eq!(parzen(1.0), 0.0);
        assert_relative_eq!(parzen(0.5), 0.25);
        // continuity at the knot from both branches
        assert_relative_eq!(
            1.0 - 6.0 * 0.25 + 6.0 * 0.125,
            2.0 * 0.5f64.powi(3)
        );
    }

    #[test]
    fn rk_with_zero_bandwidth_is_rv() {
        let r = [0.01, -0.02, 0.005, 0.003, -0.001];
        let rk = realized_kernel(&r, KernelSpec { bandwidth: 0 }).unwrap();
        assert_eq!(rk, realized_variance(&r).unwrap());
        assert!(realized_kernel(&r, KernelSpec { bandwidth: 5 }).is_err());
    }

    #[test]
    fn preaveraged_zero_returns() {
        let r = vec![0.0; 100];
        let spec = PreAvgSpec::for_length(r.len(), 1.0);
        assert_eq!(preaveraged_rv(&r, &spec).unwrap(), 0.0);
        assert!(preaveraged_rv(&[0.0; 3], &PreAvgSpec { theta: 1.0, window: 10 }).is_err());
    }

    #[test]
    fn spot_volatility_ratio_and_fallback() {
        let block = [0.01, -0.01, 0.01, 0.01]; // rv = 4e-4
        assert_relative_eq!(spot_volatility(&block, 2.0, 0.1).unwrap(), 2e-4);
        let sv = spot_volatility(&block, 0.0, 0.5).unwrap();
        assert!(sv.is_finite());
        assert_relative_eq!(sv, 4e-4 / 2.0);
        assert_eq!(spot_volatility(&[0.0], 1.0, 0.1).unwrap(), 0.0);
        assert!(spot_volatility(&[], 1.0, 0.1).is_err());
    }

    #[test]
    fn average_spot_volatility_prefix_means() {
        assert_eq!(average_spot_volatility(&[3.0]).unwrap(), 3.0);
        assert_eq!(average_spot_volatility(&[1.0, 3.0]).unwrap(), 2.0);
        let hist: Vec<f64> = (1..=50).map(|i| (i as f64).sin().abs()).collect();
        for k in 1..=hist.len() {
            let brute = hist[..k].iter().sum::<f64>() / k as f64;
            assert_relative_eq!(average_spot_volatility(&hist[..k]).unwrap(), brute);
        }
        assert!(average_spot_volatility(&[]).is_err());
    }

    proptest! {
        #[test]
        fn estimators_nonnegative_and_rsv_partitions_rv(
            r in proptest::collection::vec(-0.1f64..0.1, 2..128)
        ) {
            let rv = realized_variance(&r).unwrap();
            let (p, m) = realized_semivariance(&r).unwrap();
            let bv = bipower_variation(&r, 1).unwrap();
            prop_assert!(rv >= 0.0 && p >= 0.0 && m >= 0.0 && bv >= 0.0);
            prop_assert!(((p + m) - rv).abs() <= 1e-12 * rv.max(1e-300));
            prop_assert!(jump_variation(rv, bv) >= 0.0);
        }

        #[test]
        fn scale_equivariance_c_squared(
            r in proptest::collection::vec(-0.1f64..0.1, 8..64),
            c in 0.1f64..10.0,
        ) {
            let scaled: Vec<f64> = r.iter().map(|x| c * x).collect();
            let tol = 1e-10;
            let rel = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300);
            prop_assert!(rel(realized_variance(&scaled).unwrap(), c*c*realized_variance(&r).unwrap()));
            prop_assert!(rel(bipower_variation(&scaled, 1).unwrap(), c*c*bipower_variation(&r, 1).unwrap()));
            let spec = KernelSpec::for_length(r.len());
            if spec.bandwidth < r.len() {
                prop_assert!(rel(realized_kernel(&scaled, spec).unwrap(), c*c*realized_kernel(&r, spec).unwrap()));
            }
            let pa = PreAvgSpec::for_length(r.len(), 1.0);
            if pa.window < r.len() {
                prop_assert!(rel(preaveraged_rv(&scaled, &pa).unwrap(), c*c*preaveraged_rv(&r, &pa).unwrap()));
            }
        }
    }
}
