//! Noise and uncertainty measures: three quarticity estimators and two
//! noise-variance estimators, evaluated on trailing 2000-event windows.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

/// Default trailing window length, in events.
pub const DEFAULT_QUARTICITY_WINDOW: usize = 2000;

/// mu_p = E|Z|^p for standard normal Z; closed form via the Gamma function.
pub fn abs_normal_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / gamma(0.5)
}

/// mu_{4/3}, precomputed once per call site via the closed form.
pub fn mu_four_thirds() -> f64 {
    abs_normal_moment(4.0 / 3.0)
}

/// (n/3) * sum r^4.
pub fn realized_quarticity(r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::Empty("returns"));
    }
    let n = r.len() as f64;
    Ok(n / 3.0 * r.iter().map(|x| x.powi(4)).sum::<f64>())
}

/// n * mu_{4/3}^{-3} * sum of |r_i r_{i-1} r_{i-2}|^{4/3}.
pub fn tripower_quarticity(r: &[f64]) -> Result<f64> {
    if r.len() < 3 {
        return Err(Error::SeriesTooShort {
            need: 3,
            got: r.len(),
        });
    }
    let n = r.len() as f64;
    let mu = mu_four_thirds();
    let sum: f64 = (2..r.len())
        .map(|i| {
            (r[i].abs() * r[i - 1].abs() * r[i - 2].abs()).powf(4.0 / 3.0)
        })
        .sum();
    Ok(n * mu.powi(-3) * sum)
}

/// n * mu_1^{-4} * sum of |r_i r_{i-1} r_{i-2} r_{i-3}|; mu_1^{-4} = (pi/2)^2.
pub fn quadpower_quarticity(r: &[f64]) -> Result<f64> {
    if r.len() < 4 {
        return Err(Error::SeriesTooShort {
            need: 4,
            got: r.len(),
        });
    }
    let n = r.len() as f64;
    let mu1 = abs_normal_moment(1.0); // sqrt(2/pi)
    let sum: f64 = (3..r.len())
        .map(|i| r[i].abs() * r[i - 1].abs() * r[i - 2].abs() * r[i - 3].abs())
        .sum();
    Ok(n * mu1.powi(-4) * sum)
}

/// Negative mean first-order return autocovariance. Can go negative on
/// pathological input; reported as-is with a flag, never clamped.
pub fn noise_variance_oomen(r: &[f64]) -> Result<(f64, bool)> {
    if r.len() < 2 {
        return Err(Error::SeriesTooShort {
            need: 2,
            got: r.len(),
        });
    }
    let n = r.len() as f64;
    let sum: f64 = (1..r.len()).map(|i| r[i] * r[i - 1]).sum();
    let estimate = -sum / (n - 1.0);
    Ok((estimate, estimate < 0.0))
}

/// RV / (2n).
pub fn noise_variance_zhang(r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::Empty("returns"));
    }
    let n = r.len() as f64;
    Ok(r.iter().map(|x| x * x).sum::<f64>() / (2.0 * n))
}
