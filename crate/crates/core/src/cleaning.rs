//! Data cleaning: session-bound filtering of raw messages and a
//! trimmed-mean outlier filter on price series.
//!
//! An observation is removed when it sits at least `alpha_sd * s + gamma`
//! away from the trimmed mean of its k-neighborhood, where `gamma` is a
//! granularity bound in price units that keeps constant-price stretches
//! from rejecting everything through zero variance.

use crate::error::{Error, Result};
use crate::types::MessageEvent;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Parameters of the neighborhood outlier filter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Neighborhood size; even, at least 4.
    pub k: usize,
    /// Standard-deviation multiplier.
    pub alpha_sd: f64,
    /// Granularity bound in price units (a multiple of the tick size).
    pub gamma: f64,
    /// Fraction trimmed from each tail of the neighborhood before averaging.
    pub trim_fraction: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            k: 40,
            alpha_sd: 3.0,
            gamma: 2.0,
            trim_fraction: 0.10,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 4 || self.k % 2 != 0 {
            return Err(Error::InvalidParam {
                name: "k",
                reason: format!("must be even and >= 4, got {}", self.k),
            });
        }
        if !(self.alpha_sd > 0.0) {
            return Err(Error::InvalidParam {
                name: "alpha_sd",
                reason: "must be positive".into(),
            });
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParam {
                name: "gamma",
                reason: "must be positive".into(),
            });
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(Error::InvalidParam {
                name: "trim_fraction",
                reason: format!("must be in [0, 0.5), got {}", self.trim_fraction),
            });
        }
        Ok(())
    }
}

/// Counts reported by the session-bounds filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub kept: usize,
    pub outside_session: usize,
    pub zero_price: usize,
}

/// Keep only events inside `[open, close]` with a positive price.
pub fn filter_session_bounds(
    events: &[MessageEvent],
    open: i64,
    close: i64,
) -> (Vec<MessageEvent>, SessionReport) {
    let mut report = SessionReport::default();
    let kept: Vec<MessageEvent> = events
        .iter()
        .filter(|e| {
            if e.price <= 0 {
                report.zero_price += 1;
                false
            } else if e.timestamp < open || e.timestamp > close {
                report.outside_session += 1;
                false
            } else {
                true
            }
        })
        .copied()
        .collect();
    report.kept = kept.len();
    (kept, report)
}

/// Outcome of one outlier-filter pass: a keep mask plus removal stats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovalReport {
    pub params: FilterParams,
    pub total: usize,
    pub removed: usize,
    pub removed_indices: Vec<usize>,
}

impl RemovalReport {
    /// Machine-readable delimited form: one removed index per row.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("index\n");
        for i in &self.removed_indices {
            out.push_str(&format!("{i}\n"));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "outlier filter: removed {}/{} (k={}, alpha={}, gamma={}, trim={})",
            self.removed,
            self.total,
            self.params.k,
            self.params.alpha_sd,
            self.params.gamma,
            self.params.trim_fraction
        )
    }
}

/// Single-pass neighborhood outlier filter.
///
/// Returns a keep mask the same length as `prices`; statistics for every
/// index are computed against the original series, so removals are
/// order-independent.
pub fn outlier_filter(prices: &[f64], params: &FilterParams) -> Result<(Vec<bool>, RemovalReport)> {
    params.validate()?;
    let n = prices.len();
    if n <= params.k {
        return Err(Error::SeriesTooShort {
            need: params.k + 1,
            got: n,
        });
    }

    let evaluate = |i: usize| -> bool {
        let (mean, sd) = neighborhood_stats(prices, i, params);
        (prices[i] - mean).abs() < params.alpha_sd * sd + params.gamma
    };

    #[cfg(feature = "parallel")]
    let keep: Vec<bool> = (0..n).into_par_iter().map(evaluate).collect();
    #[cfg(not(feature = "parallel"))]
    let keep: Vec<bool> = (0..n).map(evaluate).collect();

    let removed_indices: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|(_, &k)| !k)
        .map(|(i, _)| i)
        .collect();
    let report = RemovalReport {
        params: *params,
        total: n,
        removed: removed_indices.len(),
        removed_indices,
    };
    Ok((keep, report))
}

/// Trimmed mean and standard deviation of the size-k neighborhood of
/// index `i`, excluding `i` itself. At the edges the window shifts so it
/// always holds k observations.
fn neighborhood_stats(prices: &[f64], i: usize, params: &FilterParams) -> (f64, f64) {
    let n = prices.len();
    let k = params.k;
    let half = k / 2;
    // window of k+1 slots centered on i, shifted inward at the edges
    let start = if i < half {
        0
    } else if i + half >= n {
        n - k - 1
    } else {
        i - half
    };
    let mut neigh: Vec<f64> = (start..=start + k)
        .filter(|&j| j != i)
        .map(|j| prices[j])
        .collect();
    debug_assert_eq!(neigh.len(), k);
    neigh.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let trim = ((k as f64) * params.trim_fraction).floor() as usize;
    let trimmed = &neigh[trim..k - trim];
    let m = trimmed.len() as f64;
    let mean = trimmed.iter().sum::<f64>() / m;
    let var = if trimmed.len() > 1 {
        trimmed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EventKind, Side};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn msg(ts: i64, price: i64) -> MessageEvent {
        MessageEvent {
            timestamp: ts,
            order_id: ts as u64,
            price,
            quantity: 1,
            kind: EventKind::Submission,
            side: Side::Bid,
        }
    }

    #[test]
    fn session_bounds_drop_out_of_session_and_zero_price() {
        let events = vec![msg(5, 100), msg(11, 100), msg(7, 0), msg(10, 100)];
        let (kept, report) = filter_session_bounds(&events, 0, 10);
        assert_eq!(kept.len(), 2);
        assert_eq!(report.outside_session, 1);
        assert_eq!(report.zero_price, 1);
        // all inside -> identity
        let inside = vec![msg(1, 100), msg(2, 100)];
        let (kept, report) = filter_session_bounds(&inside, 0, 10);
        assert_eq!(kept, inside);
        assert_eq!(report.outside_session + report.zero_price, 0);
    }

    #[test]
    fn constant_series_keeps_everything() {
        let prices = vec![100.0; 200];
        let (keep, report) = outlier_filter(&prices, &FilterParams::default()).unwrap();
        assert!(keep.iter().all(|&k| k));
        assert_eq!(report.removed, 0);
        assert_eq!(keep.len(), prices.len());
    }

    #[test]
    fn planted_outlier_is_removed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(100.0, 1.0).unwrap();
        let mut prices: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
        prices[117] = 110.0; // 10 sigma
        let params = FilterParams {
            gamma: 0.05,
            ..FilterParams::default()
        };
        let (keep, report) = outlier_filter(&prices, &params).unwrap();
        assert!(!keep[117]);
        // direct evaluation of the inequality at the planted index
        assert!(report.removed_indices.contains(&117));
    }

    #[test]
    fn too_short_series_errors() {
        let prices = vec![1.0; 40];
        assert!(matches!(
            outlier_filter(&prices, &FilterParams::default()),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn gamma_monotonicity_removed_set_shrinks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let prices: Vec<f64> = (0..300).map(|_| 10.0 * normal.sample(&mut rng)).collect();
        let base = FilterParams {
            alpha_sd: 1.0,
            gamma: 1.0,
            ..FilterParams::default()
        };
        let wider = FilterParams { gamma: 5.0, ..base };
        let (_, r1) = outlier_filter(&prices, &base).unwrap();
        let (_, r2) = outlier_filter(&prices, &wider).unwrap();
        assert!(r2
            .removed_indices
            .iter()
            .all(|i| r1.removed_indices.contains(i)));
    }

    #[test]
    fn idempotent_on_well_behaved_series() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(50.0, 0.5).unwrap();
        let prices: Vec<f64> = (0..250).map(|_| normal.sample(&mut rng)).collect();
        let params = FilterParams::default();
        let (keep, _) = outlier_filter(&prices, &params).unwrap();
        let filtered: Vec<f64> = prices
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .collect();
        let (keep2, report2) = outlier_filter(&filtered, &params).unwrap();
        assert!(keep2.iter().all(|&k| k), "{}", report2.summary());
    }
}
