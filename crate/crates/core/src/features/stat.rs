//! Statistical and price-discovery features.

use crate::error::{Error, Result};
use crate::types::{BookSnapshot, TickSize};
use num_rational::Ratio;

/// Log of mid-prices with matching timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPriceSeries {
    pub values: Vec<f64>,
    pub timestamps: Vec<i64>,
}

impl LogPriceSeries {
    pub fn new(values: Vec<f64>, timestamps: Vec<i64>) -> Result<Self> {
        if values.len() != timestamps.len() {
            return Err(Error::InvalidParam {
                name: "timestamps",
                reason: format!(
                    "length {} does not match values length {}",
                    timestamps.len(),
                    values.len()
                ),
            });
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParam {
                name: "timestamps",
                reason: "must be non-decreasing".into(),
            });
        }
        Ok(LogPriceSeries { values, timestamps })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Elapsed time between two consecutive events, in ms.
pub fn financial_duration(t_now: i64, t_prev: i64) -> Result<i64> {
    if t_now < t_prev {
        return Err(Error::InvalidParam {
            name: "t_now",
            reason: format!("{t_now} precedes t_prev {t_prev}"),
        });
    }
    Ok(t_now - t_prev)
}

/// Ratio of the window's summed time differences to its summed level
/// price differences. A zero denominator yields 0 with the degenerate
/// flag set.
pub fn avg_midprice_financial_duration(times: &[i64], prices: &[f64]) -> Result<(f64, bool)> {
    if times.len() < 2 || times.len() != prices.len() {
        return Err(Error::SeriesTooShort {
            need: 2,
            got: times.len().min(prices.len()),
        });
    }
    let dt: i64 = times.windows(2).map(|w| w[1] - w[0]).sum();
    let dp: f64 = prices.windows(2).map(|w| w[1] - w[0]).sum();
    if dp == 0.0 {
        Ok((0.0, true))
    } else {
        Ok((dt as f64 / dp, false))
    }
}

/// First differences of the log-price series.
pub fn log_returns(x: &LogPriceSeries) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::SeriesTooShort {
            need: 2,
            got: x.len(),
        });
    }
    Ok(x.values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Convention for volume-weighting the mid-price. The printed formula
/// weights each side by its own volume; the micro-price convention
/// weights each side by the opposite volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightingConvention {
    #[default]
    OwnVolume,
    OppositeVolume,
}

/// Mid price weighted by order imbalance, exact rational.
pub fn weighted_mid_price(
    ask: i64,
    bid: i64,
    v_ask: u64,
    v_bid: u64,
    convention: WeightingConvention,
) -> Result<Ratio<i64>> {
    let total = v_ask + v_bid;
    if total == 0 {
        return Err(Error::ZeroVolume);
    }
    let (wa, wb) = match convention {
        WeightingConvention::OwnVolume => (v_ask as i64, v_bid as i64),
        WeightingConvention::OppositeVolume => (v_bid as i64, v_ask as i64),
    };
    Ok(Ratio::new(ask * wa + bid * wb, total as i64))
}

/// Bid volume share of the touch, in [0, 1].
pub fn volume_imbalance(v_ask: u64, v_bid: u64) -> Result<f64> {
    let total = v_ask + v_bid;
    if total == 0 {
        return Err(Error::ZeroVolume);
    }
    Ok(v_bid as f64 / total as f64)
}

/// Bid-ask spread and its tick-normalized form.
pub fn spreads(snapshot: &BookSnapshot, tick: TickSize) -> Result<(i64, Ratio<i64>)> {
    match (snapshot.best_ask(), snapshot.best_bid()) {
        (Some(a), Some(b)) => {
            let spread = a.price - b.price;
            Ok((spread, Ratio::new(spread, tick.0)))
        }
        _ => Err(Error::UndefinedMid {
            ts: snapshot.timestamp,
        }),
    }
}
