//! Core message-book and order-book domain types.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Side of the book an event touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Ask,
    Bid,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Ask => "Ask",
            Side::Bid => "Bid",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "Ask" | "ask" | "ASK" | "S" => Ok(Side::Ask),
            "Bid" | "bid" | "BID" | "B" => Ok(Side::Bid),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Event type carried by one message row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Submission,
    Cancellation,
    Execution,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Submission => "Submission",
            EventKind::Cancellation => "Cancellation",
            EventKind::Execution => "Execution",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "Submission" | "submission" => Ok(EventKind::Submission),
            "Cancellation" | "cancellation" => Ok(EventKind::Cancellation),
            "Execution" | "execution" => Ok(EventKind::Execution),
            other => Err(format!("unknown event kind `{other}`")),
        }
    }
}

/// One row of the message book: timestamp in ms, order id, price in
/// minimum-increment units, share quantity, event kind, and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEvent {
    pub timestamp: i64,
    pub order_id: u64,
    pub price: i64,
    pub quantity: u64,
    pub kind: EventKind,
    pub side: Side,
}

/// Minimum price increment, in price units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSize(pub i64);

impl TickSize {
    pub fn new(value: i64) -> Option<Self> {
        (value >= 1).then_some(TickSize(value))
    }
}

/// Exact mid-price: always a half-integer in price units, stored as twice
/// its value so no rounding ever occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MidPrice {
    twice: i64,
}

impl MidPrice {
    pub fn from_quotes(best_ask: i64, best_bid: i64) -> Self {
        MidPrice {
            twice: best_ask + best_bid,
        }
    }

    /// Rebuild from a stored twice-mid value.
    pub fn from_twice(twice: i64) -> Self {
        MidPrice { twice }
    }

    pub fn as_ratio(&self) -> Ratio<i64> {
        Ratio::new(self.twice, 2)
    }

    pub fn as_f64(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Twice the mid-price; integer-exact for comparisons.
    pub fn twice(&self) -> i64 {
        self.twice
    }
}

impl fmt::Display for MidPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}.5", self.twice / 2)
        }
    }
}

/// One aggregated (price, quantity) level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: i64,
    pub quantity: u64,
}

/// Ten-level (by default) two-sided book state after one event.
///
/// Asks are sorted by strictly increasing price, bids by strictly
/// decreasing price. Empty levels are absent. `mid` and `spread` are
/// `None` while the book is one-sided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub timestamp: i64,
    pub asks: Vec<Level>,
    pub bids: Vec<Level>,
    pub mid: Option<MidPrice>,
    pub spread: Option<i64>,
}

impl BookSnapshot {
    pub fn best_ask(&self) -> Option<Level> {
        self.asks.first().copied()
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.bids.first().copied()
    }

    pub fn is_two_sided(&self) -> bool {
        !self.asks.is_empty() && !self.bids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_price_is_exact_half_integer() {
        let m = MidPrice::from_quotes(126_100, 126_000);
        assert_eq!(m.to_string(), "126050");
        assert_eq!(m.as_f64(), 126_050.0);
        let m = MidPrice::from_quotes(101, 100);
        assert_eq!(m.to_string(), "100.5");
        assert_eq!(m.as_ratio(), Ratio::new(201, 2));
    }

    #[test]
    fn side_and_kind_roundtrip() {
        assert_eq!("Ask".parse::<Side>().unwrap(), Side::Ask);
        assert_eq!("bid".parse::<Side>().unwrap(), Side::Bid);
        assert!("mid".parse::<Side>().is_err());
        assert_eq!(
            "Cancellation".parse::<EventKind>().unwrap(),
            EventKind::Cancellation
        );
    }
}
