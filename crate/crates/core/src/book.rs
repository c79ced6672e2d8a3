//! Order book reconstruction from message streams.
//!
//! Prices stay in integer minimum-increment units throughout; the
//! mid-price is the only non-integer quantity and is kept exact as a
//! half-integer. Order tracking is by (order id, side, price);
//! executions and cancellations referencing an unknown id fall back to a
//! price-level decrement with a warning.

use crate::error::{Error, Result};
use crate::types::{BookSnapshot, EventKind, Level, MessageEvent, MidPrice, Side};
use num_rational::Ratio;
use std::collections::{BTreeMap, HashMap, HashSet};

pub const DEFAULT_DEPTH: usize = 10;

/// What to do when a cancellation or execution exceeds the resting
/// quantity (or references book state that does not exist).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverdrawPolicy {
    /// Remove what is there, keep going, and count a warning.
    #[default]
    ClampWarn,
    /// Abort reconstruction with an error.
    Hard,
}

/// Counters accumulated during one reconstruction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub events: usize,
    pub clamped: usize,
    pub unknown_id_fallbacks: usize,
    pub duplicate_submissions: usize,
    pub one_sided_snapshots: usize,
    pub crossed_ask_levels_hidden: usize,
}

#[derive(Debug, Clone, Copy)]
struct RestingOrder {
    side: Side,
    price: i64,
    quantity: u64,
}

/// Incremental book state. Feed events with [`BookBuilder::apply`]; each
/// call yields the post-event snapshot.
#[derive(Debug, Clone)]
pub struct BookBuilder {
    depth: usize,
    policy: OverdrawPolicy,
    asks: BTreeMap<i64, u64>,
    bids: BTreeMap<i64, u64>,
    orders: HashMap<u64, RestingOrder>,
    // ids that already lived once; re-submissions of these are duplicate
    // reports and get skipped
    consumed_ids: HashSet<u64>,
    stats: BuildStats,
}

impl BookBuilder {
    pub fn new(depth: usize, policy: OverdrawPolicy) -> Self {
        BookBuilder {
            depth,
            policy,
            asks: BTreeMap::new(),
            bids: BTreeMap::new(),
            orders: HashMap::new(),
            consumed_ids: HashSet::new(),
            stats: BuildStats::default(),
        }
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    /// Seed the book with resting orders before replay starts.
    pub fn seed(&mut self, orders: &[(u64, Side, i64, u64)]) {
        for &(id, side, price, qty) in orders {
            if qty == 0 {
                continue;
            }
            self.add_quantity(side, price, qty);
            self.orders.insert(
                id,
                RestingOrder {
                    side,
                    price,
                    quantity: qty,
                },
            );
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<i64, u64> {
        match side {
            Side::Ask => &mut self.asks,
            Side::Bid => &mut self.bids,
        }
    }

    fn add_quantity(&mut self, side: Side, price: i64, qty: u64) {
        *self.levels_mut(side).entry(price).or_insert(0) += qty;
    }

    fn remove_quantity(&mut self, side: Side, price: i64, qty: u64, kind: &'static str) -> Result<()> {
        let policy = self.policy;
        let levels = self.levels_mut(side);
        match levels.get_mut(&price) {
            Some(resting) if *resting >= qty => {
                *resting -= qty;
                if *resting == 0 {
                    levels.remove(&price);
                }
                Ok(())
            }
            Some(resting) => {
                let have = *resting;
                match policy {
                    OverdrawPolicy::ClampWarn => {
                        levels.remove(&price);
                        self.stats.clamped += 1;
                        Ok(())
                    }
                    OverdrawPolicy::Hard => Err(Error::Overdrawn {
                        kind,
                        price,
                        requested: qty,
                        resting: have,
                    }),
                }
            }
            None => match policy {
                OverdrawPolicy::ClampWarn => {
                    self.stats.clamped += 1;
                    Ok(())
                }
                OverdrawPolicy::Hard => Err(Error::Overdrawn {
                    kind,
                    price,
                    requested: qty,
                    resting: 0,
                }),
            },
        }
    }

    /// Decrement the tracked order for `event`, or fall back to a raw
    /// price-level decrement when the id is unknown.
    fn remove_for(&mut self, event: &MessageEvent, kind: &'static str) -> Result<()> {
        if let Some(order) = self.orders.get(&event.order_id).copied() {
            let take = event.quantity.min(order.quantity);
            if take < event.quantity {
                match self.policy {
                    OverdrawPolicy::ClampWarn => self.stats.clamped += 1,
                    OverdrawPolicy::Hard => {
                        return Err(Error::Overdrawn {
                            kind,
                            price: order.price,
                            requested: event.quantity,
                            resting: order.quantity,
                        })
                    }
                }
            }
            self.remove_quantity(order.side, order.price, take, kind)?;
            let left = order.quantity - take;
            if left == 0 {
                self.orders.remove(&event.order_id);
                self.consumed_ids.insert(event.order_id);
            } else if let Some(o) = self.orders.get_mut(&event.order_id) {
                o.quantity = left;
            }
            Ok(())
        } else {
            self.stats.unknown_id_fallbacks += 1;
            self.remove_quantity(event.side, event.price, event.quantity, kind)
        }
    }

    /// Apply one event and return the resulting snapshot.
    pub fn apply(&mut self, event: &MessageEvent) -> Result<BookSnapshot> {
        self.stats.events += 1;
        match event.kind {
            EventKind::Submission => {
                let duplicate = self.orders.contains_key(&event.order_id)
                    || self.consumed_ids.contains(&event.order_id);
                if duplicate {
                    // duplicate report of an id already seen; skip
                    self.stats.duplicate_submissions += 1;
                } else if event.quantity > 0 {
                    self.add_quantity(event.side, event.price, event.quantity);
                    self.orders.insert(
                        event.order_id,
                        RestingOrder {
                            side: event.side,
                            price: event.price,
                            quantity: event.quantity,
                        },
                    );
                }
            }
            EventKind::Cancellation => self.remove_for(event, "cancellation")?,
            EventKind::Execution => self.remove_for(event, "execution")?,
        }
        Ok(self.snapshot(event.timestamp))
    }

    /// Snapshot the current state, truncated to `depth` levels per side.
    ///
    /// Stale crossed quotes can survive a replay that starts mid-stream;
    /// ask levels at or below the best bid are hidden from the snapshot
    /// so the displayed quotes never cross.
    pub fn snapshot(&mut self, timestamp: i64) -> BookSnapshot {
        let best_bid = self.bids.keys().next_back().copied();
        let mut hidden = 0usize;
        let asks: Vec<Level> = self
            .asks
            .iter()
            .filter(|(price, _)| match best_bid {
                Some(bb) if **price <= bb => {
                    hidden += 1;
                    false
                }
                _ => true,
            })
            .take(self.depth)
            .map(|(&price, &quantity)| Level { price, quantity })
            .collect();
        self.stats.crossed_ask_levels_hidden += hidden;
        let bids: Vec<Level> = self
            .bids
            .iter()
            .rev()
            .take(self.depth)
            .map(|(&price, &quantity)| Level { price, quantity })
            .collect();

        let (mid, spread) = match (asks.first(), bids.first()) {
            (Some(a), Some(b)) => (
                Some(MidPrice::from_quotes(a.price, b.price)),
                Some(a.price - b.price),
            ),
            _ => {
                self.stats.one_sided_snapshots += 1;
                (None, None)
            }
        };
        BookSnapshot {
            timestamp,
            asks,
            bids,
            mid,
            spread,
        }
    }
}

/// Replay a time-ordered event sequence into one snapshot per event.
pub fn build_book(
    events: &[MessageEvent],
    depth: usize,
    policy: OverdrawPolicy,
) -> Result<(Vec<BookSnapshot>, BuildStats)> {
    let mut builder = BookBuilder::new(depth, policy);
    let mut snapshots = Vec::with_capacity(events.len());
    for event in events {
        snapshots.push(builder.apply(event)?);
    }
    Ok((snapshots, builder.stats))
}

/// Exact mid-price of a two-sided snapshot.
pub fn mid_price(snapshot: &BookSnapshot) -> Result<MidPrice> {
    match (snapshot.best_ask(), snapshot.best_bid()) {
        (Some(a), Some(b)) => Ok(MidPrice::from_quotes(a.price, b.price)),
        _ => Err(Error::UndefinedMid {
            ts: snapshot.timestamp,
        }),
    }
}

/// Midpoint of the level-`level` quotes, `level` in 2..=10.
pub fn deep_mid_price(snapshot: &BookSnapshot, level: usize) -> Result<Ratio<i64>> {
    if !(2..=10).contains(&level) {
        return Err(Error::InvalidParam {
            name: "level",
            reason: format!("must be in 2..=10, got {level} (use mid_price for level 1)"),
        });
    }
    let ask = snapshot.asks.get(level - 1).ok_or(Error::MissingLevel {
        level,
        side: "ask",
    })?;
    let bid = snapshot.bids.get(level - 1).ok_or(Error::MissingLevel {
        level,
        side: "bid",
    })?;
    Ok(Ratio::new(ask.price + bid.price, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EventKind::*, Side::*};

    fn ev(ts: i64, id: u64, price: i64, qty: u64, kind: EventKind, side: Side) -> MessageEvent {
        MessageEvent {
            timestamp: ts,
            order_id: id,
            price,
            quantity: qty,
            kind,
            side,
        }
    }

    #[test]
    fn single_submission_into_empty_book_is_one_sided() {
        let events = [ev(0, 1, 100, 50, Submission, Ask)];
        let (snaps, stats) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].asks, vec![Level { price: 100, quantity: 50 }]);
        assert!(snaps[0].bids.is_empty());
        assert!(snaps[0].mid.is_none());
        assert!(snaps[0].spread.is_none());
        assert_eq!(stats.one_sided_snapshots, 1);
    }

    #[test]
    fn submission_then_full_cancellation_restores_prior_state() {
        let base = [
            ev(0, 1, 100, 50, Submission, Bid),
            ev(0, 2, 104, 20, Submission, Ask),
        ];
        let (prior, _) = build_book(&base, 10, OverdrawPolicy::ClampWarn).unwrap();
        let mut events = base.to_vec();
        events.push(ev(1, 3, 102, 7, Submission, Bid));
        events.push(ev(2, 3, 102, 7, Cancellation, Bid));
        let (snaps, _) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        let last = snaps.last().unwrap();
        assert_eq!(last.asks, prior.last().unwrap().asks);
        assert_eq!(last.bids, prior.last().unwrap().bids);
    }

    #[test]
    fn execution_decrements_tracked_order() {
        let events = [
            ev(0, 1, 100, 50, Submission, Bid),
            ev(0, 2, 104, 20, Submission, Ask),
            ev(1, 1, 100, 30, Execution, Bid),
        ];
        let (snaps, _) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        assert_eq!(
            snaps[2].bids,
            vec![Level {
                price: 100,
                quantity: 20
            }]
        );
    }

    #[test]
    fn unknown_id_falls_back_to_price_level() {
        let events = [
            ev(0, 1, 100, 50, Submission, Bid),
            ev(0, 2, 104, 20, Submission, Ask),
            ev(1, 999, 100, 50, Cancellation, Bid),
        ];
        let (snaps, stats) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        assert!(snaps[2].bids.is_empty());
        assert_eq!(stats.unknown_id_fallbacks, 1);
    }

    #[test]
    fn overdraw_policy_hard_errors() {
        let events = [
            ev(0, 1, 100, 50, Submission, Bid),
            ev(1, 1, 100, 60, Cancellation, Bid),
        ];
        let err = build_book(&events, 10, OverdrawPolicy::Hard).unwrap_err();
        assert!(matches!(err, Error::Overdrawn { .. }));
        // same stream under clamping keeps going
        let (snaps, stats) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        assert!(snaps[1].bids.is_empty());
        assert_eq!(stats.clamped, 1);
    }

    #[test]
    fn snapshot_count_equals_event_count_and_depth_truncates() {
        let mut events = Vec::new();
        for i in 0..15 {
            events.push(ev(i, i as u64 + 1, 200 + i, 10, Submission, Ask));
            events.push(ev(i, 100 + i as u64, 100 - i, 10, Submission, Bid));
        }
        let (snaps, _) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        assert_eq!(snaps.len(), events.len());
        let last = snaps.last().unwrap();
        assert_eq!(last.asks.len(), 10);
        assert_eq!(last.bids.len(), 10);
        // asks strictly increasing, bids strictly decreasing
        assert!(last.asks.windows(2).all(|w| w[0].price < w[1].price));
        assert!(last.bids.windows(2).all(|w| w[0].price > w[1].price));
    }

    #[test]
    fn deep_mid_price_on_constructed_book() {
        let mut events = Vec::new();
        for i in 0..10i64 {
            events.push(ev(0, i as u64 + 1, 110 + 2 * i, 10, Submission, Ask));
            events.push(ev(0, 100 + i as u64, 90 - 2 * i, 10, Submission, Bid));
        }
        let (snaps, _) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        let last = snaps.last().unwrap();
        // level 2: ask 112, bid 88 -> 100
        assert_eq!(deep_mid_price(last, 2).unwrap(), Ratio::from_integer(100));
        // level 10: ask 128, bid 72 -> 100
        assert_eq!(deep_mid_price(last, 10).unwrap(), Ratio::from_integer(100));
        assert!(deep_mid_price(last, 1).is_err());
    }

    #[test]
    fn mid_between_best_quotes() {
        let events = [
            ev(0, 1, 126_100, 17, Submission, Bid),
            ev(0, 2, 126_300, 300, Submission, Ask),
        ];
        let (snaps, _) = build_book(&events, 10, OverdrawPolicy::ClampWarn).unwrap();
        let mid = mid_price(&snaps[1]).unwrap();
        assert_eq!(mid.to_string(), "126200");
        assert!(126_100.0 < mid.as_f64() && mid.as_f64() < 126_300.0);
    }
}
