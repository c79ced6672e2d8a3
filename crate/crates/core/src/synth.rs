//! Synthetic market data.
//!
//! Two layers: a geometric Brownian path simulator (optional jumps and
//! observation noise) used by the Monte Carlo estimator tests, and a
//! message-stream generator that turns such a path into a replayable
//! message file with a ground-truth companion. Both are byte-identical
//! across runs for a fixed seed.

use crate::error::{Error, Result};
use crate::types::{EventKind, MessageEvent, Side};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Parameters of the continuous-path simulator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GbmSpec {
    pub s0: f64,
    /// Drift per unit time.
    pub mu: f64,
    /// Diffusion volatility per sqrt unit time.
    pub sigma: f64,
    /// Step size in time units.
    pub dt: f64,
    pub n_steps: usize,
    /// Expected number of jumps over the whole path (0 disables).
    pub jump_intensity: f64,
    /// Jump magnitude in log-price units; signs are random.
    pub jump_size: f64,
    /// Standard deviation of additive log-price observation noise.
    pub noise_sd: f64,
}

impl Default for GbmSpec {
    fn default() -> Self {
        GbmSpec {
            s0: 100.0,
            mu: 0.0,
            sigma: 0.2,
            dt: 1.0 / 23_400.0,
            n_steps: 23_400,
            jump_intensity: 0.0,
            jump_size: 0.0,
            noise_sd: 0.0,
        }
    }
}

/// Simulated path with its ground-truth decomposition.
#[derive(Debug, Clone)]
pub struct SimPath {
    /// Noise-free log prices, length n_steps + 1.
    pub log_efficient: Vec<f64>,
    /// Observed log prices (efficient plus noise).
    pub log_observed: Vec<f64>,
    /// Integrated variance of the diffusion part: sigma^2 * dt * n.
    pub integrated_variance: f64,
    /// Sum of squared jump sizes actually drawn.
    pub jump_variation: f64,
    pub n_jumps: usize,
}

impl SimPath {
    pub fn observed_returns(&self) -> Vec<f64> {
        self.log_observed.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn simulate_gbm(spec: &GbmSpec, seed: u64) -> Result<SimPath> {
    if spec.n_steps == 0 || !(spec.dt > 0.0) || !(spec.sigma >= 0.0) || !(spec.s0 > 0.0) {
        return Err(Error::InvalidParam {
            name: "gbm",
            reason: "need n_steps > 0, dt > 0, sigma >= 0, s0 > 0".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let drift = (spec.mu - 0.5 * spec.sigma * spec.sigma) * spec.dt;
    let diffusion = spec.sigma * spec.dt.sqrt();
    let jump_prob = if spec.jump_intensity > 0.0 {
        spec.jump_intensity / spec.n_steps as f64
    } else {
        0.0
    };

    let mut log_efficient = Vec::with_capacity(spec.n_steps + 1);
    log_efficient.push(spec.s0.ln());
    let mut jump_variation = 0.0;
    let mut n_jumps = 0;
    for _ in 0..spec.n_steps {
        let mut increment = drift + diffusion * normal.sample(&mut rng);
        if jump_prob > 0.0 && rng.gen::<f64>() < jump_prob {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let jump = sign * spec.jump_size;
            increment += jump;
            jump_variation += jump * jump;
            n_jumps += 1;
        }
        log_efficient.push(log_efficient.last().unwrap() + increment);
    }
    let log_observed = if spec.noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sd).map_err(|_| Error::InvalidParam {
            name: "noise_sd",
            reason: "must be finite and non-negative".into(),
        })?;
        log_efficient
            .iter()
            .map(|&x| x + noise.sample(&mut rng))
            .collect()
    } else {
        log_efficient.clone()
    };
    Ok(SimPath {
        log_efficient,
        log_observed,
        integrated_variance: spec.sigma * spec.sigma * spec.dt * spec.n_steps as f64,
        jump_variation,
        n_jumps,
    })
}

/// Parameters of the message-stream generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of mid-price moves; each emits four messages.
    pub n_steps: usize,
    /// Initial mid price in integer price units.
    pub s0: i64,
    pub tick: i64,
    /// Per-step volatility of the log mid.
    pub sigma: f64,
    pub start_timestamp: i64,
    /// Median gap between consecutive messages, ms.
    pub dt_ms: i64,
    /// Encode the next move's direction in the touch volumes.
    pub signal: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_steps: 2000,
            s0: 1_000_000,
            tick: 100,
            sigma: 4e-4,
            start_timestamp: 34_200_000,
            dt_ms: 50,
            signal: true,
        }
    }
}

/// What the generator knows that the pipeline has to rediscover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Mid price after each step, in price units.
    pub step_mids: Vec<i64>,
    /// Direction of each step: +1 up, -1 down.
    pub directions: Vec<i8>,
    /// Integrated variance of the generating log-mid path.
    pub integrated_variance: f64,
}

impl GroundTruth {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("ground truth: {e}")))
    }
}

/// Touch volume pair encoding the next step's direction: heavy bid
/// volume signals an upcoming up-move.
fn signal_volumes(next_up: bool) -> (u64, u64) {
    // (bid volume, ask volume)
    if next_up {
        (900, 100)
    } else {
        (100, 900)
    }
}

/// Generate a message stream whose replayed book follows a discretized
/// geometric Brownian mid path. Each step emits four messages keeping
/// the book two-sided with a constant two-tick spread; the mid changes
/// at the second and third message of every step, both in the step's
/// direction. With `signal` on, quote volumes and the step pattern make
/// the next move direction recoverable from the touch.
pub fn generate_messages(config: &SynthConfig) -> Result<(Vec<MessageEvent>, GroundTruth)> {
    if config.n_steps == 0 || config.tick <= 0 || config.s0 <= 4 * config.tick {
        return Err(Error::InvalidParam {
            name: "synth",
            reason: "need n_steps > 0, tick > 0, s0 > 4 ticks".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // mid path on the tick grid, forced to move every step
    let mut log_mid = (config.s0 as f64).ln();
    let mut mid = round_to_grid(log_mid.exp(), config.tick);
    let mut step_mids = Vec::with_capacity(config.n_steps);
    let mut directions = Vec::with_capacity(config.n_steps);
    let mut iv = 0.0;
    for _ in 0..config.n_steps {
        let z: f64 = normal.sample(&mut rng);
        let increment = config.sigma * z;
        iv += config.sigma * config.sigma;
        log_mid += increment;
        let mut next = round_to_grid(log_mid.exp(), config.tick);
        if next == mid {
            // force a one-tick move in the direction of the draw
            next = if z >= 0.0 {
                mid + config.tick
            } else {
                mid - config.tick
            };
            log_mid = (next as f64).ln();
        }
        directions.push(if next > mid { 1 } else { -1 });
        step_mids.push(next);
        mid = next;
    }

    // replay the path as submissions and cancellations
    let mut events = Vec::with_capacity(4 * config.n_steps + 2);
    let mut next_id = 1u64;
    let mut ts = config.start_timestamp;
    let tick = config.tick;
    let start_mid = round_to_grid(config.s0 as f64, tick);
    let (v_bid0, v_ask0) = if config.signal {
        signal_volumes(directions[0] == 1)
    } else {
        (rng.gen_range(100..1000), rng.gen_range(100..1000))
    };
    let mut bid = Resting {
        id: next_id,
        price: start_mid - tick,
        quantity: v_bid0,
    };
    next_id += 1;
    let mut ask = Resting {
        id: next_id,
        price: start_mid + tick,
        quantity: v_ask0,
    };
    next_id += 1;
    events.push(submit(ts, bid.id, bid.price, bid.quantity, Side::Bid));
    events.push(submit(ts, ask.id, ask.price, ask.quantity, Side::Ask));

    for (k, &target) in step_mids.iter().enumerate() {
        let up = directions[k] == 1;
        let next_up = directions.get(k + 1).copied().unwrap_or(directions[k]) == 1;
        let (v_bid, v_ask) = if config.signal {
            signal_volumes(next_up)
        } else {
            (rng.gen_range(100..1000), rng.gen_range(100..1000))
        };
        let new_bid = Resting {
            id: next_id,
            price: target - tick,
            quantity: v_bid,
        };
        let new_ask = Resting {
            id: next_id + 1,
            price: target + tick,
            quantity: v_ask,
        };
        next_id += 2;
        // Order of operations keeps the book two-sided and uncrossed:
        // up-moves replace the ask first, down-moves the bid first.
        let mut step_events = Vec::with_capacity(4);
        if up {
            step_events.push(submit(0, new_ask.id, new_ask.price, v_ask, Side::Ask));
            step_events.push(cancel(0, &ask, Side::Ask));
            step_events.push(submit(0, new_bid.id, new_bid.price, v_bid, Side::Bid));
            step_events.push(cancel(0, &bid, Side::Bid));
        } else {
            step_events.push(submit(0, new_bid.id, new_bid.price, v_bid, Side::Bid));
            step_events.push(cancel(0, &bid, Side::Bid));
            step_events.push(submit(0, new_ask.id, new_ask.price, v_ask, Side::Ask));
            step_events.push(cancel(0, &ask, Side::Ask));
        }
        for mut e in step_events {
            ts += rng.gen_range(1..=2 * config.dt_ms - 1);
            e.timestamp = ts;
            events.push(e);
        }
        bid = new_bid;
        ask = new_ask;
    }

    Ok((
        events,
        GroundTruth {
            step_mids,
            directions,
            integrated_variance: iv,
        },
    ))
}

#[derive(Debug, Clone, Copy)]
struct Resting {
    id: u64,
    price: i64,
    quantity: u64,
}

fn round_to_grid(price: f64, tick: i64) -> i64 {
    let ticks = (price / tick as f64).round() as i64;
    ticks.max(2) * tick
}

fn submit(ts: i64, id: u64, price: i64, quantity: u64, side: Side) -> MessageEvent {
    MessageEvent {
        timestamp: ts,
        order_id: id,
        price,
        quantity,
        kind: EventKind::Submission,
        side,
    }
}

fn cancel(ts: i64, order: &Resting, side: Side) -> MessageEvent {
    MessageEvent {
        timestamp: ts,
        order_id: order.id,
        price: order.price,
        quantity: order.quantity,
        kind: EventKind::Cancellation,
        side,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::{build_book, OverdrawPolicy, DEFAULT_DEPTH};
    use crate::features::vol::realized_variance;

    #[test]
    fn gbm_is_deterministic_and_reports_iv() {
        let spec = GbmSpec::default();
        let a = simulate_gbm(&spec, 7).unwrap();
        let b = simulate_gbm(&spec, 7).unwrap();
        let c = simulate_gbm(&spec, 8).unwrap();
        assert_eq!(a.log_observed, b.log_observed);
        assert_ne!(a.log_observed, c.log_observed);
        assert_eq!(a.log_efficient.len(), spec.n_steps + 1);
        assert!((a.integrated_variance - 0.04).abs() < 1e-12);
        assert_eq!(a.n_jumps, 0);
        // realized variance of one fine path lands near the IV
        let rv = realized_variance(&a.observed_returns()).unwrap();
        assert!((rv - a.integrated_variance).abs() < 0.3 * a.integrated_variance);
    }

    #[test]
    fn jumps_and_noise_are_reported() {
        let spec = GbmSpec {
            jump_intensity: 20.0,
            jump_size: 0.01,
            noise_sd: 1e-4,
            ..GbmSpec::default()
        };
        let path = simulate_gbm(&spec, 3).unwrap();
        assert!(path.n_jumps > 0);
        assert!((path.jump_variation - path.n_jumps as f64 * 1e-4).abs() < 1e-12);
        assert_ne!(path.log_observed, path.log_efficient);
    }

    #[test]
    fn generated_stream_replays_to_a_clean_book() {
        let config = SynthConfig {
            n_steps: 500,
            ..SynthConfig::default()
        };
        let (events, truth) = generate_messages(&config).unwrap();
        assert_eq!(events.len(), 4 * config.n_steps + 2);
        let (snaps, stats) = build_book(&events, DEFAULT_DEPTH, OverdrawPolicy::Hard).unwrap();
        assert_eq!(stats.clamped, 0);
        // only the opening snapshot (bid before the first ask) is one-sided
        assert_eq!(stats.one_sided_snapshots, 1);
        for snap in &snaps[1..] {
            assert!(snap.is_two_sided());
            assert!(snap.spread.unwrap() > 0);
        }
        // the spread settles back to two ticks at every step boundary
        for k in 0..config.n_steps {
            assert_eq!(snaps[2 + 4 * k + 3].spread, Some(2 * config.tick));
        }
        // the mid after each step matches the ground truth
        for (k, &mid) in truth.step_mids.iter().enumerate() {
            let snap = &snaps[2 + 4 * k + 3];
            assert_eq!(snap.mid.unwrap().twice(), 2 * mid, "step {k}");
        }
    }

    #[test]
    fn signal_volumes_encode_next_direction() {
        let config = SynthConfig {
            n_steps: 300,
            ..SynthConfig::default()
        };
        let (events, truth) = generate_messages(&config).unwrap();
        let (snaps, _) = build_book(&events, DEFAULT_DEPTH, OverdrawPolicy::Hard).unwrap();
        // after the final message of step k, both touch volumes encode
        // the direction of step k+1
        for k in 0..config.n_steps - 1 {
            let snap = &snaps[2 + 4 * k + 3];
            let bid_vol = snap.best_bid().unwrap().quantity;
            let ask_vol = snap.best_ask().unwrap().quantity;
            if truth.directions[k + 1] == 1 {
                assert!(bid_vol > ask_vol, "step {k}");
            } else {
                assert!(bid_vol < ask_vol, "step {k}");
            }
        }
    }

    #[test]
    fn byte_determinism_of_the_message_file() {
        use crate::messages::write_message_file;
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            n_steps: 100,
            seed: 99,
            ..SynthConfig::default()
        };
        let mut bytes = Vec::new();
        for name in ["a.csv", "b.csv"] {
            let (events, _) = generate_messages(&config).unwrap();
            let path = dir.path().join(name);
            write_message_file(&path, &events).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1]);
        let other = generate_messages(&SynthConfig {
            seed: 100,
            ..config
        })
        .unwrap()
        .0;
        assert_ne!(generate_messages(&config).unwrap().0, other);
    }

    #[test]
    fn ground_truth_roundtrips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.json");
        let (_, truth) = generate_messages(&SynthConfig {
            n_steps: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        truth.write_json(&path).unwrap();
        let back = GroundTruth::read_json(&path).unwrap();
        assert_eq!(back.step_mids, truth.step_mids);
        assert_eq!(back.directions, truth.directions);
        assert!((back.integrated_variance - truth.integrated_variance).abs() < 1e-15);
    }
}
