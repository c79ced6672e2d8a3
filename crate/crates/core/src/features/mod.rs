//! Econometric feature extraction over event windows.
//!
//! A feature row is computed per 10-event window (overlap of nine for
//! the online protocol). Windows containing one-sided or filtered-out
//! snapshots are dropped and counted. Rows are independent and are
//! evaluated in parallel when the `parallel` feature is enabled; the
//! running average of spot volatility is filled in afterwards in window
//! order, so output is identical either way.

pub mod noise;
pub mod stat;
pub mod vol;

use crate::error::{Error, Result};
use crate::types::BookSnapshot;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Event-window geometry: length and stride, both in events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn protocol1() -> Self {
        WindowSpec {
            length: 10,
            stride: 1,
        }
    }

    pub fn protocol2() -> Self {
        WindowSpec {
            length: 10,
            stride: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.stride == 0 || self.stride > self.length {
            return Err(Error::InvalidParam {
                name: "window",
                reason: format!(
                    "need 1 <= stride <= length, got stride={} length={}",
                    self.stride, self.length
                ),
            });
        }
        Ok(())
    }
}

/// Which feature groups to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub statistical: bool,
    pub volatility: bool,
    pub noise: bool,
    pub price_discovery: bool,
}

impl Default for FeatureFlags {
    fn default() -> Self {
        FeatureFlags {
            statistical: true,
            volatility: true,
            noise: true,
            price_discovery: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub flags: FeatureFlags,
    pub window: WindowSpec,
    pub tick: i64,
    /// Trailing window, in events, for the quarticity and noise measures.
    pub noise_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            flags: FeatureFlags::default(),
            window: WindowSpec::protocol1(),
            tick: 1,
            noise_window: noise::DEFAULT_QUARTICITY_WINDOW,
        }
    }
}

/// Snapshot stream of one instrument-day compacted to usable snapshots.
#[derive(Debug, Clone)]
pub struct CleanedDay {
    /// Original snapshot index of each cleaned entry.
    pub orig_idx: Vec<usize>,
    /// Twice the mid-price, integer exact.
    pub mids_twice: Vec<i64>,
    pub log_mids: Vec<f64>,
    pub timestamps: Vec<i64>,
    /// For each original index, its position in the cleaned series (or None).
    pub position: Vec<Option<usize>>,
    /// Best-level quotes (ask price, ask qty, bid price, bid qty).
    pub touch: Vec<(i64, u64, i64, u64)>,
}

impl CleanedDay {
    /// Keep two-sided snapshots that also pass `keep_mask` (mask indexed
    /// like `snapshots`; `None` keeps everything).
    pub fn from_snapshots(snapshots: &[BookSnapshot], keep_mask: Option<&[bool]>) -> Self {
        let mut day = CleanedDay {
            orig_idx: Vec::new(),
            mids_twice: Vec::new(),
            log_mids: Vec::new(),
            timestamps: Vec::new(),
            position: vec![None; snapshots.len()],
            touch: Vec::new(),
        };
        for (i, snap) in snapshots.iter().enumerate() {
            if let Some(mask) = keep_mask {
                if !mask[i] {
                    continue;
                }
            }
            let (mid, ask, bid) = match (snap.mid, snap.best_ask(), snap.best_bid()) {
                (Some(m), Some(a), Some(b)) => (m, a, b),
                _ => continue,
            };
            day.position[i] = Some(day.orig_idx.len());
            day.orig_idx.push(i);
            day.mids_twice.push(mid.twice());
            day.log_mids.push(mid.as_f64().ln());
            day.timestamps.push(snap.timestamp);
            day.touch.push((ask.price, ask.quantity, bid.price, bid.quantity));
        }
        day
    }

    pub fn len(&self) -> usize {
        self.orig_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orig_idx.is_empty()
    }

    /// Median positive inter-event gap of the day, in seconds.
    pub fn median_gap_secs(&self) -> f64 {
        let mut gaps: Vec<i64> = self
            .timestamps
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&g| g > 0)
            .collect();
        if gaps.is_empty() {
            return 1e-3;
        }
        gaps.sort_unstable();
        gaps[gaps.len() / 2] as f64 / 1000.0
    }
}

/// Per-row window metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowMeta {
    /// Start index into the cleaned series.
    pub start: usize,
    /// Inclusive end index into the cleaned series.
    pub end: usize,
    pub end_timestamp: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: Vec<WindowMeta>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub windows_total: usize,
    pub windows_dropped: usize,
    pub short_noise_windows: usize,
    pub degenerate_ampd: usize,
}

pub fn column_names(flags: &FeatureFlags) -> Vec<String> {
    let mut cols = Vec::new();
    if flags.statistical {
        cols.extend(
            ["mid_price", "financial_duration", "ampd", "log_return"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    if flags.volatility {
        cols.extend(
            [
                "rv",
                "rk",
                "parv",
                "rsv_up",
                "rsv_down",
                "bv",
                "bv_lag2",
                "bsv_up",
                "bsv_down",
                "jv",
                "spot_vol",
                "avg_spot_vol",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
    }
    if flags.noise {
        cols.extend(
            ["rq", "rq_tripower", "rq_quadpower", "nv_oomen", "nv_zhang"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    if flags.price_discovery {
        cols.extend(
            ["weighted_mid", "vol_imbalance", "spread", "norm_spread"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    cols
}

/// Extract one feature row per valid window of the cleaned day.
///
/// Windows are laid out over the cleaned series; `stats.windows_dropped`
/// counts original-stream windows that were lost to flagged snapshots
/// (the difference between the raw and cleaned window counts).
pub fn extract_features(
    day: &CleanedDay,
    raw_len: usize,
    config: &FeatureConfig,
) -> Result<(FeatureMatrix, ExtractionStats)> {
    config.window.validate()?;
    let columns = column_names(&config.flags);
    let length = config.window.length;
    let mut stats = ExtractionStats::default();
    stats.windows_total = crate::protocol::windows(raw_len, &config.window).len();

    let starts: Vec<usize> = if day.len() >= length {
        (0..=day.len() - length)
            .step_by(config.window.stride)
            .collect()
    } else {
        Vec::new()
    };
    stats.windows_dropped = stats.windows_total.saturating_sub(starts.len());

    let median_gap = day.median_gap_secs();
    let returns: Vec<f64> = day.log_mids.windows(2).map(|w| w[1] - w[0]).collect();

    let make_row = |&start: &usize| -> (Vec<f64>, WindowMeta, bool, bool) {
        let end = start + length - 1;
        let mut row = Vec::with_capacity(columns.len());
        let mut degenerate = false;
        let mut short_noise = false;

        // returns inside the window: indices start..end of `returns`
        let wr = &returns[start..end];

        if config.flags.statistical {
            row.push(day.mids_twice[end] as f64 / 2.0);
            row.push((day.timestamps[end] - day.timestamps[end - 1]) as f64);
            let (ampd, flag) = stat::avg_midprice_financial_duration(
                &day.timestamps[start..=end],
                &day.log_mids[start..=end]
                    .iter()
                    .map(|&x| x.exp())
                    .collect::<Vec<_>>(),
            )
            .expect("window length >= 2");
            degenerate = flag;
            row.push(ampd);
            row.push(*wr.last().expect("window has returns"));
        }

        let sv = vol::spot_volatility(
            wr,
            (day.timestamps[end] - day.timestamps[start]) as f64 / 1000.0,
            median_gap,
        )
        .expect("non-empty block");

        if config.flags.volatility {
            let rv = vol::realized_variance(wr).expect("non-empty");
            let kspec = vol::KernelSpec::for_length(wr.len());
            let rk = if kspec.bandwidth < wr.len() {
                vol::realized_kernel(wr, kspec).expect("bandwidth checked")
            } else {
                rv
            };
            let paspec = vol::PreAvgSpec::for_length(wr.len(), 1.0);
            let parv = if paspec.window < wr.len() {
                vol::preaveraged_rv(wr, &paspec).expect("window checked")
            } else {
                rv
            };
            let (rsv_up, rsv_down) = vol::realized_semivariance(wr).expect("non-empty");
            let bv = vol::bipower_variation(wr, 1).expect("length >= 2");
            let bv2 = vol::bipower_variation(wr, 2).expect("length >= 3");
            let (bsv_up, bsv_down) = vol::bipower_semivariance(wr).expect("length >= 2");
            row.extend([
                rv,
                rk,
                parv,
                rsv_up,
                rsv_down,
                bv,
                bv2,
                bsv_up,
                bsv_down,
                vol::jump_variation(rv, bv),
                sv,
                f64::NAN, // avg_spot_vol, filled in sequentially below
            ]);
        }

        if config.flags.noise {
            // trailing noise window of returns ending at this window's end
            let lo = (end).saturating_sub(config.noise_window);
            let tr = &returns[lo..end];
            if tr.len() < config.noise_window {
                short_noise = true;
            }
            row.push(noise::realized_quarticity(tr).expect("non-empty"));
            row.push(if tr.len() >= 3 {
                noise::tripower_quarticity(tr).expect("length checked")
            } else {
                0.0
            });
            row.push(if tr.len() >= 4 {
                noise::quadpower_quarticity(tr).expect("length checked")
            } else {
                0.0
            });
            row.push(noise::noise_variance_oomen(tr).map(|(v, _)| v).unwrap_or(0.0));
            row.push(noise::noise_variance_zhang(tr).expect("non-empty"));
        }

        if config.flags.price_discovery {
            let (ask, v_ask, bid, v_bid) = day.touch[end];
            let wmid = stat::weighted_mid_price(
                ask,
                bid,
                v_ask,
                v_bid,
                stat::WeightingConvention::OwnVolume,
            )
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .unwrap_or((ask + bid) as f64 / 2.0);
            let imb = stat::volume_imbalance(v_ask, v_bid).unwrap_or(0.5);
            let spread = (ask - bid) as f64;
            row.extend([wmid, imb, spread, spread / config.tick as f64]);
        }

        (
            row,
            WindowMeta {
                start,
                end,
                end_timestamp: day.timestamps[end],
            },
            degenerate,
            short_noise,
        )
    };

    #[cfg(feature = "parallel")]
    let mut produced: Vec<(Vec<f64>, WindowMeta, bool, bool)> =
        starts.par_iter().map(make_row).collect();
    #[cfg(not(feature = "parallel"))]
    let mut produced: Vec<(Vec<f64>, WindowMeta, bool, bool)> =
        starts.iter().map(make_row).collect();

    // running average of spot volatility, in window order
    if config.flags.volatility {
        let sv_col = columns
            .iter()
            .position(|c| c == "spot_vol")
            .expect("volatility columns present");
        let avg_col = sv_col + 1;
        let mut running = 0.0;
        for (i, (row, _, _, _)) in produced.iter_mut().enumerate() {
            running += row[sv_col];
            row[avg_col] = running / (i + 1) as f64;
        }
    }

    let mut rows = Vec::with_capacity(produced.len());
    let mut meta = Vec::with_capacity(produced.len());
    for (row, m, degenerate, short_noise) in produced {
        if degenerate {
            stats.degenerate_ampd += 1;
        }
        if short_noise {
            stats.short_noise_windows += 1;
        }
        rows.push(row);
        meta.push(m);
    }

    Ok((FeatureMatrix { columns, rows, meta }, stats))
}

/// Sequential twin of [`extract_features`], kept for benchmarking the
/// parallel path against a like-for-like baseline.
pub fn extract_features_seq(
    day: &CleanedDay,
    raw_len: usize,
    config: &FeatureConfig,
) -> Result<(FeatureMatrix, ExtractionStats)> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        pool.install(|| extract_features(day, raw_len, config))
    }
    #[cfg(not(feature = "parallel"))]
    extract_features(day, raw_len, config)
}
