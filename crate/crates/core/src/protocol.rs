//! Labeling protocols, class balancing, chronological splitting, and
//! min-max normalization.
//!
//! Protocol one labels each overlapping 10-event window with the
//! direction of the next mid-price change after the window and the
//! number of events until it happens. Protocol two labels each
//! non-overlapping 10-event window with a three-way class from the
//! relative change of the mid ten events ahead.

use crate::error::{Error, Result};
use crate::features::WindowSpec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Start indices of every full window over a series of `n` events.
pub fn windows(n: usize, spec: &WindowSpec) -> Vec<usize> {
    if n < spec.length {
        return Vec::new();
    }
    (0..=n - spec.length).step_by(spec.stride).collect()
}

/// Direction of the next mid-price move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

/// Protocol-one target: direction of the next mid change plus its
/// horizon in events after the window end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionLabel {
    pub direction: Direction,
    pub horizon: u32,
}

/// Protocol-two target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveClass {
    Down = 0,
    Stationary = 1,
    Up = 2,
}

impl MoveClass {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(MoveClass::Down),
            1 => Ok(MoveClass::Stationary),
            2 => Ok(MoveClass::Up),
            _ => Err(Error::InvalidParam {
                name: "class",
                reason: format!("index {i} out of range"),
            }),
        }
    }
}

/// Scan forward from `end` (inclusive window end, exclusive of the scan)
/// for the first mid change; `None` when the mid never changes again.
pub fn label_protocol1(mids_twice: &[i64], end: usize) -> Option<DirectionLabel> {
    let base = mids_twice[end];
    for (steps, &m) in mids_twice[end + 1..].iter().enumerate() {
        if m != base {
            return Some(DirectionLabel {
                direction: if m > base {
                    Direction::Up
                } else {
                    Direction::Down
                },
                horizon: (steps + 1) as u32,
            });
        }
    }
    None
}

/// Default stationarity threshold for protocol two.
pub const DEFAULT_ALPHA: f64 = 2e-5;
/// Default look-ahead, in events, for protocol two.
pub const DEFAULT_LOOKAHEAD: usize = 10;

/// Three-way move class of the mid `lookahead` events past `end`;
/// `None` when the series ends before the look-ahead point.
pub fn label_protocol2(
    mids_twice: &[i64],
    end: usize,
    lookahead: usize,
    alpha: f64,
) -> Option<MoveClass> {
    let ahead = end + lookahead;
    if ahead >= mids_twice.len() {
        return None;
    }
    let now = mids_twice[end] as f64;
    let future = mids_twice[ahead] as f64;
    let ratio = future / now;
    Some(if ratio > 1.0 + alpha {
        MoveClass::Up
    } else if ratio < 1.0 - alpha {
        MoveClass::Down
    } else {
        MoveClass::Stationary
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStats {
    pub labeled: usize,
    /// Windows with no future mid change (protocol one) or no look-ahead
    /// point (protocol two).
    pub unlabeled: usize,
}

/// Undersample row indices so every class keeps exactly the minority
/// count. Selection is seeded; surviving indices keep their original
/// order. Errors when fewer than two classes are present.
pub fn undersample(classes: &[usize], seed: u64) -> Result<Vec<usize>> {
    let n_classes = match classes.iter().max() {
        Some(&m) => m + 1,
        None => return Err(Error::Empty("classes")),
    };
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    let present: Vec<&Vec<usize>> = by_class.iter().filter(|v| !v.is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass(present.len()));
    }
    let target = present.iter().map(|v| v.len()).min().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for bucket in &by_class {
        if bucket.is_empty() {
            continue;
        }
        let mut chosen: Vec<usize> = bucket
            .choose_multiple(&mut rng, target)
            .copied()
            .collect();
        chosen.sort_unstable();
        selected.extend(chosen);
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Chronological split: the leading share of rows trains, the rest tests,
/// and the tail of the training block is held out for validation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    /// Fraction of rows assigned to training (test gets the rest).
    pub train_fraction: f64,
    /// Fraction of the training block held out for validation.
    pub validation_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            validation_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn chronological_split(n: usize, spec: &SplitSpec) -> Result<Split> {
    if !(0.0..1.0).contains(&spec.train_fraction) || spec.train_fraction == 0.0 {
        return Err(Error::InvalidParam {
            name: "train_fraction",
            reason: format!("must be in (0, 1), got {}", spec.train_fraction),
        });
    }
    if !(0.0..1.0).contains(&spec.validation_fraction) {
        return Err(Error::InvalidParam {
            name: "validation_fraction",
            reason: format!("must be in [0, 1), got {}", spec.validation_fraction),
        });
    }
    let train_end = ((n as f64) * spec.train_fraction).floor() as usize;
    let val_len = ((train_end as f64) * spec.validation_fraction).floor() as usize;
    let fit_end = train_end - val_len;
    Ok(Split {
        train: (0..fit_end).collect(),
        validation: (fit_end..train_end).collect(),
        test: (train_end..n).collect(),
    })
}

/// Column ranges learned on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Columns whose training range was zero; they map to 0.
    pub constant_columns: Vec<usize>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>], train_idx: &[usize]) -> Result<Self> {
        if train_idx.is_empty() {
            return Err(Error::Empty("training rows"));
        }
        let width = rows[train_idx[0]].len();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for &i in train_idx {
            let row = &rows[i];
            if row.len() != width {
                return Err(Error::ColumnMismatch(format!(
                    "row {i} has {} columns, expected {width}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let constant_columns = (0..width).filter(|&j| min[j] == max[j]).collect();
        Ok(MinMaxScaler {
            min,
            max,
            constant_columns,
        })
    }

    /// Scale a row into the unit range per column; no clipping, so test
    /// rows outside the training range land outside [0, 1].
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.min.len() {
            return Err(Error::ColumnMismatch(format!(
                "row has {} columns, scaler expects {}",
                row.len(),
                self.min.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range == 0.0 {
                    0.0
                } else {
                    (v - self.min[j]) / range
                }
            })
            .collect())
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_counts_for_both_protocols() {
        assert_eq!(windows(100, &WindowSpec::protocol1()).len(), 91);
        assert_eq!(windows(100, &WindowSpec::protocol2()).len(), 10);
        assert_eq!(windows(105, &WindowSpec::protocol2()).len(), 10);
        assert_eq!(windows(9, &WindowSpec::protocol1()).len(), 0);
        assert_eq!(windows(10, &WindowSpec::protocol1()), vec![0]);
    }

    #[test]
    fn protocol1_direction_and_horizon() {
        // twice-mids: change 3 events after the window end
        let mids = vec![200, 200, 200, 200, 202];
        assert_eq!(
            label_protocol1(&mids, 1),
            Some(DirectionLabel {
                direction: Direction::Up,
                horizon: 3
            })
        );
        let down = vec![200, 198];
        assert_eq!(
            label_protocol1(&down, 0),
            Some(DirectionLabel {
                direction: Direction::Down,
                horizon: 1
            })
        );
        // never changes again
        assert_eq!(label_protocol1(&[200, 200, 200], 0), None);
    }

    #[test]
    fn protocol2_thresholds() {
        let base = 2_000_000i64; // twice-mid
        // exactly at the boundary counts as stationary
        let up_small = (base as f64 * (1.0 + 1e-5)) as i64;
        let up_big = (base as f64 * (1.0 + 1e-4)).round() as i64;
        let down_big = (base as f64 * (1.0 - 1e-4)).round() as i64;
        let mk = |future: i64| {
            let mut m = vec![base; 11];
            m[10] = future;
            m
        };
        assert_eq!(
            label_protocol2(&mk(base), 0, 10, DEFAULT_ALPHA),
            Some(MoveClass::Stationary)
        );
        assert_eq!(
            label_protocol2(&mk(up_small), 0, 10, DEFAULT_ALPHA),
            Some(MoveClass::Stationary)
        );
        assert_eq!(
            label_protocol2(&mk(up_big), 0, 10, DEFAULT_ALPHA),
            Some(MoveClass::Up)
        );
        assert_eq!(
            label_protocol2(&mk(down_big), 0, 10, DEFAULT_ALPHA),
            Some(MoveClass::Down)
        );
        // not enough look-ahead
        assert_eq!(label_protocol2(&[base; 5], 0, 10, DEFAULT_ALPHA), None);
    }

    #[test]
    fn undersample_balances_and_preserves_order() {
        let classes: Vec<usize> = (0..100).map(|i| usize::from(i % 5 == 0)).collect();
        let kept = undersample(&classes, 42).unwrap();
        let ones = kept.iter().filter(|&&i| classes[i] == 1).count();
        let zeros = kept.len() - ones;
        assert_eq!(ones, 20);
        assert_eq!(zeros, 20);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        // deterministic under the same seed, different under another
        assert_eq!(kept, undersample(&classes, 42).unwrap());
        assert_ne!(kept, undersample(&classes, 43).unwrap());
    }

    #[test]
    fn undersample_single_class_errors() {
        assert!(matches!(
            undersample(&[1, 1, 1], 0),
            Err(Error::SingleClass(1))
        ));
        assert!(undersample(&[], 0).is_err());
    }

    #[test]
    fn split_is_chronological_and_exhaustive() {
        let split = chronological_split(100, &SplitSpec::default()).unwrap();
        assert_eq!(split.train.len(), 56); // 70 - 14 validation
        assert_eq!(split.validation.len(), 14);
        assert_eq!(split.test.len(), 30);
        assert_eq!(split.train.last(), Some(&55));
        assert_eq!(split.validation[0], 56);
        assert_eq!(split.test[0], 70);
    }

    #[test]
    fn minmax_unit_range_and_constant_columns() {
        let rows = vec![
            vec![0.0, 5.0, 7.0],
            vec![10.0, 5.0, 8.0],
            vec![5.0, 5.0, 9.0],
            vec![20.0, 5.0, 100.0],
        ];
        let train = vec![0, 1, 2];
        let scaler = MinMaxScaler::fit(&rows, &train).unwrap();
        assert_eq!(scaler.constant_columns, vec![1]);
        let scaled = scaler.apply(&rows).unwrap();
        for &i in &train {
            for &v in &scaled[i] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert_eq!(scaled[0], vec![0.0, 0.0, 0.0]);
        assert_eq!(scaled[1], vec![1.0, 0.0, 0.5]);
        // out-of-range test row is not clipped
        assert!(scaled[3][2] > 1.0);
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n in 10usize..5000) {
            let split = chronological_split(n, &SplitSpec::default()).unwrap();
            let total = split.train.len() + split.validation.len() + split.test.len();
            prop_assert_eq!(total, n);
            if let (Some(&a), Some(&b)) = (split.train.last(), split.validation.first()) {
                prop_assert!(a < b);
            }
            if let (Some(&a), Some(&b)) = (split.validation.last(), split.test.first()) {
                prop_assert!(a < b);
            }
        }

        #[test]
        fn undersample_classes_equal_counts(
            classes in proptest::collection::vec(0usize..3, 30..200),
            seed in 0u64..1000,
        ) {
            prop_assume!(classes.iter().any(|&c| c != classes[0]));
            let kept = undersample(&classes, seed).unwrap();
            let mut counts = [0usize; 3];
            for &i in &kept {
                counts[classes[i]] += 1;
            }
            let nonzero: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
            prop_assert!(nonzero.windows(2).all(|w| w[0] == w[1]));
        }
    }
}
