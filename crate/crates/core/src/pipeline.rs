//! End-to-end orchestration: acquire messages, clean, rebuild the book,
//! extract features, label, balance, normalize, train, evaluate. Every
//! stage writes its artifact under the configured output directory and
//! records row counts in a manifest, so a run can be audited and
//! reproduced byte for byte from its seed.

use crate::book::{build_book, OverdrawPolicy, DEFAULT_DEPTH};
use crate::cleaning::{filter_session_bounds, outlier_filter, FilterParams};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, CleanedDay, FeatureConfig, FeatureMatrix, WindowSpec,
};
use crate::messages::{parse_message_file, write_message_file};
use crate::model::checkpoint;
use crate::model::train::{evaluate, train, Dataset, EvalReport, TrainConfig};
use crate::model::{Mlp, ModelConfig, Preset, Targets, Task};
use crate::protocol::{
    chronological_split, label_protocol1, label_protocol2, undersample, Direction, MinMaxScaler,
    SplitSpec, DEFAULT_ALPHA, DEFAULT_LOOKAHEAD,
};
use crate::snapio::write_snapshots_binary;
use crate::synth::{generate_messages, SynthConfig};
use crate::types::MessageEvent;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Stable per-stage seed derivation: FNV-1a over the global seed bytes
/// and the stage tag. Changing either changes the stream; stages never
/// share randomness.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    for byte in global.to_le_bytes().into_iter().chain(stage.bytes()) {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Where the raw messages come from: a file on disk or the generator.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InputConfig {
    #[serde(default)]
    pub message_file: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SessionBounds {
    pub open: i64,
    pub close: i64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProtocolConfig {
    #[serde(default = "default_task")]
    pub task: Task,
    /// Stationarity threshold for the three-class task.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Look-ahead in events for the three-class task.
    #[serde(default = "default_lookahead")]
    pub lookahead: usize,
    /// Balance training classes by undersampling.
    #[serde(default = "default_true")]
    pub undersample: bool,
}

fn default_task() -> Task {
    Task::Direction
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_lookahead() -> usize {
    DEFAULT_LOOKAHEAD
}

fn default_true() -> bool {
    true
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            task: Task::Direction,
            alpha: DEFAULT_ALPHA,
            lookahead: DEFAULT_LOOKAHEAD,
            undersample: true,
        }
    }
}

fn default_preset() -> String {
    "mlp1".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub session: Option<SessionBounds>,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input.message_file, &self.input.synth) {
            (Some(_), Some(_)) => Err(Error::Config(
                "set either input.message_file or input.synth, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "set input.message_file or input.synth".into(),
            )),
            _ => Ok(()),
        }?;
        self.filter.validate()?;
        self.features.window.validate()?;
        Preset::parse(&self.preset)?;
        let expected_stride = match self.protocol.task {
            Task::Direction => 1,
            Task::ThreeClass => self.features.window.length,
        };
        if self.features.window.stride != expected_stride {
            return Err(Error::Config(format!(
                "window stride {} does not match the task (expected {expected_stride})",
                self.features.window.stride
            )));
        }
        Ok(())
    }

    /// Convenience starting point: generated input, direction task.
    pub fn synthetic(output_dir: PathBuf, seed: u64) -> Self {
        RunConfig {
            seed,
            output_dir,
            input: InputConfig {
                message_file: None,
                synth: Some(SynthConfig {
                    seed: stage_seed(seed, "synth"),
                    ..SynthConfig::default()
                }),
            },
            session: None,
            filter: FilterParams::default(),
            features: FeatureConfig::default(),
            protocol: ProtocolConfig::default(),
            split: SplitSpec::default(),
            preset: default_preset(),
            train: TrainConfig::default(),
        }
    }

    pub fn window_for_task(task: Task) -> WindowSpec {
        match task {
            Task::Direction => WindowSpec::protocol1(),
            Task::ThreeClass => WindowSpec::protocol2(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub rows_in: usize,
    pub rows_out: usize,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub stage_seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
    pub feature_columns: Vec<String>,
    pub final_train_loss: Option<f64>,
    pub evaluation: Option<EvalReport>,
}

impl RunManifest {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    /// Human-readable run report.
    pub fn report(&self) -> String {
        let mut out = String::from("stage           rows in    rows out   note\n");
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{:<15} {:>10} {:>10}   {}",
                s.stage, s.rows_in, s.rows_out, s.note
            );
        }
        if let Some(loss) = self.final_train_loss {
            let _ = writeln!(out, "final training loss: {loss:.6}");
        }
        if let Some(eval) = &self.evaluation {
            let _ = writeln!(out, "test evaluation: {}", eval.summary());
        }
        out
    }
}

/// Feature matrix with aligned labels, ready for splitting.
#[derive(Debug, Clone)]
pub struct LabeledWindows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub window_starts: Vec<usize>,
    pub classes: Vec<usize>,
    pub horizons: Option<Vec<f64>>,
}

impl LabeledWindows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> LabeledWindows {
        LabeledWindows {
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            window_starts: idx.iter().map(|&i| self.window_starts[i]).collect(),
            classes: idx.iter().map(|&i| self.classes[i]).collect(),
            horizons: self
                .horizons
                .as_ref()
                .map(|h| idx.iter().map(|&i| h[i]).collect()),
        }
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        let n = self.len();
        let width = self.columns.len();
        let mut x = Array2::zeros((n, width));
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::ColumnMismatch(format!(
                    "row {i} has {} columns, expected {width}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        Dataset::new(
            x,
            Targets {
                class: self.classes.clone(),
                horizon: self.horizons.clone(),
            },
        )
    }
}

/// Attach labels to extracted feature rows; unlabeled windows (no
/// future mid change, or not enough look-ahead) are dropped.
pub fn label_windows(
    matrix: &FeatureMatrix,
    day: &CleanedDay,
    protocol: &ProtocolConfig,
) -> (LabeledWindows, usize) {
    let mut out = LabeledWindows {
        columns: matrix.columns.clone(),
        rows: Vec::new(),
        window_starts: Vec::new(),
        classes: Vec::new(),
        horizons: protocol.task.has_regression().then(Vec::new),
    };
    let mut unlabeled = 0usize;
    for (row, meta) in matrix.rows.iter().zip(&matrix.meta) {
        match protocol.task {
            Task::Direction => match label_protocol1(&day.mids_twice, meta.end) {
                Some(label) => {
                    out.rows.push(row.clone());
                    out.window_starts.push(meta.start);
                    out.classes
                        .push(usize::from(label.direction == Direction::Up));
                    out.horizons
                        .as_mut()
                        .expect("direction task tracks horizons")
                        .push(label.horizon as f64);
                }
                None => unlabeled += 1,
            },
            Task::ThreeClass => {
                match label_protocol2(
                    &day.mids_twice,
                    meta.end,
                    protocol.lookahead,
                    protocol.alpha,
                ) {
                    Some(class) => {
                        out.rows.push(row.clone());
                        out.window_starts.push(meta.start);
                        out.classes.push(class.index());
                    }
                    None => unlabeled += 1,
                }
            }
        }
    }
    (out, unlabeled)
}

pub fn write_features_csv(path: &Path, labeled: &LabeledWindows) -> Result<()> {
    let mut out = String::from("window_start,class,horizon");
    for c in &labeled.columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for i in 0..labeled.len() {
        let horizon = labeled
            .horizons
            .as_ref()
            .map(|h| h[i].to_string())
            .unwrap_or_default();
        let _ = write!(
            out,
            "{},{},{}",
            labeled.window_starts[i], labeled.classes[i], horizon
        );
        for v in &labeled.rows[i] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_features_csv(path: &Path) -> Result<LabeledWindows> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Empty("feature file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "window_start" || cols[1] != "class" || cols[2] != "horizon" {
        return Err(Error::Parse {
            line: 1,
            reason: "expected header window_start,class,horizon,<features>".into(),
        });
    }
    let columns: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let mut out = LabeledWindows {
        columns,
        rows: Vec::new(),
        window_starts: Vec::new(),
        classes: Vec::new(),
        horizons: None,
    };
    let mut any_horizon = false;
    let mut horizons: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != out.columns.len() + 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!(
                    "expected {} columns, got {}",
                    out.columns.len() + 3,
                    parts.len()
                ),
            });
        }
        let parse_err = |what: &str, e: String| Error::Parse {
            line: lineno,
            reason: format!("column `{what}`: {e}"),
        };
        out.window_starts.push(
            parts[0]
                .parse()
                .map_err(|e: std::num::ParseIntError| parse_err("window_start", e.to_string()))?,
        );
        out.classes.push(
            parts[1]
                .parse()
                .map_err(|e: std::num::ParseIntError| parse_err("class", e.to_string()))?,
        );
        if parts[2].is_empty() {
            horizons.push(f64::NAN);
        } else {
            any_horizon = true;
            horizons.push(
                parts[2]
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| parse_err("horizon", e.to_string()))?,
            );
        }
        let mut row = Vec::with_capacity(out.columns.len());
        for (c, raw) in out.columns.iter().zip(&parts[3..]) {
            row.push(
                raw.parse()
                    .map_err(|e: std::num::ParseFloatError| parse_err(c, e.to_string()))?,
            );
        }
        out.rows.push(row);
    }
    if any_horizon {
        out.horizons = Some(horizons);
    }
    Ok(out)
}

/// Unlabeled feature matrix with window metadata, one row per window.
pub fn write_matrix_csv(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    let mut out = String::from("window_start,window_end,end_timestamp");
    for c in &matrix.columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (row, meta) in matrix.rows.iter().zip(&matrix.meta) {
        let _ = write!(out, "{},{},{}", meta.start, meta.end, meta.end_timestamp);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_matrix_csv(path: &Path) -> Result<FeatureMatrix> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Empty("feature file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4
        || cols[0] != "window_start"
        || cols[1] != "window_end"
        || cols[2] != "end_timestamp"
    {
        return Err(Error::Parse {
            line: 1,
            reason: "expected header window_start,window_end,end_timestamp,<features>".into(),
        });
    }
    let columns: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let mut matrix = FeatureMatrix {
        columns,
        rows: Vec::new(),
        meta: Vec::new(),
    };
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != matrix.columns.len() + 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!(
                    "expected {} columns, got {}",
                    matrix.columns.len() + 3,
                    parts.len()
                ),
            });
        }
        let num = |raw: &str, what: &str| -> Result<f64> {
            raw.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
                line: lineno,
                reason: format!("column `{what}`: {e}"),
            })
        };
        matrix.meta.push(crate::features::WindowMeta {
            start: num(parts[0], "window_start")? as usize,
            end: num(parts[1], "window_end")? as usize,
            end_timestamp: num(parts[2], "end_timestamp")? as i64,
        });
        let mut row = Vec::with_capacity(matrix.columns.len());
        for (c, raw) in matrix.columns.iter().zip(&parts[3..]) {
            row.push(num(raw, c)?);
        }
        matrix.rows.push(row);
    }
    Ok(matrix)
}

/// Keep mask over snapshot indices, `index,keep` per row.
pub fn write_mask_csv(path: &Path, mask: &[bool]) -> Result<()> {
    let mut out = String::from("index,keep\n");
    for (i, &k) in mask.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", u8::from(k));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_mask_csv(path: &Path) -> Result<Vec<bool>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut mask = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (index, keep) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: lineno,
            reason: "expected index,keep".into(),
        })?;
        let index: usize = index.parse().map_err(|e| Error::Parse {
            line: lineno,
            reason: format!("index: {e}"),
        })?;
        if index != mask.len() {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("indices must be dense, expected {}", mask.len()),
            });
        }
        mask.push(match keep.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("keep must be 0 or 1, got {other:?}"),
                })
            }
        });
    }
    Ok(mask)
}

pub fn write_split_json(path: &Path, split: &crate::protocol::Split) -> Result<()> {
    let json = serde_json::to_string(split).expect("serializable");
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_split_json(path: &Path) -> Result<crate::protocol::Split> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("split: {e}")))
}

pub fn write_scaler_json(path: &Path, scaler: &MinMaxScaler) -> Result<()> {
    let json = serde_json::to_string_pretty(scaler).expect("serializable");
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_scaler_json(path: &Path) -> Result<MinMaxScaler> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("scaler: {e}")))
}

fn stage_err(stage: &'static str, e: Error) -> Error {
    Error::Stage {
        stage,
        reason: e.to_string(),
    }
}

/// Run every stage, writing artifacts and the manifest under
/// `config.output_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(config.output_dir.display().to_string(), e))?;
    let dir = &config.output_dir;
    let mut stages = Vec::new();
    let mut stage_seeds = BTreeMap::new();

    // acquire
    let events: Vec<MessageEvent> = match (&config.input.message_file, &config.input.synth) {
        (Some(path), None) => parse_message_file(path).map_err(|e| stage_err("acquire", e))?,
        (None, Some(synth)) => {
            stage_seeds.insert("synth".to_string(), synth.seed);
            let (events, truth) =
                generate_messages(synth).map_err(|e| stage_err("acquire", e))?;
            write_message_file(&dir.join("messages.csv"), &events)
                .map_err(|e| stage_err("acquire", e))?;
            truth
                .write_json(&dir.join("ground_truth.json"))
                .map_err(|e| stage_err("acquire", e))?;
            events
        }
        _ => unreachable!("validated"),
    };
    stages.push(StageRecord {
        stage: "acquire".into(),
        rows_in: 0,
        rows_out: events.len(),
        note: if config.input.synth.is_some() {
            "generated".into()
        } else {
            "parsed".into()
        },
    });

    // session bounds
    let (events, session_note) = match config.session {
        Some(bounds) => {
            let (kept, report) = filter_session_bounds(&events, bounds.open, bounds.close);
            (
                kept,
                format!(
                    "outside session {}, non-positive price {}",
                    report.outside_session, report.zero_price
                ),
            )
        }
        None => (events, "no session bounds".into()),
    };
    let n_events = events.len();
    stages.push(StageRecord {
        stage: "session".into(),
        rows_in: stages[0].rows_out,
        rows_out: n_events,
        note: session_note,
    });

    // book reconstruction
    let (snapshots, book_stats) = build_book(&events, DEFAULT_DEPTH, OverdrawPolicy::ClampWarn)
        .map_err(|e| stage_err("book", e))?;
    write_snapshots_binary(&dir.join("snapshots.bin"), &snapshots, DEFAULT_DEPTH)
        .map_err(|e| stage_err("book", e))?;
    stages.push(StageRecord {
        stage: "book".into(),
        rows_in: n_events,
        rows_out: snapshots.len(),
        note: format!(
            "clamped {}, one-sided {}, unknown ids {}",
            book_stats.clamped, book_stats.one_sided_snapshots, book_stats.unknown_id_fallbacks
        ),
    });

    // outlier filter on the two-sided mid series
    let two_sided: Vec<usize> = snapshots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.mid.is_some())
        .map(|(i, _)| i)
        .collect();
    let mids: Vec<f64> = two_sided
        .iter()
        .map(|&i| snapshots[i].mid.expect("filtered").as_f64())
        .collect();
    let mut keep_mask = vec![true; snapshots.len()];
    let clean_note = if mids.len() > config.filter.k {
        let (keep, report) =
            outlier_filter(&mids, &config.filter).map_err(|e| stage_err("clean", e))?;
        for (&snap_idx, &k) in two_sided.iter().zip(&keep) {
            keep_mask[snap_idx] = k;
        }
        std::fs::write(dir.join("removed_indices.csv"), report.to_delimited())
            .map_err(|e| Error::io(dir.display().to_string(), e))
            .map_err(|e| stage_err("clean", e))?;
        report.summary()
    } else {
        "series shorter than filter window; filter skipped".into()
    };
    let kept = keep_mask.iter().filter(|&&k| k).count();
    stages.push(StageRecord {
        stage: "clean".into(),
        rows_in: snapshots.len(),
        rows_out: kept,
        note: clean_note,
    });

    // features
    let day = CleanedDay::from_snapshots(&snapshots, Some(&keep_mask));
    let (matrix, fstats) = extract_features(&day, snapshots.len(), &config.features)
        .map_err(|e| stage_err("features", e))?;
    stages.push(StageRecord {
        stage: "features".into(),
        rows_in: fstats.windows_total,
        rows_out: matrix.n_rows(),
        note: format!(
            "dropped {} windows, {} short noise windows",
            fstats.windows_dropped, fstats.short_noise_windows
        ),
    });

    // labels
    let (labeled, unlabeled) = label_windows(&matrix, &day, &config.protocol);
    if labeled.is_empty() {
        return Err(stage_err("label", Error::Empty("labeled windows")));
    }
    write_features_csv(&dir.join("features.csv"), &labeled)
        .map_err(|e| stage_err("label", e))?;
    stages.push(StageRecord {
        stage: "label".into(),
        rows_in: matrix.n_rows(),
        rows_out: labeled.len(),
        note: format!("{unlabeled} windows had no label"),
    });

    // split, undersample the training block, normalize
    let split = chronological_split(labeled.len(), &config.split)
        .map_err(|e| stage_err("normalize", e))?;
    let train_idx = if config.protocol.undersample {
        let seed = stage_seed(config.seed, "undersample");
        stage_seeds.insert("undersample".to_string(), seed);
        let train_classes: Vec<usize> =
            split.train.iter().map(|&i| labeled.classes[i]).collect();
        let kept = undersample(&train_classes, seed).map_err(|e| stage_err("normalize", e))?;
        kept.into_iter().map(|i| split.train[i]).collect()
    } else {
        split.train.clone()
    };
    let scaler =
        MinMaxScaler::fit(&labeled.rows, &train_idx).map_err(|e| stage_err("normalize", e))?;
    write_scaler_json(&dir.join("scaler.json"), &scaler)
        .map_err(|e| stage_err("normalize", e))?;
    let mut normalized = labeled.clone();
    normalized.rows = scaler
        .apply(&labeled.rows)
        .map_err(|e| stage_err("normalize", e))?;
    write_features_csv(&dir.join("features_normalized.csv"), &normalized)
        .map_err(|e| stage_err("normalize", e))?;
    stages.push(StageRecord {
        stage: "normalize".into(),
        rows_in: labeled.len(),
        rows_out: train_idx.len() + split.validation.len() + split.test.len(),
        note: format!(
            "train {} (balanced from {}), validation {}, test {}, {} constant columns",
            train_idx.len(),
            split.train.len(),
            split.validation.len(),
            split.test.len(),
            scaler.constant_columns.len()
        ),
    });

    // train
    let init_seed = stage_seed(config.seed, "init");
    let shuffle_seed = stage_seed(config.seed, "shuffle");
    stage_seeds.insert("init".to_string(), init_seed);
    stage_seeds.insert("shuffle".to_string(), shuffle_seed);
    let preset = Preset::parse(&config.preset)?;
    let mut model = Mlp::new(ModelConfig::from_preset(
        preset,
        normalized.columns.len(),
        config.protocol.task,
        init_seed,
    ))
    .map_err(|e| stage_err("train", e))?;
    let train_set = normalized
        .select(&train_idx)
        .to_dataset()
        .map_err(|e| stage_err("train", e))?;
    let val_set = normalized
        .select(&split.validation)
        .to_dataset()
        .map_err(|e| stage_err("train", e))?;
    let train_config = TrainConfig {
        seed: shuffle_seed,
        ..config.train
    };
    let history = train(
        &mut model,
        &train_set,
        (!split.validation.is_empty()).then_some(&val_set),
        &train_config,
    )
    .map_err(|e| stage_err("train", e))?;
    std::fs::write(dir.join("history.csv"), history.to_csv())
        .map_err(|e| Error::io(dir.display().to_string(), e))?;
    checkpoint::save(&model, &dir.join("model.bin")).map_err(|e| stage_err("train", e))?;
    stages.push(StageRecord {
        stage: "train".into(),
        rows_in: train_set.len(),
        rows_out: train_set.len(),
        note: format!(
            "{} epochs, final loss {:.6}",
            history.epochs.len(),
            history.final_train_loss().unwrap_or(f64::NAN)
        ),
    });

    // evaluate
    let test_set = normalized
        .select(&split.test)
        .to_dataset()
        .map_err(|e| stage_err("evaluate", e))?;
    let evaluation = if test_set.is_empty() {
        None
    } else {
        let report = evaluate(&model, &test_set).map_err(|e| stage_err("evaluate", e))?;
        let json = serde_json::to_string_pretty(&report).expect("serializable");
        std::fs::write(dir.join("evaluation.json"), json)
            .map_err(|e| Error::io(dir.display().to_string(), e))?;
        Some(report)
    };
    stages.push(StageRecord {
        stage: "evaluate".into(),
        rows_in: test_set.len(),
        rows_out: test_set.len(),
        note: evaluation
            .as_ref()
            .map(|e| e.summary())
            .unwrap_or_else(|| "empty test set".into()),
    });

    let manifest = RunManifest {
        config: config.clone(),
        stage_seeds,
        stages,
        feature_columns: normalized.columns.clone(),
        final_train_loss: history.final_train_loss(),
        evaluation,
    };
    manifest.write_json(&dir.join("manifest.json"))?;
    Ok(manifest)
}
