//! Deterministic Monte-Carlo sweeps over QBER or the weight range.
//!
//! A sweep runs `trials_per_point` independent reconciliation trials
//! at every grid value and aggregates each point into one
//! [`SweepPoint`] row. Trial seeds derive only from
//! `(base_seed, point index, trial index)`, trials are embarrassingly
//! parallel, and results merge in index order — so the emitted tables
//! are byte-identical for any thread count, including one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::channel::trial_seed;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, SweepPoint};
use crate::session::{run_trial, SessionConfig};
use crate::tpm::{LearningRule, TpmParams, MAX_HALF_WIDTH};

/// Which independent variable the sweep walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Vary the channel error rate at fixed block size.
    Qber,
    /// Vary the half-width `L` (powers of two) at fixed QBER.
    Range,
}

/// Full description of one sweep campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Sweep flavor.
    pub kind: SweepKind,
    /// `K`: hidden units.
    pub hidden_units: usize,
    /// `N`: inputs per hidden unit.
    pub inputs_per_unit: usize,
    /// Fixed block size `b` for a QBER sweep (each range point derives
    /// its own `b` from `L` instead).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub block_bits: Option<u32>,
    /// Fixed channel error rate for a range sweep.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qber: Option<f64>,
    /// Strictly increasing grid of independent values (QBERs, or
    /// half-widths stored exactly as floats).
    pub grid: Vec<f64>,
    /// Trials per grid value.
    pub trials_per_point: u64,
    /// Base seed every trial seed derives from.
    pub base_seed: u64,
    /// Training rule for every trial.
    pub rule: LearningRule,
    /// Iteration cap per frame.
    pub max_iterations: u64,
}

impl SweepSpec {
    /// A QBER sweep with the standard setup (`K = 10`, `N = 15`,
    /// `b = 4`, Hebbian, 300-iteration cap, 1000 trials, seed 0).
    pub fn qber_sweep(grid: Vec<f64>) -> Self {
        SweepSpec {
            kind: SweepKind::Qber,
            hidden_units: 10,
            inputs_per_unit: 15,
            block_bits: Some(4),
            qber: None,
            grid,
            trials_per_point: 1000,
            base_seed: 0,
            rule: LearningRule::Hebbian,
            max_iterations: 300,
        }
    }

    /// A weight-range sweep at fixed `qber`, otherwise the same
    /// standard setup.
    pub fn range_sweep(qber: f64, grid: &[i64]) -> Self {
        SweepSpec {
            kind: SweepKind::Range,
            hidden_units: 10,
            inputs_per_unit: 15,
            block_bits: None,
            qber: Some(qber),
            grid: grid.iter().map(|&l| l as f64).collect(),
            trials_per_point: 1000,
            base_seed: 0,
            rule: LearningRule::Hebbian,
            max_iterations: 300,
        }
    }

    /// Checks every invariant the runners rely on.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        if self.grid.len() > u32::MAX as usize || self.trials_per_point > u64::from(u32::MAX) {
            return Err(Error::InvalidParameter(
                "sweep dimensions exceed the 32-bit seeding index space".into(),
            ));
        }
        if self.trials_per_point < 1 {
            return Err(Error::InvalidParameter(
                "trials_per_point must be >= 1".into(),
            ));
        }
        for pair in self.grid.windows(2) {
            // partial_cmp so a NaN entry is rejected, not waved through.
            if pair[0].partial_cmp(&pair[1]) != Some(std::cmp::Ordering::Less) {
                return Err(Error::InvalidParameter(
                    "sweep grid must be strictly increasing".into(),
                ));
            }
        }
        match self.kind {
            SweepKind::Qber => {
                let block_bits = self
                    .block_bits
                    .ok_or_else(|| Error::InvalidParameter("qber sweep needs block_bits".into()))?;
                crate::codec::derive_halfwidth(block_bits)?;
                for &q in &self.grid {
                    if !(0.0..=1.0).contains(&q) {
                        return Err(Error::InvalidParameter(format!(
                            "grid qber {q} outside [0, 1]"
                        )));
                    }
                }
            }
            SweepKind::Range => {
                let qber = self.qber.ok_or_else(|| {
                    Error::InvalidParameter("range sweep needs a fixed qber".into())
                })?;
                if !(0.0..=1.0).contains(&qber) {
                    return Err(Error::InvalidParameter(format!(
                        "qber {qber} outside [0, 1]"
                    )));
                }
                for &g in &self.grid {
                    half_width_from_grid(g)?;
                }
            }
        }
        Ok(())
    }
}

/// Validates one range-sweep grid value: an exact power of two in
/// `[2, 2^20]`.
fn half_width_from_grid(value: f64) -> Result<i32> {
    let l = value as i64;
    if value.fract() != 0.0 || l < 2 || l > i64::from(MAX_HALF_WIDTH) || (l & (l - 1)) != 0 {
        return Err(Error::InvalidParameter(format!(
            "range grid value {value} is not a power of two in [2, {MAX_HALF_WIDTH}]"
        )));
    }
    Ok(l as i32)
}

/// A finished sweep: the spec it ran, the crate version that produced
/// it, and one aggregated row per grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Echo of the full campaign description, for provenance.
    pub spec: SweepSpec,
    /// Version of this crate that produced the table.
    pub version: String,
    /// One row per grid value, in grid order.
    pub rows: Vec<SweepPoint>,
}

/// Runs the trials of one grid point and aggregates them.
fn run_point(
    config: &SessionConfig,
    qber: f64,
    independent_value: f64,
    trials: u64,
    base_seed: u64,
    point_index: u32,
) -> Result<SweepPoint> {
    let reports = (0..trials as u32)
        .into_par_iter()
        .map(|trial| run_trial(config, qber, trial_seed(base_seed, point_index, trial)))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&reports, independent_value, config.params.half_width)
}

/// Runs a QBER sweep: fixed geometry, one row per grid error rate.
pub fn run_qber_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if spec.kind != SweepKind::Qber {
        return Err(Error::InvalidParameter(
            "run_qber_sweep requires a qber-kind spec".into(),
        ));
    }
    spec.validate()?;
    let block_bits = spec.block_bits.expect("validated above");
    let half_width = crate::codec::derive_halfwidth(block_bits)?;
    let params = TpmParams::new(
        spec.hidden_units,
        spec.inputs_per_unit,
        half_width,
        spec.rule,
    )?;
    let config = SessionConfig::new(params, block_bits, spec.max_iterations, false)?;
    let mut rows = Vec::with_capacity(spec.grid.len());
    for (point_index, &qber) in spec.grid.iter().enumerate() {
        rows.push(run_point(
            &config,
            qber,
            qber,
            spec.trials_per_point,
            spec.base_seed,
            point_index as u32,
        )?);
    }
    Ok(SweepTable {
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows,
    })
}

/// Runs a weight-range sweep: fixed QBER, one row per half-width, with
/// `b = log2(L) + 1` and the key length growing accordingly.
pub fn run_range_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if spec.kind != SweepKind::Range {
        return Err(Error::InvalidParameter(
            "run_range_sweep requires a range-kind spec".into(),
        ));
    }
    spec.validate()?;
    let qber = spec.qber.expect("validated above");
    let mut rows = Vec::with_capacity(spec.grid.len());
    for (point_index, &grid_value) in spec.grid.iter().enumerate() {
        let half_width = half_width_from_grid(grid_value)?;
        let block_bits = half_width.trailing_zeros() + 1;
        let params = TpmParams::new(
            spec.hidden_units,
            spec.inputs_per_unit,
            half_width,
            spec.rule,
        )?;
        let config = SessionConfig::new(params, block_bits, spec.max_iterations, false)?;
        rows.push(run_point(
            &config,
            qber,
            grid_value,
            spec.trials_per_point,
            spec.base_seed,
            point_index as u32,
        )?);
    }
    Ok(SweepTable {
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows,
    })
}

/// Dispatches on the spec's kind.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    match spec.kind {
        SweepKind::Qber => run_qber_sweep(spec),
        SweepKind::Range => run_range_sweep(spec),
    }
}

/// The default QBER grid: 0.005 through 0.15 in steps of 0.005
/// (30 points).
pub fn default_qber_grid() -> Vec<f64> {
    (1..=30).map(|k| f64::from(k) / 200.0).collect()
}

/// The default range grid: powers of two from 8 through 512.
pub fn default_range_grid() -> Vec<i64> {
    vec![8, 16, 32, 64, 128, 256, 512]
}

/// Table output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

/// Renders the table as CSV: a header naming every row field, one data
/// row per point, `.` decimal separator, newline-terminated. The first
/// column is labeled by the independent variable (`qber` or
/// `half_width`).
pub fn render_csv(table: &SweepTable) -> String {
    let label = match table.spec.kind {
        SweepKind::Qber => "qber",
        SweepKind::Range => "half_width",
    };
    let mut out = String::new();
    out.push_str(&format!(
        "{label},trials,fer,mean_iterations,mean_rounds,mean_entropy_loss,std_iterations\n"
    ));
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.independent_value,
            row.trials,
            row.fer,
            row.mean_iterations,
            row.mean_rounds,
            row.mean_entropy_loss,
            row.std_iterations
        ));
    }
    out
}

/// Renders the table as a single pretty-printed JSON document holding
/// the spec echo, the producing version, and the rows array.
pub fn render_json(table: &SweepTable) -> String {
    let mut out = serde_json::to_string_pretty(table).expect("sweep tables always serialize");
    out.push('\n');
    out
}

/// Writes the rendered table to `destination`.
pub fn emit_table(
    table: &SweepTable,
    format: OutputFormat,
    destination: &mut dyn Write,
) -> std::io::Result<()> {
    let rendered = match format {
        OutputFormat::Csv => render_csv(table),
        OutputFormat::Json => render_json(table),
    };
    destination.write_all(rendered.as_bytes())
}

/// Runs `body` inside a dedicated rayon pool of `threads` workers;
/// `0` keeps the default (one worker per core). The output of a sweep
/// never depends on this choice — it only bounds parallelism.
pub fn with_thread_limit<T: Send>(threads: usize, body: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(body());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(body))
}
