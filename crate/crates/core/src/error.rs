use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for the crate's fallible entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.field, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("{n_used} used modes is not a whole number of {angles}-mode cells")]
    PartialCell { n_used: usize, angles: usize },
    #[error("{n_used} used modes outside 1..={total}")]
    ModeCountOutOfRange { n_used: usize, total: usize },
    #[error("scheduled read-out at {read_us} us precedes feedforward completion at {ready_us} us")]
    ReadBeforeFeedforward { read_us: f64, ready_us: f64 },
    #[error("herald receipt at {receipt_us} us precedes the herald time {herald_us} us")]
    ReceiptBeforeHerald { receipt_us: f64, herald_us: f64 },
    #[error("{n_cells} cells exceed the {capacity}-cell memory grid")]
    GridOverflow { n_cells: usize, capacity: usize },
}

/// A herald that the controller could not map to a mode.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ProtocolFault {
    #[error("herald at {arrival_us} us outside the heralding window")]
    OutOfWindow { arrival_us: f64 },
    #[error("herald at {arrival_us} us is not within half a bin gap of any mode")]
    Unresolvable { arrival_us: f64 },
    #[error("herald at {arrival_us} us is equidistant from two modes")]
    Ambiguous { arrival_us: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum MergeError {
    #[error("ledger config hash {found} does not match {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("nothing to merge")]
    Empty,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error(
        "insufficient data for g: C={coincidences} S={signals} I={nosig_idlers} R0={nosig_rounds}"
    )]
    InsufficientData {
        coincidences: u64,
        signals: u64,
        nosig_idlers: u64,
        nosig_rounds: u64,
    },
    #[error("empty ledger")]
    EmptyLedger,
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points with distinct times, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit did not converge ({reason}); residual norm {residual_norm:.3e}")]
    NotConverged { reason: String, residual_norm: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("no calibration targets")]
    NoTargets,
    #[error("calibration did not converge ({reason}); residuals {residuals:?}")]
    NotConverged { reason: String, residuals: Vec<f64> },
}
