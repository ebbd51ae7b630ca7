//! Cross-sectional factor computation over point-in-time panel data.
//!
//! The crate is organized around a small number of moving parts:
//!
//! - [`frame`]: the immutable columnar [`PanelFrame`] of
//!   `(asset id, date, numeric columns)` rows, sorted by `(id, date)` with
//!   unique keys, plus ingestion-adjacent transforms (per-asset fills,
//!   frequency resampling).
//! - [`lag`]: deferred lag management. Factor bodies *request*
//!   `(column, lag)` pairs; materialization happens in bulk, one as-of
//!   self-join pass per distinct lag, with strict look-ahead prevention
//!   (a lagged cell only ever reads same-asset data dated at-or-before
//!   `t - lag`).
//! - [`registry`]: factor definitions and the compute orchestrator —
//!   requirement checking, skip-with-warning semantics, batched lag
//!   materialization, and incremental joining of results.
//! - [`mispricing`]: the eleven Stambaugh–Yuan mispricing factors built on
//!   top of the registry, with distress/O-score coefficients as
//!   configuration.
//! - [`backtest`]: single-factor ranking strategies with
//!   turnover-proportional fees and the standard performance metrics.
//! - [`report`]: factor-file I/O and Pearson validation against reference
//!   outputs.
//! - [`synth`]: a seeded synthetic panel generator used by tests, examples,
//!   and the bundled acceptance runs.
//!
//! Frames are immutable and cheap to derive (shared key storage); every
//! operation is a pure function from frames to frames, safe to call
//! concurrently on shared data.

pub mod backtest;
pub mod column;
pub mod date;
pub mod datetable;
pub mod error;
pub mod expr;
pub mod frame;
pub mod ingest;
pub mod lag;
pub mod mispricing;
pub mod registry;
pub mod report;
pub mod schema;
pub mod stats;
pub mod synth;

pub use column::Column;
pub use datetable::DateTable;
pub use error::{Error, Result};
pub use frame::{Aggregation, FillStrategy, FrameBuilder, PanelFrame};
pub use lag::{Lag, LagUnit, OffsetKey, OffsetRegistry};
pub use registry::{
    ComputeOptions, ComputeOutput, Extras, FactorDef, FactorKind, FactorRegistry, FactorResult,
    Params, SkipWarning,
};
pub use schema::ColumnSchema;
