//! Deferred lag management: collect `(column, lag)` requests, then
//! materialize every lagged column in bulk via per-lag as-of self-joins.
//!
//! # As-of semantics
//!
//! For a row `(asset, t)` and lag `L`, the lagged cell holds the value of
//! the requested column for the **same asset** at the most recent date
//! **at-or-before** `t - L`, or null when the asset has no such date. The
//! match is *at-or-before*, not strictly-before: when a row exists exactly
//! at `t - L` its value is used. Staleness is unbounded by default; an
//! optional max-staleness window (in days) can null out matches older than
//! `t - L - window`.
//!
//! Requests are deferred: [`OffsetRegistry::request`] only records the key
//! and returns the derived column name (`<column>_lag_<count><unit>`).
//! [`OffsetRegistry::compute_offset_data`] groups pending keys by lag and
//! resolves all columns of one lag in a single join pass, so the number of
//! passes equals the number of distinct lags. The pass count is exposed for
//! instrumentation.

use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;
use indexmap::{IndexMap, IndexSet};

use crate::column::Column;
use crate::date::shift_months;
use crate::error::Result;
use crate::frame::PanelFrame;

/// Unit of a lag duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LagUnit {
    Days,
    Months,
    Years,
}

impl LagUnit {
    fn suffix(self) -> &'static str {
        match self {
            LagUnit::Days => "d",
            LagUnit::Months => "mo",
            LagUnit::Years => "yr",
        }
    }
}

/// A backward offset: `count` units into the past. A count of zero refers
/// to the contemporaneous column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lag {
    pub count: u32,
    pub unit: LagUnit,
}

impl Lag {
    pub fn days(count: u32) -> Self {
        Lag { count, unit: LagUnit::Days }
    }

    pub fn months(count: u32) -> Self {
        Lag { count, unit: LagUnit::Months }
    }

    pub fn years(count: u32) -> Self {
        Lag { count, unit: LagUnit::Years }
    }

    pub fn is_zero(self) -> bool {
        self.count == 0
    }

    /// The target date `t - lag`.
    pub fn apply(self, date: NaiveDate) -> NaiveDate {
        match self.unit {
            LagUnit::Days => date - chrono::Duration::days(self.count as i64),
            LagUnit::Months => shift_months(date, -(self.count as i32)),
            LagUnit::Years => shift_months(date, -12 * self.count as i32),
        }
    }
}

impl fmt::Display for Lag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.count, self.unit.suffix())
    }
}

/// One deferred lag request: a canonical column name plus a lag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OffsetKey {
    pub column: String,
    pub lag: Lag,
}

impl OffsetKey {
    pub fn new(column: impl Into<String>, lag: Lag) -> Self {
        OffsetKey { column: column.into(), lag }
    }

    /// Derived name of the lagged column. Part of the public contract:
    /// factor definitions and output files address lagged data through it.
    /// A zero lag names the bare column.
    pub fn lagged_name(&self) -> String {
        if self.lag.is_zero() {
            self.column.clone()
        } else {
            format!("{}_lag_{}", self.column, self.lag)
        }
    }
}

/// Materialize lagged siblings of `columns` at a single `lag` on `frame`.
///
/// All requested columns are resolved in one pass per asset: the row
/// mapping `row -> as-of matched source row` is computed once and reused
/// for every column. `max_staleness_days`, when set, nulls matches whose
/// source date is more than that many days before the target date.
pub fn join_with_offset(
    frame: &PanelFrame,
    lag: Lag,
    columns: &[String],
    max_staleness_days: Option<i64>,
) -> Result<PanelFrame> {
    for name in columns {
        frame.column(name)?;
    }
    let n = frame.n_rows();
    let keys = frame.keys();
    let dates = keys.dates();

    // Per-row matched source index. Within an asset the target dates are
    // nondecreasing, so a two-pointer sweep resolves all rows in O(rows).
    let mut matched: Vec<Option<usize>> = vec![None; n];
    for asset in 0..frame.n_assets() {
        let range = keys.asset_range(asset);
        let mut src: Option<usize> = None;
        let mut probe = range.start;
        for row in range.clone() {
            let target = lag.apply(dates[row]);
            while probe < range.end && dates[probe] <= target {
                src = Some(probe);
                probe += 1;
            }
            matched[row] = match (src, max_staleness_days) {
                (Some(s), Some(window)) => {
                    ((target - dates[s]).num_days() <= window).then_some(s)
                }
                (s, _) => s,
            };
        }
    }

    let mut out = frame.clone();
    for name in columns {
        let source = frame.column(name)?;
        let mut cells = Vec::with_capacity(n);
        for row in 0..n {
            cells.push(matched[row].and_then(|s| source.get(s)));
        }
        let key = OffsetKey::new(name.clone(), lag);
        out = out.with_column(key.lagged_name(), Column::from_opts(cells))?;
    }
    Ok(out)
}

/// Collects deferred lag requests and materializes them in bulk.
///
/// Two-phase contract: request collection needs `&mut` and must finish
/// before materialization; materialization is a pure function of the frame
/// and the pending set. Duplicate requests collapse; a key already
/// materialized is not requested again.
#[derive(Debug, Default)]
pub struct OffsetRegistry {
    pending: IndexSet<OffsetKey>,
    materialized: IndexSet<OffsetKey>,
    join_passes: u64,
}

impl OffsetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a lag request and return the column name it will materialize
    /// under. Zero lags name the contemporaneous column and record nothing.
    pub fn request(&mut self, frame: &PanelFrame, key: OffsetKey) -> Result<String> {
        frame.column(&key.column)?;
        let name = key.lagged_name();
        if !key.lag.is_zero() && !self.materialized.contains(&key) {
            self.pending.insert(key);
        }
        Ok(name)
    }

    pub fn pending(&self) -> impl Iterator<Item = &OffsetKey> {
        self.pending.iter()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Count of as-of join passes performed so far (one per distinct lag
    /// per materialization).
    pub fn join_passes(&self) -> u64 {
        self.join_passes
    }

    /// Materialize every pending key onto `frame`, grouping keys by lag so
    /// each distinct lag costs exactly one join pass. Pending keys move to
    /// the materialized set; re-running with nothing pending returns the
    /// frame unchanged and performs zero passes.
    pub fn compute_offset_data(&mut self, frame: &PanelFrame) -> Result<PanelFrame> {
        let mut by_lag: IndexMap<Lag, Vec<String>> = IndexMap::new();
        for key in self.pending.iter() {
            by_lag.entry(key.lag).or_default().push(key.column.clone());
        }
        let mut out = frame.clone();
        for (lag, columns) in by_lag {
            out = join_with_offset(&out, lag, &columns, None)?;
            self.join_passes += 1;
        }
        let done: Vec<OffsetKey> = self.pending.drain(..).collect();
        self.materialized.extend(done);
        Ok(out)
    }
}

/// Shift the named columns so each cell holds the value known as of
/// `months` before the row date, replacing the originals in place (the
/// output keeps the original column names). Used for the global
/// accounting-availability lag.
pub fn shift_columns_in_place(
    frame: &PanelFrame,
    columns: &[String],
    months: u32,
) -> Result<PanelFrame> {
    if months == 0 {
        return Ok(frame.clone());
    }
    let lag = Lag::months(months);
    let joined = join_with_offset(frame, lag, columns, None)?;
    let mut out = frame.clone();
    for name in columns {
        let lagged = joined.column(&OffsetKey::new(name.clone(), lag).lagged_name())?;
        out = out.with_column(name.clone(), lagged.clone())?;
    }
    // Sanity: no derived lag columns leak into the output.
    debug_assert!(Arc::ptr_eq(out.keys(), frame.keys()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::frame::FrameBuilder;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn month_end_frame() -> PanelFrame {
        let mut b = FrameBuilder::new(["x"]);
        for m in 1..=12 {
            let date = crate::date::last_day_of_month(2020, m);
            b.push("A", date, &[Some(m as f64)]).unwrap();
        }
        b.finish().unwrap()
    }

    #[test]
    fn naming_rule() {
        assert_eq!(OffsetKey::new("mv", Lag::months(12)).lagged_name(), "mv_lag_12mo");
        assert_eq!(OffsetKey::new("x", Lag::days(30)).lagged_name(), "x_lag_30d");
        assert_eq!(OffsetKey::new("x", Lag::years(2)).lagged_name(), "x_lag_2yr");
        assert_eq!(OffsetKey::new("ta", Lag::months(0)).lagged_name(), "ta");
    }

    #[test]
    fn request_records_key_and_is_idempotent() {
        let f = month_end_frame();
        let mut reg = OffsetRegistry::new();
        let name = reg.request(&f, OffsetKey::new("x", Lag::months(12))).unwrap();
        assert_eq!(name, "x_lag_12mo");
        reg.request(&f, OffsetKey::new("x", Lag::months(12))).unwrap();
        assert_eq!(reg.pending_len(), 1);
    }

    #[test]
    fn zero_lag_requests_nothing() {
        let f = month_end_frame();
        let mut reg = OffsetRegistry::new();
        let name = reg.request(&f, OffsetKey::new("x", Lag::months(0))).unwrap();
        assert_eq!(name, "x");
        assert_eq!(reg.pending_len(), 0);
    }

    #[test]
    fn unknown_column_is_schema_error() {
        let f = month_end_frame();
        let mut reg = OffsetRegistry::new();
        assert!(matches!(
            reg.request(&f, OffsetKey::new("nope", Lag::months(1))),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn one_month_lag_hits_exact_prior_month_end() {
        let f = month_end_frame();
        let out = join_with_offset(&f, Lag::months(1), &["x".into()], None).unwrap();
        let lagged = out.column("x_lag_1mo").unwrap();
        assert_eq!(lagged.get(0), None, "first row has no prior data");
        for row in 1..12 {
            assert_eq!(lagged.get(row), Some(row as f64), "month {}", row + 1);
        }
    }

    #[test]
    fn asof_takes_most_recent_at_or_before_target() {
        let mut b = FrameBuilder::new(["x"]);
        b.push("A", d(2020, 6, 1), &[Some(1.0)]).unwrap();
        b.push("A", d(2020, 7, 1), &[Some(2.0)]).unwrap();
        b.push("A", d(2020, 7, 15), &[Some(3.0)]).unwrap();
        let f = b.finish().unwrap();
        // Row at 2020-07-15, lag 30d -> target 2020-06-15: rows at 06-01 and
        // 07-01 straddle it; the 06-01 value must be taken.
        let out = join_with_offset(&f, Lag::days(30), &["x".into()], None).unwrap();
        assert_eq!(out.column("x_lag_30d").unwrap().get(2), Some(1.0));
    }

    #[test]
    fn exact_target_date_matches_at_or_before() {
        let mut b = FrameBuilder::new(["x"]);
        b.push("A", d(2020, 1, 1), &[Some(1.0)]).unwrap();
        b.push("A", d(2020, 1, 11), &[Some(2.0)]).unwrap();
        let f = b.finish().unwrap();
        let out = join_with_offset(&f, Lag::days(10), &["x".into()], None).unwrap();
        // Target of the second row is exactly 2020-01-01.
        assert_eq!(out.column("x_lag_10d").unwrap().get(1), Some(1.0));
    }

    #[test]
    fn max_staleness_nulls_old_matches() {
        let mut b = FrameBuilder::new(["x"]);
        b.push("A", d(2020, 1, 1), &[Some(1.0)]).unwrap();
        b.push("A", d(2020, 3, 1), &[Some(2.0)]).unwrap();
        let f = b.finish().unwrap();
        let out = join_with_offset(&f, Lag::days(10), &["x".into()], Some(5)).unwrap();
        // Target 2020-02-20; nearest source is 2020-01-01, 50 days stale.
        assert_eq!(out.column("x_lag_10d").unwrap().get(1), None);
        let unbounded = join_with_offset(&f, Lag::days(10), &["x".into()], None).unwrap();
        assert_eq!(unbounded.column("x_lag_10d").unwrap().get(1), Some(1.0));
    }

    #[test]
    fn bulk_materialization_groups_by_lag() {
        let mut b = FrameBuilder::new(["mv", "ta"]);
        for m in 1..=12 {
            let date = crate::date::last_day_of_month(2020, m);
            b.push("A", date, &[Some(m as f64), Some(10.0 * m as f64)]).unwrap();
        }
        let f = b.finish().unwrap();
        let mut reg = OffsetRegistry::new();
        reg.request(&f, OffsetKey::new("mv", Lag::months(12))).unwrap();
        reg.request(&f, OffsetKey::new("ta", Lag::months(12))).unwrap();
        reg.request(&f, OffsetKey::new("ta", Lag::months(3))).unwrap();
        let out = reg.compute_offset_data(&f).unwrap();
        assert_eq!(reg.join_passes(), 2, "two distinct lags, two passes");
        assert!(out.has_column("mv_lag_12mo"));
        assert!(out.has_column("ta_lag_12mo"));
        assert!(out.has_column("ta_lag_3mo"));

        // Nothing pending: zero additional passes, frame unchanged.
        let again = reg.compute_offset_data(&out).unwrap();
        assert_eq!(reg.join_passes(), 2);
        assert!(again.bitwise_eq(&out));
    }

    #[test]
    fn empty_registry_is_a_no_op() {
        let f = month_end_frame();
        let mut reg = OffsetRegistry::new();
        let out = reg.compute_offset_data(&f).unwrap();
        assert_eq!(reg.join_passes(), 0);
        assert!(out.bitwise_eq(&f));
    }

    #[test]
    fn shift_in_place_replaces_values_without_new_columns() {
        let f = month_end_frame();
        let shifted = shift_columns_in_place(&f, &["x".into()], 1).unwrap();
        assert_eq!(
            shifted.column_names().collect::<Vec<_>>(),
            f.column_names().collect::<Vec<_>>()
        );
        assert_eq!(shifted.column("x").unwrap().get(0), None);
        assert_eq!(shifted.column("x").unwrap().get(3), Some(3.0));
    }
}
