//! The panel data model: an immutable columnar table of
//! `(asset id, date, named numeric columns)`.
//!
//! Invariants established at construction and preserved by every operation:
//!
//! - rows are sorted lexicographically by `(id, date)`;
//! - `(id, date)` pairs are unique;
//! - every column has exactly one (possibly null) cell per row.
//!
//! Frames are immutable: operations return new frames, and the key storage
//! plus untouched columns are shared via `Arc`, so deriving a frame is cheap.
//! A `PanelFrame` is `Send + Sync` and safe to read from multiple threads.

use std::ops::Range;
use std::sync::Arc;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::column::Column;
use crate::date::{period_end, Frequency};
use crate::error::{Error, Result};

/// Direction of a missing-data fill. Fills never cross an asset boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillStrategy {
    Forward,
    Backward,
    None,
}

/// Per-period aggregation used by [`PanelFrame::resample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Latest non-null observation at-or-before the period end.
    Last,
    /// Sum of non-null observations; null when the period has none.
    Sum,
    /// Mean of non-null observations; null when the period has none.
    Mean,
}

/// Sorted, deduplicated `(id, date)` key storage, shared across frames
/// derived from the same ingestion.
#[derive(Debug)]
pub struct PanelKeys {
    /// Unique asset ids, ascending.
    assets: Vec<String>,
    /// Row range of each asset; `offsets[a]..offsets[a + 1]`.
    offsets: Vec<usize>,
    /// Date per row, ascending within each asset.
    dates: Vec<NaiveDate>,
    /// Asset index per row.
    row_asset: Vec<u32>,
}

impl PanelKeys {
    fn from_sorted(assets: Vec<String>, offsets: Vec<usize>, dates: Vec<NaiveDate>) -> Self {
        let mut row_asset = Vec::with_capacity(dates.len());
        for a in 0..assets.len() {
            row_asset.extend(std::iter::repeat(a as u32).take(offsets[a + 1] - offsets[a]));
        }
        PanelKeys { assets, offsets, dates, row_asset }
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn asset_name(&self, asset: usize) -> &str {
        &self.assets[asset]
    }

    pub fn asset_range(&self, asset: usize) -> Range<usize> {
        self.offsets[asset]..self.offsets[asset + 1]
    }

    pub fn row_id(&self, row: usize) -> &str {
        &self.assets[self.row_asset[row] as usize]
    }

    pub fn row_asset(&self, row: usize) -> usize {
        self.row_asset[row] as usize
    }

    pub fn row_date(&self, row: usize) -> NaiveDate {
        self.dates[row]
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn find_asset(&self, id: &str) -> Option<usize> {
        self.assets.binary_search_by(|a| a.as_str().cmp(id)).ok()
    }

    /// Row index of `(id, date)` when present.
    pub fn find_row(&self, id: &str, date: NaiveDate) -> Option<usize> {
        let asset = self.find_asset(id)?;
        let range = self.asset_range(asset);
        self.dates[range.clone()]
            .binary_search(&date)
            .ok()
            .map(|i| range.start + i)
    }
}

/// Immutable columnar panel sorted by `(id, date)`.
#[derive(Debug, Clone)]
pub struct PanelFrame {
    keys: Arc<PanelKeys>,
    columns: IndexMap<String, Arc<Column>>,
}

impl PanelFrame {
    pub(crate) fn from_parts(keys: Arc<PanelKeys>, columns: IndexMap<String, Arc<Column>>) -> Self {
        debug_assert!(columns.values().all(|c| c.len() == keys.n_rows()));
        PanelFrame { keys, columns }
    }

    pub fn n_rows(&self) -> usize {
        self.keys.n_rows()
    }

    pub fn n_assets(&self) -> usize {
        self.keys.n_assets()
    }

    pub fn keys(&self) -> &Arc<PanelKeys> {
        &self.keys
    }

    /// Column names in insertion order.
    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .get(name)
            .map(|c| c.as_ref())
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found")))
    }

    pub fn id(&self, row: usize) -> &str {
        self.keys.row_id(row)
    }

    pub fn date(&self, row: usize) -> NaiveDate {
        self.keys.row_date(row)
    }

    /// New frame with `column` added (or replaced, when the name exists).
    pub fn with_column(&self, name: impl Into<String>, column: Column) -> Result<PanelFrame> {
        if column.len() != self.n_rows() {
            return Err(Error::Integrity(format!(
                "column length {} does not match row count {}",
                column.len(),
                self.n_rows()
            )));
        }
        let mut columns = self.columns.clone();
        columns.insert(name.into(), Arc::new(column));
        Ok(PanelFrame::from_parts(Arc::clone(&self.keys), columns))
    }

    /// New frame restricted to the named columns (keys always carry over).
    pub fn select(&self, names: &[&str]) -> Result<PanelFrame> {
        let mut columns = IndexMap::new();
        for &name in names {
            let col = self
                .columns
                .get(name)
                .ok_or_else(|| Error::Schema(format!("column `{name}` not found")))?;
            columns.insert(name.to_string(), Arc::clone(col));
        }
        Ok(PanelFrame::from_parts(Arc::clone(&self.keys), columns))
    }

    /// Replace nulls in the named columns with the nearest prior (forward)
    /// or nearest later (backward) non-null value of the same asset.
    /// Leading (resp. trailing) nulls stay null; fills never cross assets.
    pub fn fill_missing(&self, columns: &[&str], strategy: FillStrategy) -> Result<PanelFrame> {
        for &name in columns {
            self.column(name)?;
        }
        if matches!(strategy, FillStrategy::None) {
            return Ok(self.clone());
        }
        let mut out = self.columns.clone();
        for &name in columns {
            let src = self.column(name)?;
            let mut data: Vec<f64> = src.raw().to_vec();
            for asset in 0..self.n_assets() {
                let range = self.keys.asset_range(asset);
                match strategy {
                    FillStrategy::Forward => {
                        let mut last = f64::NAN;
                        for cell in &mut data[range] {
                            if cell.is_nan() {
                                *cell = last;
                            } else {
                                last = *cell;
                            }
                        }
                    }
                    FillStrategy::Backward => {
                        let mut next = f64::NAN;
                        for cell in data[range].iter_mut().rev() {
                            if cell.is_nan() {
                                *cell = next;
                            } else {
                                next = *cell;
                            }
                        }
                    }
                    FillStrategy::None => unreachable!(),
                }
            }
            out.insert(name.to_string(), Arc::new(Column::from_values(data)));
        }
        Ok(PanelFrame::from_parts(Arc::clone(&self.keys), out))
    }

    /// Collapse to one row per `(asset, period)` at frequency `freq`. The
    /// period label is the last calendar day of the period; `agg` decides
    /// how cells within a period combine.
    pub fn resample(&self, freq: Frequency, agg: Aggregation) -> Result<PanelFrame> {
        if self.n_rows() == 0 {
            return Err(Error::Param("resample requires a non-empty frame".into()));
        }
        let names: Vec<String> = self.columns.keys().cloned().collect();
        let mut builder = FrameBuilder::new(names.iter().map(|s| s.as_str()));
        let raw: Vec<&Column> = names.iter().map(|n| self.column(n).unwrap()).collect();
        let mut cell_buf: Vec<Option<f64>> = vec![None; names.len()];

        for asset in 0..self.n_assets() {
            let range = self.keys.asset_range(asset);
            let id = self.keys.asset_name(asset);
            let mut start = range.start;
            while start < range.end {
                let label = period_end(self.keys.row_date(start), freq);
                let mut end = start + 1;
                while end < range.end && period_end(self.keys.row_date(end), freq) == label {
                    end += 1;
                }
                for (slot, col) in cell_buf.iter_mut().zip(&raw) {
                    *slot = aggregate_cells(col, start..end, agg);
                }
                builder.push(id, label, &cell_buf)?;
                start = end;
            }
        }
        builder.finish()
    }

    /// Exact equality of keys, column names, and cell bits (nulls included).
    pub fn bitwise_eq(&self, other: &PanelFrame) -> bool {
        if self.n_rows() != other.n_rows()
            || self.keys.assets != other.keys.assets
            || self.keys.dates != other.keys.dates
        {
            return false;
        }
        if !self.columns.keys().eq(other.columns.keys()) {
            return false;
        }
        self.columns
            .iter()
            .all(|(name, col)| other.columns[name].bitwise_eq(col))
    }
}

fn aggregate_cells(col: &Column, rows: Range<usize>, agg: Aggregation) -> Option<f64> {
    match agg {
        Aggregation::Last => rows.rev().find_map(|r| col.get(r)),
        Aggregation::Sum => {
            let mut sum = 0.0;
            let mut seen = false;
            for r in rows {
                if let Some(v) = col.get(r) {
                    sum += v;
                    seen = true;
                }
            }
            seen.then_some(sum)
        }
        Aggregation::Mean => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for r in rows {
                if let Some(v) = col.get(r) {
                    sum += v;
                    n += 1;
                }
            }
            (n > 0).then(|| sum / n as f64)
        }
    }
}

/// Row-at-a-time construction of a [`PanelFrame`]. Rows may arrive in any
/// order; `finish` sorts by `(id, date)` and rejects duplicate keys.
pub struct FrameBuilder {
    column_names: Vec<String>,
    rows: Vec<(String, NaiveDate, Vec<f64>)>,
}

impl FrameBuilder {
    pub fn new<'a>(column_names: impl IntoIterator<Item = &'a str>) -> Self {
        FrameBuilder {
            column_names: column_names.into_iter().map(String::from).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        id: impl Into<String>,
        date: NaiveDate,
        values: &[Option<f64>],
    ) -> Result<()> {
        if values.len() != self.column_names.len() {
            return Err(Error::Integrity(format!(
                "row has {} values, frame has {} columns",
                values.len(),
                self.column_names.len()
            )));
        }
        self.rows.push((
            id.into(),
            date,
            values.iter().map(|v| crate::column::encode_opt(*v)).collect(),
        ));
        Ok(())
    }

    pub fn finish(mut self) -> Result<PanelFrame> {
        self.rows
            .sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for pair in self.rows.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::Integrity(format!(
                    "duplicate (id, date) key: ({}, {})",
                    pair[0].0, pair[0].1
                )));
            }
        }

        let n_rows = self.rows.len();
        let mut assets: Vec<String> = Vec::new();
        let mut offsets: Vec<usize> = Vec::new();
        let mut dates: Vec<NaiveDate> = Vec::with_capacity(n_rows);
        for (i, (id, date, _)) in self.rows.iter().enumerate() {
            if assets.last().map(|a| a.as_str()) != Some(id.as_str()) {
                assets.push(id.clone());
                offsets.push(i);
            }
            dates.push(*date);
        }
        offsets.push(n_rows);
        let keys = Arc::new(PanelKeys::from_sorted(assets, offsets, dates));

        let mut columns = IndexMap::new();
        for (c, name) in self.column_names.iter().enumerate() {
            let data: Vec<f64> = self.rows.iter().map(|(_, _, v)| v[c]).collect();
            columns.insert(name.clone(), Arc::new(Column::from_values(data)));
        }
        Ok(PanelFrame::from_parts(keys, columns))
    }
}
