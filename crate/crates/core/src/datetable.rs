//! Date-keyed auxiliary tables (index levels, benchmark returns) passed to
//! advanced factors alongside the panel.

use std::path::Path;

use chrono::NaiveDate;
use indexmap::IndexMap;

use crate::column::Column;
use crate::error::{Error, Result};

/// A small table keyed by date only: one row per date, named numeric
/// columns. Dates are unique and ascending.
#[derive(Debug, Clone)]
pub struct DateTable {
    dates: Vec<NaiveDate>,
    columns: IndexMap<String, Column>,
}

impl DateTable {
    pub fn new(dates: Vec<NaiveDate>, columns: IndexMap<String, Column>) -> Result<Self> {
        for w in dates.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Integrity("date table dates must be strictly ascending".into()));
            }
        }
        for (name, col) in &columns {
            if col.len() != dates.len() {
                return Err(Error::Integrity(format!(
                    "date table column `{name}` length {} != {} dates",
                    col.len(),
                    dates.len()
                )));
            }
        }
        Ok(DateTable { dates, columns })
    }

    /// Read from CSV with a `date` column (ISO 8601) plus numeric columns.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let headers = csv
            .headers()
            .map_err(|e| Error::parse("header row", e.to_string()))?
            .clone();
        let date_idx = headers
            .iter()
            .position(|h| h == "date")
            .ok_or_else(|| Error::Schema("date table needs a `date` column".into()))?;
        let value_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect();

        let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
        for (row_no, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::parse(format!("row {row_no}"), e.to_string()))?;
            let text = record.get(date_idx).unwrap_or("").trim();
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|e| {
                Error::parse(format!("row {row_no}"), format!("bad date `{text}`: {e}"))
            })?;
            let mut cells = Vec::with_capacity(value_cols.len());
            for (idx, name) in &value_cols {
                let cell = record.get(*idx).unwrap_or("").trim();
                cells.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|e| {
                        Error::parse(format!("row {row_no}"), format!("bad `{name}`: {e}"))
                    })?)
                });
            }
            rows.push((date, cells));
        }
        rows.sort_by_key(|(d, _)| *d);
        let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
        let mut columns = IndexMap::new();
        for (c, (_, name)) in value_cols.iter().enumerate() {
            columns.insert(
                name.clone(),
                rows.iter().map(|(_, cells)| cells[c]).collect::<Column>(),
            );
        }
        DateTable::new(dates, columns)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("date");
        for name in self.columns.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, date) in self.dates.iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for col in self.columns.values() {
                out.push(',');
                if let Some(v) = col.get(i) {
                    out.push_str(&crate::ingest::format_float(v));
                }
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Cell of `column` at the most recent date at-or-before `date`; `None`
    /// when no such row exists or the matched cell is null.
    pub fn asof(&self, column: &str, date: NaiveDate) -> Option<f64> {
        let col = self.columns.get(column)?;
        let idx = match self.dates.binary_search(&date) {
            Ok(i) => i,
            Err(0) => return None,
            Err(i) => i - 1,
        };
        col.get(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn asof_lookup() {
        let table = DateTable::new(
            vec![d(2020, 1, 31), d(2020, 2, 29)],
            IndexMap::from([("ret".to_string(), Column::from_opts(vec![Some(0.01), None]))]),
        )
        .unwrap();
        assert_eq!(table.asof("ret", d(2020, 1, 31)), Some(0.01));
        assert_eq!(table.asof("ret", d(2020, 2, 10)), Some(0.01));
        assert_eq!(table.asof("ret", d(2020, 2, 29)), None, "matched cell is null");
        assert_eq!(table.asof("ret", d(2019, 12, 31)), None, "before first row");
        assert_eq!(table.asof("nope", d(2020, 1, 31)), None);
    }

    #[test]
    fn csv_round_trip() {
        let table = DateTable::new(
            vec![d(2020, 1, 31), d(2020, 2, 29)],
            IndexMap::from([
                ("ret".to_string(), Column::from_opts(vec![Some(0.013), None])),
                ("total_mv".to_string(), Column::from_opts(vec![Some(1e7), Some(1.01e7)])),
            ]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.csv");
        table.write_csv(&path).unwrap();
        let loaded = DateTable::from_csv(&path).unwrap();
        assert_eq!(loaded.dates(), table.dates());
        assert_eq!(loaded.asof("ret", d(2020, 1, 31)), Some(0.013));
        assert_eq!(loaded.asof("total_mv", d(2020, 2, 29)), Some(1.01e7));
    }
}
