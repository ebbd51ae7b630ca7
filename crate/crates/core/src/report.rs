//! Factor-file I/O and cross-implementation validation.
//!
//! A factor file is long-form CSV with the fixed header
//! `id,date,factor,value`, one row per `(id, date, factor)` key, the value
//! as shortest-round-trip decimal text and null as an empty field. Rows are
//! ordered by `(factor, id, date)`, so identical inputs always serialize to
//! identical bytes. Validation inner-joins two files on the full key and
//! reports a per-factor Pearson correlation, mirroring a two-column
//! factor/correlation table.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::PanelFrame;
use crate::ingest::format_float;
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorFileEntry {
    pub id: String,
    pub date: NaiveDate,
    pub factor: String,
    pub value: Option<f64>,
}

/// In-memory factor file, rows sorted by `(factor, id, date)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorFile {
    entries: Vec<FactorFileEntry>,
}

impl FactorFile {
    pub fn new(mut entries: Vec<FactorFileEntry>) -> Result<Self> {
        entries.sort_by(|a, b| {
            (&a.factor, &a.id, a.date).cmp(&(&b.factor, &b.id, b.date))
        });
        for pair in entries.windows(2) {
            if pair[0].factor == pair[1].factor
                && pair[0].id == pair[1].id
                && pair[0].date == pair[1].date
            {
                return Err(Error::Integrity(format!(
                    "duplicate factor file key ({}, {}, {})",
                    pair[0].id, pair[0].date, pair[0].factor
                )));
            }
        }
        Ok(FactorFile { entries })
    }

    /// Extract the named factor columns of a computed frame.
    pub fn from_frame(frame: &PanelFrame, factors: &[String]) -> Result<Self> {
        let mut entries = Vec::new();
        for factor in factors {
            let column = frame.column(factor)?;
            for row in 0..frame.n_rows() {
                entries.push(FactorFileEntry {
                    id: frame.id(row).to_string(),
                    date: frame.date(row),
                    factor: factor.clone(),
                    value: column.get(row),
                });
            }
        }
        FactorFile::new(entries)
    }

    pub fn entries(&self) -> &[FactorFileEntry] {
        &self.entries
    }

    /// Distinct factor names, ascending.
    pub fn factors(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.entries.iter().map(|e| e.factor.as_str()).collect();
        names.dedup();
        names
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,date,factor,value\n");
        for e in &self.entries {
            out.push_str(&e.id);
            out.push(',');
            let _ = write!(out, "{}", e.date.format("%Y-%m-%d"));
            out.push(',');
            out.push_str(&e.factor);
            out.push(',');
            if let Some(v) = e.value {
                out.push_str(&format_float(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_text(&text, &path.display().to_string())
    }

    pub fn from_csv_text(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "id,date,factor,value")) => {}
            _ => {
                return Err(Error::parse(
                    format!("{source}: line 1"),
                    "expected header `id,date,factor,value`",
                ))
            }
        }
        let mut entries = Vec::new();
        for (line_no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.splitn(4, ',');
            let loc = || format!("{source}: line {}", line_no + 1);
            let id = fields.next().unwrap_or("");
            let date_text = fields.next().unwrap_or("");
            let factor = fields
                .next()
                .ok_or_else(|| Error::parse(loc(), "missing factor field"))?;
            let value_text = fields
                .next()
                .ok_or_else(|| Error::parse(loc(), "missing value field"))?;
            if id.is_empty() || factor.is_empty() {
                return Err(Error::parse(loc(), "empty id or factor"));
            }
            let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d")
                .map_err(|e| Error::parse(loc(), format!("bad date `{date_text}`: {e}")))?;
            let value = if value_text.is_empty() {
                None
            } else {
                Some(
                    value_text
                        .parse::<f64>()
                        .map_err(|e| Error::parse(loc(), format!("bad value `{value_text}`: {e}")))?,
                )
            };
            entries.push(FactorFileEntry {
                id: id.to_string(),
                date,
                factor: factor.to_string(),
                value,
            });
        }
        FactorFile::new(entries)
    }
}

/// Per-factor comparison of two factor files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorComparison {
    pub factor: String,
    /// `None` when fewer than two joined pairs survive or either side is
    /// constant.
    pub pearson: Option<f64>,
    /// Joined pairs with both sides non-null (the n behind `pearson`).
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub comparisons: Vec<FactorComparison>,
    /// Factors present only in the left ("ours") file.
    pub only_ours: Vec<String>,
    /// Factors present only in the reference file.
    pub only_reference: Vec<String>,
}

impl ValidationReport {
    /// Smallest correlation across compared factors, when every comparison
    /// produced one.
    pub fn min_pearson(&self) -> Option<f64> {
        let mut min: Option<f64> = None;
        for c in &self.comparisons {
            let r = c.pearson?;
            min = Some(match min {
                Some(m) => m.min(r),
                None => r,
            });
        }
        min
    }

    /// Two-column text table (factor, Pearson correlation).
    pub fn table(&self) -> String {
        let width = self
            .comparisons
            .iter()
            .map(|c| c.factor.len())
            .chain(["Factor".len()])
            .max()
            .unwrap_or(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {}", "Factor", "Pearson Correlation");
        let _ = writeln!(out, "{:-<width$}  {:-<19}", "", "");
        for c in &self.comparisons {
            match c.pearson {
                Some(r) => {
                    let _ = writeln!(out, "{:<width$}  {:.4}", c.factor, r);
                }
                None => {
                    let _ = writeln!(out, "{:<width$}  {}", c.factor, "n/a");
                }
            }
        }
        for name in &self.only_ours {
            let _ = writeln!(out, "{name:<width$}  (only in ours)");
        }
        for name in &self.only_reference {
            let _ = writeln!(out, "{name:<width$}  (only in reference)");
        }
        out
    }
}

/// Inner-join two factor files on `(id, date, factor)`, dropping pairs with
/// a null on either side, and report the per-factor Pearson correlation and
/// overlap count. Factors present in only one file are listed uncompared.
pub fn validate(ours: &FactorFile, reference: &FactorFile) -> ValidationReport {
    let our_factors = ours.factors();
    let ref_factors = reference.factors();

    let mut comparisons = Vec::new();
    let mut only_ours = Vec::new();
    let mut only_reference: Vec<String> =
        ref_factors.iter().filter(|f| !our_factors.contains(f)).map(|f| f.to_string()).collect();
    only_reference.sort();

    for factor in &our_factors {
        if !ref_factors.contains(factor) {
            only_ours.push(factor.to_string());
            continue;
        }
        // Both files are sorted by (factor, id, date): merge within the
        // factor's run.
        let a: Vec<&FactorFileEntry> =
            ours.entries.iter().filter(|e| e.factor == *factor).collect();
        let b: Vec<&FactorFileEntry> =
            reference.entries.iter().filter(|e| e.factor == *factor).collect();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.len() && j < b.len() {
            let ka = (&a[i].id, a[i].date);
            let kb = (&b[j].id, b[j].date);
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if let (Some(x), Some(y)) = (a[i].value, b[j].value) {
                        pairs.push((x, y));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        comparisons.push(FactorComparison {
            factor: factor.to_string(),
            pearson: pearson(pairs.iter().copied()),
            overlap: pairs.len(),
        });
    }

    ValidationReport { comparisons, only_ours, only_reference }
}
