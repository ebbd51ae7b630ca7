//! Panel ingestion: delimited text with a header row, and a compact
//! columnar binary format for round-tripping frames without re-parsing.
//!
//! CSV cells: dates are ISO 8601 (`YYYY-MM-DD`); numeric cells are IEEE-754
//! doubles, with the empty string meaning null. Binary files store canonical
//! column names, so no schema is needed to read them back.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;

use crate::column::Column;
use crate::error::{Error, Result};
use crate::frame::{FrameBuilder, PanelFrame};
use crate::schema::ColumnSchema;

const BINARY_MAGIC: &[u8; 4] = b"PFB1";

/// Read a comma-delimited panel, applying `schema` to rename columns to
/// canonical names. Rows are sorted by `(id, date)`; duplicate keys are
/// rejected.
pub fn read_csv_panel(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<PanelFrame> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_panel_from(file, schema)
}

/// As [`read_csv_panel`], from any reader.
pub fn read_csv_panel_from(reader: impl Read, schema: &ColumnSchema) -> Result<PanelFrame> {
    schema.validate()?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::parse("header row", e.to_string()))?
        .clone();

    let locate = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("input is missing schema column `{name}`")))
    };
    let id_idx = locate(&schema.id_col)?;
    let date_idx = locate(&schema.date_col)?;
    let mut data_idx = Vec::with_capacity(schema.mappings.len());
    for (source, canonical) in &schema.mappings {
        data_idx.push((locate(source)?, canonical.as_str()));
    }

    let mut builder = FrameBuilder::new(data_idx.iter().map(|(_, c)| *c));
    let mut values: Vec<Option<f64>> = vec![None; data_idx.len()];
    for (row_no, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::parse(format!("row {row_no}"), e.to_string()))?;
        let id = record.get(id_idx).unwrap_or("").trim();
        if id.is_empty() {
            return Err(Error::parse(format!("row {row_no}"), "empty asset id"));
        }
        let date_text = record.get(date_idx).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|e| {
            Error::parse(format!("row {row_no}"), format!("bad date `{date_text}`: {e}"))
        })?;
        for (slot, (idx, canonical)) in values.iter_mut().zip(&data_idx) {
            let cell = record.get(*idx).unwrap_or("").trim();
            *slot = if cell.is_empty() {
                None
            } else {
                let v: f64 = cell.parse().map_err(|e| {
                    Error::parse(
                        format!("row {row_no}"),
                        format!("bad value `{cell}` in column `{canonical}`: {e}"),
                    )
                })?;
                v.is_finite().then_some(v)
            };
        }
        builder.push(id, date, &values)?;
    }
    builder.finish()
}

/// Write a frame as CSV with canonical headers (`id,date,<columns...>`).
pub fn write_csv_panel(frame: &PanelFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_panel_to(frame, file)
}

pub fn write_csv_panel_to(frame: &PanelFrame, writer: impl Write) -> Result<()> {
    let mut out = std::io::BufWriter::new(writer);
    let names: Vec<&str> = frame.column_names().collect();
    let mut line = String::from("id,date");
    for n in &names {
        line.push(',');
        line.push_str(n);
    }
    line.push('\n');
    out.write_all(line.as_bytes()).map_err(io_err)?;
    let cols: Vec<&Column> = names.iter().map(|n| frame.column(n).unwrap()).collect();
    for row in 0..frame.n_rows() {
        line.clear();
        line.push_str(frame.id(row));
        line.push(',');
        line.push_str(&frame.date(row).format("%Y-%m-%d").to_string());
        for col in &cols {
            line.push(',');
            if let Some(v) = col.get(row) {
                line.push_str(&format_float(v));
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Shortest decimal text that round-trips the exact f64 value.
pub fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    // `Display` for whole floats omits the fraction; keep it so the column
    // reads unambiguously as a float.
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<writer>", e)
}

/// Write the columnar binary representation.
pub fn write_binary_panel(frame: &PanelFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let n_rows = frame.n_rows() as u64;
    let names: Vec<&str> = frame.column_names().collect();

    w.write_all(BINARY_MAGIC).map_err(io_err)?;
    w.write_all(&n_rows.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(frame.n_assets() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(names.len() as u32).to_le_bytes()).map_err(io_err)?;
    for a in 0..frame.n_assets() {
        write_str(&mut w, frame.keys().asset_name(a))?;
        let range = frame.keys().asset_range(a);
        w.write_all(&(range.start as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(range.end as u64).to_le_bytes()).map_err(io_err)?;
    }
    for row in 0..frame.n_rows() {
        let days = frame.date(row).num_days_from_ce();
        w.write_all(&days.to_le_bytes()).map_err(io_err)?;
    }
    for name in &names {
        write_str(&mut w, name)?;
        for &cell in frame.column(name).unwrap().raw() {
            w.write_all(&cell.to_bits().to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

/// Read a frame written by [`write_binary_panel`].
pub fn read_binary_panel(path: impl AsRef<Path>) -> Result<PanelFrame> {
    let path = path.as_ref();
    let loc = || path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, &loc)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::parse(loc(), "not a panel binary file (bad magic)"));
    }
    let n_rows = read_u64(&mut r, &loc)? as usize;
    let n_assets = read_u32(&mut r, &loc)? as usize;
    let n_cols = read_u32(&mut r, &loc)? as usize;

    let mut asset_rows: Vec<(String, u64, u64)> = Vec::with_capacity(n_assets);
    for _ in 0..n_assets {
        let name = read_str(&mut r, &loc)?;
        let start = read_u64(&mut r, &loc)?;
        let end = read_u64(&mut r, &loc)?;
        asset_rows.push((name, start, end));
    }
    let mut dates = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let days = read_i32(&mut r, &loc)?;
        let date = NaiveDate::from_num_days_from_ce_opt(days)
            .ok_or_else(|| Error::parse(loc(), "date out of range"))?;
        dates.push(date);
    }
    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        let name = read_str(&mut r, &loc)?;
        let mut data = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let mut buf = [0u8; 8];
            read_exact(&mut r, &mut buf, &loc)?;
            data.push(f64::from_bits(u64::from_le_bytes(buf)));
        }
        columns.push((name, data));
    }

    // Rebuild through the builder so sortedness and uniqueness are
    // re-validated rather than trusted.
    let names: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
    let mut builder = FrameBuilder::new(names.iter().map(|s| s.as_str()));
    let mut values: Vec<Option<f64>> = vec![None; n_cols];
    for (id, start, end) in &asset_rows {
        for row in *start as usize..*end as usize {
            if row >= n_rows {
                return Err(Error::parse(loc(), "asset row range out of bounds"));
            }
            for (slot, (_, data)) in values.iter_mut().zip(&columns) {
                let v = data[row];
                *slot = if v.is_nan() { None } else { Some(v) };
            }
            builder.push(id.as_str(), dates[row], &values)?;
        }
    }
    builder.finish()
}

/// Load a panel by extension: `.csv` requires a schema, anything else is
/// treated as the binary format (which carries canonical names already).
pub fn load_panel(path: impl AsRef<Path>, schema: Option<&ColumnSchema>) -> Result<PanelFrame> {
    let path = path.as_ref();
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let schema = schema.ok_or_else(|| {
            Error::Schema("a column schema is required to read delimited text".into())
        })?;
        read_csv_panel(path, schema)
    } else {
        read_binary_panel(path)
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(s.as_bytes()).map_err(io_err)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], loc: &impl Fn() -> String) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::parse(loc(), format!("truncated file: {e}")))
}

fn read_u32(r: &mut impl Read, loc: &impl Fn() -> String) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, loc)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_i32(r: &mut impl Read, loc: &impl Fn() -> String) -> Result<i32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, loc)?;
    Ok(i32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read, loc: &impl Fn() -> String) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, loc)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read, loc: &impl Fn() -> String) -> Result<String> {
    let len = read_u32(r, loc)? as usize;
    if len > 1 << 20 {
        return Err(Error::parse(loc(), "string length out of range"));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf, loc)?;
    String::from_utf8(buf).map_err(|e| Error::parse(loc(), e.to_string()))
}

/// Build an in-memory frame directly from `(id, date, cells)` tuples using
/// canonical column names. Convenience for tests and embedding.
pub fn frame_from_rows<'a>(
    columns: &[&str],
    rows: impl IntoIterator<Item = (&'a str, NaiveDate, Vec<Option<f64>>)>,
) -> Result<PanelFrame> {
    let mut builder = FrameBuilder::new(columns.iter().copied());
    for (id, date, values) in rows {
        builder.push(id, date, &values)?;
    }
    builder.finish()
}

/// Column name/value view of one row; handy for diagnostics.
pub fn row_cells(frame: &PanelFrame, row: usize) -> IndexMap<String, Option<f64>> {
    frame
        .column_names()
        .map(|n| (n.to_string(), frame.column(n).unwrap().get(row)))
        .collect()
}
