//! Column mapping from user-supplied names to the canonical vocabulary.
//!
//! Input tables can use any naming convention; a [`ColumnSchema`] renames
//! them at ingestion. Factor definitions resolve their inputs against the
//! canonical names listed in [`CANONICAL_COLUMNS`].

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Canonical data-column vocabulary: `(name, meaning)`.
///
/// `id` and `date` are reserved key names and not part of this list.
pub const CANONICAL_COLUMNS: &[(&str, &str)] = &[
    ("mv", "market value"),
    ("ret", "periodic total return, fraction"),
    ("price", "share price"),
    ("shares", "split-adjusted shares outstanding"),
    ("ta", "total assets"),
    ("ibq", "quarterly income before extraordinary items"),
    ("gp", "gross profit"),
    ("cash", "cash and equivalents"),
    ("ca", "current assets"),
    ("cl", "current liabilities"),
    ("std", "debt in current liabilities"),
    ("ltd", "long-term debt"),
    ("txp", "taxes payable"),
    ("dp", "depreciation and amortization"),
    ("ppegt", "gross property, plant and equipment"),
    ("invt", "inventory"),
    ("ni", "net income"),
    ("tl", "total liabilities"),
    ("ceq", "common equity"),
    ("ffo", "funds from operations"),
];

/// Canonical columns sourced from accounting statements (as opposed to
/// market data). The optional global accounting-availability lag applies to
/// exactly these.
pub const ACCOUNTING_COLUMNS: &[&str] = &[
    "ta", "ibq", "gp", "cash", "ca", "cl", "std", "ltd", "txp", "dp", "ppegt", "invt", "ni",
    "tl", "ceq", "ffo",
];

pub fn is_canonical(name: &str) -> bool {
    CANONICAL_COLUMNS.iter().any(|(n, _)| *n == name)
}

/// Mapping from source column names to canonical internal names.
#[derive(Debug, Clone)]
pub struct ColumnSchema {
    /// Source name of the asset identifier column.
    pub id_col: String,
    /// Source name of the date column.
    pub date_col: String,
    /// `(source, canonical)` pairs for data columns.
    pub mappings: Vec<(String, String)>,
}

impl ColumnSchema {
    pub fn new(id_col: impl Into<String>, date_col: impl Into<String>) -> Self {
        ColumnSchema { id_col: id_col.into(), date_col: date_col.into(), mappings: Vec::new() }
    }

    /// Add one `source -> canonical` mapping (builder style).
    pub fn map(mut self, source: impl Into<String>, canonical: impl Into<String>) -> Self {
        self.mappings.push((source.into(), canonical.into()));
        self
    }

    /// Schema whose source names already equal the canonical names, with
    /// `id` / `date` key columns.
    pub fn identity<'a>(columns: impl IntoIterator<Item = &'a str>) -> Self {
        let mut schema = ColumnSchema::new("id", "date");
        for c in columns {
            schema = schema.map(c, c);
        }
        schema
    }

    /// Check structural invariants: mandatory key columns, unique canonical
    /// names, and no canonical name colliding with `id` or `date`.
    pub fn validate(&self) -> Result<()> {
        if self.id_col.is_empty() || self.date_col.is_empty() {
            return Err(Error::Schema("id_col and date_col are mandatory".into()));
        }
        let mut seen = HashSet::new();
        for (source, canonical) in &self.mappings {
            if source.is_empty() || canonical.is_empty() {
                return Err(Error::Schema("empty column name in mapping".into()));
            }
            if canonical == "id" || canonical == "date" {
                return Err(Error::Schema(format!(
                    "canonical name `{canonical}` collides with a key column"
                )));
            }
            if !seen.insert(canonical.as_str()) {
                return Err(Error::Schema(format!("duplicate canonical name `{canonical}`")));
            }
        }
        Ok(())
    }

    /// Load from a TOML or JSON file (decided by extension). Keys:
    /// `id_col`, `date_col`, and a `columns` table of
    /// `<canonical> = "<source>"` entries.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SchemaFile = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        };
        let mut schema = ColumnSchema::new(file.id_col, file.date_col);
        for (canonical, source) in file.columns {
            schema = schema.map(source, canonical);
        }
        schema.validate()?;
        Ok(schema)
    }

    /// Render as a TOML document (the same shape `from_path` reads).
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("id_col = {:?}\n", self.id_col));
        out.push_str(&format!("date_col = {:?}\n\n[columns]\n", self.date_col));
        for (source, canonical) in &self.mappings {
            out.push_str(&format!("{canonical} = {source:?}\n"));
        }
        out
    }
}

#[derive(Deserialize)]
struct SchemaFile {
    id_col: String,
    date_col: String,
    #[serde(default)]
    columns: IndexMap<String, String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_canonical_names_rejected() {
        let s = ColumnSchema::new("ticker", "dt")
            .map("WC02999", "ta")
            .map("ASSETS", "ta");
        assert!(matches!(s.validate(), Err(Error::Schema(_))));
    }

    #[test]
    fn canonical_collision_with_keys_rejected() {
        let s = ColumnSchema::new("ticker", "dt").map("X", "date");
        assert!(s.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = ColumnSchema::new("ticker", "dt").map("WC02999", "ta").map("MV", "mv");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.toml");
        std::fs::write(&path, s.to_toml()).unwrap();
        let loaded = ColumnSchema::from_path(&path).unwrap();
        assert_eq!(loaded.id_col, "ticker");
        assert_eq!(loaded.date_col, "dt");
        let mut mappings = loaded.mappings.clone();
        mappings.sort();
        assert_eq!(mappings, vec![
            ("MV".to_string(), "mv".to_string()),
            ("WC02999".to_string(), "ta".to_string()),
        ]);
    }

    #[test]
    fn vocabulary_covers_factor_inputs() {
        for name in ["mv", "ret", "shares", "ta", "ibq", "gp", "ffo"] {
            assert!(is_canonical(name), "{name} missing from vocabulary");
        }
        assert!(!is_canonical("id"));
    }
}
