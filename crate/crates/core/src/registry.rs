//! Factor definitions, the registry, and the compute orchestrator.
//!
//! A factor is registered once (startup phase, `&mut` access) and the
//! registry is read-only afterwards. [`FactorRegistry::compute`] batches
//! the lag requests of every runnable factor before materializing, so
//! lagged columns shared across factors are joined once per distinct lag;
//! the pass count is reported for instrumentation. Factors whose data
//! requirements are unmet are skipped with a structured warning, never
//! aborting the batch; unknown factor *names* are hard errors.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::Serialize;

use crate::column::Column;
use crate::datetable::DateTable;
use crate::error::{Error, Result};
use crate::expr::{evaluate, Expr, ExprCtx};
use crate::frame::{PanelFrame, PanelKeys};
use crate::lag::{OffsetKey, OffsetRegistry};
use crate::schema;
use crate::stats;

/// Named scalar parameters. Whole-number values double as counts (lags).
pub type Params = BTreeMap<String, f64>;

/// Named auxiliary tables passed through to advanced factors.
pub type Extras = IndexMap<String, DateTable>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Simple,
    Advanced,
}

/// Optional output post-processing. When both stages are configured,
/// winsorization runs before z-scoring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PostProcess {
    pub winsorize: Option<(f64, f64)>,
    pub zscore: bool,
}

/// Registry entry describing one factor.
#[derive(Debug, Clone)]
pub struct FactorDef {
    pub name: String,
    pub kind: FactorKind,
    /// Canonical columns the factor reads.
    pub requires: Vec<String>,
    /// Parameter defaults; call-site overrides must name keys listed here.
    pub defaults: Params,
    pub postprocess: PostProcess,
}

impl FactorDef {
    pub fn new(name: impl Into<String>, kind: FactorKind) -> Self {
        FactorDef {
            name: name.into(),
            kind,
            requires: Vec::new(),
            defaults: Params::new(),
            postprocess: PostProcess::default(),
        }
    }

    pub fn requires<'a>(mut self, columns: impl IntoIterator<Item = &'a str>) -> Self {
        self.requires = columns.into_iter().map(String::from).collect();
        self
    }

    pub fn default_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.defaults.insert(name.into(), value);
        self
    }

    pub fn postprocess(mut self, postprocess: PostProcess) -> Self {
        self.postprocess = postprocess;
        self
    }
}

/// Body of a factor that cannot be written as a single row-wise expression.
/// It receives the full materialized frame and must return a valid
/// [`FactorResult`].
pub trait AdvancedFactor: Send + Sync {
    /// Lag columns the body will read; collected and materialized together
    /// with the rest of the batch.
    fn lag_requests(&self, _params: &Params) -> Vec<OffsetKey> {
        Vec::new()
    }

    /// Effective required columns, given this body's configuration.
    fn required_columns(&self, base: &[String]) -> Vec<String> {
        base.to_vec()
    }

    /// Names of missing non-column inputs (auxiliary tables, coefficient
    /// sections); non-empty means the factor cannot run.
    fn missing_inputs(&self, _extras: &Extras) -> Vec<String> {
        Vec::new()
    }

    fn compute(&self, frame: &PanelFrame, params: &Params, extras: &Extras)
        -> Result<FactorResult>;
}

type SimpleBody = Box<dyn Fn(&mut ExprCtx, &Params) -> Result<Expr> + Send + Sync>;

pub enum FactorBody {
    Simple(SimpleBody),
    Advanced(Box<dyn AdvancedFactor>),
}

impl FactorBody {
    pub fn simple(
        f: impl Fn(&mut ExprCtx, &Params) -> Result<Expr> + Send + Sync + 'static,
    ) -> Self {
        FactorBody::Simple(Box::new(f))
    }

    pub fn advanced(body: impl AdvancedFactor + 'static) -> Self {
        FactorBody::Advanced(Box::new(body))
    }

    fn kind(&self) -> FactorKind {
        match self {
            FactorBody::Simple(_) => FactorKind::Simple,
            FactorBody::Advanced(_) => FactorKind::Advanced,
        }
    }
}

#[derive(Debug)]
enum ResultKeys {
    Aligned(Arc<PanelKeys>),
    Owned { ids: Vec<String>, dates: Vec<NaiveDate> },
}

/// A computed factor: exactly `(id, date, value)`, keys unique and sorted.
#[derive(Debug)]
pub struct FactorResult {
    name: String,
    keys: ResultKeys,
    values: Column,
}

impl FactorResult {
    /// Result sharing a frame's key storage (the fast path for factors
    /// computed row-aligned with the panel).
    pub fn aligned(name: impl Into<String>, keys: Arc<PanelKeys>, values: Column) -> Result<Self> {
        if values.len() != keys.n_rows() {
            return Err(Error::Contract(format!(
                "factor values length {} != {} panel rows",
                values.len(),
                keys.n_rows()
            )));
        }
        Ok(FactorResult { name: name.into(), keys: ResultKeys::Aligned(keys), values })
    }

    /// Result from raw rows. Rows are sorted by `(id, date)`; duplicate
    /// keys violate the contract.
    pub fn from_rows(
        name: impl Into<String>,
        mut rows: Vec<(String, NaiveDate, Option<f64>)>,
    ) -> Result<Self> {
        rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::Contract(format!(
                    "duplicate (id, date) key ({}, {}) in factor result",
                    pair[0].0, pair[0].1
                )));
            }
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut dates = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for (id, date, value) in rows {
            ids.push(id);
            dates.push(date);
            values.push(value);
        }
        Ok(FactorResult {
            name: name.into(),
            keys: ResultKeys::Owned { ids, dates },
            values: Column::from_opts(values),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, row: usize) -> &str {
        match &self.keys {
            ResultKeys::Aligned(k) => k.row_id(row),
            ResultKeys::Owned { ids, .. } => &ids[row],
        }
    }

    pub fn date(&self, row: usize) -> NaiveDate {
        match &self.keys {
            ResultKeys::Aligned(k) => k.row_date(row),
            ResultKeys::Owned { dates, .. } => dates[row],
        }
    }

    pub fn values(&self) -> &Column {
        &self.values
    }

    /// Value at a specific `(id, date)` key, if the key is present and the
    /// cell is non-null.
    pub fn value_for(&self, id: &str, date: NaiveDate) -> Option<f64> {
        match &self.keys {
            ResultKeys::Aligned(k) => k.find_row(id, date).and_then(|r| self.values.get(r)),
            ResultKeys::Owned { ids, dates } => {
                let mut lo = 0usize;
                let mut hi = ids.len();
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if (ids[mid].as_str(), dates[mid]) < (id, date) {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                (lo < ids.len() && ids[lo] == id && dates[lo] == date)
                    .then(|| self.values.get(lo))
                    .flatten()
            }
        }
    }

    fn dates_vec(&self) -> Vec<NaiveDate> {
        match &self.keys {
            ResultKeys::Aligned(k) => k.dates().to_vec(),
            ResultKeys::Owned { dates, .. } => dates.clone(),
        }
    }

    fn with_values(self, values: Column) -> Self {
        FactorResult { name: self.name, keys: self.keys, values }
    }
}

/// Left-join a factor result onto `frame` keyed by `(id, date)`: the output
/// has exactly the frame's rows, plus one column named after the factor.
pub fn join_factor(frame: &PanelFrame, result: &FactorResult) -> Result<PanelFrame> {
    if frame.has_column(result.name()) {
        return Err(Error::Schema(format!(
            "frame already has a column named `{}`",
            result.name()
        )));
    }
    if let ResultKeys::Aligned(keys) = &result.keys {
        if Arc::ptr_eq(keys, frame.keys()) {
            return frame.with_column(result.name.clone(), result.values.clone());
        }
    }
    let n = result.len();
    let mut cells: Vec<Option<f64>> = vec![None; frame.n_rows()];
    let mut j = 0usize;
    for (row, cell) in cells.iter_mut().enumerate() {
        let key = (frame.id(row), frame.date(row));
        while j < n && (result.id(j), result.date(j)) < key {
            j += 1;
        }
        if j < n && (result.id(j), result.date(j)) == key {
            *cell = result.values.get(j);
        }
    }
    frame.with_column(result.name.clone(), Column::from_opts(cells))
}

/// Structured record of a factor skipped for unmet requirements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipWarning {
    pub factor: String,
    /// Canonical columns absent from the frame.
    pub missing_columns: Vec<String>,
    /// Missing non-column inputs (auxiliary tables, coefficient sections).
    pub missing_inputs: Vec<String>,
}

impl SkipWarning {
    fn log(&self) {
        log::warn!(
            "skipping factor `{}`: missing columns [{}], missing inputs [{}]",
            self.factor,
            self.missing_columns.join(", "),
            self.missing_inputs.join(", ")
        );
    }
}

/// Call-site inputs for a compute run.
#[derive(Default)]
pub struct ComputeOptions {
    /// Per-factor parameter overrides keyed by factor name.
    pub params: BTreeMap<String, Params>,
    /// Auxiliary tables by name (advanced factors look these up).
    pub extras: Extras,
}

impl ComputeOptions {
    pub fn with_factor_param(mut self, factor: &str, param: &str, value: f64) -> Self {
        self.params.entry(factor.to_string()).or_default().insert(param.to_string(), value);
        self
    }

    pub fn with_extra(mut self, name: &str, table: DateTable) -> Self {
        self.extras.insert(name.to_string(), table);
        self
    }
}

/// Output of [`FactorRegistry::compute`].
#[derive(Debug)]
pub struct ComputeOutput {
    /// The input frame plus one column per computed factor (lagged columns
    /// used internally are not carried over).
    pub frame: PanelFrame,
    /// Names of factors actually computed, in request order.
    pub computed: Vec<String>,
    pub warnings: Vec<SkipWarning>,
    /// As-of join passes performed; equals the number of distinct lags
    /// requested across the whole batch.
    pub join_passes: u64,
}

struct FactorEntry {
    def: FactorDef,
    body: FactorBody,
}

/// The factor registry: deterministic insertion-order enumeration, unique
/// names.
#[derive(Default)]
pub struct FactorRegistry {
    entries: Vec<FactorEntry>,
    by_name: HashMap<String, usize>,
}

impl FactorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: FactorDef, body: FactorBody) -> Result<()> {
        if self.by_name.contains_key(&def.name) {
            return Err(Error::DuplicateFactor(def.name.clone()));
        }
        if def.kind != body.kind() {
            return Err(Error::Param(format!(
                "factor `{}` kind does not match its body",
                def.name
            )));
        }
        for column in &def.requires {
            if !schema::is_canonical(column) {
                return Err(Error::Schema(format!(
                    "factor `{}` requires `{column}`, which is not in the canonical vocabulary",
                    def.name
                )));
            }
        }
        if let Some((lo, hi)) = def.postprocess.winsorize {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(Error::Param(format!(
                    "factor `{}` has invalid winsorize quantiles ({lo}, {hi})",
                    def.name
                )));
            }
        }
        self.by_name.insert(def.name.clone(), self.entries.len());
        self.entries.push(FactorEntry { def, body });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Registered names in insertion order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.def.name.as_str()).collect()
    }

    pub fn def(&self, name: &str) -> Option<&FactorDef> {
        self.by_name.get(name).map(|&i| &self.entries[i].def)
    }

    fn entry(&self, name: &str) -> Result<&FactorEntry> {
        self.by_name
            .get(name)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    /// Whether `frame` satisfies a definition's column requirements; the
    /// second element lists the absent columns. Never fails.
    pub fn check_requirements(def: &FactorDef, frame: &PanelFrame) -> (bool, Vec<String>) {
        let missing: Vec<String> =
            def.requires.iter().filter(|c| !frame.has_column(c)).cloned().collect();
        (missing.is_empty(), missing)
    }

    /// Compute one factor by name. Unlike [`compute`](Self::compute), unmet
    /// requirements are hard errors here (missing columns -> schema error;
    /// missing auxiliary inputs -> parameter error).
    pub fn run(
        &self,
        name: &str,
        frame: &PanelFrame,
        overrides: Option<&Params>,
        extras: &Extras,
    ) -> Result<FactorResult> {
        let entry = self.entry(name)?;
        let params = merged_params(&entry.def, overrides)?;
        let required = effective_requires(entry);
        let missing: Vec<String> =
            required.iter().filter(|c| !frame.has_column(c)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!(
                "factor `{name}` requires missing columns: {}",
                missing.join(", ")
            )));
        }
        if let FactorBody::Advanced(body) = &entry.body {
            let missing_inputs = body.missing_inputs(extras);
            if !missing_inputs.is_empty() {
                return Err(Error::Param(format!(
                    "factor `{name}` is missing inputs: {}",
                    missing_inputs.join(", ")
                )));
            }
        }

        let mut registry = OffsetRegistry::new();
        let prepared = prepare(entry, frame, &mut registry, &params)?;
        let materialized = registry.compute_offset_data(frame)?;
        finish(entry, prepared, &materialized, &params, extras)
    }

    /// Compute the named factors (all registered factors when `names` is
    /// `None`) and left-join each result onto the frame.
    ///
    /// Lag requests are collected across every runnable factor first and
    /// materialized in one bulk step, then bodies are evaluated against the
    /// shared materialized frame. Factors with unmet requirements are
    /// skipped and reported in `warnings` (also mirrored to the log).
    pub fn compute(
        &self,
        frame: &PanelFrame,
        names: Option<&[String]>,
        opts: &ComputeOptions,
    ) -> Result<ComputeOutput> {
        let selected: Vec<&FactorEntry> = match names {
            Some(ns) => {
                let mut list = Vec::with_capacity(ns.len());
                for n in ns {
                    list.push(self.entry(n)?);
                }
                list
            }
            None => self.entries.iter().collect(),
        };

        let mut registry = OffsetRegistry::new();
        let mut warnings: Vec<SkipWarning> = Vec::new();
        let mut jobs: Vec<(&FactorEntry, Params, Prepared)> = Vec::new();
        for entry in selected {
            let params = merged_params(&entry.def, opts.params.get(&entry.def.name))?;
            let required = effective_requires(entry);
            let missing_columns: Vec<String> =
                required.iter().filter(|c| !frame.has_column(c)).cloned().collect();
            let missing_inputs = match &entry.body {
                FactorBody::Advanced(body) => body.missing_inputs(&opts.extras),
                FactorBody::Simple(_) => Vec::new(),
            };
            if !missing_columns.is_empty() || !missing_inputs.is_empty() {
                let warning = SkipWarning {
                    factor: entry.def.name.clone(),
                    missing_columns,
                    missing_inputs,
                };
                warning.log();
                warnings.push(warning);
                continue;
            }
            let prepared = prepare(entry, frame, &mut registry, &params)?;
            jobs.push((entry, params, prepared));
        }

        let materialized = registry.compute_offset_data(frame)?;
        let mut out = frame.clone();
        let mut computed = Vec::with_capacity(jobs.len());
        for (entry, params, prepared) in jobs {
            let result = finish(entry, prepared, &materialized, &params, &opts.extras)?;
            out = join_factor(&out, &result)?;
            computed.push(entry.def.name.clone());
        }
        Ok(ComputeOutput { frame: out, computed, warnings, join_passes: registry.join_passes() })
    }
}

/// Per-factor state carried between request collection and evaluation.
enum Prepared {
    Simple { expr: Expr, resolved: Vec<String> },
    Advanced,
}

fn effective_requires(entry: &FactorEntry) -> Vec<String> {
    match &entry.body {
        FactorBody::Advanced(body) => body.required_columns(&entry.def.requires),
        FactorBody::Simple(_) => entry.def.requires.clone(),
    }
}

fn merged_params(def: &FactorDef, overrides: Option<&Params>) -> Result<Params> {
    let mut params = def.defaults.clone();
    if let Some(overrides) = overrides {
        for (key, value) in overrides {
            if !def.defaults.contains_key(key) {
                return Err(Error::Param(format!(
                    "factor `{}` has no parameter `{key}`",
                    def.name
                )));
            }
            params.insert(key.clone(), *value);
        }
    }
    Ok(params)
}

fn prepare(
    entry: &FactorEntry,
    frame: &PanelFrame,
    registry: &mut OffsetRegistry,
    params: &Params,
) -> Result<Prepared> {
    match &entry.body {
        FactorBody::Simple(body) => {
            let mut ctx =
                ExprCtx::new(&entry.def.name, &entry.def.requires, frame, registry, params);
            let expr = body(&mut ctx, params)?;
            let resolved = ctx.into_resolved();
            Ok(Prepared::Simple { expr, resolved })
        }
        FactorBody::Advanced(body) => {
            for key in body.lag_requests(params) {
                registry.request(frame, key)?;
            }
            Ok(Prepared::Advanced)
        }
    }
}

fn finish(
    entry: &FactorEntry,
    prepared: Prepared,
    materialized: &PanelFrame,
    params: &Params,
    extras: &Extras,
) -> Result<FactorResult> {
    let result = match (&entry.body, prepared) {
        (FactorBody::Simple(_), Prepared::Simple { expr, resolved }) => {
            let values = evaluate(&expr, materialized, &resolved)?;
            FactorResult::aligned(
                entry.def.name.clone(),
                Arc::clone(materialized.keys()),
                values,
            )?
        }
        (FactorBody::Advanced(body), Prepared::Advanced) => {
            let result = body.compute(materialized, params, extras)?;
            if result.name() != entry.def.name {
                return Err(Error::Contract(format!(
                    "advanced body returned result named `{}` for factor `{}`",
                    result.name(),
                    entry.def.name
                )));
            }
            result
        }
        _ => unreachable!("body kind and prepared state always match"),
    };
    apply_postprocess(result, &entry.def.postprocess)
}

fn apply_postprocess(result: FactorResult, post: &PostProcess) -> Result<FactorResult> {
    if post.winsorize.is_none() && !post.zscore {
        return Ok(result);
    }
    let dates = result.dates_vec();
    let groups = stats::date_groups(&dates);
    let mut values = result.values().clone();
    if let Some((lo, hi)) = post.winsorize {
        values = stats::winsorize_grouped(&values, &groups, lo, hi)?;
    }
    if post.zscore {
        values = stats::zscore_grouped(&values, &groups);
    }
    Ok(result.with_values(values))
}
