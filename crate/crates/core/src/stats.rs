//! Cross-sectional preprocessing primitives: winsorization, z-scoring, and
//! the Pearson correlation used for validation.
//!
//! Winsorization and z-scoring operate per date cross-section, never pooled
//! across time. The quantile estimator is nearest-rank: the
//! `ceil(q * n)`-th order statistic of the non-null values (at least the
//! first), which is deterministic and interpolation-free.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::column::Column;
use crate::error::{Error, Result};
use crate::frame::PanelFrame;

/// Row indices grouped by date, in ascending date order.
pub(crate) fn date_groups(dates: &[NaiveDate]) -> Vec<Vec<usize>> {
    let mut map: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
    for (row, date) in dates.iter().enumerate() {
        map.entry(*date).or_default().push(row);
    }
    map.into_values().collect()
}

/// Nearest-rank quantile of an ascending-sorted, non-empty slice.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn check_quantiles(lower_q: f64, upper_q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lower_q) || !(0.0..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(Error::Param(format!(
            "winsorize quantiles must satisfy 0 <= lower < upper <= 1, got ({lower_q}, {upper_q})"
        )));
    }
    Ok(())
}

/// Winsorize `values` within each group: cells below the group's `lower_q`
/// nearest-rank quantile are raised to it, cells above `upper_q` lowered to
/// it. Nulls pass through unchanged.
pub(crate) fn winsorize_grouped(
    values: &Column,
    groups: &[Vec<usize>],
    lower_q: f64,
    upper_q: f64,
) -> Result<Column> {
    check_quantiles(lower_q, upper_q)?;
    let mut out: Vec<f64> = values.raw().to_vec();
    let mut buf: Vec<f64> = Vec::new();
    for group in groups {
        buf.clear();
        buf.extend(group.iter().filter_map(|&r| values.get(r)));
        if buf.is_empty() {
            continue;
        }
        buf.sort_by(|a, b| a.total_cmp(b));
        let lo = nearest_rank_quantile(&buf, lower_q);
        let hi = nearest_rank_quantile(&buf, upper_q);
        for &r in group {
            if let Some(v) = values.get(r) {
                out[r] = v.clamp(lo, hi);
            }
        }
    }
    Ok(Column::from_values(out))
}

/// Z-score `values` within each group using the population (n-denominator)
/// standard deviation. Groups with fewer than two non-null values or zero
/// standard deviation yield null for every cell: no cross-sectional
/// information, no score.
pub(crate) fn zscore_grouped(values: &Column, groups: &[Vec<usize>]) -> Column {
    let mut out: Vec<f64> = vec![crate::column::NULL; values.len()];
    for group in groups {
        let present: Vec<(usize, f64)> =
            group.iter().filter_map(|&r| values.get(r).map(|v| (r, v))).collect();
        let n = present.len();
        if n < 2 {
            continue;
        }
        let mean = present.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
        let var = present.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std == 0.0 {
            continue;
        }
        for (r, v) in present {
            out[r] = (v - mean) / std;
        }
    }
    Column::from_values(out)
}

/// Per-date winsorization of a frame column.
pub fn winsorize(frame: &PanelFrame, column: &str, lower_q: f64, upper_q: f64) -> Result<Column> {
    let values = frame.column(column)?;
    let groups = date_groups(frame.keys().dates());
    winsorize_grouped(values, &groups, lower_q, upper_q)
}

/// Per-date z-score of a frame column.
pub fn zscore(frame: &PanelFrame, column: &str) -> Result<Column> {
    let values = frame.column(column)?;
    let groups = date_groups(frame.keys().dates());
    Ok(zscore_grouped(values, &groups))
}

/// Pearson correlation over paired observations. `None` when fewer than two
/// pairs survive or either side has zero variance. The result is clamped to
/// `[-1, 1]` against floating-point excursions.
pub fn pearson(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_a = pairs.iter().map(|(a, _)| a).sum::<f64>() / nf;
    let mean_b = pairs.iter().map(|(_, b)| b).sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (a, b) in &pairs {
        let da = a - mean_a;
        let db = b - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}
