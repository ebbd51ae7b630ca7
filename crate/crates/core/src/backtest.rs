//! Single-factor strategy simulation: cross-sectional ranking into
//! equal-weight long-only or long/short portfolios, turnover-proportional
//! fees, and a compounded equity curve with capital zeroing.
//!
//! # Timing
//!
//! The simulation clock is the panel's sorted distinct dates. The weights
//! earning the return reported at clock date `d_j` are selected at `d_{j-1}`
//! (the period's start) from the latest factor values at-or-before
//! `d_{j-1}`; factor values are forward-carried per asset, so monthly
//! factors drive daily weights. Fees are charged on the turnover against
//! the previous target weights, before the period's returns accrue.
//! Capital is floored at zero and stays there: no leverage, no negative
//! capital.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::PanelFrame;
use crate::ingest::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LongOnly,
    LongShort,
}

/// Per-leg selection size: an absolute count or a fraction of the ranked
/// universe (`max(1, floor(fraction * universe))`, clamped to the universe).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    Count(u64),
    Fraction(f64),
}

impl Selection {
    fn resolve(&self, universe: usize) -> usize {
        match *self {
            Selection::Count(c) => (c as usize).min(universe),
            Selection::Fraction(f) => ((f * universe as f64).floor() as usize).clamp(1, universe),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rebalance {
    Daily,
    Monthly,
}

fn default_return_column() -> String {
    "ret".to_string()
}

fn default_selection() -> Selection {
    Selection::Fraction(0.1)
}

fn default_fee_bps() -> f64 {
    100.0
}

fn default_risk_free_rate() -> f64 {
    0.05
}

fn default_initial_capital() -> f64 {
    1.0
}

fn default_direction() -> Direction {
    Direction::HigherIsBetter
}

fn default_mode() -> Mode {
    Mode::LongOnly
}

fn default_rebalance() -> Rebalance {
    Rebalance::Daily
}

/// Strategy configuration (loadable from TOML/JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    /// Factor column carrying the ranking signal.
    pub factor: String,
    #[serde(default = "default_return_column")]
    pub return_column: String,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Assets per leg: top decile by default.
    #[serde(default = "default_selection")]
    pub selection: Selection,
    /// Fee in basis points of turnover.
    #[serde(default = "default_fee_bps")]
    pub fee_bps: f64,
    /// Annual risk-free rate used by the Sharpe ratio.
    #[serde(default = "default_risk_free_rate")]
    pub risk_free_rate: f64,
    #[serde(default = "default_initial_capital")]
    pub initial_capital: f64,
    #[serde(default = "default_rebalance")]
    pub rebalance: Rebalance,
    /// Annualization basis; inferred from the clock when absent (252 for
    /// daily spacing, 12 otherwise).
    #[serde(default)]
    pub periods_per_year: Option<f64>,
}

impl StrategyConfig {
    pub fn new(factor: impl Into<String>) -> Self {
        StrategyConfig {
            factor: factor.into(),
            return_column: default_return_column(),
            direction: default_direction(),
            mode: default_mode(),
            selection: default_selection(),
            fee_bps: default_fee_bps(),
            risk_free_rate: default_risk_free_rate(),
            initial_capital: default_initial_capital(),
            rebalance: default_rebalance(),
            periods_per_year: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.selection {
            Selection::Count(c) if c == 0 => {
                return Err(Error::Param("selection count must be positive".into()))
            }
            Selection::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(Error::Param(format!(
                    "selection fraction must be in (0, 1], got {f}"
                )))
            }
            _ => {}
        }
        if self.fee_bps < 0.0 || !self.fee_bps.is_finite() {
            return Err(Error::Param("fee_bps must be non-negative".into()));
        }
        if !(self.initial_capital > 0.0) {
            return Err(Error::Param("initial_capital must be positive".into()));
        }
        if let Some(ppy) = self.periods_per_year {
            if !(ppy > 0.0) {
                return Err(Error::Param("periods_per_year must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: StrategyConfig =
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                serde_json::from_str(&text)
                    .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
            } else {
                toml::from_str(&text)
                    .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
            };
        config.validate()?;
        Ok(config)
    }
}

/// Rank a cross-section and build target weights: the top `selection`
/// assets by directional score at `+1/n` each and, in long/short mode, the
/// bottom `selection` at `-1/n` each. Non-finite scores are excluded before
/// ranking; ties break by ascending key. Output is sorted by key; an empty
/// usable cross-section yields empty weights (stay in cash).
pub fn rank_and_select<K: Ord + Clone>(
    cross_section: &[(K, f64)],
    direction: Direction,
    mode: Mode,
    selection: Selection,
) -> Vec<(K, f64)> {
    let mut scored: Vec<(K, f64)> = cross_section
        .iter()
        .filter(|(_, v)| v.is_finite())
        .cloned()
        .collect();
    if scored.is_empty() {
        return Vec::new();
    }
    scored.sort_by(|a, b| {
        let value_order = match direction {
            Direction::HigherIsBetter => b.1.total_cmp(&a.1),
            Direction::LowerIsBetter => a.1.total_cmp(&b.1),
        };
        value_order.then_with(|| a.0.cmp(&b.0))
    });

    let n = selection.resolve(scored.len());
    let mut weights: BTreeMap<K, f64> = BTreeMap::new();
    let long_weight = 1.0 / n as f64;
    for (key, _) in scored.iter().take(n) {
        *weights.entry(key.clone()).or_insert(0.0) += long_weight;
    }
    if mode == Mode::LongShort {
        let short_weight = 1.0 / n as f64;
        for (key, _) in scored.iter().rev().take(n) {
            *weights.entry(key.clone()).or_insert(0.0) -= short_weight;
        }
    }
    weights.retain(|_, w| *w != 0.0);
    weights.into_iter().collect()
}

/// Outcome of a single simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub capital: f64,
    pub turnover: f64,
    pub fee: f64,
    /// Held positions whose period return was null (treated as cash).
    pub null_return_positions: u64,
}

/// Advance capital by one period: charge `fee_bps` on the turnover between
/// `prev` and `target` weights, then apply the period's returns to the
/// target weights. Both weight lists must be sorted by key. A null return
/// contributes zero (the position sits in cash) and is counted. Capital is
/// floored at zero and, once zero, stays zero.
pub fn step<K: Ord>(
    capital: f64,
    prev: &[(K, f64)],
    target: &[(K, f64)],
    period_return: impl Fn(&K) -> Option<f64>,
    fee_bps: f64,
) -> StepOutcome {
    let mut turnover = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < prev.len() || j < target.len() {
        match (prev.get(i), target.get(j)) {
            (Some((pk, pw)), Some((tk, tw))) => match pk.cmp(tk) {
                std::cmp::Ordering::Less => {
                    turnover += pw.abs();
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    turnover += tw.abs();
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    turnover += (tw - pw).abs();
                    i += 1;
                    j += 1;
                }
            },
            (Some((_, pw)), None) => {
                turnover += pw.abs();
                i += 1;
            }
            (None, Some((_, tw))) => {
                turnover += tw.abs();
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let fee = capital * turnover * fee_bps / 10_000.0;
    let mut growth = 1.0;
    let mut null_return_positions = 0u64;
    for (key, weight) in target {
        match period_return(key) {
            Some(r) => growth += weight * r,
            None => null_return_positions += 1,
        }
    }
    let next = (capital - fee) * growth;
    StepOutcome {
        capital: if next > 0.0 { next } else { 0.0 },
        turnover,
        fee,
        null_return_positions,
    }
}

/// Portfolio capital over time. The first point carries the initial
/// capital; capital is non-negative and absorbing at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub capital: Vec<f64>,
}

impl EquityCurve {
    pub fn len(&self) -> usize {
        self.capital.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capital.is_empty()
    }

    /// `date,capital` CSV, plot-ready.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,capital\n");
        for (date, capital) in self.dates.iter().zip(&self.capital) {
            out.push_str(&format!("{},{}\n", date.format("%Y-%m-%d"), format_float(*capital)));
        }
        out
    }
}

/// Weights applied over the period ending at `date`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodWeights {
    pub date: NaiveDate,
    pub weights: Vec<(String, f64)>,
}

/// Performance metrics plus diagnostics. Metric fields are null when the
/// curve is shorter than two points (or, for the Sharpe ratio, when
/// volatility is zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub total_return: Option<f64>,
    pub annualized_return: Option<f64>,
    pub annualized_volatility: Option<f64>,
    pub sharpe: Option<f64>,
    pub max_drawdown: Option<f64>,
    pub final_capital: f64,
    pub periods_per_year: f64,
    pub n_points: usize,
    pub null_return_events: u64,
    #[serde(skip)]
    pub weights: Vec<PeriodWeights>,
}

/// Metrics over an equity curve:
///
/// - total return `final/initial - 1`
/// - annualized return `(final/initial)^(ppy/(n-1)) - 1`
/// - volatility: population standard deviation of per-period simple
///   returns, scaled by `sqrt(ppy)`
/// - Sharpe `(annualized - risk_free) / volatility`, null at zero
///   volatility
/// - max drawdown `max_t (peak_t - capital_t) / peak_t`
///
/// Per-period returns after the capital hits zero are taken as zero (the
/// curve is absorbing there).
pub fn compute_metrics(
    curve: &EquityCurve,
    risk_free_rate: f64,
    periods_per_year: f64,
) -> BacktestReport {
    let n = curve.len();
    let final_capital = curve.capital.last().copied().unwrap_or(0.0);
    if n < 2 {
        return BacktestReport {
            total_return: None,
            annualized_return: None,
            annualized_volatility: None,
            sharpe: None,
            max_drawdown: None,
            final_capital,
            periods_per_year,
            n_points: n,
            null_return_events: 0,
            weights: Vec::new(),
        };
    }
    let initial = curve.capital[0];
    let total_return = final_capital / initial - 1.0;
    let annualized_return =
        (final_capital / initial).powf(periods_per_year / (n - 1) as f64) - 1.0;

    let returns: Vec<f64> = curve
        .capital
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] - 1.0 } else { 0.0 })
        .collect();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let variance =
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / returns.len() as f64;
    let volatility = variance.sqrt() * periods_per_year.sqrt();

    let sharpe = if volatility > 0.0 {
        Some((annualized_return - risk_free_rate) / volatility)
    } else {
        None
    };

    let mut peak = initial;
    let mut max_drawdown = 0.0f64;
    for &c in &curve.capital {
        if c > peak {
            peak = c;
        }
        max_drawdown = max_drawdown.max((peak - c) / peak);
    }

    BacktestReport {
        total_return: Some(total_return),
        annualized_return: Some(annualized_return),
        annualized_volatility: Some(volatility),
        sharpe,
        max_drawdown: Some(max_drawdown),
        final_capital,
        periods_per_year,
        n_points: n,
        null_return_events: 0,
        weights: Vec::new(),
    }
}

/// Run one strategy over a panel carrying the factor column and the period
/// returns. See the module docs for the timing contract.
pub fn run_backtest(
    frame: &PanelFrame,
    config: &StrategyConfig,
) -> Result<(EquityCurve, BacktestReport)> {
    config.validate()?;
    let factor = frame.column(&config.factor)?;
    let returns = frame.column(&config.return_column)?;
    if frame.n_rows() == 0 {
        return Err(Error::EmptyUniverse);
    }

    let keys = frame.keys();
    let clock: Vec<NaiveDate> = {
        let mut dates: Vec<NaiveDate> = keys.dates().to_vec();
        dates.sort();
        dates.dedup();
        dates
    };
    let n_assets = frame.n_assets();

    // Per-asset cursor over the asset's rows, swept along the clock.
    let mut cursors: Vec<usize> = (0..n_assets).map(|a| keys.asset_range(a).start).collect();
    let ends: Vec<usize> = (0..n_assets).map(|a| keys.asset_range(a).end).collect();
    let mut latest_factor: Vec<f64> = vec![f64::NAN; n_assets];
    let mut ret_today: Vec<f64> = vec![f64::NAN; n_assets];
    let mut touched: Vec<u32> = Vec::with_capacity(n_assets);

    // Advance every asset through rows dated `date`, recording that date's
    // returns and folding factor values into the forward-carried state.
    let advance = |date: NaiveDate,
                       cursors: &mut [usize],
                       latest_factor: &mut [f64],
                       ret_today: &mut [f64],
                       touched: &mut Vec<u32>| {
        for t in touched.drain(..) {
            ret_today[t as usize] = f64::NAN;
        }
        for asset in 0..n_assets {
            let cursor = &mut cursors[asset];
            while *cursor < ends[asset] && keys.row_date(*cursor) == date {
                let row = *cursor;
                if !factor.raw()[row].is_nan() {
                    latest_factor[asset] = factor.raw()[row];
                }
                ret_today[asset] = returns.raw()[row];
                touched.push(asset as u32);
                *cursor += 1;
            }
        }
    };

    let select = |latest_factor: &[f64]| -> Vec<(u32, f64)> {
        let cross: Vec<(u32, f64)> = latest_factor
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(|(a, v)| (a as u32, *v))
            .collect();
        rank_and_select(&cross, config.direction, config.mode, config.selection)
    };

    let mut curve = EquityCurve {
        dates: Vec::with_capacity(clock.len()),
        capital: Vec::with_capacity(clock.len()),
    };
    let mut weights_record: Vec<PeriodWeights> = Vec::new();
    let mut null_return_events = 0u64;

    advance(clock[0], &mut cursors, &mut latest_factor, &mut ret_today, &mut touched);
    let mut capital = config.initial_capital;
    curve.dates.push(clock[0]);
    curve.capital.push(capital);

    let mut target = select(&latest_factor);
    let mut ever_selected = !target.is_empty();
    let mut prev: Vec<(u32, f64)> = Vec::new();

    for j in 1..clock.len() {
        advance(clock[j], &mut cursors, &mut latest_factor, &mut ret_today, &mut touched);

        let outcome = step(capital, &prev, &target, |asset| {
            let r = ret_today[*asset as usize];
            if r.is_nan() {
                None
            } else {
                Some(r)
            }
        }, config.fee_bps);
        capital = outcome.capital;
        null_return_events += outcome.null_return_positions;
        curve.dates.push(clock[j]);
        curve.capital.push(capital);
        weights_record.push(PeriodWeights {
            date: clock[j],
            weights: target
                .iter()
                .map(|(a, w)| (keys.asset_name(*a as usize).to_string(), *w))
                .collect(),
        });

        prev = std::mem::take(&mut target);
        let rebalance_due = match config.rebalance {
            Rebalance::Daily => true,
            // First session of a new month.
            Rebalance::Monthly => {
                clock[j].month() != clock[j - 1].month() || clock[j].year() != clock[j - 1].year()
            }
        };
        target = if rebalance_due { select(&latest_factor) } else { prev.clone() };
        ever_selected = ever_selected || !target.is_empty();
    }

    if !ever_selected {
        return Err(Error::EmptyUniverse);
    }

    let periods_per_year = config.periods_per_year.unwrap_or_else(|| infer_ppy(&clock));
    let mut report = compute_metrics(&curve, config.risk_free_rate, periods_per_year);
    report.null_return_events = null_return_events;
    report.weights = weights_record;
    Ok((curve, report))
}

/// 252 when the median clock gap is five days or less, 12 otherwise.
fn infer_ppy(clock: &[NaiveDate]) -> f64 {
    if clock.len() < 2 {
        return 252.0;
    }
    let mut gaps: Vec<i64> = clock.windows(2).map(|w| (w[1] - w[0]).num_days()).collect();
    gaps.sort_unstable();
    let median = gaps[gaps.len() / 2];
    if median <= 5 {
        252.0
    } else {
        12.0
    }
}
