//! Shared test oracles: straightforward per-row reference implementations,
//! kept independent of the engine's join/expression machinery. Everything
//! here favors obviousness over speed.

#![allow(dead_code)]

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use panelfactor::backtest::{Direction, Mode, Rebalance, Selection, StrategyConfig};
use panelfactor::datetable::DateTable;
use panelfactor::frame::FrameBuilder;
use panelfactor::lag::{Lag, LagUnit};
use panelfactor::mispricing::{DistressCoefficients, OScoreCoefficients};
use panelfactor::PanelFrame;

// --- independent calendar arithmetic -----------------------------------

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => unreachable!(),
    }
}

/// Month shift with end-of-month preservation, written from the calendar
/// rules rather than the library's implementation.
pub fn oracle_shift_months(date: NaiveDate, delta: i32) -> NaiveDate {
    let zero_based = date.year() * 12 + date.month() as i32 - 1 + delta;
    let year = zero_based.div_euclid(12);
    let month = zero_based.rem_euclid(12) as u32 + 1;
    let was_month_end = date.day() == days_in_month(date.year(), date.month());
    let day = if was_month_end {
        days_in_month(year, month)
    } else {
        date.day().min(days_in_month(year, month))
    };
    NaiveDate::from_ymd_opt(year, month, day).unwrap()
}

pub fn oracle_apply_lag(date: NaiveDate, lag: Lag) -> NaiveDate {
    match lag.unit {
        LagUnit::Days => date - chrono::Duration::days(lag.count as i64),
        LagUnit::Months => oracle_shift_months(date, -(lag.count as i32)),
        LagUnit::Years => oracle_shift_months(date, -12 * lag.count as i32),
    }
}

// --- brute-force as-of join ---------------------------------------------

/// Per-row linear-scan as-of: for each row, walk every row of the same
/// asset and keep the value at the latest date at-or-before `t - lag`.
pub fn asof_oracle(frame: &PanelFrame, column: &str, lag: Lag) -> Vec<Option<f64>> {
    let col = frame.column(column).unwrap();
    let keys = frame.keys();
    let mut out = Vec::with_capacity(frame.n_rows());
    for row in 0..frame.n_rows() {
        let asset = keys.row_asset(row);
        let target = oracle_apply_lag(keys.row_date(row), lag);
        let mut best: Option<usize> = None;
        for other in keys.asset_range(asset) {
            if keys.row_date(other) <= target
                && best.is_none_or(|b| keys.row_date(other) > keys.row_date(b))
            {
                best = Some(other);
            }
        }
        out.push(best.and_then(|b| col.get(b)));
    }
    out
}

/// As-of lookup for a single (asset, target date), linear scan.
fn asof_cell(frame: &PanelFrame, column: &str, asset: usize, target: NaiveDate) -> Option<f64> {
    let col = frame.column(column).ok()?;
    let keys = frame.keys();
    let mut best: Option<usize> = None;
    for row in keys.asset_range(asset) {
        if keys.row_date(row) <= target
            && best.is_none_or(|b| keys.row_date(row) > keys.row_date(b))
        {
            best = Some(row);
        }
    }
    best.and_then(|b| col.get(b))
}

fn cell(frame: &PanelFrame, column: &str, row: usize) -> Option<f64> {
    frame.column(column).ok()?.get(row)
}

fn index_asof(index: &DateTable, column: &str, target: NaiveDate) -> Option<f64> {
    let mut best: Option<usize> = None;
    for (i, date) in index.dates().iter().enumerate() {
        if *date <= target && best.is_none_or(|b| *date > index.dates()[b]) {
            best = Some(i);
        }
    }
    // DateTable::asof takes the matched row's cell; mirror that by looking
    // the matched date back up.
    best.and_then(|b| index.asof(column, index.dates()[b]))
}

// --- factor reference implementations ------------------------------------

fn positive(v: Option<f64>) -> Option<f64> {
    v.filter(|x| *x > 0.0)
}

fn safe_div(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    Some(num? / positive(den)?)
}

fn safe_ln(v: Option<f64>) -> Option<f64> {
    positive(v).map(f64::ln)
}

/// O-score term ratio: zero-over-zero counts as zero, non-positive
/// denominators otherwise null.
fn oscore_ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    let (num, den) = (num?, den?);
    if den > 0.0 {
        Some(num / den)
    } else if den == 0.0 && num == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Reference value of `factor` at `row`, computed by direct per-row
/// arithmetic with linear-scan lookups.
pub fn oracle_factor_value(
    frame: &PanelFrame,
    factor: &str,
    row: usize,
    index: Option<&DateTable>,
    oscore: &OScoreCoefficients,
    distress: &DistressCoefficients,
) -> Option<f64> {
    let keys = frame.keys();
    let asset = keys.row_asset(row);
    let t = keys.row_date(row);
    let lag12 = |col: &str| asof_cell(frame, col, asset, oracle_shift_months(t, -12));

    match factor {
        "net_stock_issues" => {
            let ratio = safe_div(cell(frame, "shares", row), lag12("shares"))?;
            (ratio > 0.0).then(|| ratio.ln())
        }
        "composite_equity_issues" => {
            let growth = safe_ln(safe_div(cell(frame, "mv", row), lag12("mv")))?;
            let mut cum = 0.0;
            for k in 0..12 {
                let r = if k == 0 {
                    cell(frame, "ret", row)
                } else {
                    asof_cell(frame, "ret", asset, oracle_shift_months(t, -k))
                }?;
                cum += safe_ln(Some(1.0 + r))?;
            }
            Some(growth - cum)
        }
        "accruals" => {
            let delta = |col: &str| Some(cell(frame, col, row)? - lag12(col)?);
            let numerator = (delta("ca")? - delta("cash")?)
                - (delta("cl")? - delta("std")? - delta("txp")?)
                - cell(frame, "dp", row)?;
            let avg_ta = (cell(frame, "ta", row)? + lag12("ta")?) / 2.0;
            safe_div(Some(numerator), Some(avg_ta))
        }
        "net_operating_assets" => {
            let ta = cell(frame, "ta", row)?;
            let operating_assets = ta - cell(frame, "cash", row)?;
            let operating_liabilities = ta
                - cell(frame, "std", row)?
                - cell(frame, "ltd", row)?
                - cell(frame, "ceq", row)?;
            safe_div(Some(operating_assets - operating_liabilities), lag12("ta"))
        }
        "asset_growth" => Some(safe_div(cell(frame, "ta", row), lag12("ta"))? - 1.0),
        "investment_to_assets" => {
            let delta = |col: &str| Some(cell(frame, col, row)? - lag12(col)?);
            safe_div(Some(delta("ppegt")? + delta("invt")?), lag12("ta"))
        }
        "momentum" => {
            let mut compounded = 1.0;
            for k in 2..=12 {
                compounded *= 1.0 + asof_cell(frame, "ret", asset, oracle_shift_months(t, -k))?;
            }
            Some(compounded - 1.0)
        }
        "gross_profitability" => safe_div(cell(frame, "gp", row), cell(frame, "ta", row)),
        "roa" => safe_div(
            cell(frame, "ibq", row),
            asof_cell(frame, "ta", asset, oracle_shift_months(t, -3)),
        ),
        "o_score" => {
            let ta = cell(frame, "ta", row)?;
            let tl = cell(frame, "tl", row)?;
            let ca = cell(frame, "ca", row)?;
            let cl = cell(frame, "cl", row)?;
            let ni = cell(frame, "ni", row)?;
            let ffo = cell(frame, "ffo", row)?;
            let ni_lag = lag12("ni")?;
            let size = positive(Some(ta))?.ln();
            Some(
                oscore.intercept
                    + oscore.size * size
                    + oscore.leverage * oscore_ratio(Some(tl), Some(ta))?
                    + oscore.working_capital * oscore_ratio(Some(ca - cl), Some(ta))?
                    + oscore.current_ratio * oscore_ratio(Some(cl), Some(ca))?
                    + oscore.negative_equity * if tl > ta { 1.0 } else { 0.0 }
                    + oscore.profitability * oscore_ratio(Some(ni), Some(ta))?
                    + oscore.funds_from_operations * oscore_ratio(Some(ffo), Some(tl))?
                    + oscore.two_year_loss * if ni < 0.0 && ni_lag < 0.0 { 1.0 } else { 0.0 }
                    + oscore.income_change
                        * oscore_ratio(Some(ni - ni_lag), Some(ni.abs() + ni_lag.abs()))?,
            )
        }
        "distress" => {
            let index = index?;
            let mv = cell(frame, "mv", row)?;
            let tl = cell(frame, "tl", row)?;
            let mta = positive(Some(mv + tl))?;

            let phi = 2f64.powf(-1.0 / 3.0);
            let mut weighted = 0.0;
            let mut total_weight = 0.0;
            for j in 0..12 {
                let r = if j == 0 {
                    cell(frame, "ret", row)
                } else {
                    asof_cell(frame, "ret", asset, oracle_shift_months(t, -j))
                }?;
                let idx = index_asof(index, "ret", oracle_shift_months(t, -j))?;
                let w = phi.powi(j);
                weighted += w * (safe_ln(Some(1.0 + r))? - safe_ln(Some(1.0 + idx))?);
                total_weight += w;
            }
            let excess_return = weighted / total_weight;

            let mut window = [0.0f64; 3];
            for (j, slot) in window.iter_mut().enumerate() {
                *slot = if j == 0 {
                    cell(frame, "ret", row)
                } else {
                    asof_cell(frame, "ret", asset, oracle_shift_months(t, -(j as i32)))
                }?;
            }
            let mean = window.iter().sum::<f64>() / 3.0;
            let variance = window.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 3.0;
            let volatility = variance.sqrt() * 12f64.sqrt();

            let total_mv = positive(index_asof(index, "total_mv", t))?;
            let relative_size = (positive(Some(mv))? / total_mv).ln();
            let market_to_book = mv / positive(Some(cell(frame, "ta", row)? - tl))?;
            let price_level = positive(cell(frame, "price", row))?.min(distress.price_cap).ln();

            let z = distress.intercept
                + distress.profitability * (cell(frame, "ni", row)? / mta)
                + distress.leverage * (tl / mta)
                + distress.excess_return * excess_return
                + distress.volatility * volatility
                + distress.relative_size * relative_size
                + distress.cash * (cell(frame, "cash", row)? / mta)
                + distress.market_to_book * market_to_book
                + distress.price * price_level;
            Some(1.0 / (1.0 + (-z).exp()))
        }
        other => panic!("no oracle for factor `{other}`"),
    }
}

// --- independent backtest simulation -------------------------------------

/// Step-by-step backtest simulation over (id, date) maps, written from the
/// documented timing contract.
pub fn backtest_oracle(frame: &PanelFrame, config: &StrategyConfig) -> Vec<(NaiveDate, f64)> {
    use std::collections::{BTreeMap, BTreeSet};

    let factor = frame.column(&config.factor).unwrap();
    let returns = frame.column(&config.return_column).unwrap();
    let clock: Vec<NaiveDate> = frame
        .keys()
        .dates()
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut factor_rows: BTreeMap<(NaiveDate, String), Option<f64>> = BTreeMap::new();
    let mut return_rows: BTreeMap<(NaiveDate, String), Option<f64>> = BTreeMap::new();
    for row in 0..frame.n_rows() {
        let key = (frame.date(row), frame.id(row).to_string());
        factor_rows.insert(key.clone(), factor.get(row));
        return_rows.insert(key, returns.get(row));
    }

    let select = |latest: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        let mut scored: Vec<(&String, f64)> = latest.iter().map(|(k, v)| (k, *v)).collect();
        if scored.is_empty() {
            return BTreeMap::new();
        }
        scored.sort_by(|a, b| {
            match config.direction {
                Direction::HigherIsBetter => b.1.total_cmp(&a.1),
                Direction::LowerIsBetter => a.1.total_cmp(&b.1),
            }
            .then_with(|| a.0.cmp(b.0))
        });
        let universe = scored.len();
        let n = match config.selection {
            Selection::Count(c) => (c as usize).min(universe),
            Selection::Fraction(f) => ((f * universe as f64).floor() as usize).clamp(1, universe),
        };
        let mut weights: BTreeMap<String, f64> = BTreeMap::new();
        for (id, _) in scored.iter().take(n) {
            *weights.entry((*id).clone()).or_insert(0.0) += 1.0 / n as f64;
        }
        if config.mode == Mode::LongShort {
            for (id, _) in scored.iter().rev().take(n) {
                *weights.entry((*id).clone()).or_insert(0.0) -= 1.0 / n as f64;
            }
        }
        weights.retain(|_, w| *w != 0.0);
        weights
    };

    let mut latest: BTreeMap<String, f64> = BTreeMap::new();
    let update_latest = |latest: &mut BTreeMap<String, f64>, date: NaiveDate| {
        for ((d, id), value) in
            factor_rows.range((date, String::new())..=(date, "\u{10FFFF}".to_string()))
        {
            debug_assert_eq!(*d, date);
            if let Some(v) = value {
                latest.insert(id.clone(), *v);
            }
        }
    };

    update_latest(&mut latest, clock[0]);
    let mut capital = config.initial_capital;
    let mut curve = vec![(clock[0], capital)];
    let mut target = select(&latest);
    let mut prev: BTreeMap<String, f64> = BTreeMap::new();

    for j in 1..clock.len() {
        let date = clock[j];
        let mut turnover = 0.0;
        let ids: BTreeSet<&String> = prev.keys().chain(target.keys()).collect();
        for id in ids {
            turnover += (target.get(id).copied().unwrap_or(0.0)
                - prev.get(id).copied().unwrap_or(0.0))
            .abs();
        }
        let fee = capital * turnover * config.fee_bps / 10_000.0;
        let mut growth = 1.0;
        for (id, w) in &target {
            if let Some(Some(r)) = return_rows.get(&(date, id.clone())) {
                growth += w * r;
            }
        }
        capital = ((capital - fee) * growth).max(0.0);
        if capital <= 0.0 {
            capital = 0.0;
        }
        curve.push((date, capital));

        update_latest(&mut latest, date);
        prev = std::mem::take(&mut target);
        let due = match config.rebalance {
            Rebalance::Daily => true,
            Rebalance::Monthly => {
                date.month() != clock[j - 1].month() || date.year() != clock[j - 1].year()
            }
        };
        target = if due { select(&latest) } else { prev.clone() };
    }
    curve
}

// --- randomized panel construction ---------------------------------------

/// Random panel with up to `max_assets` assets and `max_dates` dates,
/// random per-asset gaps and random nulls, columns `x` and `y`.
pub fn random_panel(seed: u64, max_assets: usize, max_dates: usize) -> PanelFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_assets = rng.random_range(1..=max_assets);
    let n_dates = rng.random_range(2..=max_dates);
    let monthly = rng.random::<f64>() < 0.5;
    let grid: Vec<NaiveDate> = if monthly {
        (0..n_dates)
            .map(|m| {
                let year = 2005 + (m / 12) as i32;
                let month = (m % 12) as u32 + 1;
                NaiveDate::from_ymd_opt(year, month, days_in_month(year, month)).unwrap()
            })
            .collect()
    } else {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut day = 0i64;
        (0..n_dates)
            .map(|_| {
                day += rng.random_range(1..=3);
                start + chrono::Duration::days(day)
            })
            .collect()
    };

    let mut builder = FrameBuilder::new(["x", "y"]);
    for a in 0..n_assets {
        let id = format!("A{a:03}");
        let mut any = false;
        for date in &grid {
            if rng.random::<f64>() < 0.8 {
                let x = (rng.random::<f64>() < 0.85).then(|| rng.random_range(-100.0..100.0));
                let y = (rng.random::<f64>() < 0.85).then(|| rng.random_range(-5.0..5.0));
                builder.push(id.clone(), *date, &[x, y]).unwrap();
                any = true;
            }
        }
        if !any {
            builder.push(id.clone(), grid[0], &[Some(1.0), Some(1.0)]).unwrap();
        }
    }
    builder.finish().unwrap()
}

/// Random dense-ish panel with `f` (factor) and `ret` columns for backtest
/// comparisons.
pub fn random_backtest_frame(seed: u64) -> PanelFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_assets = rng.random_range(2..8);
    let n_dates = rng.random_range(5..40);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut builder = FrameBuilder::new(["f", "ret"]);
    for a in 0..n_assets {
        for t in 0..n_dates {
            if rng.random::<f64>() < 0.9 {
                let f = (rng.random::<f64>() < 0.8).then(|| rng.random_range(-3.0..3.0));
                let r = (rng.random::<f64>() < 0.95).then(|| rng.random_range(-0.08..0.09));
                builder
                    .push(format!("A{a:02}"), start + chrono::Duration::days(t), &[f, r])
                    .unwrap();
            }
        }
    }
    builder.finish().unwrap()
}

/// Random lag for as-of tests: days, months, or years, small counts.
pub fn random_lag(rng: &mut ChaCha8Rng) -> Lag {
    match rng.random_range(0..3) {
        0 => Lag::days(rng.random_range(0..90)),
        1 => Lag::months(rng.random_range(0..18)),
        _ => Lag::years(rng.random_range(0..3)),
    }
}

/// Sorted keys, unique, and every column row-aligned.
pub fn assert_frame_invariants(frame: &PanelFrame) {
    let keys = frame.keys();
    for row in 1..frame.n_rows() {
        let prev = (frame.id(row - 1), frame.date(row - 1));
        let here = (frame.id(row), frame.date(row));
        assert!(prev < here, "rows out of order or duplicated at {row}: {prev:?} vs {here:?}");
    }
    for name in frame.column_names() {
        assert_eq!(frame.column(name).unwrap().len(), keys.n_rows());
    }
}
