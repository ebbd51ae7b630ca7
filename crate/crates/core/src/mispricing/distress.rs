//! Failure-probability factor: a dynamic logit over market and accounting
//! covariates, in the style of the reduced-form bankruptcy literature.
//!
//! Covariates per (asset, month), with `mta = mv + tl` as market-valued
//! total assets and the index table supplying benchmark returns and total
//! index market value:
//!
//! - profitability `ni / mta`
//! - leverage `tl / mta`
//! - excess return: geometrically weighted average of the last 12 monthly
//!   log excess returns over the index (weight `phi^j`, `phi = 2^(-1/3)`,
//!   most recent month heaviest); the window must be complete
//! - volatility: population standard deviation of the last 3 monthly
//!   returns, annualized with `sqrt(12)`; a proxy for the daily-return
//!   definition, which needs daily data a monthly panel does not carry
//! - relative size `ln(mv / total index mv)`
//! - cash holdings `cash / mta`
//! - market-to-book `mv / (ta - tl)`
//! - price level `ln(min(price, price_cap))`
//!
//! The configured logit maps the linear predictor to a probability. Any
//! null covariate nulls the row.

use std::sync::Arc;

use chrono::NaiveDate;

use crate::column::Column;
use crate::datetable::DateTable;
use crate::date::shift_months;
use crate::error::Result;
use crate::frame::PanelFrame;
use crate::lag::{Lag, OffsetKey};
use crate::registry::{AdvancedFactor, Extras, FactorResult, Params};

use super::coeffs::DistressCoefficients;
use super::INDEX_TABLE;

const EXRET_WINDOW: usize = 12;
const VOL_WINDOW: usize = 3;

pub struct Distress {
    coeffs: Option<DistressCoefficients>,
}

impl Distress {
    pub fn new(coeffs: Option<DistressCoefficients>) -> Self {
        Distress { coeffs }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ln(1 + r), null for r <= -1.
fn log_return(r: f64) -> Option<f64> {
    let x = 1.0 + r;
    (x > 0.0).then(|| x.ln())
}

struct Covariates {
    profitability: f64,
    leverage: f64,
    excess_return: f64,
    volatility: f64,
    relative_size: f64,
    cash: f64,
    market_to_book: f64,
    price: f64,
}

impl AdvancedFactor for Distress {
    fn lag_requests(&self, _params: &Params) -> Vec<OffsetKey> {
        (1..EXRET_WINDOW as u32)
            .map(|k| OffsetKey::new("ret", Lag::months(k)))
            .collect()
    }

    fn missing_inputs(&self, extras: &Extras) -> Vec<String> {
        let mut missing = Vec::new();
        if self.coeffs.is_none() {
            missing.push("coeffs:distress".to_string());
        }
        match extras.get(INDEX_TABLE) {
            None => missing.push(format!("aux:{INDEX_TABLE}")),
            Some(table) => {
                for col in ["ret", "total_mv"] {
                    if !table.has_column(col) {
                        missing.push(format!("aux:{INDEX_TABLE}:{col}"));
                    }
                }
            }
        }
        missing
    }

    fn compute(
        &self,
        frame: &PanelFrame,
        _params: &Params,
        extras: &Extras,
    ) -> Result<FactorResult> {
        let c = self.coeffs.as_ref().expect("requirements checked before compute");
        let index = extras.get(INDEX_TABLE).expect("requirements checked before compute");

        let mv = frame.column("mv")?.raw();
        let ni = frame.column("ni")?.raw();
        let ta = frame.column("ta")?.raw();
        let tl = frame.column("tl")?.raw();
        let cash = frame.column("cash")?.raw();
        let price = frame.column("price")?.raw();
        let mut ret_lags: Vec<&[f64]> = Vec::with_capacity(EXRET_WINDOW);
        ret_lags.push(frame.column("ret")?.raw());
        for k in 1..EXRET_WINDOW as u32 {
            ret_lags.push(
                frame
                    .column(&OffsetKey::new("ret", Lag::months(k)).lagged_name())?
                    .raw(),
            );
        }

        // Geometric weights, most recent month heaviest, normalized to 1.
        let phi = 2f64.powf(-1.0 / 3.0);
        let weights: Vec<f64> = (0..EXRET_WINDOW).map(|j| phi.powi(j as i32)).collect();
        let weight_total: f64 = weights.iter().sum();

        let mut values: Vec<Option<f64>> = Vec::with_capacity(frame.n_rows());
        for row in 0..frame.n_rows() {
            let date = frame.date(row);
            let cov = build_covariates(
                c, index, &weights, weight_total, date, mv[row], ni[row], ta[row], tl[row],
                cash[row], price[row], &ret_lags, row,
            );
            values.push(cov.map(|x| {
                logistic(
                    c.intercept
                        + c.profitability * x.profitability
                        + c.leverage * x.leverage
                        + c.excess_return * x.excess_return
                        + c.volatility * x.volatility
                        + c.relative_size * x.relative_size
                        + c.cash * x.cash
                        + c.market_to_book * x.market_to_book
                        + c.price * x.price,
                )
            }));
        }
        FactorResult::aligned("distress", Arc::clone(frame.keys()), Column::from_opts(values))
    }
}

#[allow(clippy::too_many_arguments)]
fn build_covariates(
    c: &DistressCoefficients,
    index: &DateTable,
    weights: &[f64],
    weight_total: f64,
    date: NaiveDate,
    mv: f64,
    ni: f64,
    ta: f64,
    tl: f64,
    cash: f64,
    price: f64,
    ret_lags: &[&[f64]],
    row: usize,
) -> Option<Covariates> {
    if [mv, ni, ta, tl, cash, price].iter().any(|v| v.is_nan()) {
        return None;
    }
    let mta = mv + tl;
    if mta <= 0.0 {
        return None;
    }

    let mut excess = 0.0;
    for (j, weight) in weights.iter().enumerate() {
        let r = ret_lags[j][row];
        if r.is_nan() {
            return None;
        }
        let idx_ret = index.asof("ret", shift_months(date, -(j as i32)))?;
        excess += weight * (log_return(r)? - log_return(idx_ret)?);
    }
    let excess_return = excess / weight_total;

    let mut vol_sum = 0.0;
    for lag in ret_lags.iter().take(VOL_WINDOW) {
        if lag[row].is_nan() {
            return None;
        }
        vol_sum += lag[row];
    }
    let vol_mean = vol_sum / VOL_WINDOW as f64;
    let vol_var = ret_lags
        .iter()
        .take(VOL_WINDOW)
        .map(|lag| (lag[row] - vol_mean).powi(2))
        .sum::<f64>()
        / VOL_WINDOW as f64;
    let volatility = vol_var.sqrt() * 12f64.sqrt();

    let total_mv = index.asof("total_mv", date)?;
    if mv <= 0.0 || total_mv <= 0.0 {
        return None;
    }
    let relative_size = (mv / total_mv).ln();

    let book = ta - tl;
    if book <= 0.0 {
        return None;
    }
    let market_to_book = mv / book;

    if price <= 0.0 {
        return None;
    }
    let price_level = price.min(c.price_cap).ln();

    Some(Covariates {
        profitability: ni / mta,
        leverage: tl / mta,
        excess_return,
        volatility,
        relative_size,
        cash: cash / mta,
        market_to_book,
        price: price_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::last_day_of_month;
    use crate::frame::FrameBuilder;
    use crate::mispricing::{registry, CoefficientsConfig};
    use indexmap::IndexMap;

    fn eom(y: i32, m: u32) -> NaiveDate {
        last_day_of_month(y, m)
    }

    const COLS: [&str; 7] = ["mv", "ret", "price", "ni", "ta", "tl", "cash"];

    /// 13 months of identical rows plus a matching index table.
    fn fixture(row: [Option<f64>; 7], idx_ret: f64, total_mv: f64) -> (PanelFrame, Extras) {
        let mut b = FrameBuilder::new(COLS);
        let mut dates = Vec::new();
        for m in 0..13 {
            let date = if m < 12 { eom(2019, m + 1) } else { eom(2020, 1) };
            b.push("A", date, &row).unwrap();
            dates.push(date);
        }
        let n = dates.len();
        let table = DateTable::new(
            dates,
            IndexMap::from([
                ("ret".to_string(), Column::from_opts(vec![Some(idx_ret); n])),
                ("total_mv".to_string(), Column::from_opts(vec![Some(total_mv); n])),
            ]),
        )
        .unwrap();
        let mut extras = Extras::new();
        extras.insert(INDEX_TABLE.to_string(), table);
        (b.finish().unwrap(), extras)
    }

    fn zero_beta_config(intercept: f64) -> CoefficientsConfig {
        let mut config = CoefficientsConfig::default_full();
        let d = config.distress.as_mut().unwrap();
        *d = DistressCoefficients {
            intercept,
            profitability: 0.0,
            leverage: 0.0,
            excess_return: 0.0,
            volatility: 0.0,
            relative_size: 0.0,
            cash: 0.0,
            market_to_book: 0.0,
            price: 0.0,
            price_cap: d.price_cap,
        };
        config
    }

    #[test]
    fn intercept_only_logit() {
        let row = [Some(50.0), Some(0.02), Some(20.0), Some(4.0), Some(250.0), Some(150.0), Some(20.0)];
        let (frame, extras) = fixture(row, 0.01, 5000.0);
        let config = zero_beta_config(-2.0);
        let reg = registry(&config).unwrap();
        let r = reg.run("distress", &frame, None, &extras).unwrap();
        let expect = 1.0 / (1.0 + 2f64.exp());
        let got = r.value_for("A", eom(2020, 1)).unwrap();
        assert!((got - expect).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn zero_predictor_gives_one_half() {
        let row = [Some(50.0), Some(0.02), Some(20.0), Some(4.0), Some(250.0), Some(150.0), Some(20.0)];
        let (frame, extras) = fixture(row, 0.01, 5000.0);
        let reg = registry(&zero_beta_config(0.0)).unwrap();
        let r = reg.run("distress", &frame, None, &extras).unwrap();
        assert_eq!(r.value_for("A", eom(2020, 1)), Some(0.5));
    }

    #[test]
    fn fully_specified_row_matches_linear_predictor_oracle() {
        let row = [Some(50.0), Some(0.02), Some(20.0), Some(4.0), Some(250.0), Some(150.0), Some(20.0)];
        let (frame, extras) = fixture(row, 0.01, 5000.0);
        let config = CoefficientsConfig::default_full();
        let reg = registry(&config).unwrap();
        let r = reg.run("distress", &frame, None, &extras).unwrap();
        let c = config.distress.unwrap();

        // Independent evaluation: constant returns make the weighted excess
        // return collapse to a single log ratio and volatility to zero.
        let mta = 50.0 + 150.0;
        let z = c.intercept
            + c.profitability * (4.0 / mta)
            + c.leverage * (150.0 / mta)
            + c.excess_return * (1.02f64 / 1.01).ln()
            + c.volatility * 0.0
            + c.relative_size * (50.0f64 / 5000.0).ln()
            + c.cash * (20.0 / mta)
            + c.market_to_book * (50.0 / (250.0 - 150.0))
            + c.price * 15f64.ln(); // price 20 capped at 15
        let expect = 1.0 / (1.0 + (-z).exp());
        let got = r.value_for("A", eom(2020, 1)).unwrap();
        assert!((got - expect).abs() < 1e-12, "got {got}, expected {expect}");
    }

    #[test]
    fn incomplete_return_window_is_null() {
        let row = [Some(50.0), Some(0.02), Some(20.0), Some(4.0), Some(250.0), Some(150.0), Some(20.0)];
        let (frame, extras) = fixture(row, 0.01, 5000.0);
        let reg = registry(&CoefficientsConfig::default_full()).unwrap();
        let r = reg.run("distress", &frame, None, &extras).unwrap();
        // Month 6 of 2019 has only 5 months of prior returns.
        assert_eq!(r.value_for("A", eom(2019, 6)), None);
    }

    #[test]
    fn negative_book_equity_is_null() {
        let row = [Some(50.0), Some(0.02), Some(20.0), Some(4.0), Some(100.0), Some(150.0), Some(20.0)];
        let (frame, extras) = fixture(row, 0.01, 5000.0);
        let reg = registry(&CoefficientsConfig::default_full()).unwrap();
        let r = reg.run("distress", &frame, None, &extras).unwrap();
        assert_eq!(r.value_for("A", eom(2020, 1)), None);
    }

    #[test]
    fn missing_index_table_is_reported() {
        let row = [Some(50.0), Some(0.02), Some(20.0), Some(4.0), Some(250.0), Some(150.0), Some(20.0)];
        let (frame, _) = fixture(row, 0.01, 5000.0);
        let reg = registry(&CoefficientsConfig::default_full()).unwrap();
        let err = reg.run("distress", &frame, None, &Extras::new()).unwrap_err();
        assert!(err.to_string().contains("aux:index"), "{err}");
    }
}
