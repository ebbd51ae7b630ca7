//! Coefficient configuration for the distress and O-score factors.
//!
//! Both factors are linear models whose coefficients the engine treats as
//! data, never as hard-coded formula constants. Defaults are transcribed
//! from the bankruptcy-prediction literature (Ohlson 1980 for the O-score;
//! Campbell, Hilscher and Szilagyi 2008 for the dynamic-logit distress
//! model). A TOML or JSON file with `[oscore]` and `[distress]` sections
//! overrides them; omitting a section leaves the corresponding factor
//! without coefficients, so it is skipped with a warning.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// O-score term coefficients, in term order: intercept, ln(ta), tl/ta,
/// (ca-cl)/ta, cl/ca, 1[tl>ta], ni/ta, ffo/tl, 1[ni<0 two years], and the
/// scaled change in net income.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OScoreCoefficients {
    pub intercept: f64,
    pub size: f64,
    pub leverage: f64,
    pub working_capital: f64,
    pub current_ratio: f64,
    pub negative_equity: f64,
    pub profitability: f64,
    pub funds_from_operations: f64,
    pub two_year_loss: f64,
    pub income_change: f64,
    /// When `ffo` is not available, derive it as `ni + dp` instead (the
    /// requirement on `ffo` becomes a requirement on `dp`).
    pub ffo_from_dp: bool,
}

impl Default for OScoreCoefficients {
    fn default() -> Self {
        OScoreCoefficients {
            intercept: -1.32,
            size: -0.407,
            leverage: 6.03,
            working_capital: -1.43,
            current_ratio: 0.0757,
            negative_equity: -1.72,
            profitability: -2.37,
            funds_from_operations: -1.83,
            two_year_loss: 0.285,
            income_change: -0.521,
            ffo_from_dp: false,
        }
    }
}

/// Distress logit coefficients, one per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistressCoefficients {
    pub intercept: f64,
    /// ni / (mv + tl)
    pub profitability: f64,
    /// tl / (mv + tl)
    pub leverage: f64,
    /// Geometrically weighted 12-month log excess return over the index.
    pub excess_return: f64,
    /// Annualized 3-month return volatility.
    pub volatility: f64,
    /// ln(mv / total index market value)
    pub relative_size: f64,
    /// cash / (mv + tl)
    pub cash: f64,
    /// mv / (ta - tl)
    pub market_to_book: f64,
    /// ln(min(price, price_cap))
    pub price: f64,
    /// Cap applied to the price level before the log.
    pub price_cap: f64,
}

impl Default for DistressCoefficients {
    fn default() -> Self {
        DistressCoefficients {
            intercept: -9.16,
            profitability: -20.26,
            leverage: 1.42,
            excess_return: -7.13,
            volatility: 1.41,
            relative_size: -0.045,
            cash: -2.13,
            market_to_book: 0.075,
            price: -0.058,
            price_cap: 15.0,
        }
    }
}

fn finite_all(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl OScoreCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.intercept,
            self.size,
            self.leverage,
            self.working_capital,
            self.current_ratio,
            self.negative_equity,
            self.profitability,
            self.funds_from_operations,
            self.two_year_loss,
            self.income_change,
        ];
        if !finite_all(&all) {
            return Err(Error::Param("oscore coefficients must be finite".into()));
        }
        Ok(())
    }
}

impl DistressCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.intercept,
            self.profitability,
            self.leverage,
            self.excess_return,
            self.volatility,
            self.relative_size,
            self.cash,
            self.market_to_book,
            self.price,
            self.price_cap,
        ];
        if !finite_all(&all) || self.price_cap <= 0.0 {
            return Err(Error::Param("distress coefficients must be finite, price_cap > 0".into()));
        }
        Ok(())
    }
}

/// Coefficient file content. Missing sections stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub oscore: Option<OScoreCoefficients>,
    pub distress: Option<DistressCoefficients>,
}

impl CoefficientsConfig {
    /// Both sections populated with the literature defaults.
    pub fn default_full() -> Self {
        CoefficientsConfig {
            oscore: Some(OScoreCoefficients::default()),
            distress: Some(DistressCoefficients::default()),
        }
    }

    /// Load from TOML or JSON (by extension).
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: CoefficientsConfig =
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                serde_json::from_str(&text)
                    .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
            } else {
                toml::from_str(&text)
                    .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
            };
        if let Some(oscore) = &config.oscore {
            oscore.validate()?;
        }
        if let Some(distress) = &config.distress {
            distress.validate()?;
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("coefficients serialize")
    }
}
