//! Ohlson-style O-score: a static distress indicator combining accounting
//! ratios into a linear score (higher means more distressed).

use std::sync::Arc;

use crate::column::Column;
use crate::error::Result;
use crate::frame::PanelFrame;
use crate::lag::{Lag, OffsetKey};
use crate::registry::{AdvancedFactor, Extras, FactorResult, Params};

use super::coeffs::OScoreCoefficients;

/// Ratio with the degenerate-denominator convention used by the score's
/// terms: positive denominator divides normally, an exactly-zero numerator
/// over a zero denominator counts as "no signal" (0), anything else is
/// missing. Negative denominators are missing: these are scale quantities.
fn ratio(num: f64, den: f64) -> Option<f64> {
    if num.is_nan() || den.is_nan() {
        None
    } else if den > 0.0 {
        Some(num / den)
    } else if den == 0.0 && num == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

pub struct OScore {
    coeffs: Option<OScoreCoefficients>,
}

impl OScore {
    pub fn new(coeffs: Option<OScoreCoefficients>) -> Self {
        OScore { coeffs }
    }

    fn score_row(
        c: &OScoreCoefficients,
        ta: f64,
        tl: f64,
        ca: f64,
        cl: f64,
        ni: f64,
        ffo: f64,
        ni_lag: f64,
    ) -> Option<f64> {
        if [ta, tl, ca, cl, ni, ffo, ni_lag].iter().any(|v| v.is_nan()) {
            return None;
        }
        let size = if ta > 0.0 { ta.ln() } else { return None };
        let leverage = ratio(tl, ta)?;
        let working_capital = ratio(ca - cl, ta)?;
        let current_ratio = ratio(cl, ca)?;
        let negative_equity = if tl > ta { 1.0 } else { 0.0 };
        let profitability = ratio(ni, ta)?;
        let funds_from_operations = ratio(ffo, tl)?;
        let two_year_loss = if ni < 0.0 && ni_lag < 0.0 { 1.0 } else { 0.0 };
        let income_change = ratio(ni - ni_lag, ni.abs() + ni_lag.abs())?;

        Some(
            c.intercept
                + c.size * size
                + c.leverage * leverage
                + c.working_capital * working_capital
                + c.current_ratio * current_ratio
                + c.negative_equity * negative_equity
                + c.profitability * profitability
                + c.funds_from_operations * funds_from_operations
                + c.two_year_loss * two_year_loss
                + c.income_change * income_change,
        )
    }
}

impl AdvancedFactor for OScore {
    fn lag_requests(&self, _params: &Params) -> Vec<OffsetKey> {
        vec![OffsetKey::new("ni", Lag::months(12))]
    }

    fn required_columns(&self, base: &[String]) -> Vec<String> {
        match &self.coeffs {
            // With the dp proxy the requirement on ffo becomes one on dp.
            Some(c) if c.ffo_from_dp => base
                .iter()
                .map(|col| if col == "ffo" { "dp".to_string() } else { col.clone() })
                .collect(),
            _ => base.to_vec(),
        }
    }

    fn missing_inputs(&self, _extras: &Extras) -> Vec<String> {
        if self.coeffs.is_none() {
            vec!["coeffs:oscore".to_string()]
        } else {
            Vec::new()
        }
    }

    fn compute(
        &self,
        frame: &PanelFrame,
        _params: &Params,
        _extras: &Extras,
    ) -> Result<FactorResult> {
        let c = self.coeffs.as_ref().expect("requirements checked before compute");
        let ta = frame.column("ta")?.raw();
        let tl = frame.column("tl")?.raw();
        let ca = frame.column("ca")?.raw();
        let cl = frame.column("cl")?.raw();
        let ni = frame.column("ni")?.raw();
        let ni_lag = frame
            .column(&OffsetKey::new("ni", Lag::months(12)).lagged_name())?
            .raw();
        let (ffo_col, dp_proxy): (&[f64], bool) = if c.ffo_from_dp {
            (frame.column("dp")?.raw(), true)
        } else {
            (frame.column("ffo")?.raw(), false)
        };

        let mut values = Vec::with_capacity(frame.n_rows());
        for row in 0..frame.n_rows() {
            let ffo = if dp_proxy { ni[row] + ffo_col[row] } else { ffo_col[row] };
            values.push(Self::score_row(
                c, ta[row], tl[row], ca[row], cl[row], ni[row], ffo, ni_lag[row],
            ));
        }
        FactorResult::aligned("o_score", Arc::clone(frame.keys()), Column::from_opts(values))
    }
}
