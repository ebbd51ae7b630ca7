//! The eleven Stambaugh–Yuan mispricing factors.
//!
//! All factors are computed per (asset, month) on a monthly panel; lagged
//! inputs resolve through the deferred as-of machinery and therefore follow
//! its at-or-before semantics. Zero or negative denominators yield null
//! everywhere, as do incomplete return windows: a month with a null return
//! nulls any momentum or issuance window containing it.
//!
//! Nine factors are single row-wise expressions; distress and the O-score
//! carry their own multi-step bodies and read their model coefficients from
//! configuration (see [`coeffs`]).

pub mod coeffs;
mod distress;
mod oscore;

pub use coeffs::{CoefficientsConfig, DistressCoefficients, OScoreCoefficients};
pub use distress::Distress;
pub use oscore::OScore;

use crate::error::Result;
use crate::expr::Expr;
use crate::frame::PanelFrame;
use crate::lag::Lag;
use crate::registry::{FactorBody, FactorDef, FactorKind, FactorRegistry};
use crate::schema::ACCOUNTING_COLUMNS;

/// Name under which the market-index auxiliary table must be supplied
/// (columns: `ret`, `total_mv`).
pub const INDEX_TABLE: &str = "index";

/// Names of the eleven factors, registration order.
pub const FACTOR_NAMES: [&str; 11] = [
    "net_stock_issues",
    "composite_equity_issues",
    "accruals",
    "net_operating_assets",
    "asset_growth",
    "investment_to_assets",
    "distress",
    "o_score",
    "momentum",
    "gross_profitability",
    "roa",
];

/// Register all eleven factors. Coefficient sections absent from `config`
/// leave the corresponding factor registered but unrunnable; a compute pass
/// then skips it with a warning naming the missing section.
pub fn register_all(registry: &mut FactorRegistry, config: &CoefficientsConfig) -> Result<()> {
    // Annual log change in split-adjusted shares outstanding. Issuance that
    // is not driven by performance tends to precede low returns.
    registry.register(
        FactorDef::new("net_stock_issues", FactorKind::Simple).requires(["shares"]),
        FactorBody::simple(|ctx, _| {
            let now = ctx.col("shares")?;
            let year_ago = ctx.lagged("shares", Lag::months(12))?;
            Ok((now / year_ago).ln())
        }),
    )?;

    // Log change in market equity over the window minus the cumulative log
    // return over the same window: valuation growth not explained by
    // performance. The window is parameterizable (12 months by default, 60
    // for the five-year variant).
    registry.register(
        FactorDef::new("composite_equity_issues", FactorKind::Simple)
            .requires(["mv", "ret"])
            .default_param("lag", 12.0),
        FactorBody::simple(|ctx, _| {
            let window = ctx.lag_param("lag")?;
            if window < 1 {
                return Err(crate::error::Error::Param(
                    "composite_equity_issues lag must be >= 1 month".into(),
                ));
            }
            let mv_growth =
                (ctx.col("mv")? / ctx.lagged("mv", Lag::months(window))?).ln();
            let mut cum_ret = (ctx.col("ret")? + Expr::lit(1.0)).ln();
            for k in 1..window {
                cum_ret = cum_ret + (ctx.lagged("ret", Lag::months(k))? + Expr::lit(1.0)).ln();
            }
            Ok(mv_growth - cum_ret)
        }),
    )?;

    // Change in noncash working capital minus depreciation, over average
    // total assets. Deltas are year-over-year.
    registry.register(
        FactorDef::new("accruals", FactorKind::Simple)
            .requires(["ca", "cash", "cl", "std", "txp", "dp", "ta"]),
        FactorBody::simple(|ctx, _| {
            let lag = Lag::months(12);
            let delta = |ctx: &mut crate::expr::ExprCtx, name: &str| -> Result<Expr> {
                Ok(ctx.col(name)? - ctx.lagged(name, lag)?)
            };
            let d_ca = delta(ctx, "ca")?;
            let d_cash = delta(ctx, "cash")?;
            let d_cl = delta(ctx, "cl")?;
            let d_std = delta(ctx, "std")?;
            let d_txp = delta(ctx, "txp")?;
            let dp = ctx.col("dp")?;
            let avg_ta =
                (ctx.col("ta")? + ctx.lagged("ta", lag)?) / Expr::lit(2.0);
            Ok(((d_ca - d_cash) - (d_cl - d_std - d_txp) - dp) / avg_ta)
        }),
    )?;

    // Operating assets minus operating liabilities, over lagged total
    // assets.
    registry.register(
        FactorDef::new("net_operating_assets", FactorKind::Simple)
            .requires(["ta", "cash", "std", "ltd", "ceq"]),
        FactorBody::simple(|ctx, _| {
            let operating_assets = ctx.col("ta")? - ctx.col("cash")?;
            let operating_liabilities =
                ctx.col("ta")? - ctx.col("std")? - ctx.col("ltd")? - ctx.col("ceq")?;
            Ok((operating_assets - operating_liabilities)
                / ctx.lagged("ta", Lag::months(12))?)
        }),
    )?;

    // Year-over-year growth rate in total assets.
    registry.register(
        FactorDef::new("asset_growth", FactorKind::Simple).requires(["ta"]),
        FactorBody::simple(|ctx, _| {
            Ok(ctx.col("ta")? / ctx.lagged("ta", Lag::months(12))? - Expr::lit(1.0))
        }),
    )?;

    // Annual change in gross PP&E plus inventory, over lagged total assets.
    registry.register(
        FactorDef::new("investment_to_assets", FactorKind::Simple)
            .requires(["ppegt", "invt", "ta"]),
        FactorBody::simple(|ctx, _| {
            let lag = Lag::months(12);
            let d_ppegt = ctx.col("ppegt")? - ctx.lagged("ppegt", lag)?;
            let d_invt = ctx.col("invt")? - ctx.lagged("invt", lag)?;
            Ok((d_ppegt + d_invt) / ctx.lagged("ta", lag)?)
        }),
    )?;

    registry.register(
        FactorDef::new("distress", FactorKind::Advanced)
            .requires(["mv", "ret", "price", "ni", "ta", "tl", "cash"]),
        FactorBody::advanced(Distress::new(config.distress.clone())),
    )?;

    registry.register(
        FactorDef::new("o_score", FactorKind::Advanced)
            .requires(["ta", "tl", "ca", "cl", "ni", "ffo"]),
        FactorBody::advanced(OScore::new(config.oscore.clone())),
    )?;

    // Compound return over months t-lag .. t-2, skipping the most recent
    // month. The window must be complete: any missing month nulls the
    // value rather than compounding a partial window.
    registry.register(
        FactorDef::new("momentum", FactorKind::Simple)
            .requires(["ret"])
            .default_param("lag", 12.0),
        FactorBody::simple(|ctx, _| {
            let window = ctx.lag_param("lag")?;
            if window < 2 {
                return Err(crate::error::Error::Param(
                    "momentum lag must be >= 2 months".into(),
                ));
            }
            let mut compounded = ctx.lagged("ret", Lag::months(2))? + Expr::lit(1.0);
            for k in 3..=window {
                compounded =
                    compounded * (ctx.lagged("ret", Lag::months(k))? + Expr::lit(1.0));
            }
            Ok(compounded - Expr::lit(1.0))
        }),
    )?;

    // Gross profit over contemporaneous total assets.
    registry.register(
        FactorDef::new("gross_profitability", FactorKind::Simple).requires(["gp", "ta"]),
        FactorBody::simple(|ctx, _| Ok(ctx.col("gp")? / ctx.col("ta")?)),
    )?;

    // Quarterly income before extraordinary items over lagged total assets.
    registry.register(
        FactorDef::new("roa", FactorKind::Simple)
            .requires(["ibq", "ta"])
            .default_param("lag", 3.0),
        FactorBody::simple(|ctx, _| {
            let lag = ctx.lag_param("lag")?;
            Ok(ctx.col("ibq")? / ctx.lagged("ta", Lag::months(lag))?)
        }),
    )?;

    Ok(())
}

/// Fresh registry with all eleven factors installed.
pub fn registry(config: &CoefficientsConfig) -> Result<FactorRegistry> {
    let mut reg = FactorRegistry::new();
    register_all(&mut reg, config)?;
    Ok(reg)
}

/// Apply a global accounting-availability lag: every accounting column is
/// replaced by its value as of `months` before the row date, modeling the
/// delay between a fiscal period end and the figures becoming public.
/// Market columns (`mv`, `ret`, `price`, `shares`) are untouched. A lag of
/// zero is the identity.
pub fn apply_accounting_lag(frame: &PanelFrame, months: u32) -> Result<PanelFrame> {
    let columns: Vec<String> = ACCOUNTING_COLUMNS
        .iter()
        .filter(|c| frame.has_column(c))
        .map(|c| c.to_string())
        .collect();
    crate::lag::shift_columns_in_place(frame, &columns, months)
}
