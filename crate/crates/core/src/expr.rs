//! Row-wise expressions over panel columns.
//!
//! Simple factor bodies build an [`Expr`] through an [`ExprCtx`], which
//! resolves column references against the factor's declared requirements
//! and records lag requests with the batch's [`OffsetRegistry`]. No data is
//! touched until the expression is evaluated against the materialized frame.
//!
//! Null semantics are three-valued: any arithmetic on null yields null.
//! Two guards encode the degenerate-input rules shared by factor formulas:
//! division treats a non-positive denominator as missing (ratio
//! denominators are scale quantities: assets, shares, market value), and
//! `ln` of a non-positive argument is missing. Non-finite results
//! canonicalize to null when the evaluated column is stored.

use std::ops;

use crate::column::{encode, Column, NULL};
use crate::error::{Error, Result};
use crate::frame::PanelFrame;
use crate::lag::{Lag, OffsetKey, OffsetRegistry};
use crate::registry::Params;

/// A deferred row-wise computation over resolved columns.
#[derive(Debug, Clone)]
pub enum Expr {
    /// Reference into the context's resolved column list.
    Col(usize),
    Lit(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Null when the denominator is null, zero, or negative.
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// Natural log; null for non-positive arguments.
    Ln(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn lit(v: f64) -> Expr {
        Expr::Lit(v)
    }

    pub fn ln(self) -> Expr {
        Expr::Ln(Box::new(self))
    }

    pub fn abs(self) -> Expr {
        Expr::Abs(Box::new(self))
    }

    fn eval(&self, cols: &[&[f64]], row: usize) -> f64 {
        match self {
            Expr::Col(i) => cols[*i][row],
            Expr::Lit(v) => *v,
            Expr::Add(a, b) => a.eval(cols, row) + b.eval(cols, row),
            Expr::Sub(a, b) => a.eval(cols, row) - b.eval(cols, row),
            Expr::Mul(a, b) => a.eval(cols, row) * b.eval(cols, row),
            Expr::Div(a, b) => {
                let den = b.eval(cols, row);
                if den > 0.0 {
                    a.eval(cols, row) / den
                } else {
                    NULL
                }
            }
            Expr::Neg(a) => -a.eval(cols, row),
            Expr::Ln(a) => {
                let x = a.eval(cols, row);
                if x > 0.0 {
                    x.ln()
                } else {
                    NULL
                }
            }
            Expr::Abs(a) => a.eval(cols, row).abs(),
        }
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

impl_binop!(Add, add, Add);
impl_binop!(Sub, sub, Sub);
impl_binop!(Mul, mul, Mul);
impl_binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Column resolution context handed to simple factor bodies.
///
/// `col` and `lagged` validate that the referenced base column is part of
/// the factor's declared requirements and exists in the frame; `lagged`
/// additionally records the request with the shared offset registry.
pub struct ExprCtx<'a> {
    factor: &'a str,
    requires: &'a [String],
    frame: &'a PanelFrame,
    registry: &'a mut OffsetRegistry,
    params: &'a Params,
    resolved: Vec<String>,
}

impl<'a> ExprCtx<'a> {
    pub(crate) fn new(
        factor: &'a str,
        requires: &'a [String],
        frame: &'a PanelFrame,
        registry: &'a mut OffsetRegistry,
        params: &'a Params,
    ) -> Self {
        ExprCtx { factor, requires, frame, registry, params, resolved: Vec::new() }
    }

    /// Contemporaneous value of a required column.
    pub fn col(&mut self, name: &str) -> Result<Expr> {
        self.lagged(name, Lag::months(0))
    }

    /// Value of a required column lagged by `lag` (as-of semantics).
    pub fn lagged(&mut self, name: &str, lag: Lag) -> Result<Expr> {
        if !self.requires.iter().any(|r| r == name) {
            return Err(Error::Definition { factor: self.factor.to_string(), column: name.to_string() });
        }
        let resolved = self.registry.request(self.frame, OffsetKey::new(name, lag))?;
        Ok(Expr::Col(self.resolve(resolved)))
    }

    /// Merged parameter value (call-site overrides applied over defaults).
    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Param(format!("factor `{}` has no parameter `{name}`", self.factor)))
    }

    /// A parameter that must be a non-negative whole number of months.
    pub fn lag_param(&self, name: &str) -> Result<u32> {
        let v = self.param(name)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::Param(format!(
                "factor `{}` parameter `{name}` must be a non-negative whole number of months, got {v}",
                self.factor
            )));
        }
        Ok(v as u32)
    }

    fn resolve(&mut self, name: String) -> usize {
        if let Some(i) = self.resolved.iter().position(|n| *n == name) {
            i
        } else {
            self.resolved.push(name);
            self.resolved.len() - 1
        }
    }

    pub(crate) fn into_resolved(self) -> Vec<String> {
        self.resolved
    }
}

/// Evaluate `expr` row-by-row against `frame`, with `Expr::Col(i)` bound to
/// `resolved[i]`. Non-finite results are stored as null.
pub fn evaluate(expr: &Expr, frame: &PanelFrame, resolved: &[String]) -> Result<Column> {
    let mut cols: Vec<&[f64]> = Vec::with_capacity(resolved.len());
    for name in resolved {
        cols.push(frame.column(name)?.raw());
    }
    let n = frame.n_rows();
    let mut out = Vec::with_capacity(n);
    for row in 0..n {
        out.push(encode(expr.eval(&cols, row)));
    }
    Ok(Column::from_values(out))
}
