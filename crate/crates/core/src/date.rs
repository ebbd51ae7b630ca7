//! Calendar arithmetic for monthly panels.
//!
//! Month shifts preserve end-of-month alignment: shifting the last day of a
//! month always lands on the last day of the target month, so month-end
//! panel dates stay joinable under any month lag. For non-terminal days the
//! day-of-month is kept, clamped to the target month's length.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Observation frequency of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Monthly,
    Quarterly,
    Annual,
}

/// Last calendar day of the month containing `(year, month)`.
pub fn last_day_of_month(year: i32, month: u32) -> NaiveDate {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .expect("valid month")
        .pred_opt()
        .expect("dates stay in range")
}

/// Whether `date` is the last calendar day of its month.
pub fn is_month_end(date: NaiveDate) -> bool {
    date == last_day_of_month(date.year(), date.month())
}

/// Shift `date` by `delta` calendar months (negative = into the past).
///
/// If `date` is the last day of its month, the result is the last day of the
/// target month (Feb 28 − 1mo = Jan 31). Otherwise the day-of-month is
/// preserved, clamped to the target month's length (Mar 31 − 1mo = Feb 28
/// still holds because the 31st is terminal).
pub fn shift_months(date: NaiveDate, delta: i32) -> NaiveDate {
    let total = date.year() * 12 + date.month() as i32 - 1 + delta;
    let year = total.div_euclid(12);
    let month = (total.rem_euclid(12) + 1) as u32;
    let eom = last_day_of_month(year, month);
    if is_month_end(date) {
        eom
    } else {
        let day = date.day().min(eom.day());
        NaiveDate::from_ymd_opt(year, month, day).expect("clamped day is valid")
    }
}

/// Label of the period containing `date` at frequency `freq`: the last
/// calendar day of that period (the date itself for daily).
pub fn period_end(date: NaiveDate, freq: Frequency) -> NaiveDate {
    match freq {
        Frequency::Daily => date,
        Frequency::Monthly => last_day_of_month(date.year(), date.month()),
        Frequency::Quarterly => {
            let quarter_end_month = ((date.month() - 1) / 3) * 3 + 3;
            last_day_of_month(date.year(), quarter_end_month)
        }
        Frequency::Annual => NaiveDate::from_ymd_opt(date.year(), 12, 31).expect("valid"),
    }
}
