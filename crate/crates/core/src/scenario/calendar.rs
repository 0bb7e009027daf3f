//! Masked calendar labels.
//!
//! Month `m` is shown as `"<Mon> <year token>"`. The year token is `"2"`
//! followed by the zero-based year index left-padded with `x` to three
//! characters: year 0 is `2xx0`, year 9 is `2xx9`, year 10 is `2x10`. No
//! token is ever four decimal digits, so a true calendar year cannot leak
//! through a label.

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarMask {
    /// Month-of-year of month index 0 (0 = Jan).
    pub start_month_of_year: u32,
}

pub fn anonymize_label(
    month: u32,
    horizon: u32,
    mask: &CalendarMask,
) -> Result<String, ScenarioError> {
    if month >= horizon {
        return Err(ScenarioError::OutOfRange { month, horizon });
    }
    let absolute = mask.start_month_of_year % 12 + month;
    let name = MONTHS[(absolute % 12) as usize];
    let year = (absolute / 12).to_string();
    let pad = 3usize.saturating_sub(year.len());
    Ok(format!("{name} 2{}{year}", "x".repeat(pad)))
}
