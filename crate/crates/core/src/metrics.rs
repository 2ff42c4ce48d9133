//! Per-step robustness verdicts and campaign-level aggregates.

use crate::error::{Error, Result};
use crate::star::Interval;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub time_index: usize,
    pub estimated: Interval,
    pub allowable: Interval,
    pub rv: u8,
    pub po: f64,
}

impl StepVerdict {
    pub fn new(time_index: usize, estimated: Interval, allowable: Interval) -> Self {
        StepVerdict {
            time_index,
            estimated,
            allowable,
            rv: robustness_value(&estimated, &allowable),
            po: percentage_overlap(&estimated, &allowable),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub time_index: usize,
    pub slope_lower: f64,
    pub slope_upper: f64,
    pub pass: bool,
}

/// 1 when the estimated range sits inside the allowable range.
pub fn robustness_value(estimated: &Interval, allowable: &Interval) -> u8 {
    u8::from(estimated.lower >= allowable.lower && estimated.upper <= allowable.upper)
}

/// Fraction of the estimated range covered by the allowable range. A
/// zero-width estimate scores 1 inside the allowable range and 0 outside.
pub fn percentage_overlap(estimated: &Interval, allowable: &Interval) -> f64 {
    let width = estimated.width();
    if width <= 0.0 {
        return if allowable.contains(estimated.lower) { 1.0 } else { 0.0 };
    }
    let overlap = estimated.intersect(allowable).map_or(0.0, |i| i.width());
    (overlap / width).clamp(0.0, 1.0)
}

/// PR: percent of steps with RV = 1.
pub fn percentage_robustness(verdicts: &[StepVerdict]) -> Result<f64> {
    if verdicts.is_empty() {
        return Err(Error::invalid("no verdicts"));
    }
    let robust = verdicts.iter().filter(|v| v.rv == 1).count();
    Ok(100.0 * robust as f64 / verdicts.len() as f64)
}

/// POR: mean PO as a percent.
pub fn percentage_overlap_robustness(verdicts: &[StepVerdict]) -> Result<f64> {
    if verdicts.is_empty() {
        return Err(Error::invalid("no verdicts"));
    }
    Ok(100.0 * verdicts.iter().map(|v| v.po).sum::<f64>() / verdicts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllowMode {
    /// `actual · (1 ± width/100)`
    RelativePercent,
    /// `actual ± width`
    AbsoluteOffset,
}

pub fn allowable_bounds(actual: f64, mode: AllowMode, width: f64, clamp_at_zero: bool) -> Result<Interval> {
    if width.is_nan() || width < 0.0 {
        return Err(Error::invalid(format!("allowable width {width} must be non-negative")));
    }
    let (a, b) = match mode {
        AllowMode::RelativePercent => (actual * (1.0 - width / 100.0), actual * (1.0 + width / 100.0)),
        AllowMode::AbsoluteOffset => (actual - width, actual + width),
    };
    let (mut lower, upper) = (a.min(b), a.max(b));
    if clamp_at_zero {
        lower = lower.max(0.0);
    }
    Interval::new(lower.min(upper), upper)
}

/// Least-squares slope of `ys` against `0, 1, ..`.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}

/// Fits lines to the last `k` lower and upper bounds. Passes when both
/// slopes are at most `slope_tol`. The verdict's `time_index` is the
/// position of the newest entry in `history`.
pub fn monotonicity_check(history: &[Interval], k: usize, slope_tol: f64) -> Result<MonotonicityVerdict> {
    if k < 2 {
        return Err(Error::invalid(format!("monotonicity window k = {k} must be at least 2")));
    }
    if history.len() < k {
        return Err(Error::invalid(format!(
            "monotonicity window k = {k} needs at least {k} bounds, got {}",
            history.len()
        )));
    }
    let tail = &history[history.len() - k..];
    let lows: Vec<f64> = tail.iter().map(|i| i.lower).collect();
    let highs: Vec<f64> = tail.iter().map(|i| i.upper).collect();
    let slope_lower = ls_slope(&lows);
    let slope_upper = ls_slope(&highs);
    Ok(MonotonicityVerdict {
        time_index: history.len() - 1,
        slope_lower,
        slope_upper,
        pass: slope_lower <= slope_tol && slope_upper <= slope_tol,
    })
}
