//! Small statistics helpers shared by the experiments.

use serde::Serialize;

use crate::error::{invalid, Result};

/// `out[t] = mean(series[..=t])`.
pub fn cumulative_average(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return invalid("cumulative average of an empty series");
    }
    let mut sum = 0.0;
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sum += x;
            sum / (i + 1) as f64
        })
        .collect())
}

/// Binomial standard error of a proportion.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Two-sided 95% normal-approximation interval half-width.
pub fn ci95(p: f64, n: usize) -> f64 {
    1.96 * binomial_se(p, n)
}

/// Box-plot summary: quartiles by linear interpolation between order
/// statistics, whiskers at the most extreme points within 1.5 IQR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxSummary {
    pub samples: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: usize,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_summary(values: &[f64]) -> Result<BoxSummary> {
    if values.is_empty() {
        return invalid("box summary of no samples");
    }
    if values.iter().any(|v| v.is_nan()) {
        return invalid("box summary of NaN samples");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v >= lo_fence && v <= hi_fence)
        .collect();
    Ok(BoxSummary {
        samples: sorted.len(),
        min: sorted[0],
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: sorted[sorted.len() - 1],
        iqr,
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers: sorted.len() - inside.len(),
    })
}
