use std::fmt::Write as _;

use signlr_core::metrics::{LinearFit, MetricSeries};

use super::opt_field;

pub const SERIES_HEADER: &str = "method,seed,n,cos,fitted,residual";
pub const SUMMARY_HEADER: &str = "method,seed,acc,sta,slope";

/// Appends one row per grid point: the cosine, the fitted line at `n`, and
/// their difference.
/// Without a fit (fewer than two points) the last two fields stay empty.
pub fn series_rows(out: &mut String, method: &str, seed: u64, series: &MetricSeries, fit: Option<&LinearFit>) {
    for &(n, cos) in series.points() {
        match fit {
            Some(fit) => {
                let fitted = fit.at(n as f64);
                let _ = writeln!(out, "{method},{seed},{n},{cos},{fitted},{}", cos - fitted);
            }
            None => {
                let _ = writeln!(out, "{method},{seed},{n},{cos},,");
            }
        }
    }
}

/// A summary line. `seed` is a seed number, `median`, or `self` for the
/// oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub seed: String,
    pub acc: f64,
    pub sta: Option<f64>,
    pub slope: Option<f64>,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.method, r.seed, r.acc, opt_field(r.sta), opt_field(r.slope));
    }
    out
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
