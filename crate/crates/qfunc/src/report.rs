use std::fmt::Write as _;
use std::path::Path;

use qfunc_core::adaptive::LMode;
use qfunc_core::sim::{EstimatorRule, ExperimentReport};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "n,mean_error,sd_error,rmse,coverage,mean_h,ks";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn l_mode_str(l: LMode) -> String {
    match l {
        LMode::Given(l) => format!("given({l})"),
        LMode::Estimated => "estimated".into(),
    }
}

/// One row per `n` (failed rows keep `n` and leave the rest empty), then
/// `#` metadata.
pub fn to_csv(report: &ExperimentReport) -> String {
    let plan = &report.plan;
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        match &row.stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.n,
                    s.mean_error,
                    s.sd_error,
                    s.rmse,
                    s.ci_coverage,
                    s.mean_selected_h,
                    opt(s.ks_statistic)
                );
            }
            None => {
                let _ = writeln!(out, "{},,,,,,", row.n);
            }
        }
    }
    let mode = match plan.estimator {
        EstimatorRule::FixedH { alpha, c } => format!("fixed_h(alpha={alpha},c={c})"),
        EstimatorRule::Adaptive(cfg) => format!(
            "adaptive(grid={},delta={},rho={},ell_scale={},L={})",
            match cfg.mode {
                qfunc_core::GridMode::Paper => "paper",
                qfunc_core::GridMode::Practical => "practical",
            },
            cfg.delta,
            cfg.rho,
            cfg.ell_scale,
            l_mode_str(cfg.l_mode)
        ),
    };
    let _ = writeln!(out, "# mode: {mode}");
    let _ = writeln!(out, "# seed: {}", plan.master_seed);
    let _ = writeln!(out, "# kernel: {}", plan.kernel);
    let _ = writeln!(out, "# density: {}", plan.density);
    let _ = writeln!(out, "# replicates: {}", plan.replicates);
    let _ = writeln!(out, "# ci_level: {}", plan.ci_level);
    let _ = writeln!(out, "# standardization: {}", report.standardization);
    if let Some(r) = report.rate {
        let _ = writeln!(out, "# rate_slope: {} (stderr {})", r.slope, r.stderr);
    }
    if let Some(r) = report.rate_log_adjusted {
        let _ = writeln!(out, "# rate_slope_log_adjusted: {} (stderr {})", r.slope, r.stderr);
    }
    for row in &report.rows {
        if let Some(e) = &row.error {
            let _ = writeln!(out, "# n={}: error: {e}", row.n);
        }
        if let Some(reason) = row.stats.as_ref().and_then(|s| s.ks_omitted_reason.as_ref()) {
            let _ = writeln!(out, "# n={}: ks omitted: {reason}", row.n);
        }
    }
    out
}

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(report: &ExperimentReport, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(report)),
        Format::Json => to_json(report),
    }
}

pub fn emit(report: &ExperimentReport, format: Format, path: &Path) -> Result<()> {
    let text = render(report, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
