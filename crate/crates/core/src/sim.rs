//! Deterministic Monte Carlo experiments: per-replicate seeding, one
//! replicate's estimate, ordered aggregation into report rows, log-log rate
//! fits and the Kolmogorov–Smirnov normality statistic.
//!
//! Replicates are independent given [`replicate_seed`], and rows only ever
//! aggregate outcomes in replicate-index order, so any parallel schedule
//! that collects outcomes by index reproduces [`run_experiment`] exactly.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_estimate, GridConfig, GridMode, LMode};
use crate::densities::Density;
use crate::estimators::{estimate_fixed, Method};
use crate::kernels::Kernel;
use crate::special::{kolmogorov_sf, normal_cdf};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// How each replicate chooses its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorRule {
    /// `h = c · n^{−2/(4α+1)}`.
    FixedH {
        alpha: f64,
        c: f64,
    },
    Adaptive(GridConfig),
}

impl EstimatorRule {
    pub fn fixed_bandwidth(&self, n: usize) -> Option<f64> {
        match *self {
            EstimatorRule::FixedH { alpha, c } => Some(c * libm::pow(n as f64, -2.0 / (4.0 * alpha + 1.0))),
            EstimatorRule::Adaptive(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub density: Density,
    pub kernel: Kernel,
    pub estimator: EstimatorRule,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub ci_level: f64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::param("replicates must be >= 2"));
        }
        if self.n_list.is_empty() {
            return Err(Error::param("n_list must not be empty"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("n_list must be strictly increasing"));
        }
        if self.n_list[0] < 2 {
            return Err(Error::SampleTooSmall(self.n_list[0]));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::param("ci_level must lie in (0, 1)"));
        }
        match self.estimator {
            EstimatorRule::FixedH { alpha, c } => {
                if !(alpha > 0.0 && alpha.is_finite() && c > 0.0 && c.is_finite()) {
                    return Err(Error::param("fixed_h needs alpha > 0 and c > 0"));
                }
            }
            EstimatorRule::Adaptive(cfg) => cfg.validate()?,
        }
        Ok(())
    }
}

/// SplitMix64 output function.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for replicate `r` at sample size `n`.
pub fn replicate_seed(master_seed: u64, n: usize, r: usize) -> u64 {
    mix64(mix64(mix64(master_seed) ^ n as u64) ^ r as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    /// `θ̂ − ∫f₀²`
    pub error: f64,
    /// `√n · error / (2τ)` with the true `τ`, when `0 < τ² < ∞`.
    pub z: Option<f64>,
    /// Whether the `τ̂²`-based interval covers `∫f₀²`.
    pub covered: bool,
    pub h: f64,
    pub fallback: bool,
}

/// Draw replicate `r` at size `n` and estimate.
pub fn run_replicate(plan: &ExperimentPlan, n: usize, r: usize) -> Result<ReplicateOutcome> {
    let sample = plan.density.sample(n, replicate_seed(plan.master_seed, n, r))?;
    let (est, fallback) = match plan.estimator {
        EstimatorRule::FixedH { .. } => {
            let h = plan.estimator.fixed_bandwidth(n).unwrap_or(f64::NAN);
            (estimate_fixed(&sample, plan.kernel, h, Method::Tn, plan.ci_level)?, false)
        }
        EstimatorRule::Adaptive(cfg) => {
            let (est, trace) = adaptive_estimate(&sample, plan.kernel, &cfg, plan.ci_level)?;
            (est, trace.fallback)
        }
    };
    let theta = plan.density.theta2();
    let tau_sq = plan.density.tau_sq();
    let error = est.theta_hat - theta;
    let z = (tau_sq > 0.0 && tau_sq.is_finite()).then(|| libm::sqrt(n as f64) * error / (2.0 * libm::sqrt(tau_sq)));
    Ok(ReplicateOutcome { error, z, covered: est.ci_low <= theta && theta <= est.ci_high, h: est.bandwidth, fallback })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub h: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub mean_error: f64,
    /// Sample standard deviation (divisor `R − 1`).
    pub sd_error: f64,
    pub rmse: f64,
    pub ci_coverage: f64,
    pub mean_selected_h: f64,
    pub median_selected_h: f64,
    /// Counts per distinct selected bandwidth, largest bandwidth first.
    pub selected_h_histogram: Vec<HistogramBin>,
    pub fallback_rate: f64,
    pub ks_statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_omitted_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub n: usize,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<RowStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Aggregate outcomes (in replicate order) for one sample size.
pub fn summarize_row(plan: &ExperimentPlan, n: usize, outcomes: &[Result<ReplicateOutcome>]) -> RowReport {
    let replicates = outcomes.len();
    if let Some(Err(e)) = outcomes.iter().find(|o| o.is_err()) {
        return RowReport { n, replicates, stats: None, error: Some(e.to_string()) };
    }
    let outs: Vec<ReplicateOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let r = outs.len() as f64;
    let mean_error = outs.iter().map(|o| o.error).collect::<NeumaierSum>().value() / r;
    let ss = outs.iter().map(|o| (o.error - mean_error) * (o.error - mean_error)).collect::<NeumaierSum>().value();
    let sd_error = libm::sqrt(ss / (r - 1.0));
    let rmse = libm::sqrt(outs.iter().map(|o| o.error * o.error).collect::<NeumaierSum>().value() / r);
    let ci_coverage = outs.iter().filter(|o| o.covered).count() as f64 / r;
    let hs: Vec<f64> = outs.iter().map(|o| o.h).collect();
    let mean_selected_h = crate::sum::sum(hs.iter().copied()) / r;
    let median_selected_h = median(hs.clone());
    let mut sorted = hs;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut selected_h_histogram: Vec<HistogramBin> = Vec::new();
    for h in sorted {
        match selected_h_histogram.last_mut() {
            Some(bin) if bin.h == h => bin.count += 1,
            _ => selected_h_histogram.push(HistogramBin { h, count: 1 }),
        }
    }
    let fallback_rate = outs.iter().filter(|o| o.fallback).count() as f64 / r;
    let tau_sq = plan.density.tau_sq();
    let (ks_statistic, ks_omitted_reason) = if tau_sq == 0.0 {
        (None, Some("tau_sq = 0".to_string()))
    } else if !tau_sq.is_finite() {
        (None, Some("tau_sq infinite".to_string()))
    } else {
        let z: Vec<f64> = outs.iter().filter_map(|o| o.z).collect();
        match ks_normality(&z) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    RowReport {
        n,
        replicates,
        stats: Some(RowStats {
            mean_error,
            sd_error,
            rmse,
            ci_coverage,
            mean_selected_h,
            median_selected_h,
            selected_h_histogram,
            fallback_rate,
            ks_statistic,
            ks_omitted_reason,
        }),
        error: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub rows: Vec<RowReport>,
    /// Slope of `log rmse` on `log n`.
    pub rate: Option<RateFit>,
    /// Slope of `log rmse` on `log(n/√log n)`.
    pub rate_log_adjusted: Option<RateFit>,
    pub grid_mode: Option<GridMode>,
    pub l_mode: Option<LMode>,
    /// `z` uses the true `τ²`; coverage uses the plug-in `τ̂²`.
    pub standardization: String,
    /// Not serialized: reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_time_s: Option<f64>,
}

/// Combine finished rows into a report and fit the rate over the rows that
/// succeeded.
pub fn assemble_report(plan: &ExperimentPlan, rows: Vec<RowReport>) -> ExperimentReport {
    let ok: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.stats.as_ref().map(|s| (r.n, s.rmse))).collect();
    let ns: Vec<usize> = ok.iter().map(|p| p.0).collect();
    let rmse: Vec<f64> = ok.iter().map(|p| p.1).collect();
    let rate = fit_rate(&ns, &rmse).ok();
    let rate_log_adjusted = fit_rate_log_adjusted(&ns, &rmse).ok();
    let (grid_mode, l_mode) = match plan.estimator {
        EstimatorRule::Adaptive(cfg) => (Some(cfg.mode), Some(cfg.l_mode)),
        EstimatorRule::FixedH { .. } => (None, None),
    };
    ExperimentReport {
        plan: plan.clone(),
        rows,
        rate,
        rate_log_adjusted,
        grid_mode,
        l_mode,
        standardization: "z: true tau_sq; coverage: tau_sq_hat".to_string(),
        wall_time_s: None,
    }
}

/// Sequential reference runner.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let rows = plan
        .n_list
        .iter()
        .map(|&n| {
            let outcomes: Vec<_> = (0..plan.replicates).map(|r| run_replicate(plan, n, r)).collect();
            summarize_row(plan, n, &outcomes)
        })
        .collect();
    Ok(assemble_report(plan, rows))
}

/// Ordinary least squares `y = a + b x`; returns `(b, se(b))`. The standard
/// error is 0 for two points.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("least squares needs two or more (x, y) pairs"));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if xs.len() == 2 {
        return Ok((slope, 0.0));
    }
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Ok((slope, libm::sqrt(rss / (m - 2.0) / sxx)))
}

fn check_rate_inputs(n_list: &[usize], rmse: &[f64]) -> Result<()> {
    if n_list.len() != rmse.len() || n_list.len() < 3 {
        return Err(Error::param("rate fit needs at least three (n, rmse) points"));
    }
    if let Some(r) = rmse.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::param(alloc::format!("rmse values must be positive, got {r}")));
    }
    Ok(())
}

/// Slope of `log rmse` against `log n`.
pub fn fit_rate(n_list: &[usize], rmse: &[f64]) -> Result<RateFit> {
    check_rate_inputs(n_list, rmse)?;
    let xs: Vec<f64> = n_list.iter().map(|&n| libm::log(n as f64)).collect();
    let ys: Vec<f64> = rmse.iter().map(|&r| libm::log(r)).collect();
    let (slope, stderr) = least_squares(&xs, &ys)?;
    Ok(RateFit { slope, stderr })
}

/// Slope of `log rmse` against `log(n/√log n)`.
pub fn fit_rate_log_adjusted(n_list: &[usize], rmse: &[f64]) -> Result<RateFit> {
    check_rate_inputs(n_list, rmse)?;
    let xs: Vec<f64> = n_list
        .iter()
        .map(|&n| {
            let nf = n as f64;
            libm::log(nf / libm::sqrt(libm::log(nf)))
        })
        .collect();
    let ys: Vec<f64> = rmse.iter().map(|&r| libm::log(r)).collect();
    let (slope, stderr) = least_squares(&xs, &ys)?;
    Ok(RateFit { slope, stderr })
}

/// `sup_x |F_m(x) − F(x)|` for the empirical CDF of `values`.
pub fn kolmogorov_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a one-sample KS distance with Stephens'
/// finite-sample correction.
pub fn kolmogorov_p_value(distance: f64, m: usize) -> f64 {
    let rm = libm::sqrt(m as f64);
    kolmogorov_sf((rm + 0.12 + 0.11 / rm) * distance)
}

/// KS distance between the empirical CDF of `z` and `Φ`.
pub fn ks_normality(z: &[f64]) -> Result<f64> {
    if z.len() < 20 {
        return Err(Error::param(alloc::format!("ks_normality needs at least 20 points, got {}", z.len())));
    }
    Ok(kolmogorov_distance(z, normal_cdf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_quantile;
    use approx::assert_relative_eq;

    fn plan(density: Density, estimator: EstimatorRule) -> ExperimentPlan {
        ExperimentPlan {
            density,
            kernel: Kernel::Gaussian,
            estimator,
            n_list: alloc::vec![100],
            replicates: 2,
            master_seed: 5,
            ci_level: 0.95,
        }
    }

    #[test]
    fn fit_rate_exact_power_laws() {
        let ns = [100usize, 400, 1600, 6400];
        let r: Vec<f64> = ns.iter().map(|&n| 3.0 * libm::pow(n as f64, -0.5)).collect();
        let fit = fit_rate(&ns, &r).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert!(fit.stderr < 1e-12);
        let r: Vec<f64> = ns.iter().map(|&n| 0.2 * libm::pow(n as f64, -0.375)).collect();
        assert_relative_eq!(fit_rate(&ns, &r).unwrap().slope, -0.375, max_relative = 1e-12);
        assert!(fit_rate(&ns, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(fit_rate(&ns[..2], &r[..2]).is_err());
    }

    #[test]
    fn log_adjusted_fit_recovers_penalised_rate() {
        let ns = [1000usize, 2000, 4000, 8000];
        let r: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let nf = n as f64;
                libm::pow(nf / libm::sqrt(libm::log(nf)), -0.375)
            })
            .collect();
        assert_relative_eq!(fit_rate_log_adjusted(&ns, &r).unwrap().slope, -0.375, max_relative = 1e-12);
    }

    #[test]
    fn ks_normality_examples() {
        let m = 1000;
        let z: Vec<f64> = (1..=m).map(|i| normal_quantile((i as f64 - 0.5) / m as f64)).collect();
        assert!(ks_normality(&z).unwrap() <= 0.001);
        assert_relative_eq!(ks_normality(&[0.0; 30]).unwrap(), 0.5);
        assert!(ks_normality(&[0.0; 19]).is_err());
    }

    #[test]
    fn ks_normality_on_gaussian_draws() {
        let g = Density::gaussian(0.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for seed in 0..50 {
            worst = worst.max(ks_normality(&g.draws(seed, 0, 500)).unwrap());
        }
        assert!(worst < 0.08, "{worst}");
    }

    #[test]
    fn replicate_seeds_are_distinct_and_stable() {
        let mut seen = alloc::collections::BTreeSet::new();
        for n in [100, 200] {
            for r in 0..500 {
                assert!(seen.insert(replicate_seed(1, n, r)));
            }
        }
        assert_eq!(replicate_seed(1, 100, 3), replicate_seed(1, 100, 3));
        assert_ne!(replicate_seed(1, 100, 3), replicate_seed(2, 100, 3));
    }

    #[test]
    fn tiny_plan_is_reproducible() {
        let p = plan(Density::gaussian(0.0, 1.0).unwrap(), EstimatorRule::FixedH { alpha: 1.0, c: 1.0 });
        let a = run_experiment(&p).unwrap();
        let b = run_experiment(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 1);
        // two replicates are too few for KS
        assert!(a.rows[0].stats.as_ref().unwrap().ks_omitted_reason.is_some());
    }

    #[test]
    fn uniform_omits_ks() {
        let mut p = plan(Density::uniform(0.0, 1.0).unwrap(), EstimatorRule::FixedH { alpha: 1.0, c: 1.0 });
        p.replicates = 30;
        let rep = run_experiment(&p).unwrap();
        let s = rep.rows[0].stats.as_ref().unwrap();
        assert_eq!(s.ks_statistic, None);
        assert_eq!(s.ks_omitted_reason.as_deref(), Some("tau_sq = 0"));
    }

    #[test]
    fn rmse_decomposition_and_histogram() {
        let mut p = plan(
            Density::laplace(0.0, 1.0).unwrap(),
            EstimatorRule::Adaptive(GridConfig { l_mode: LMode::Given(0.5), ..GridConfig::default() }),
        );
        p.replicates = 25;
        p.n_list = alloc::vec![200, 400];
        let rep = run_experiment(&p).unwrap();
        for row in &rep.rows {
            let s = row.stats.as_ref().unwrap();
            let r = row.replicates as f64;
            let lhs = s.rmse * s.rmse;
            let rhs = s.mean_error * s.mean_error + s.sd_error * s.sd_error * (r - 1.0) / r;
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300) + 1e-18);
            assert!((0.0..=1.0).contains(&s.ci_coverage));
            assert_eq!(s.selected_h_histogram.iter().map(|b| b.count).sum::<usize>(), row.replicates);
            assert!(s.selected_h_histogram.windows(2).all(|w| w[0].h > w[1].h));
        }
        assert!(rep.rate.is_none(), "two rows are too few for a rate fit");
    }

    #[test]
    fn infeasible_rows_are_reported_not_fatal() {
        let mut p = plan(
            Density::gaussian(0.0, 1.0).unwrap(),
            EstimatorRule::Adaptive(GridConfig { delta: 0.2, ..GridConfig::default() }),
        );
        // n^0.2 > log n only for large n
        p.n_list = alloc::vec![50, 200];
        let rep = run_experiment(&p).unwrap();
        assert!(rep.rows.iter().all(|r| r.error.as_deref().is_some_and(|e| e.contains("grid infeasible"))));
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(Density::gaussian(0.0, 1.0).unwrap(), EstimatorRule::FixedH { alpha: 1.0, c: 1.0 });
        p.replicates = 1;
        assert!(p.validate().is_err());
        p.replicates = 2;
        p.n_list = alloc::vec![200, 100];
        assert!(p.validate().is_err());
        p.n_list = alloc::vec![100, 200];
        p.ci_level = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn fixed_rule_bandwidth() {
        let rule = EstimatorRule::FixedH { alpha: 1.0, c: 1.0 };
        assert_relative_eq!(rule.fixed_bandwidth(5000).unwrap(), libm::pow(5000.0, -0.4), max_relative = 1e-15);
    }
}
