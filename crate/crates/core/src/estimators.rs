//! The pairwise U-statistic `T_n(h)`, its integrated-square variant
//! `T̄_n(h)`, the Bickel–Ritov combination `2T_n − T̄_n`, a plug-in variance
//! and normal confidence intervals.
//!
//! All pairwise sums run over a sorted copy of the sample and stop each row
//! once the kernel is exactly zero, with compensated accumulation. Sorting
//! makes every statistic exactly invariant under permutation of the input.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::kernels::{check_bandwidth, Kernel};
use crate::special::normal_quantile;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// An immutable i.i.d. sample of at least two finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::SampleTooSmall(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tn,
    Tbar,
    BickelRitov,
    Adaptive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tn => "tn",
            Method::Tbar => "tbar",
            Method::BickelRitov => "bickel_ritov",
            Method::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub bandwidth: f64,
    pub tau_sq_hat: f64,
    pub n: usize,
    pub level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
    /// Set by the adaptive selector when no grid element passed its tests.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback: Option<bool>,
}

/// A sorted copy of a sample, for evaluating pairwise statistics at many
/// bandwidths.
#[derive(Debug, Clone)]
pub struct PairwiseSums {
    sorted: Vec<f64>,
}

impl PairwiseSums {
    pub fn new(sample: &Sample) -> Self {
        let mut sorted = sample.values.clone();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    fn normalizer(&self, h: f64) -> f64 {
        let n = self.sorted.len() as f64;
        2.0 / (n * (n - 1.0) * h)
    }

    /// `Σ_{i<j} w((X_(j) − X_(i))/h)` over pairs with difference at most
    /// `radius·h`. When `rows` is given, each term is also added to both
    /// endpoints' row sums (indexed in sorted order).
    fn pair_sum(&self, h: f64, radius: f64, w: impl Fn(f64) -> f64, mut rows: Option<&mut [NeumaierSum]>) -> f64 {
        let x = &self.sorted;
        let inv_h = 1.0 / h;
        let cutoff = radius * h;
        let mut total = NeumaierSum::new();
        for i in 0..x.len() {
            let xi = x[i];
            let mut row = NeumaierSum::new();
            for j in i + 1..x.len() {
                let d = x[j] - xi;
                if d > cutoff {
                    break;
                }
                let v = w(d * inv_h);
                row.add(v);
                if let Some(r) = rows.as_deref_mut() {
                    r[j].add(v);
                }
            }
            total.add(row.value());
            if let Some(r) = rows.as_deref_mut() {
                let upper = row.value();
                r[i].add(upper);
            }
        }
        total.value()
    }

    /// `T_n(h)`.
    pub fn t_n(&self, k: Kernel, h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.normalizer(h) * self.pair_sum(h, k.zero_radius(), |u| k.eval(u), None))
    }

    /// `T̄_n(h)`, using `∫K_h(x − a)K_h(x − b)dx = (K∗K)((a − b)/h)/h`.
    pub fn t_bar_n(&self, k: Kernel, h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.normalizer(h) * self.pair_sum(h, k.self_convolution_zero_radius(), |u| k.self_convolution(u), None))
    }

    /// `T_n(h)` together with the leave-one-out density estimates
    /// `g_i = (1/((n−1)h)) Σ_{j≠i} K((X_i − X_j)/h)`, in sorted order.
    pub fn t_n_with_loo(&self, k: Kernel, h: f64) -> Result<(f64, Vec<f64>)> {
        check_bandwidth(h)?;
        let mut rows = alloc::vec![NeumaierSum::new(); self.n()];
        let s = self.pair_sum(h, k.zero_radius(), |u| k.eval(u), Some(&mut rows));
        let scale = 1.0 / ((self.n() as f64 - 1.0) * h);
        Ok((self.normalizer(h) * s, rows.iter().map(|r| r.value() * scale).collect()))
    }

    /// `max(0, mean(g_i²) − T_n(h)²)`.
    pub fn tau_sq_hat(&self, k: Kernel, h: f64) -> Result<f64> {
        let (t, loo) = self.t_n_with_loo(k, h)?;
        Ok(loo_variance(t, &loo))
    }
}

fn loo_variance(t: f64, loo: &[f64]) -> f64 {
    let second: f64 = crate::sum::sum(loo.iter().map(|g| g * g)) / loo.len() as f64;
    (second - t * t).max(0.0)
}

pub fn t_n(s: &Sample, k: Kernel, h: f64) -> Result<f64> {
    PairwiseSums::new(s).t_n(k, h)
}

pub fn t_bar_n(s: &Sample, k: Kernel, h: f64) -> Result<f64> {
    PairwiseSums::new(s).t_bar_n(k, h)
}

/// `2T_n(h) − T̄_n(h)`.
pub fn bickel_ritov(s: &Sample, k: Kernel, h: f64) -> Result<f64> {
    let p = PairwiseSums::new(s);
    Ok(2.0 * p.t_n(k, h)? - p.t_bar_n(k, h)?)
}

/// Plug-in estimate of `τ² = ∫f³ − (∫f²)²` from leave-one-out kernel
/// density values at the observations.
pub fn tau_sq_hat(s: &Sample, k: Kernel, h: f64) -> Result<f64> {
    PairwiseSums::new(s).tau_sq_hat(k, h)
}

/// `θ̂ ± z_{(1+level)/2} · 2√τ̂² / √n`.
pub fn confidence_interval(theta_hat: f64, tau_sq_hat: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(alloc::format!("confidence level must lie in (0, 1), got {level}")));
    }
    if tau_sq_hat.is_nan() || tau_sq_hat < 0.0 {
        return Err(Error::param("variance estimate must be >= 0"));
    }
    if n == 0 {
        return Err(Error::SampleTooSmall(0));
    }
    let z = normal_quantile(0.5 * (1.0 + level));
    let half = z * 2.0 * libm::sqrt(tau_sq_hat) / libm::sqrt(n as f64);
    Ok((theta_hat - half, theta_hat + half))
}

/// Shape of the variance envelope `(1/(n²h)) ∨ (L h^{2α}/n)`, without the
/// unknown constant.
pub fn variance_budget(n: usize, h: f64, l: f64, alpha: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    if !(l > 0.0 && l.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("L and alpha must be finite and > 0"));
    }
    let n = n as f64;
    Ok((1.0 / (n * n * h)).max(l * libm::pow(h, 2.0 * alpha) / n))
}

/// Fixed-bandwidth estimate with `τ̂²` and a normal confidence interval.
pub fn estimate_fixed(s: &Sample, k: Kernel, h: f64, method: Method, level: f64) -> Result<EstimateResult> {
    let p = PairwiseSums::new(s);
    let (t, loo) = p.t_n_with_loo(k, h)?;
    let theta_hat = match method {
        Method::Tn | Method::Adaptive => t,
        Method::Tbar => p.t_bar_n(k, h)?,
        Method::BickelRitov => 2.0 * t - p.t_bar_n(k, h)?,
    };
    let tau_sq_hat = loo_variance(t, &loo);
    let (ci_low, ci_high) = confidence_interval(theta_hat, tau_sq_hat, s.len(), level)?;
    Ok(EstimateResult {
        theta_hat,
        bandwidth: h,
        tau_sq_hat,
        n: s.len(),
        level,
        ci_low,
        ci_high,
        method,
        fallback: None,
    })
}
