//! Lepski-type bandwidth selection over the geometric grid
//!
//! ```text
//! h₀ = n^{−(1−δ)},  h₁ = log n / n,  h₂ = ℓ(n)/n,  h_{k+1} = h_k/ρ (k ≥ 2)
//! ```
//!
//! with `ℓ(n) = ell_scale / log log n`. The selected bandwidth is the largest
//! grid element `h` such that `|T_n(h) − T_n(g)| ≤ σ̃(g, n) d(g)` for every
//! smaller grid element `g`, where `σ̃(g, n) = 1/(n√g)` and
//!
//! ```text
//! d(g) = √(2M log(h₀/g))  for g < h₂,    d(g) = ℓ(n)^{−1/2}  otherwise,
//! M = 144 ‖K‖₂² L.
//! ```

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::estimators::{confidence_interval, EstimateResult, Method, PairwiseSums, Sample};
use crate::kernels::{check_bandwidth, Kernel};
use crate::{Error, Result};

/// Floor applied to an estimated `L` so that `M` stays positive.
pub const L_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Lower grid limit `(log n)⁴/n²`.
    Paper,
    /// Lower grid limit `1/n²`, usable at moderate `n`.
    #[default]
    Practical,
}

/// How the bound `L ≥ ∫f²` entering `M` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LMode {
    Given(f64),
    #[default]
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub delta: f64,
    pub rho: f64,
    pub ell_scale: f64,
    pub mode: GridMode,
    pub l_mode: LMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { delta: 0.5, rho: 1.2, ell_scale: 3.0, mode: GridMode::Practical, l_mode: LMode::Estimated }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::param(format!("rho must be > 1, got {}", self.rho)));
        }
        if !(self.ell_scale > 0.0 && self.ell_scale.is_finite()) {
            return Err(Error::param(format!("ell_scale must be > 0, got {}", self.ell_scale)));
        }
        if let LMode::Given(l) = self.l_mode {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::param(format!("L must be > 0, got {l}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    /// Strictly decreasing.
    pub bandwidths: Vec<f64>,
    pub n: usize,
    pub h_lower_bound: f64,
    /// `ℓ(n)`.
    pub ell: f64,
    /// `h₂ = ℓ(n)/n`; `d` switches branch below it.
    pub h2: f64,
    /// `M = 144‖K‖₂²L`, once `L` is known.
    pub m: Option<f64>,
    pub l: Option<f64>,
    /// Set when no element below `h₂` fits above the lower bound.
    pub degenerate: bool,
    pub mode: GridMode,
}

/// `σ̃(h, n) = 1/(n√h)`.
pub fn sigma_tilde(h: f64, n: usize) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(1.0 / (n as f64 * libm::sqrt(h)))
}

/// `M = 144 ‖K‖₂² L`.
pub fn threshold_m(k: Kernel, l: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::param(format!("L must be finite and > 0, got {l}")));
    }
    Ok(144.0 * k.l2_norm_sq() * l)
}

/// `ℓ(n) = ell_scale / log log n`.
pub fn ell(n: usize, ell_scale: f64) -> f64 {
    ell_scale / libm::log(libm::log(n as f64))
}

/// Build the candidate grid for sample size `n`. `M` is filled in when
/// `cfg.l_mode` gives `L`; otherwise see [`BandwidthGrid::with_l`].
pub fn build_grid(n: usize, cfg: &GridConfig, k: Kernel) -> Result<BandwidthGrid> {
    cfg.validate()?;
    if n < 3 {
        return Err(Error::GridInfeasible(format!("need log log n > 0 for l(n), got n = {n}")));
    }
    let nf = n as f64;
    let log_n = libm::log(nf);
    let h0 = libm::pow(nf, -(1.0 - cfg.delta));
    let h1 = log_n / nf;
    let ell = ell(n, cfg.ell_scale);
    let h2 = ell / nf;
    if h1 >= h0 {
        return Err(Error::GridInfeasible(format!(
            "need n^delta > log n for h0 > h1, but n^{} = {:.6} <= log n = {:.6}",
            cfg.delta,
            libm::pow(nf, cfg.delta),
            log_n
        )));
    }
    if h2 >= h1 {
        return Err(Error::GridInfeasible(format!(
            "need l(n) < log n for h1 > h2, but l(n) = {ell:.6} >= log n = {log_n:.6}"
        )));
    }
    let lower = match cfg.mode {
        GridMode::Paper => libm::pow(log_n, 4.0) / (nf * nf),
        GridMode::Practical => 1.0 / (nf * nf),
    };
    // At very small n in paper mode h1 (or even h0) can sit below the floor;
    // the grid then keeps h0 and h1 only and is flagged degenerate.
    let mut bandwidths = alloc::vec![h0, h1];
    let mut h = h2;
    while h >= lower {
        bandwidths.push(h);
        h /= cfg.rho;
    }
    let degenerate = bandwidths.len() <= 3;
    let mut grid =
        BandwidthGrid { bandwidths, n, h_lower_bound: lower, ell, h2, m: None, l: None, degenerate, mode: cfg.mode };
    if let LMode::Given(l) = cfg.l_mode {
        grid = grid.with_l(k, l)?;
    }
    Ok(grid)
}

impl BandwidthGrid {
    /// A grid from explicit bandwidths (sorted decreasing, deduplicated),
    /// with `d` fixed to its `h ≥ h₂` branch at level `ell`.
    pub fn from_bandwidths(n: usize, mut bandwidths: Vec<f64>, ell: f64) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::param("grid needs at least one bandwidth"));
        }
        for &h in &bandwidths {
            check_bandwidth(h)?;
        }
        bandwidths.sort_by(|a, b| b.total_cmp(a));
        bandwidths.dedup();
        let lower = *bandwidths.last().unwrap();
        Ok(Self {
            degenerate: bandwidths.len() <= 3,
            h2: lower,
            bandwidths,
            n,
            h_lower_bound: lower,
            ell,
            m: None,
            l: None,
            mode: GridMode::Practical,
        })
    }

    pub fn with_l(mut self, k: Kernel, l: f64) -> Result<Self> {
        self.m = Some(threshold_m(k, l)?);
        self.l = Some(l);
        Ok(self)
    }

    pub fn h0(&self) -> f64 {
        self.bandwidths[0]
    }

    pub fn h_min(&self) -> f64 {
        *self.bandwidths.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bandwidths.is_empty()
    }

    /// `3 + log n / log ρ`.
    pub fn size_bound(n: usize, rho: f64) -> f64 {
        3.0 + libm::log(n as f64) / libm::log(rho)
    }

    /// `d(h)`.
    pub fn threshold_d(&self, h: f64) -> Result<f64> {
        let (lo, hi) = (self.h_lower_bound.min(self.h_min()), self.h0());
        if !(h >= lo && h <= hi) {
            return Err(Error::OutsideGrid { h, lo, hi });
        }
        if h < self.h2 {
            let m = self.m.ok_or_else(|| Error::param("threshold d(h) below h2 needs L (and hence M)"))?;
            Ok(libm::sqrt(2.0 * m * libm::log(self.h0() / h)))
        } else {
            Ok(1.0 / libm::sqrt(self.ell))
        }
    }
}

/// `d(h)` for a grid built at sample size `n`.
pub fn threshold_d(h: f64, grid: &BandwidthGrid, n: usize) -> Result<f64> {
    if n != grid.n {
        return Err(Error::param(format!("grid was built for n = {}, not {n}", grid.n)));
    }
    grid.threshold_d(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub h: f64,
    pub g: f64,
    pub delta_t: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub tests: Vec<PairTest>,
    pub h_hat: f64,
    pub fallback: bool,
    pub mode: GridMode,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub grid: Vec<f64>,
    /// `T_n(h)` at every grid element, aligned with `grid`.
    pub t_values: Vec<f64>,
}

/// Select `ĥ_n` given `T_n` already evaluated on the grid.
///
/// Candidates are tested from the largest down; each candidate records all
/// of its tests against smaller elements. The smallest element has no test
/// partner and is only returned as the flagged fallback, unless it is the
/// sole element.
pub fn select_from_values(grid: &BandwidthGrid, t_values: &[f64]) -> Result<(f64, SelectionTrace)> {
    let hs = &grid.bandwidths;
    if t_values.len() != hs.len() {
        return Err(Error::param("one T_n value per grid element required"));
    }
    let mut trace = SelectionTrace {
        tests: Vec::new(),
        h_hat: grid.h_min(),
        fallback: false,
        mode: grid.mode,
        m: grid.m,
        l: grid.l,
        grid: hs.clone(),
        t_values: t_values.to_vec(),
    };
    if hs.len() == 1 {
        return Ok((hs[0], trace));
    }
    let thresholds: Vec<f64> =
        hs.iter().map(|&g| Ok(sigma_tilde(g, grid.n)? * grid.threshold_d(g)?)).collect::<Result<_>>()?;
    for i in 0..hs.len() - 1 {
        let mut ok = true;
        for j in i + 1..hs.len() {
            let delta_t = libm::fabs(t_values[i] - t_values[j]);
            let pass = delta_t <= thresholds[j];
            ok &= pass;
            trace.tests.push(PairTest { h: hs[i], g: hs[j], delta_t, threshold: thresholds[j], pass });
        }
        if ok {
            trace.h_hat = hs[i];
            return Ok((hs[i], trace));
        }
    }
    trace.fallback = true;
    Ok((grid.h_min(), trace))
}

/// `ĥ_n` and the full test trace.
pub fn select_bandwidth(s: &Sample, k: Kernel, grid: &BandwidthGrid) -> Result<(f64, SelectionTrace)> {
    let sums = PairwiseSums::new(s);
    let t_values: Vec<f64> = grid.bandwidths.iter().map(|&h| sums.t_n(k, h)).collect::<Result<_>>()?;
    select_from_values(grid, &t_values)
}

/// Bandwidth at which `L` is estimated: the smallest grid element not below
/// `(log n)⁴/n²`. In paper mode this is `h_min` itself.
pub fn l_estimation_bandwidth(grid: &BandwidthGrid) -> f64 {
    let nf = grid.n as f64;
    let floor = libm::pow(libm::log(nf), 4.0) / (nf * nf);
    grid.bandwidths.iter().copied().rev().find(|&h| h >= floor).unwrap_or(grid.h0())
}

/// `max(T_n(h_L), L_FLOOR)` with `h_L` from [`l_estimation_bandwidth`].
pub fn estimate_l(s: &Sample, k: Kernel, grid: &BandwidthGrid) -> Result<f64> {
    let t = PairwiseSums::new(s).t_n(k, l_estimation_bandwidth(grid))?;
    Ok(t.max(L_FLOOR))
}

/// Fully data-driven estimate `T_n(ĥ_n)` with its confidence interval.
pub fn adaptive_estimate(
    s: &Sample,
    k: Kernel,
    cfg: &GridConfig,
    level: f64,
) -> Result<(EstimateResult, SelectionTrace)> {
    let mut grid = build_grid(s.len(), cfg, k)?;
    let sums = PairwiseSums::new(s);
    if grid.m.is_none() {
        let l = sums.t_n(k, l_estimation_bandwidth(&grid))?.max(L_FLOOR);
        grid = grid.with_l(k, l)?;
    }
    let t_values: Vec<f64> = grid.bandwidths.iter().map(|&h| sums.t_n(k, h)).collect::<Result<_>>()?;
    let (h_hat, trace) = select_from_values(&grid, &t_values)?;
    let (theta_hat, loo) = sums.t_n_with_loo(k, h_hat)?;
    let second = crate::sum::sum(loo.iter().map(|g| g * g)) / loo.len() as f64;
    let tau_sq_hat = (second - theta_hat * theta_hat).max(0.0);
    let (ci_low, ci_high) = confidence_interval(theta_hat, tau_sq_hat, s.len(), level)?;
    Ok((
        EstimateResult {
            theta_hat,
            bandwidth: h_hat,
            tau_sq_hat,
            n: s.len(),
            level,
            ci_low,
            ci_high,
            method: Method::Adaptive,
            fallback: Some(trace.fallback),
        },
        trace,
    ))
}
