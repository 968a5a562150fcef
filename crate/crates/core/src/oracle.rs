//! Independent reference computations: the literal double-loop `T_n`,
//! `E T_n(h)` by quadrature of the density autocorrelation, bias-exponent
//! probes and the Hoeffding decomposition of `T_n`.
//!
//! Nothing here shares code with the sorted, windowed sums in
//! [`crate::estimators`].

use alloc::vec::Vec;

use crate::densities::Density;
use crate::estimators::Sample;
use crate::kernels::{check_bandwidth, Kernel};
use crate::quad::{self, Tolerance};
use crate::special::gaussian_pdf;
use crate::{Error, Result};

const TOL: Tolerance = Tolerance::new(1e-13, 1e-11);

/// Literal `2/(n(n−1)h) Σ_{i<j} K((X_i − X_j)/h)` with naive summation.
pub fn t_n_naive(s: &Sample, k: Kernel, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let x = s.values();
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += k.eval((x[i] - x[j]) / h);
        }
    }
    Ok(2.0 * acc / (n as f64 * (n as f64 - 1.0) * h))
}

fn quad_value<F: FnMut(f64) -> f64>(f: F, pts: &[f64]) -> Result<f64> {
    quad::integrate_breaks(f, pts, TOL).map(|e| e.value)
}

fn kernel_points(k: Kernel) -> Vec<f64> {
    let (lo, hi) = k.integration_range();
    let mut pts = alloc::vec![lo];
    pts.extend(k.breakpoints().iter().copied().filter(|&p| p > lo && p < hi));
    if !pts.contains(&0.0) {
        pts.push(0.0);
    }
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts
}

/// `E T_n(h) = ∫K(u)(f̄₀ ∗ f₀)(uh) du`.
///
/// Closed form `(2π(2σ² + h²))^{−1/2}` for a Gaussian density with the
/// Gaussian kernel; quadrature over `u` otherwise.
pub fn expected_tn_exact(d: &Density, k: Kernel, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if let (Density::Gaussian { sigma, .. }, Kernel::Gaussian) = (d, k) {
        return Ok(1.0 / libm::sqrt(2.0 * core::f64::consts::PI * (2.0 * sigma * sigma + h * h)));
    }
    expected_tn_quadrature(d, k, h)
}

/// [`expected_tn_exact`] by quadrature only, with no closed-form shortcut.
pub fn expected_tn_quadrature(d: &Density, k: Kernel, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    // The integrand is even in u.
    let pts: Vec<f64> = kernel_points(k).into_iter().filter(|&p| p >= 0.0).collect();
    Ok(2.0 * quad_value(|u| k.eval(u) * d.autocorrelation(u * h), &pts)?)
}

/// `E T_n(h) − ∫f₀²`, computed through the centred form
/// `∫K(u)[(f̄₀∗f₀)(uh) − (f̄₀∗f₀)(0)]du` to avoid cancellation.
pub fn bias_exact(d: &Density, k: Kernel, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if let (Density::Gaussian { .. }, Kernel::Gaussian) = (d, k) {
        return Ok(expected_tn_exact(d, k, h)? - d.theta2());
    }
    let a0 = d.theta2();
    let pts: Vec<f64> = kernel_points(k).into_iter().filter(|&p| p >= 0.0).collect();
    Ok(2.0 * quad_value(|u| k.eval(u) * (d.autocorrelation(u * h) - a0), &pts)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateProbe {
    pub slope: f64,
    /// `(h, bias)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Bandwidths dropped because the bias was numerically zero.
    pub excluded: Vec<f64>,
}

/// Least-squares slope of `log|bias|` against `log h`.
pub fn bias_rate_probe(d: &Density, k: Kernel, h_list: &[f64]) -> Result<RateProbe> {
    if h_list.len() < 4 {
        return Err(Error::param("bias_rate_probe needs at least four bandwidths"));
    }
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &h in h_list {
        let b = bias_exact(d, k, h)?;
        if libm::fabs(b) <= 1e-13 * d.theta2() {
            excluded.push(h);
        } else {
            points.push((h, b));
        }
    }
    if points.len() < 2 {
        return Err(Error::Degenerate(alloc::format!(
            "bias numerically zero at {} of {} bandwidths",
            excluded.len(),
            h_list.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(libm::fabs(p.1))).collect();
    let (slope, _) = crate::sim::least_squares(&xs, &ys)?;
    if libm::fabs(slope) < 1e-9 {
        return Err(Error::Degenerate("bias does not vary with the bandwidth".into()));
    }
    Ok(RateProbe { slope, points, excluded })
}

/// `(K_h ∗ f₀)(x) = E K_h(x − X)`.
pub fn smoothed_density(d: &Density, k: Kernel, h: f64, x: f64) -> Result<f64> {
    check_bandwidth(h)?;
    match (d, k) {
        (Density::Gaussian { mu, sigma }, Kernel::Gaussian) => {
            Ok(gaussian_pdf(x, *mu, libm::sqrt(sigma * sigma + h * h)))
        }
        (_, Kernel::Box) => Ok((d.cdf(x + h) - d.cdf(x - h)) / (2.0 * h)),
        (Density::Cusp { .. }, _) => {
            let breaks: Vec<f64> = kernel_points(k).iter().map(|u| x - u * h).collect();
            d.expect(|y| k.eval((x - y) / h) / h, &breaks, TOL).map(|e| e.value)
        }
        _ => {
            // ∫K(u) f₀(x − uh) du with density breakpoints mapped to u.
            let (lo, hi) = k.integration_range();
            let mut pts = kernel_points(k);
            pts.extend(d.breakpoints().iter().map(|b| (x - b) / h).filter(|&u| u > lo && u < hi));
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            quad_value(|u| k.eval(u) * d.pdf(x - u * h), &pts)
        }
    }
}

/// Terms of the Hoeffding decomposition
/// `U_n(R) − E R = 2 U_n^{(1)}(π₁R) + U_n^{(2)}(π₂R)` with `R(x, y) = K_h(x − y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hoeffding {
    /// `U_n^{(2)}(R) − E R(X₁, X₂)`
    pub centred: f64,
    /// `U_n^{(1)}(π₁R)`
    pub linear: f64,
    /// `U_n^{(2)}(π₂R)`
    pub degenerate: f64,
}

impl Hoeffding {
    pub fn residual(&self) -> f64 {
        libm::fabs(self.centred - (2.0 * self.linear + self.degenerate))
    }
}

pub fn hoeffding_parts(s: &Sample, d: &Density, k: Kernel, h: f64) -> Result<Hoeffding> {
    let x = s.values();
    let n = x.len();
    let mean_r = expected_tn_exact(d, k, h)?;
    let m: Vec<f64> = x.iter().map(|&xi| smoothed_density(d, k, h, xi)).collect::<Result<_>>()?;
    let mut u_r = 0.0;
    let mut u_pi2 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = k.eval((x[i] - x[j]) / h) / h;
            u_r += r;
            u_pi2 += r - m[i] - m[j] + mean_r;
        }
    }
    let pairs = 0.5 * n as f64 * (n as f64 - 1.0);
    let linear = m.iter().map(|mi| mi - mean_r).sum::<f64>() / n as f64;
    Ok(Hoeffding { centred: u_r / pairs - mean_r, linear, degenerate: u_pi2 / pairs })
}

/// `|lhs − rhs|` of the Hoeffding decomposition on one sample drawn from `d`.
pub fn hoeffding_check(s: &Sample, d: &Density, k: Kernel, h: f64) -> Result<f64> {
    Ok(hoeffding_parts(s, d, k, h)?.residual())
}

/// Upper bound `2‖f₀‖₂²‖K‖₂² / (n(n−1)h)` on the second moment of the
/// degenerate part.
pub fn degenerate_variance_bound(d: &Density, k: Kernel, h: f64, n: usize) -> f64 {
    let n = n as f64;
    2.0 * d.theta2() * k.l2_norm_sq() / (n * (n - 1.0) * h)
}

/// `‖K_h ∗ f₀ − f₀‖₂²`.
pub fn smoothing_defect_l2(d: &Density, k: Kernel, h: f64) -> Result<f64> {
    integrate_defect(d, k, h, |m, f| (m - f) * (m - f))
}

fn integrate_defect(d: &Density, k: Kernel, h: f64, g: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let (klo, khi) = k.integration_range();
    // Kinks of K_h ∗ f₀ sit at density breakpoints shifted by the kernel's.
    let mut extra = Vec::new();
    for b in d.breakpoints() {
        for kb in [klo, khi].iter().chain(k.breakpoints()) {
            extra.push(b + kb * h);
        }
    }
    let (lo, hi) = d.integration_range();
    let mut pts = d.quadrature_points(&extra);
    if matches!(k.support(), crate::kernels::Support::Symmetric(_)) {
        // Mass of K_h ∗ f₀ leaks past the support of f₀.
        pts.push(lo + klo * h);
        pts.push(hi + khi * h);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
    } else if d.breakpoints().len() >= 2 {
        pts.insert(0, lo - 12.0 * h);
        pts.push(hi + 12.0 * h);
    }
    let mut err = None;
    let v = quad_value(
        |x| match smoothed_density(d, k, h, x) {
            Ok(m) => g(m, d.pdf(x)),
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        &pts,
    );
    if let Some(e) = err {
        return Err(e);
    }
    v
}

/// `(n E S₁², 4‖f₀‖_∞‖K_h ∗ f₀ − f₀‖₂²)`, where
/// `n E S₁² ≤ E[2(K_h ∗ f₀)(X) − 2f₀(X)]²` is the linear part of
/// `T_n − E T_n − n⁻¹ΣY_i`. The left value is that expectation; the
/// right is its `L^∞`·`L²` envelope (infinite for unbounded densities).
pub fn linear_part_variance_check(d: &Density, k: Kernel, h: f64) -> Result<(f64, f64)> {
    let lhs = integrate_defect(d, k, h, |m, f| 4.0 * (m - f) * (m - f) * f)?;
    let sup = d.sup_norm();
    let rhs = if sup.is_finite() { 4.0 * sup * smoothing_defect_l2(d, k, h)? } else { f64::INFINITY };
    Ok((lhs, rhs))
}
