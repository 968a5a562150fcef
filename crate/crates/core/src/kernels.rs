//! Symmetric bounded kernels with unit mass and their closed-form constants.

use core::fmt;
use core::str::FromStr;

use alloc::string::ToString;
use serde::{Deserialize, Serialize};

use crate::quad::{self, Tolerance};
use crate::special::normal_pdf;
use crate::{Error, Result};

const FRAC_1_2SQRT_PI: f64 = 0.282_094_791_773_878_14;

/// `|u|` beyond which the standard normal kernel underflows to exactly 0.
///
/// `exp(-u²/2)` rounds to zero in f64 once `u²/2 > 745.14`, so skipping pairs past
/// this radius leaves sums bit-for-bit unchanged.
const GAUSSIAN_ZERO_RADIUS: f64 = 39.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Standard normal density.
    #[default]
    Gaussian,
    /// Uniform on `[-1, 1]`, value `½` including the endpoints.
    Box,
    /// `1 − |u|` on `[-1, 1]`.
    Triangular,
    /// `¾(1 − u²)` on `[-1, 1]`.
    Epanechnikov,
}

/// Support of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Unbounded,
    /// Closed interval `[-r, r]`.
    Symmetric(f64),
}

impl Kernel {
    pub const ALL: [Kernel; 4] = [Kernel::Gaussian, Kernel::Box, Kernel::Triangular, Kernel::Epanechnikov];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Box => "box",
            Kernel::Triangular => "triangular",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }

    /// `K(u)`. Exactly symmetric: only `|u|` enters.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        let a = libm::fabs(u);
        match self {
            Kernel::Gaussian => normal_pdf(a),
            Kernel::Box => {
                if a <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Triangular => {
                if a <= 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            Kernel::Epanechnikov => {
                if a <= 1.0 {
                    0.75 * (1.0 - a * a)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K_h(x) = K(x/h)/h`.
    pub fn scaled_eval(self, h: f64, x: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.eval(x / h) / h)
    }

    pub fn support(self) -> Support {
        match self {
            Kernel::Gaussian => Support::Unbounded,
            _ => Support::Symmetric(1.0),
        }
    }

    /// Radius outside of which `eval` is exactly zero in f64.
    pub fn zero_radius(self) -> f64 {
        match self.support() {
            Support::Unbounded => GAUSSIAN_ZERO_RADIUS,
            Support::Symmetric(r) => r,
        }
    }

    /// Radius outside of which `self_convolution` is exactly zero in f64.
    pub fn self_convolution_zero_radius(self) -> f64 {
        match self {
            // exp(-t²/4) underflows past t = 2·39
            Kernel::Gaussian => 2.0 * GAUSSIAN_ZERO_RADIUS,
            _ => 2.0,
        }
    }

    /// Points where the kernel or its derivative is discontinuous.
    pub fn breakpoints(self) -> &'static [f64] {
        match self {
            Kernel::Gaussian => &[],
            Kernel::Triangular => &[-1.0, 0.0, 1.0],
            Kernel::Box | Kernel::Epanechnikov => &[-1.0, 1.0],
        }
    }

    /// Interval carrying all of the kernel's mass to below 1e-30, for
    /// quadrature.
    pub fn integration_range(self) -> (f64, f64) {
        match self.support() {
            Support::Unbounded => (-12.0, 12.0),
            Support::Symmetric(r) => (-r, r),
        }
    }

    /// `‖K‖_∞`
    pub fn sup_norm(self) -> f64 {
        match self {
            Kernel::Gaussian => normal_pdf(0.0),
            Kernel::Box => 0.5,
            Kernel::Triangular => 1.0,
            Kernel::Epanechnikov => 0.75,
        }
    }

    /// `‖K‖₁`; every built-in is nonnegative so this is the unit mass.
    pub fn l1_norm(self) -> f64 {
        1.0
    }

    /// `‖K‖₂² = ∫K²`.
    pub fn l2_norm_sq(self) -> f64 {
        match self {
            Kernel::Gaussian => FRAC_1_2SQRT_PI,
            Kernel::Box => 0.5,
            Kernel::Triangular => 2.0 / 3.0,
            Kernel::Epanechnikov => 0.6,
        }
    }

    pub fn is_nonnegative(self) -> bool {
        true
    }

    pub fn has_closed_self_convolution(self) -> bool {
        !matches!(self, Kernel::Epanechnikov)
    }

    /// `∫|K(u)||u|^β du`.
    pub fn abs_moment(self, beta: f64) -> Result<f64> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::param("moment order must be finite and >= 0"));
        }
        Ok(match self {
            // 2^{β/2} Γ((β+1)/2) / √π
            Kernel::Gaussian => {
                libm::pow(2.0, 0.5 * beta) * libm::tgamma(0.5 * (beta + 1.0)) / libm::sqrt(core::f64::consts::PI)
            }
            Kernel::Box => 1.0 / (beta + 1.0),
            Kernel::Triangular => 2.0 / ((beta + 1.0) * (beta + 2.0)),
            Kernel::Epanechnikov => 3.0 / ((beta + 1.0) * (beta + 3.0)),
        })
    }

    /// `(K∗K)(t) = ∫K(x)K(t−x)dx`.
    pub fn self_convolution(self, t: f64) -> f64 {
        let a = libm::fabs(t);
        match self {
            // density of N(0, 2)
            Kernel::Gaussian => FRAC_1_2SQRT_PI * libm::exp(-0.25 * a * a),
            Kernel::Box => {
                if a <= 2.0 {
                    0.25 * (2.0 - a)
                } else {
                    0.0
                }
            }
            // Cubic B-spline: the triangle is itself a convolution of two
            // unit boxes.
            Kernel::Triangular => {
                if a <= 1.0 {
                    2.0 / 3.0 - a * a + 0.5 * a * a * a
                } else if a <= 2.0 {
                    let r = 2.0 - a;
                    r * r * r / 6.0
                } else {
                    0.0
                }
            }
            Kernel::Epanechnikov => self.self_convolution_quadrature(a),
        }
    }

    fn self_convolution_quadrature(self, a: f64) -> f64 {
        if a >= 2.0 {
            return 0.0;
        }
        // Overlap of [-1, 1] and [a-1, a+1]; the integrand is a polynomial
        // there, so one Gauss–Kronrod pass is already exact.
        let lo = a - 1.0;
        let hi = 1.0;
        quad::integrate(|x| self.eval(x) * self.eval(a - x), lo, hi, Tolerance::new(1e-15, 1e-12))
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "kernel", name: s.to_string() })
    }
}
