//! Estimation of the integrated squared density `∫f²` from an i.i.d. sample.
//!
//! The estimator is the pairwise kernel U-statistic
//!
//! ```text
//! T_n(h) = 2 / (n (n-1) h) · Σ_{i<j} K((X_i - X_j) / h)
//! ```
//!
//! with a data-driven Lepski-type choice of `h` over a geometric grid
//! ([`adaptive`]). [`densities`] supplies test densities with known
//! functionals, [`oracle`] holds brute-force and quadrature references and
//! [`sim`] the deterministic Monte Carlo building blocks.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the parallel experiment runner live in the `qfunc` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod densities;
mod error;
pub mod estimators;
pub mod kernels;
pub mod oracle;
pub mod quad;
pub mod sim;
pub mod special;
pub mod sum;

pub use adaptive::{
    adaptive_estimate, build_grid, estimate_l, select_bandwidth, BandwidthGrid, GridConfig, GridMode, LMode,
    SelectionTrace,
};
pub use densities::{Density, Smoothness};
pub use error::{Error, Result};
pub use estimators::{EstimateResult, Method, PairwiseSums, Sample};
pub use kernels::Kernel;
