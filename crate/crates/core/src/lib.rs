//! Population size estimation from zero-truncated frequency-of-frequencies data.
//!
//! Given counts `f_x` of units observed exactly `x` times (`x >= 1`), the
//! number of unobserved units `f_0` is predicted by regressing the log ratio
//! `log((x+1) f_{x+1} / f_x)` on `x` with weighted least squares and
//! extrapolating to `x = 0`. Under a negative binomial (gamma-mixed Poisson)
//! model that ratio is close to affine in `x`.
//!
//! Alongside the ratio regression (WLRM) the crate provides the hyperbolic
//! variant, Chao's lower bound, the Chao–Bunge coverage estimator and
//! zero-truncated negative binomial maximum likelihood, plus standard errors,
//! a chi-square goodness-of-fit test, a parametric bootstrap and a Monte Carlo
//! study harness.
//!
//! ```
//! use zerofreq::{datasets::Dataset, estimators, WeightScheme};
//!
//! let table = Dataset::Scrapie.table::<f64>();
//! let m = estimators::default_cutoff(&table);
//! let est = estimators::wlrm_estimate(&table, m, WeightScheme::DiagonalApprox).unwrap();
//! assert_eq!(est.n_hat.unwrap().round(), 459.0);
//! ```
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root name the `f64` instantiations used by the
//! simulation code and the CLI.

pub mod datasets;
pub mod error;
pub mod estimators;
pub mod freq;
pub mod inference;
pub mod nb;
pub mod scalar;
pub mod simplex;
pub mod simulation;
pub mod special;
pub mod wls;
mod ztnb;

pub use error::{Error, Result};
pub use estimators::{EstimateResult, InvalidReason, Method};
pub use freq::{parse_frequency_table, CollapsedTail, FrequencyTable, RatioPoint, RatioPoints};
pub use inference::{BootstrapResult, GofResult, VarianceEstimate};
pub use nb::NbParams;
pub use scalar::Scalar;
pub use wls::{Design, RegressionFit, SymTridiagonal, WeightScheme};
pub use ztnb::{ztnb_log_likelihood, ZtnbFit};

pub type FrequencyTableF64 = FrequencyTable<f64>;
pub type FrequencyTableF32 = FrequencyTable<f32>;
pub type RatioPointsF64 = RatioPoints<f64>;
pub type RegressionFitF64 = RegressionFit<f64>;
pub type RegressionFitF32 = RegressionFit<f32>;
pub type EstimateF64 = EstimateResult<f64>;
pub type EstimateF32 = EstimateResult<f32>;
pub type GofResultF64 = GofResult<f64>;
pub type NbParamsF64 = NbParams<f64>;
