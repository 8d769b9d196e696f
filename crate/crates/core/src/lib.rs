//! Bayesian tracking of a drifting Larmor frequency from single-shot Ramsey measurements.
//!
//! The posterior is either a Gaussian mixture, updated in closed form against a Gaussian
//! comb approximation of the Ramsey fringe, or a dense grid updated with the exact
//! likelihood. Both share the [`TrackingFilter`] interface so the adaptive controllers in
//! [`control`] and the run loop in [`harness`] treat them alike.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the simulation and harness
//! use `f64`. Aliases below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod filter;
pub mod gaussian_filter;
pub mod grid_filter;
pub mod harness;
pub mod mixture;
pub mod ramsey;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use filter::{Posterior, TrackingFilter};
pub use ramsey::Outcome;
pub use scalar::Real;

pub type Component = mixture::GaussianComponent<f64>;
pub type Mixture = mixture::GaussianMixture<f64>;
pub type Thresholds = mixture::ReductionThresholds<f64>;
pub type Settings = ramsey::RamseySettings<f64>;
pub type Range = ramsey::FrequencyRange<f64>;
pub type GaussianTracker = gaussian_filter::GaussianFilter<f64>;
pub type GridTracker = grid_filter::GridFilter<f64>;
pub type Controller = control::ControllerConfig<f64>;
