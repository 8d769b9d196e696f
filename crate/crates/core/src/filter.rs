//! Interfaces shared by the Gaussian-mixture filter and the grid baseline.

use num_complex::Complex;

use crate::error::Result;
use crate::mixture::GaussianMixture;
use crate::ramsey::{Outcome, RamseySettings};
use crate::scalar::Real;

/// What the adaptive controllers need to know about a posterior.
pub trait Posterior<T: Real> {
    /// Characteristic function `int p(f) e^{i omega f} df` of the (unnormalised) density.
    fn fourier_coefficient(&self, omega: T) -> Complex<T>;

    /// Mean and variance of the normalised density.
    fn moments(&self) -> Result<(T, T)>;
}

/// A sequential Bayesian filter over the Larmor frequency.
///
/// States are values: every operation returns a new state.
pub trait TrackingFilter<T: Real>: Posterior<T> + Clone + Send + Sync {
    fn update(&self, outcome: Outcome, settings: &RamseySettings<T>) -> Result<Self>;

    /// Diffuse the state over `delta_t` seconds of random walk.
    fn predict(&self, delta_t: T) -> Self;

    /// Point estimate of the frequency, Hz.
    fn estimate(&self) -> Result<T>;

    /// Number of real parameters describing the state.
    fn parameter_count(&self) -> usize;
}

impl<T: Real> Posterior<T> for GaussianMixture<T> {
    fn fourier_coefficient(&self, omega: T) -> Complex<T> {
        GaussianMixture::fourier_coefficient(self, omega)
    }

    fn moments(&self) -> Result<(T, T)> {
        GaussianMixture::moments(self)
    }
}
