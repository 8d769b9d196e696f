//! Approximate Bayesian filter with a Gaussian-mixture state.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{Posterior, TrackingFilter};
use crate::mixture::{reduce_with_report, GaussianComponent, GaussianMixture, ReductionReport, ReductionThresholds};
use crate::ramsey::{likelihood_comb, windowed_comb, FrequencyRange, Outcome, RamseySettings};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFilterConfig<T> {
    pub thresholds: ReductionThresholds<T>,
    /// Diffusion coefficient, Hz / sqrt(s).
    pub kappa: T,
    /// Restrict the likelihood comb to peaks near the prior before each product.
    pub windowing: bool,
}

impl<T: Real> GaussianFilterConfig<T> {
    pub fn new(kappa: T) -> Self {
        Self {
            thresholds: ReductionThresholds::default(),
            kappa,
            windowing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFilter<T> {
    posterior: GaussianMixture<T>,
    range: FrequencyRange<T>,
    uniform: bool,
    config: GaussianFilterConfig<T>,
}

impl<T: Real> GaussianFilter<T> {
    /// Uniform prior over `range`, held symbolically.
    pub fn init_uniform(range: FrequencyRange<T>, config: GaussianFilterConfig<T>) -> Self {
        Self {
            posterior: GaussianMixture::default(),
            range,
            uniform: true,
            config,
        }
    }

    /// Start from an explicit mixture prior.
    pub fn from_prior(prior: GaussianMixture<T>, range: FrequencyRange<T>, config: GaussianFilterConfig<T>) -> Result<Self> {
        if prior.is_empty() {
            return Err(Error::EmptyMixture);
        }
        Ok(Self {
            posterior: prior,
            range,
            uniform: false,
            config,
        })
    }

    pub fn posterior(&self) -> &GaussianMixture<T> {
        &self.posterior
    }

    pub fn range(&self) -> &FrequencyRange<T> {
        &self.range
    }

    pub fn config(&self) -> &GaussianFilterConfig<T> {
        &self.config
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn generation(&self) -> u64 {
        self.posterior.generation
    }

    /// Bayes update; the report is `None` for the first update from the uniform prior.
    pub fn update_with_report(&self, outcome: Outcome, settings: &RamseySettings<T>) -> Result<(Self, Option<ReductionReport>)> {
        let generation = self.posterior.generation + 1;
        if self.uniform {
            let mut posterior = likelihood_comb(outcome, settings, &self.range);
            posterior.generation = generation;
            let next = Self {
                posterior,
                range: self.range,
                uniform: false,
                config: self.config,
            };
            return Ok((next, None));
        }

        let comb = if self.config.windowing {
            let w = windowed_comb(outcome, settings, &self.posterior, &self.range);
            if w.is_empty() {
                likelihood_comb(outcome, settings, &self.range)
            } else {
                w
            }
        } else {
            likelihood_comb(outcome, settings, &self.range)
        };
        let raw = self.posterior.sparse_product(&comb);
        let (mut posterior, report) = if raw.is_empty() {
            // no overlap at all: treat as lost track on the prior
            let widened = GaussianMixture::new(
                self.posterior
                    .iter()
                    .map(|g| GaussianComponent::new_unchecked(g.amplitude, g.centre, g.sigma * T::SQRT_2()))
                    .collect(),
            );
            let report = ReductionReport {
                lost_track: true,
                ..ReductionReport::default()
            };
            (widened, report)
        } else {
            reduce_with_report(&raw, &self.config.thresholds)?
        };
        posterior.generation = generation;
        Ok((
            Self {
                posterior,
                range: self.range,
                uniform: false,
                config: self.config,
            },
            Some(report),
        ))
    }
}

impl<T: Real> Posterior<T> for GaussianFilter<T> {
    fn fourier_coefficient(&self, omega: T) -> Complex<T> {
        if self.uniform {
            uniform_characteristic(&self.range, omega)
        } else {
            self.posterior.fourier_coefficient(omega)
        }
    }

    fn moments(&self) -> Result<(T, T)> {
        if self.uniform {
            let w = self.range.width();
            Ok(((self.range.lo + self.range.hi) * T::half(), w * w / T::lit(12.0)))
        } else {
            self.posterior.moments()
        }
    }
}

/// `int_lo^hi e^{i omega f} df / (hi - lo)`
fn uniform_characteristic<T: Real>(range: &FrequencyRange<T>, omega: T) -> Complex<T> {
    let w = range.width();
    let x = omega * w * T::half();
    let mid = (range.lo + range.hi) * T::half();
    let sinc = if x == T::zero() { T::one() } else { x.sin() / x };
    Complex::from_polar(sinc, omega * mid)
}

impl<T: Real> TrackingFilter<T> for GaussianFilter<T> {
    fn update(&self, outcome: Outcome, settings: &RamseySettings<T>) -> Result<Self> {
        self.update_with_report(outcome, settings).map(|(s, _)| s)
    }

    fn predict(&self, delta_t: T) -> Self {
        let increment = self.config.kappa * self.config.kappa * delta_t;
        if self.uniform || increment == T::zero() {
            return self.clone();
        }
        Self {
            posterior: self.posterior.convolve_random_walk(increment),
            range: self.range,
            uniform: false,
            config: self.config,
        }
    }

    /// Centre of the heaviest component; ties go to the lowest centre.
    fn estimate(&self) -> Result<T> {
        if self.uniform {
            return Err(Error::UniformState);
        }
        let mut best: Option<(T, T)> = None;
        for g in self.posterior.iter() {
            let w = g.weight();
            best = match best {
                None => Some((w, g.centre)),
                Some((bw, bc)) if w > bw || (w == bw && g.centre < bc) => Some((w, g.centre)),
                keep => keep,
            };
        }
        best.map(|(_, c)| c).ok_or(Error::EmptyMixture)
    }

    fn parameter_count(&self) -> usize {
        if self.uniform {
            0
        } else {
            3 * self.posterior.len()
        }
    }
}
