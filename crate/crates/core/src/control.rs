//! Choice of control phase and sensing time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::Posterior;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig<T> {
    /// Shortest sensing time, seconds.
    pub tau_min: T,
    /// Number of sensing times; the longest is `2^(N-1) tau_min`.
    pub n_sensing: u32,
    pub g: u32,
    pub f: u32,
    /// Posterior width (radians of accumulated phase) above which tau is halved.
    pub fom_threshold: T,
    /// Run the sensing schedule from the longest sensing time down.
    pub long_to_short: bool,
}

impl<T: Real> ControllerConfig<T> {
    pub fn new(tau_min: T, n_sensing: u32) -> Self {
        Self {
            tau_min,
            n_sensing,
            g: 5,
            f: 3,
            fom_threshold: T::one(),
            long_to_short: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > T::zero()) || !self.tau_min.is_finite() {
            return Err(Error::config("tau_min must be positive"));
        }
        if self.n_sensing < 1 || self.n_sensing > 40 {
            return Err(Error::config(format!("number of sensing times must be in 1..=40, got {}", self.n_sensing)));
        }
        if self.g < 1 {
            return Err(Error::config("G must be at least 1"));
        }
        if !(self.fom_threshold > T::zero()) {
            return Err(Error::config("figure-of-merit threshold must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn max_exponent(&self) -> u32 {
        self.n_sensing - 1
    }

    #[inline]
    pub fn tau(&self, k: u32) -> T {
        self.tau_min * T::lit(f64::from(1u32 << k))
    }

    pub fn tau_max(&self) -> T {
        self.tau(self.max_exponent())
    }
}

/// One block of the initial sensing phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingStep<T> {
    pub k: u32,
    pub tau: T,
    pub repetitions: u32,
}

/// Fixed schedule `tau_n = 2^n tau_min` repeated `M_n = G + F (n - 1)` times, `n = 0..N`.
///
/// Repetition counts below one are clamped to one.
pub fn sensing_schedule<T: Real>(cfg: &ControllerConfig<T>) -> Vec<SensingStep<T>> {
    let mut steps: Vec<SensingStep<T>> = (0..cfg.n_sensing)
        .map(|n| {
            let reps = i64::from(cfg.g) + i64::from(cfg.f) * (i64::from(n) - 1);
            SensingStep {
                k: n,
                tau: cfg.tau(n),
                repetitions: reps.max(1) as u32,
            }
        })
        .collect();
    if cfg.long_to_short {
        steps.reverse();
    }
    steps
}

/// Total number of measurements in the sensing phase.
pub fn sensing_length<T: Real>(cfg: &ControllerConfig<T>) -> usize {
    sensing_schedule(cfg).iter().map(|s| s.repetitions as usize).sum()
}

/// Angular argument of the characteristic function used by the phase rule for a
/// sensing-time coefficient `t_n`: `2 pi (2 t_n) tau_min`.
#[inline]
pub fn phase_omega<T: Real>(t_n: u64, tau_min: T) -> T {
    T::TAU() * T::lit(2.0 * t_n as f64) * tau_min
}

/// `theta = arg(p_{2 t_n}) / 2` in `[0, 2 pi)`, or 0 when `|p_{2 t_n}|` is negligible.
pub fn choose_phase<T: Real, P: Posterior<T> + ?Sized>(prior: &P, t_n: u64, tau_min: T) -> T {
    let p = prior.fourier_coefficient(phase_omega(t_n, tau_min));
    let total = prior.fourier_coefficient(T::zero()).norm();
    if !(p.norm() >= T::lit(1e-12) * total) || !(total > T::zero()) {
        return T::zero();
    }
    let mut theta = p.arg() * T::half();
    if theta < T::zero() {
        theta += T::TAU();
    }
    theta
}

/// Posterior standard deviation in radians of phase accumulated over `tau_n`.
pub fn figure_of_merit<T: Real, P: Posterior<T> + ?Sized>(posterior: &P, tau_n: T) -> Result<T> {
    let (_, var) = posterior.moments()?;
    Ok(var.max(T::zero()).sqrt() * T::TAU() * tau_n)
}

/// Current sensing time `2^k tau_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingTimeState {
    pub k: u32,
}

impl SensingTimeState {
    /// Sensing-time coefficient `t_n = 2^k`.
    #[inline]
    pub fn coefficient(&self) -> u64 {
        1u64 << self.k
    }

    pub fn tau<T: Real>(&self, cfg: &ControllerConfig<T>) -> T {
        cfg.tau(self.k)
    }
}

/// Halve tau when the figure of merit is above threshold, double it otherwise.
pub fn choose_sensing_time<T: Real>(state: SensingTimeState, fom: T, cfg: &ControllerConfig<T>) -> SensingTimeState {
    let k = if fom > cfg.fom_threshold {
        state.k.saturating_sub(1)
    } else {
        (state.k + 1).min(cfg.max_exponent())
    };
    SensingTimeState { k }
}
