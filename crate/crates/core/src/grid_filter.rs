//! Exact Bayesian filter on an equally spaced frequency grid.
//!
//! This is the reference the Gaussian filter is benchmarked against. The prediction is a
//! direct truncated-kernel convolution (no FFT), `O(M * kernel_len)` per step.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{Posterior, TrackingFilter};
use crate::ramsey::{likelihood_exact, FrequencyRange, Outcome, RamseySettings};
use crate::scalar::Real;

/// Kernel half-width in units of its standard deviation.
const KERNEL_SIGMAS: f64 = 6.0;

/// Probability masses on `M` bins of `[lo, hi)`; bin `i` is centred at `lo + (i + 1/2) df`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution<T> {
    pub lo: T,
    pub hi: T,
    pub values: Vec<T>,
}

/// Result of a grid update.
#[derive(Debug, Clone, PartialEq)]
pub struct GridUpdate<T> {
    pub distribution: GridDistribution<T>,
    /// The likelihood vanished on every bin with mass, so the prior was kept.
    pub degenerate: bool,
}

impl<T: Real> GridDistribution<T> {
    pub fn uniform(range: &FrequencyRange<T>, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::config(format!("grid needs at least 2 points, got {points}")));
        }
        let p = T::lit(points as f64).recip();
        Ok(Self {
            lo: range.lo,
            hi: range.hi,
            values: vec![p; points],
        })
    }

    /// Grid resolution used by default: 10 points per period of the longest
    /// sensing time, doubled, i.e. `10 * 2^N`.
    pub fn default_points(n_sensing_times: u32) -> usize {
        10usize << n_sensing_times
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn spacing(&self) -> T {
        (self.hi - self.lo) / T::lit(self.len() as f64)
    }

    #[inline]
    pub fn frequency(&self, i: usize) -> T {
        self.lo + (T::lit(i as f64) + T::half()) * self.spacing()
    }

    pub fn total(&self) -> T {
        self.values.iter().fold(T::zero(), |s, &v| s + v)
    }

    pub fn update(&self, outcome: Outcome, settings: &RamseySettings<T>) -> GridUpdate<T> {
        let df = self.spacing();
        let mut values = Vec::with_capacity(self.len());
        let mut total = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            let f = self.lo + (T::lit(i as f64) + T::half()) * df;
            let p = v * likelihood_exact(outcome, settings, f);
            total += p;
            values.push(p);
        }
        if !(total > T::zero()) {
            return GridUpdate {
                distribution: self.clone(),
                degenerate: true,
            };
        }
        let inv = total.recip();
        values.iter_mut().for_each(|v| *v *= inv);
        GridUpdate {
            distribution: Self {
                lo: self.lo,
                hi: self.hi,
                values,
            },
            degenerate: false,
        }
    }

    /// Convolve with `N(0, variance)` truncated at six kernel sigmas, reflecting at the edges.
    pub fn predict(&self, variance: T) -> Self {
        let df = self.spacing();
        let sigma_bins = variance.sqrt() / df;
        let half = (T::lit(KERNEL_SIGMAS) * sigma_bins).floor().to_usize().unwrap_or(0);
        if half == 0 {
            return self.clone();
        }
        let mut kernel: Vec<T> = (0..=2 * half)
            .map(|k| {
                let x = T::lit(k as f64 - half as f64) / sigma_bins;
                (-T::half() * x * x).exp()
            })
            .collect();
        let ksum = kernel.iter().fold(T::zero(), |s, &v| s + v);
        kernel.iter_mut().for_each(|v| *v /= ksum);

        let m = self.len();
        let mut out = vec![T::zero(); m];
        let h = half as isize;
        for (i, &v) in self.values.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            let start = i as isize - h;
            if start >= 0 && (i + half) < m {
                let dst = &mut out[start as usize..=i + half];
                for (o, &k) in dst.iter_mut().zip(&kernel) {
                    *o += k * v;
                }
            } else {
                for (j, &k) in kernel.iter().enumerate() {
                    out[reflect_index(start + j as isize, m)] += k * v;
                }
            }
        }
        let total = out.iter().fold(T::zero(), |s, &v| s + v);
        let inv = total.recip();
        out.iter_mut().for_each(|v| *v *= inv);
        Self {
            lo: self.lo,
            hi: self.hi,
            values: out,
        }
    }

    /// Centre of the heaviest bin, lowest index on ties.
    pub fn mode(&self) -> T {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        self.frequency(best)
    }

    pub fn mean_variance(&self) -> (T, T) {
        let total = self.total();
        let mut mean = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            mean += v * self.frequency(i);
        }
        mean /= total;
        let mut var = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            let d = self.frequency(i) - mean;
            var += v * d * d;
        }
        (mean, var / total)
    }
}

/// Mirror an index about the grid edges (`-1 -> 0`, `M -> M - 1`).
fn reflect_index(mut i: isize, m: usize) -> usize {
    let m = m as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= m {
            i = 2 * m - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Grid distribution plus the diffusion coefficient driving its prediction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFilter<T> {
    pub distribution: GridDistribution<T>,
    pub kappa: T,
}

impl<T: Real> GridFilter<T> {
    pub fn new(range: &FrequencyRange<T>, points: usize, kappa: T) -> Result<Self> {
        Ok(Self {
            distribution: GridDistribution::uniform(range, points)?,
            kappa,
        })
    }
}

impl<T: Real> Posterior<T> for GridFilter<T> {
    fn fourier_coefficient(&self, omega: T) -> Complex<T> {
        let d = &self.distribution;
        let df = d.spacing();
        // e^{i omega f_i} by rotation: f_i advances by df each bin
        let step = Complex::from_polar(T::one(), omega * df);
        let mut phase = Complex::from_polar(T::one(), omega * d.frequency(0));
        let mut acc = Complex::new(T::zero(), T::zero());
        for &v in &d.values {
            acc += phase * v;
            phase *= step;
        }
        acc
    }

    fn moments(&self) -> Result<(T, T)> {
        Ok(self.distribution.mean_variance())
    }
}

impl<T: Real> TrackingFilter<T> for GridFilter<T> {
    fn update(&self, outcome: Outcome, settings: &RamseySettings<T>) -> Result<Self> {
        Ok(Self {
            distribution: self.distribution.update(outcome, settings).distribution,
            kappa: self.kappa,
        })
    }

    fn predict(&self, delta_t: T) -> Self {
        Self {
            distribution: self.distribution.predict(self.kappa * self.kappa * delta_t),
            kappa: self.kappa,
        }
    }

    fn estimate(&self) -> Result<T> {
        Ok(self.distribution.mode())
    }

    fn parameter_count(&self) -> usize {
        self.distribution.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn range() -> FrequencyRange<f64> {
        FrequencyRange::new(0.0, 50e6).unwrap()
    }

    fn assert_normalised(d: &GridDistribution<f64>) {
        assert!((d.total() - 1.0).abs() < 1e-10, "total {}", d.total());
    }

    #[test]
    fn init_examples() {
        assert_eq!(GridDistribution::uniform(&range(), 4).unwrap().values, vec![0.25; 4]);
        assert_eq!(GridDistribution::uniform(&range(), 2).unwrap().values, vec![0.5; 2]);
        assert!(GridDistribution::uniform(&range(), 1).is_err());
        assert_eq!(GridDistribution::<f64>::default_points(10), 10_240);
    }

    #[test]
    fn flat_prior_update_is_the_fringe() {
        let d = GridDistribution::uniform(&range(), 1000).unwrap();
        let s = RamseySettings::new(0.0, 2e-7, f64::INFINITY).unwrap();
        let u = d.update(Outcome::Zero, &s);
        assert!(!u.degenerate);
        assert_normalised(&u.distribution);
        let norm: f64 = (0..1000).map(|i| likelihood_exact(Outcome::Zero, &s, d.frequency(i))).sum();
        for i in (0..1000).step_by(37) {
            let f = d.frequency(i);
            let expected = (1.0 + (std::f64::consts::TAU * 2e-7 * f).cos()) / 2.0 / norm;
            assert_relative_eq!(u.distribution.values[i], expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn uninformative_update_keeps_prior() {
        let mut d = GridDistribution::uniform(&range(), 64).unwrap();
        d.values = (0..64).map(|i| (i + 1) as f64).collect();
        let t = d.total();
        d.values.iter_mut().for_each(|v| *v /= t);
        let s = RamseySettings::new(0.3, 1e-4, 1e-6).unwrap();
        let u = d.update(Outcome::One, &s).distribution;
        for (a, b) in u.values.iter().zip(&d.values) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn delta_is_a_fixed_point_of_update() {
        let mut d = GridDistribution::uniform(&range(), 32).unwrap();
        d.values = vec![0.0; 32];
        d.values[5] = 1.0;
        let s = RamseySettings::new(1.0, 3e-7, 1e-5).unwrap();
        assert_eq!(d.update(Outcome::Zero, &s).distribution, d);
    }

    #[test]
    fn zero_likelihood_is_flagged() {
        let mut d = GridDistribution::uniform(&FrequencyRange::new(0.0, 4.0).unwrap(), 4).unwrap();
        d.values = vec![0.0, 1.0, 0.0, 0.0];
        // bin 1 centred at f = 1.5; phase 2 pi tau f = 0 requires theta = 2 pi * 1.5 * tau
        let tau = 1.0;
        let s = RamseySettings::new(std::f64::consts::TAU * 1.5 * tau, tau, f64::INFINITY).unwrap();
        let u = d.update(Outcome::One, &s);
        assert!(u.degenerate);
        assert_eq!(u.distribution, d);
    }

    #[test]
    fn predict_without_diffusion_is_identity() {
        let d = GridDistribution::uniform(&range(), 100).unwrap();
        assert_eq!(d.predict(0.0), d);
    }

    #[test]
    fn predict_delta_matches_analytic_gaussian() {
        let m = 2001;
        let mut d = GridDistribution::uniform(&range(), m).unwrap();
        d.values = vec![0.0; m];
        d.values[1000] = 1.0;
        let df = d.spacing();
        let sigma = 10.0 * df;
        let p = d.predict(sigma * sigma);
        assert_normalised(&p);
        let (mean, var) = p.mean_variance();
        assert_relative_eq!(mean, d.frequency(1000), max_relative = 1e-12);
        assert_relative_eq!(var, sigma * sigma, max_relative = 1e-6);
        for k in [0usize, 5, 10, 20, 40] {
            let x = k as f64 * df;
            let dense = df * (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * std::f64::consts::TAU.sqrt());
            assert_relative_eq!(p.values[1000 + k], dense, max_relative = 1e-6);
        }
    }

    #[test]
    fn predict_preserves_uniform() {
        let d = GridDistribution::uniform(&range(), 500).unwrap();
        let p = d.predict((30.0 * d.spacing()).powi(2));
        for v in &p.values {
            assert_relative_eq!(*v, 1.0 / 500.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn predict_reflects_at_edges() {
        let mut d = GridDistribution::uniform(&range(), 200).unwrap();
        d.values = vec![0.0; 200];
        d.values[0] = 1.0;
        let p = d.predict((5.0 * d.spacing()).powi(2));
        assert_normalised(&p);
        assert!(p.values[0] > p.values[1] && p.values[1] > p.values[10]);
    }

    #[test]
    fn estimate_examples() {
        let mut d = GridDistribution::uniform(&range(), 20).unwrap();
        assert_eq!(d.mode(), d.frequency(0));
        d.values = vec![0.0; 20];
        d.values[7] = 1.0;
        assert_eq!(d.mode(), d.frequency(7));
        d.values[7] = 0.3;
        d.values[15] = 0.7;
        assert_eq!(d.mode(), d.frequency(15));
    }

    #[test]
    fn fourier_matches_direct_sum() {
        let mut d = GridDistribution::uniform(&range(), 300).unwrap();
        d.values = (0..300).map(|i| ((i as f64) * 0.1).sin().abs() + 0.1).collect();
        let filt = GridFilter {
            distribution: d.clone(),
            kappa: 0.0,
        };
        let omega = 4.1e-6;
        let p = filt.fourier_coefficient(omega);
        let direct = (0..300).fold(Complex::new(0.0, 0.0), |acc, i| {
            acc + Complex::from_polar(d.values[i], omega * d.frequency(i))
        });
        assert_relative_eq!(p.re, direct.re, epsilon = 1e-9);
        assert_relative_eq!(p.im, direct.im, epsilon = 1e-9);
    }

    #[test]
    fn refinement_moves_mean_less_than_one_bin() {
        let seq = [(0.0, 20e-9, Outcome::Zero), (1.0, 40e-9, Outcome::One), (2.5, 80e-9, Outcome::Zero), (0.4, 160e-9, Outcome::One)];
        let run = |m: usize| {
            let mut d = GridDistribution::uniform(&range(), m).unwrap();
            for (theta, tau, o) in seq {
                let s = RamseySettings::new(theta, tau, 1e-4).unwrap();
                d = d.update(o, &s).distribution.predict(1e14 * 1e-5);
            }
            d
        };
        let a = run(2560);
        let b = run(5120);
        assert!((a.mean_variance().0 - b.mean_variance().0).abs() < a.spacing());
    }
}
