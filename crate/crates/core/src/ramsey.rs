//! Ramsey measurement model.
//!
//! The accumulated phase is `2 pi tau f - theta`, so the fringe maxima for outcome `mu`
//! sit at `(2 pi l + pi mu + theta) / (2 pi tau)` and the adaptive phase rule lines the
//! fringe up with the prior's Fourier argument.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mixture::{GaussianComponent, GaussianMixture};
use crate::scalar::Real;

/// Single-shot readout result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    #[inline]
    pub fn bit(self) -> u8 {
        match self {
            Outcome::Zero => 0,
            Outcome::One => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Outcome::Zero),
            1 => Some(Outcome::One),
            _ => None,
        }
    }

    /// `e^{i mu pi}`
    #[inline]
    pub fn parity<T: Real>(self) -> T {
        match self {
            Outcome::Zero => T::one(),
            Outcome::One => -T::one(),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.bit())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bit = u8::deserialize(d)?;
        Outcome::from_bit(bit).ok_or_else(|| serde::de::Error::custom(format!("outcome must be 0 or 1, got {bit}")))
    }
}

/// Control settings of one Ramsey shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseySettings<T> {
    /// Control phase in `[0, 2 pi)`.
    pub theta: T,
    /// Free evolution time, seconds.
    pub tau: T,
    /// Coherence time, seconds; `+inf` disables dephasing.
    pub t2_star: T,
}

impl<T: Real> RamseySettings<T> {
    pub fn new(theta: T, tau: T, t2_star: T) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::config(format!("sensing time must be positive and finite, got {tau}")));
        }
        if !(t2_star > T::zero()) {
            return Err(Error::config(format!("T2* must be positive, got {t2_star}")));
        }
        if !theta.is_finite() {
            return Err(Error::config("control phase must be finite"));
        }
        Ok(Self {
            theta: normalize_phase(theta),
            tau,
            t2_star,
        })
    }

    /// `e^{-(tau / T2*)^2}`
    #[inline]
    pub fn visibility(&self) -> T {
        if self.t2_star.is_infinite() {
            T::one()
        } else {
            let r = self.tau / self.t2_star;
            (-r * r).exp()
        }
    }

    /// Fringe period in frequency, `1 / tau`.
    #[inline]
    pub fn period(&self) -> T {
        self.tau.recip()
    }

    /// Common width of the comb peaks, `1 / (sqrt(2) pi tau)`.
    #[inline]
    pub fn comb_sigma(&self) -> T {
        (T::SQRT_2() * T::PI() * self.tau).recip()
    }

    /// Fractional offset of the comb: peaks at `(l + offset) / tau`.
    #[inline]
    fn comb_offset(&self, outcome: Outcome) -> T {
        T::lit(f64::from(outcome.bit())) * T::half() + self.theta / T::TAU()
    }

    #[inline]
    pub fn comb_centre(&self, outcome: Outcome, l: i64) -> T {
        (T::lit(l as f64) + self.comb_offset(outcome)) / self.tau
    }
}

/// Wrap a phase into `[0, 2 pi)`.
pub fn normalize_phase<T: Real>(theta: T) -> T {
    let tau = T::TAU();
    let mut t = theta % tau;
    if t < T::zero() {
        t += tau;
    }
    // -tiny % 2pi + 2pi rounds to exactly 2pi
    if t >= tau {
        t = T::zero();
    }
    t
}

/// Prior frequency interval `[lo, hi)`, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRange<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> FrequencyRange<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!("frequency range needs lo < hi, got [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1 / tau_min)`: exactly one fringe period of the shortest sensing time.
    pub fn for_tau_min(tau_min: T) -> Result<Self> {
        Self::new(T::zero(), tau_min.recip())
    }

    #[inline]
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    #[inline]
    pub fn contains(&self, f: T) -> bool {
        f >= self.lo && f <= self.hi
    }

    /// Fold `f` back into `[lo, hi]` by mirror reflection at the edges.
    pub fn reflect(&self, f: T) -> T {
        let w = self.width();
        let period = w + w;
        let mut x = (f - self.lo) % period;
        if x < T::zero() {
            x += period;
        }
        if x > w {
            x = period - x;
        }
        (self.lo + x).max(self.lo).min(self.hi)
    }
}

/// Exact outcome probability `[1 + e^{i mu pi} e^{-(tau/T2*)^2} cos(2 pi tau f - theta)] / 2`.
pub fn likelihood_exact<T: Real>(outcome: Outcome, s: &RamseySettings<T>, f: T) -> T {
    let phase = T::TAU() * s.tau * f - s.theta;
    (T::one() + outcome.parity::<T>() * s.visibility() * phase.cos()) * T::half()
}

/// Inclusive index range of comb peaks centred in `[lo - period/2, hi + period/2)`.
fn comb_index_bounds<T: Real>(outcome: Outcome, s: &RamseySettings<T>, range: &FrequencyRange<T>) -> (i64, i64) {
    let offset = s.comb_offset(outcome);
    let lo = (range.lo * s.tau - T::half() - offset).ceil();
    let hi = (range.hi * s.tau + T::half() - offset).ceil() - T::one();
    (
        lo.to_i64().expect("comb index fits in i64"),
        hi.to_i64().expect("comb index fits in i64"),
    )
}

fn comb_component<T: Real>(outcome: Outcome, s: &RamseySettings<T>, l: i64) -> GaussianComponent<T> {
    GaussianComponent::new_unchecked(T::one(), s.comb_centre(outcome, l), s.comb_sigma())
}

/// Gaussian-comb approximation of the fringe, without the dephasing envelope.
///
/// One unit-amplitude peak per fringe maximum inside the range, padded by half a period
/// on each side, so the full prior range of a `2^N tau_min` shot holds `2^N + 1` peaks.
pub fn likelihood_comb<T: Real>(outcome: Outcome, s: &RamseySettings<T>, range: &FrequencyRange<T>) -> GaussianMixture<T> {
    let (l_min, l_max) = comb_index_bounds(outcome, s, range);
    GaussianMixture::new((l_min..=l_max).map(|l| comb_component(outcome, s, l)).collect())
}

/// Comb peaks within `4 (sigma_a + sigma_b)` of some prior component centre.
///
/// Returned in increasing frequency order; may be empty.
pub fn windowed_comb<T: Real>(
    outcome: Outcome,
    s: &RamseySettings<T>,
    prior: &GaussianMixture<T>,
    range: &FrequencyRange<T>,
) -> GaussianMixture<T> {
    let (l_min, l_max) = comb_index_bounds(outcome, s, range);
    let offset = s.comb_offset(outcome);
    let sigma_a = s.comb_sigma();
    let four = T::lit(4.0);
    let mut selected = BTreeSet::new();
    for b in prior.iter() {
        let reach = four * (sigma_a + b.sigma);
        let lo = ((b.centre - reach) * s.tau - offset).ceil();
        let hi = ((b.centre + reach) * s.tau - offset).floor();
        let (Some(lo), Some(hi)) = (lo.to_i64(), hi.to_i64()) else {
            continue;
        };
        let (lo, hi) = (lo.max(l_min), hi.min(l_max));
        for l in lo..=hi {
            // guard against ceil/floor rounding at the window edge
            if (s.comb_centre(outcome, l) - b.centre).abs() <= reach {
                selected.insert(l);
            }
        }
    }
    GaussianMixture::new(selected.into_iter().map(|l| comb_component(outcome, s, l)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TAU_MIN: f64 = 20e-9;

    fn settings(theta: f64, tau: f64, t2: f64) -> RamseySettings<f64> {
        RamseySettings::new(theta, tau, t2).unwrap()
    }

    fn range() -> FrequencyRange<f64> {
        FrequencyRange::for_tau_min(TAU_MIN).unwrap()
    }

    #[test]
    fn exact_likelihood_examples() {
        let s = settings(0.0, 1e-6, f64::INFINITY);
        // tau f integer
        assert_relative_eq!(likelihood_exact(Outcome::Zero, &s, 3e6), 1.0, max_relative = 1e-12);
        assert!(likelihood_exact(Outcome::One, &s, 0.0).abs() < 1e-15);
        let s = settings(0.0, 1e-6, 1e-6);
        assert_relative_eq!(
            likelihood_exact(Outcome::Zero, &s, 0.0),
            (1.0 + (-1.0f64).exp()) / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(likelihood_exact(Outcome::Zero, &s, 0.0), 0.683_939_720_585_721_2, max_relative = 1e-15);
    }

    #[test]
    fn exact_likelihood_sums_to_one() {
        for (theta, tau, t2, f) in [(0.3, 1e-7, 1e-6, 1.2e6), (5.9, 3e-6, f64::INFINITY, 7.7e6), (2.0, 1e-5, 1e-5, 0.0)] {
            let s = settings(theta, tau, t2);
            let p0 = likelihood_exact(Outcome::Zero, &s, f);
            let p1 = likelihood_exact(Outcome::One, &s, f);
            assert!((0.0..=1.0).contains(&p0));
            assert_relative_eq!(p0 + p1, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn theta_is_normalised() {
        assert_relative_eq!(settings(-0.5, 1e-6, 1.0).theta, std::f64::consts::TAU - 0.5);
        assert_relative_eq!(settings(7.0, 1e-6, 1.0).theta, 7.0 - std::f64::consts::TAU);
        assert!(RamseySettings::new(0.0, 0.0, 1.0).is_err());
        assert!(RamseySettings::new(0.0, 1e-6, 0.0).is_err());
    }

    #[test]
    fn comb_at_tau_min() {
        let s = settings(0.0, TAU_MIN, f64::INFINITY);
        let c = likelihood_comb(Outcome::Zero, &s, &range());
        let centres: Vec<f64> = c.iter().map(|g| g.centre).collect();
        assert_eq!(centres.len(), 2);
        assert_relative_eq!(centres[0], 0.0);
        assert_relative_eq!(centres[1], 1.0 / TAU_MIN);
        assert!(c.iter().all(|g| g.amplitude == 1.0));
        assert_relative_eq!(c.components[0].sigma, 1.0 / (2f64.sqrt() * std::f64::consts::PI * TAU_MIN));

        // half a period of padding admits the peak at lo - period / 2
        let c = likelihood_comb(Outcome::One, &s, &range());
        assert_eq!(c.len(), 2);
        assert_relative_eq!(c.components[0].centre, -0.5 / TAU_MIN);
        assert_relative_eq!(c.components[1].centre, 0.5 / TAU_MIN);
    }

    #[test]
    fn comb_count_rule() {
        for n in 0..10u32 {
            let tau = TAU_MIN * f64::from(1u32 << n);
            for (outcome, theta) in [(Outcome::Zero, 0.0), (Outcome::One, 1.1), (Outcome::Zero, 4.0)] {
                let c = likelihood_comb(outcome, &settings(theta, tau, f64::INFINITY), &range());
                assert_eq!(c.len(), (1usize << n) + 1, "n={n} theta={theta}");
            }
        }
    }

    #[test]
    fn comb_spacing_and_peak_alignment() {
        let s = settings(1.7, 8.0 * TAU_MIN, f64::INFINITY);
        for outcome in [Outcome::Zero, Outcome::One] {
            let c = likelihood_comb(outcome, &s, &range());
            for w in c.components.windows(2) {
                assert_relative_eq!(w[1].centre - w[0].centre, s.period(), max_relative = 1e-12);
            }
            for g in c.iter() {
                assert_relative_eq!(likelihood_exact(outcome, &s, g.centre), 1.0, max_relative = 1e-12);
                assert_relative_eq!(g.evaluate(g.centre), 1.0, max_relative = 1e-12);
                // neighbouring peaks add exp(-pi^2) each
                let tails = 2.0 * (-std::f64::consts::PI.powi(2)).exp();
                assert!((c.evaluate(g.centre) - 1.0).abs() <= tails * 1.0001);
            }
        }
    }

    #[test]
    fn comb_is_close_to_exact_near_peaks() {
        let s = settings(0.4, 4.0 * TAU_MIN, f64::INFINITY);
        let c = likelihood_comb(Outcome::One, &s, &range());
        let sa = s.comb_sigma();
        for g in c.iter() {
            for k in -50..=50 {
                let f = g.centre + sa * 0.5 * k as f64 / 50.0;
                // a single peak, as the neighbours are ~4.4 sigma away
                assert!((g.evaluate(f) - likelihood_exact(Outcome::One, &s, f)).abs() <= 0.02);
            }
        }
    }

    #[test]
    fn window_between_and_beyond_peaks() {
        let s = settings(0.0, 64.0 * TAU_MIN, f64::INFINITY);
        // 4 sigma_a is ~0.9 period, so a prior midway between peaks still reaches both
        let mid = 10.5 * s.period();
        let prior = GaussianMixture::single(1.0, mid, 1.0);
        let w = windowed_comb(Outcome::Zero, &s, &prior, &range());
        assert!(!w.is_empty());
        let far = GaussianMixture::single(1.0, 10.0 / TAU_MIN, 1.0);
        assert!(windowed_comb(Outcome::Zero, &s, &far, &range()).is_empty());
    }

    #[test]
    fn window_contains_aligned_peak() {
        let s = settings(2.2, 32.0 * TAU_MIN, f64::INFINITY);
        let a0 = s.comb_centre(Outcome::One, 7);
        let prior = GaussianMixture::single(1.0, a0, 1e-3);
        let w = windowed_comb(Outcome::One, &s, &prior, &range());
        assert!(w.iter().any(|g| (g.centre - a0).abs() < 1e-6));
    }

    #[test]
    fn window_union_matches_brute_force() {
        let s = settings(0.9, 128.0 * TAU_MIN, f64::INFINITY);
        let prior = GaussianMixture::from_triples(&[(1.0, 3.1e6, 2e4), (0.5, 31.7e6, 3e5)]).unwrap();
        let w = windowed_comb(Outcome::Zero, &s, &prior, &range());
        let full = likelihood_comb(Outcome::Zero, &s, &range());
        let sa = s.comb_sigma();
        let brute: Vec<f64> = full
            .iter()
            .filter(|g| prior.iter().any(|b| (g.centre - b.centre).abs() <= 4.0 * (sa + b.sigma)))
            .map(|g| g.centre)
            .collect();
        let got: Vec<f64> = w.iter().map(|g| g.centre).collect();
        assert_eq!(got.len(), brute.len());
        for (a, b) in got.iter().zip(&brute) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // two disjoint windows
        assert!(got.iter().any(|&c| c < 10e6) && got.iter().any(|&c| c > 25e6));
    }

    #[test]
    fn reflect_stays_in_range() {
        let r = FrequencyRange::new(0.0, 10.0).unwrap();
        assert_eq!(r.reflect(3.0), 3.0);
        assert_relative_eq!(r.reflect(12.0), 8.0);
        assert_relative_eq!(r.reflect(-2.5), 2.5);
        assert_relative_eq!(r.reflect(23.0), 3.0);
    }
}
