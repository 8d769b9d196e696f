//! Closed-form algebra on one-dimensional Gaussian mixtures.
//!
//! A component is the unnormalised term `A exp(-(f - c)^2 / (2 sigma^2))`.
//! Its integral is `A sigma sqrt(2 pi)`, which we call the component's mass.
//! Everything here is a pure function of its inputs.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exponents below this (natural log scale) are treated as zero overlap.
const MIN_LOG_AMPLITUDE: f64 = -700.0;

/// One weighted Gaussian term of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent<T> {
    pub amplitude: T,
    pub centre: T,
    pub sigma: T,
}

impl<T: Real> GaussianComponent<T> {
    /// Checked constructor: `sigma > 0`, `amplitude >= 0`, all finite.
    pub fn new(amplitude: T, centre: T, sigma: T) -> Result<Self> {
        let g = Self::new_unchecked(amplitude, centre, sigma);
        if g.is_valid() {
            Ok(g)
        } else {
            Err(Error::InvalidComponent {
                amplitude: amplitude.to_f64().unwrap_or(f64::NAN),
                centre: centre.to_f64().unwrap_or(f64::NAN),
                sigma: sigma.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    #[inline]
    pub const fn new_unchecked(amplitude: T, centre: T, sigma: T) -> Self {
        Self {
            amplitude,
            centre,
            sigma,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.amplitude.is_finite()
            && self.centre.is_finite()
            && self.sigma.is_finite()
            && self.sigma > T::zero()
            && self.amplitude >= T::zero()
    }

    #[inline]
    pub fn variance(&self) -> T {
        self.sigma * self.sigma
    }

    /// Mass up to the common `sqrt(2 pi)` factor: `amplitude * sigma`.
    #[inline]
    pub fn weight(&self) -> T {
        self.amplitude * self.sigma
    }

    /// Integral of the component over the real line.
    #[inline]
    pub fn mass(&self) -> T {
        self.weight() * T::TAU().sqrt()
    }

    #[inline]
    pub fn evaluate(&self, f: T) -> T {
        let z = (f - self.centre) / self.sigma;
        self.amplitude * (-T::half() * z * z).exp()
    }
}

/// Product of two Gaussian terms, itself a Gaussian term.
///
/// The amplitude exponent `[(a sb^2 + b sa^2)^2 / (sa^2 + sb^2) - (a^2 sb^2 + b^2 sa^2)] / (2 sa^2 sb^2)`
/// simplifies to `-(a - b)^2 / (2 (sa^2 + sb^2))`, which is what is evaluated: the
/// expanded form cancels catastrophically for large centres.
pub fn product<T: Real>(g1: &GaussianComponent<T>, g2: &GaussianComponent<T>) -> GaussianComponent<T> {
    let va = g1.variance();
    let vb = g2.variance();
    let vsum = va + vb;
    let sigma = (va * vb / vsum).sqrt();
    let centre = (g1.centre * vb + g2.centre * va) / vsum;
    let d = g1.centre - g2.centre;
    let exponent = -d * d / (T::two() * vsum);
    let amplitude = if exponent < T::lit(MIN_LOG_AMPLITUDE) || !exponent.is_finite() {
        T::zero()
    } else {
        let a = g1.amplitude * g2.amplitude * exponent.exp();
        if a.is_finite() {
            a
        } else {
            T::zero()
        }
    };
    GaussianComponent::new_unchecked(amplitude, centre, sigma)
}

/// Convolution with a zero-mean Gaussian kernel of variance `variance_increment`.
///
/// Mass is preserved: the amplitude drops by `sigma / sigma'`.
pub fn convolve_random_walk<T: Real>(g: &GaussianComponent<T>, variance_increment: T) -> GaussianComponent<T> {
    debug_assert!(variance_increment >= T::zero());
    if variance_increment == T::zero() {
        return *g;
    }
    let sigma = (g.variance() + variance_increment).sqrt();
    GaussianComponent::new_unchecked(g.amplitude * g.sigma / sigma, g.centre, sigma)
}

/// KL divergence between the normalised shapes of `g1` and `g2`, `KL(g1 || g2)`.
pub fn kl_divergence<T: Real>(g1: &GaussianComponent<T>, g2: &GaussianComponent<T>) -> T {
    if g1.centre == g2.centre && g1.sigma == g2.sigma {
        return T::zero();
    }
    let d = g1.centre - g2.centre;
    let kl = (g2.sigma / g1.sigma).ln() + (g1.variance() + d * d) / (T::two() * g2.variance()) - T::half();
    // Rounding can push near-identical pairs a hair below zero.
    kl.max(T::zero())
}

/// `min(KL(g1||g2), KL(g2||g1))`, the criterion used for merging.
pub fn symmetric_kl<T: Real>(g1: &GaussianComponent<T>, g2: &GaussianComponent<T>) -> T {
    kl_divergence(g1, g2).min(kl_divergence(g2, g1))
}

/// Average the centres and variances, add the amplitudes.
pub fn merge_pair<T: Real>(g1: &GaussianComponent<T>, g2: &GaussianComponent<T>) -> GaussianComponent<T> {
    GaussianComponent::new_unchecked(
        g1.amplitude + g2.amplitude,
        (g1.centre + g2.centre) * T::half(),
        ((g1.variance() + g2.variance()) * T::half()).sqrt(),
    )
}

/// Pruning and merging thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionThresholds<T> {
    /// Relative amplitude below which a component is dropped.
    pub amplitude: T,
    /// Symmetrised KL divergence below which two components are merged.
    pub kl: T,
}

impl<T: Real> Default for ReductionThresholds<T> {
    fn default() -> Self {
        Self {
            amplitude: T::lit(0.04),
            kl: T::lit(0.001),
        }
    }
}

/// What `reduce` did, for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReductionReport {
    pub lost_track: bool,
    pub pruned: usize,
    pub merged: usize,
}

/// Ordered collection of Gaussian terms approximating a density over frequency.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianMixture<T> {
    pub components: Vec<GaussianComponent<T>>,
    /// Number of Bayesian updates folded into this mixture.
    pub generation: u64,
}

impl<T: Real> GaussianMixture<T> {
    pub fn new(components: Vec<GaussianComponent<T>>) -> Self {
        Self {
            components,
            generation: 0,
        }
    }

    pub fn single(amplitude: T, centre: T, sigma: T) -> Self {
        Self::new(vec![GaussianComponent::new_unchecked(amplitude, centre, sigma)])
    }

    /// Build from `(amplitude, centre, sigma)` triples, validating each.
    pub fn from_triples(triples: &[(T, T, T)]) -> Result<Self> {
        let components = triples
            .iter()
            .map(|&(a, c, s)| GaussianComponent::new(a, c, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(components))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent<T>> {
        self.components.iter()
    }

    pub fn max_amplitude(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |m, g| m.max(g.amplitude))
    }

    /// Total integral of the (unnormalised) density.
    pub fn mass(&self) -> T {
        self.components.iter().fold(T::zero(), |s, g| s + g.mass())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|g| GaussianComponent::new_unchecked(g.amplitude * factor, g.centre, g.sigma))
                .collect(),
            generation: self.generation,
        }
    }

    pub fn translated(&self, shift: T) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|g| GaussianComponent::new_unchecked(g.amplitude, g.centre + shift, g.sigma))
                .collect(),
            generation: self.generation,
        }
    }

    /// Pointwise density `sum_l C_l exp(-(f - c_l)^2 / (2 sigma_l^2))`.
    pub fn evaluate(&self, f: T) -> T {
        self.components.iter().fold(T::zero(), |s, g| s + g.evaluate(f))
    }

    /// Mean and variance of the normalised density.
    pub fn moments(&self) -> Result<(T, T)> {
        if self.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let mut total = T::zero();
        let mut first = T::zero();
        for g in &self.components {
            let w = g.weight();
            total += w;
            first += w * g.centre;
        }
        if !(total > T::zero()) {
            return Err(Error::DegenerateMixture);
        }
        let mean = first / total;
        // Central form avoids cancellation when |mean| >> sigma.
        let var = self.components.iter().fold(T::zero(), |s, g| {
            let d = g.centre - mean;
            s + g.weight() * (g.variance() + d * d)
        }) / total;
        Ok((mean, var))
    }

    /// Characteristic function of the unnormalised density at angular argument `omega`:
    /// `sum_l sqrt(2 pi) C_l sigma_l exp(-omega^2 sigma_l^2 / 2 + i omega c_l)`.
    pub fn fourier_coefficient(&self, omega: T) -> Complex<T> {
        let root = T::TAU().sqrt();
        self.components.iter().fold(Complex::new(T::zero(), T::zero()), |acc, g| {
            let os = omega * g.sigma;
            let modulus = root * g.weight() * (-T::half() * os * os).exp();
            acc + Complex::from_polar(modulus, omega * g.centre)
        })
    }

    /// Prune and merge; see [`reduce_with_report`].
    pub fn reduce(&self, thresholds: &ReductionThresholds<T>) -> Result<Self> {
        reduce_with_report(self, thresholds).map(|(m, _)| m)
    }

    /// Convolve every component with the random-walk kernel.
    pub fn convolve_random_walk(&self, variance_increment: T) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|g| convolve_random_walk(g, variance_increment))
                .collect(),
            generation: self.generation,
        }
    }

    /// All pairwise products of `self` and `other`, row-major in `self`.
    /// The nonzero terms of [`product`](Self::product), in the same order.
    ///
    /// Pairs too far apart to survive the amplitude underflow cut are skipped without
    /// being formed; this needs `other` sorted by centre and falls back to the full
    /// product otherwise.
    pub fn sparse_product(&self, other: &Self) -> Self {
        let sorted = other.components.windows(2).all(|w| w[0].centre <= w[1].centre);
        if !sorted {
            let mut p = self.product(other);
            p.components.retain(|g| g.amplitude > T::zero());
            return p;
        }
        let cut = T::lit(-2.0 * MIN_LOG_AMPLITUDE);
        let var_max = other.components.iter().fold(T::zero(), |m, g| m.max(g.variance()));
        let mut components = Vec::new();
        for a in &self.components {
            let reach = (cut * (a.variance() + var_max)).sqrt();
            let start = other.components.partition_point(|b| b.centre < a.centre - reach);
            for b in &other.components[start..] {
                if b.centre > a.centre + reach {
                    break;
                }
                let c = product(a, b);
                if c.amplitude > T::zero() {
                    components.push(c);
                }
            }
        }
        Self {
            components,
            generation: self.generation,
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut components = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                components.push(product(a, b));
            }
        }
        Self {
            components,
            generation: self.generation,
        }
    }
}

/// Pruning, merging and lost-track recovery.
///
/// The amplitudes are taken as given for the lost-track test: if no component reaches
/// `thresholds.amplitude`, nothing is removed and every variance is doubled. Otherwise
/// amplitudes are rescaled so the largest is 1, components below the threshold are removed,
/// and the closest pair (smallest symmetrised KL, lowest index on ties) is merged repeatedly
/// while its divergence is below `thresholds.kl`.
///
/// Merged amplitudes add, so the output maximum can exceed 1. Reducing the output again
/// changes nothing except that common scale.
pub fn reduce_with_report<T: Real>(
    m: &GaussianMixture<T>,
    thresholds: &ReductionThresholds<T>,
) -> Result<(GaussianMixture<T>, ReductionReport)> {
    if m.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let mut report = ReductionReport::default();
    let max = m.max_amplitude();
    if !(max >= thresholds.amplitude) {
        report.lost_track = true;
        let components = m
            .components
            .iter()
            .map(|g| GaussianComponent::new_unchecked(g.amplitude, g.centre, g.sigma * T::SQRT_2()))
            .collect();
        return Ok((
            GaussianMixture {
                components,
                generation: m.generation,
            },
            report,
        ));
    }

    // division rather than a reciprocal, so the largest component lands exactly on 1
    let mut kept: Vec<GaussianComponent<T>> = m
        .iter()
        .map(|g| GaussianComponent::new_unchecked(g.amplitude / max, g.centre, g.sigma))
        .filter(|g| g.amplitude >= thresholds.amplitude)
        .collect();
    report.pruned = m.len() - kept.len();
    report.merged = merge_close_pairs(&mut kept, thresholds.kl);

    Ok((
        GaussianMixture {
            components: kept,
            generation: m.generation,
        },
        report,
    ))
}

/// Merge candidate ordered by divergence, then by index pair.
struct Candidate<T> {
    d: T,
    i: usize,
    j: usize,
    vi: u32,
    vj: u32,
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d
            .partial_cmp(&other.d)
            .unwrap_or(Ordering::Equal)
            .then((self.i, self.j).cmp(&(other.i, other.j)))
    }
}

/// Sort key for a finite centre.
#[derive(Clone, Copy, PartialEq)]
struct Key<T>(T, usize);

impl<T: Real> Eq for Key<T> {}

impl<T: Real> PartialOrd for Key<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Key<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal).then(self.1.cmp(&other.1))
    }
}

/// Greedily merge the pair with the smallest symmetrised KL (lowest index pair on ties)
/// while it is below `kl`; returns the number of merges.
///
/// symKL >= d^2 / (2 sigma_max^2) and merging never grows sigma_max, so only pairs
/// closer than `sigma_max sqrt(2 kl)` are ever candidates.
fn merge_close_pairs<T: Real>(kept: &mut Vec<GaussianComponent<T>>, kl: T) -> usize {
    if kept.len() < 2 {
        return 0;
    }
    let sigma_max = kept.iter().fold(T::zero(), |m, g| m.max(g.sigma));
    let reach = sigma_max * (T::two() * kl).sqrt();
    let mut alive = vec![true; kept.len()];
    let mut version = vec![0u32; kept.len()];
    let mut by_centre: BTreeSet<Key<T>> = kept.iter().enumerate().map(|(i, g)| Key(g.centre, i)).collect();
    let mut heap = BinaryHeap::new();

    let push_near = |heap: &mut BinaryHeap<Reverse<Candidate<T>>>,
                     by_centre: &BTreeSet<Key<T>>,
                     kept: &[GaussianComponent<T>],
                     version: &[u32],
                     a: usize,
                     later_only: bool| {
        let c = kept[a].centre;
        for &Key(_, b) in by_centre.range(Key(c - reach, 0)..=Key(c + reach, usize::MAX)) {
            if b == a || (later_only && b < a) {
                continue;
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            let d = symmetric_kl(&kept[i], &kept[j]);
            if d < kl {
                heap.push(Reverse(Candidate {
                    d,
                    i,
                    j,
                    vi: version[i],
                    vj: version[j],
                }));
            }
        }
    };

    for a in 0..kept.len() {
        push_near(&mut heap, &by_centre, kept, &version, a, true);
    }
    let mut merged = 0;
    while let Some(Reverse(c)) = heap.pop() {
        if !alive[c.i] || !alive[c.j] || version[c.i] != c.vi || version[c.j] != c.vj {
            continue;
        }
        by_centre.remove(&Key(kept[c.i].centre, c.i));
        by_centre.remove(&Key(kept[c.j].centre, c.j));
        kept[c.i] = merge_pair(&kept[c.i], &kept[c.j]);
        alive[c.j] = false;
        version[c.i] += 1;
        by_centre.insert(Key(kept[c.i].centre, c.i));
        merged += 1;
        push_near(&mut heap, &by_centre, kept, &version, c.i, false);
    }
    let mut idx = 0;
    kept.retain(|_| {
        idx += 1;
        alive[idx - 1]
    });
    merged
}
