//! Ground-truth Wiener-process signals, simulated Ramsey shots and the lab clock.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ramsey::{likelihood_exact, FrequencyRange, Outcome, RamseySettings};

/// Header of the signal CSV export.
pub const SIGNAL_CSV_HEADER: &str = "step_index,time_s,f_hz";

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Signal = 0,
    Measurement = 1,
    InitialFrequency = 2,
}

/// Seeded generator for one stream of one run.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Piecewise-constant trajectory of the true Larmor frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSignal {
    pub f0: f64,
    /// Hz / sqrt(s); `None` for imported signals.
    pub kappa: Option<f64>,
    /// Sample spacing, seconds.
    pub step: f64,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
}

impl GroundTruthSignal {
    /// Time covered by the samples, `(len - 1) * step`.
    pub fn duration(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.step
    }

    /// `values[floor(t / step)]`.
    pub fn at(&self, t: f64) -> Result<f64> {
        let end = self.duration();
        if !(t >= 0.0) || t > end * (1.0 + 1e-12) {
            return Err(Error::TimeOutOfRange { t, end });
        }
        let idx = ((t / self.step).floor() as usize).min(self.values.len() - 1);
        Ok(self.values[idx])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SIGNAL_CSV_HEADER.split(','))?;
        for (i, f) in self.values.iter().enumerate() {
            out.serialize((i, i as f64 * self.step, f))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.join(",") != SIGNAL_CSV_HEADER {
            return Err(Error::config(format!("unexpected signal header {:?}", header.join(","))));
        }
        let mut values = Vec::new();
        let mut step = None;
        for (expected, row) in rdr.deserialize::<(usize, f64, f64)>().enumerate() {
            let (i, t, f) = row?;
            if i != expected {
                return Err(Error::config(format!("signal rows out of order at index {i}")));
            }
            if i == 1 {
                step = Some(t);
            }
            values.push(f);
        }
        if values.is_empty() {
            return Err(Error::config("signal file has no samples"));
        }
        Ok(Self {
            f0: values[0],
            kappa: None,
            step: step.unwrap_or(1.0),
            values,
            seed: None,
        })
    }
}

/// Draw `f0` uniformly from the central 80% of the range.
pub fn draw_f0(range: &FrequencyRange<f64>, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, Stream::InitialFrequency);
    let u: f64 = rng.random();
    range.lo + range.width() * (0.1 + 0.8 * u)
}

/// Wiener process `f <- reflect(f + kappa sqrt(step) z)` sampled every `step` seconds.
///
/// Holds `ceil(total_time / step) + 1` samples, so `at(total_time)` is defined.
pub fn generate_ground_truth(
    f0: f64,
    kappa: f64,
    step: f64,
    total_time: f64,
    range: &FrequencyRange<f64>,
    seed: u64,
) -> Result<GroundTruthSignal> {
    if !(step > 0.0) || !(total_time > 0.0) {
        return Err(Error::config("signal step and duration must be positive"));
    }
    if !range.contains(f0) {
        return Err(Error::config(format!("f0 = {f0} Hz lies outside the prior range")));
    }
    // tolerate rounding in total_time / step before taking the ceiling
    let n = (total_time / step * (1.0 - 1e-12)).ceil() as usize + 1;
    let mut rng = stream_rng(seed, Stream::Signal);
    let scale = kappa * step.sqrt();
    let mut values = Vec::with_capacity(n);
    let mut f = f0;
    values.push(f);
    for _ in 1..n {
        let z: f64 = rng.sample(StandardNormal);
        f = range.reflect(f + scale * z);
        values.push(f);
    }
    Ok(GroundTruthSignal {
        f0,
        kappa: Some(kappa),
        step,
        values,
        seed: Some(seed),
    })
}

/// Bernoulli shot with `P(mu = 0) = likelihood_exact(0, settings, f_true)`.
pub fn sample_measurement<R: Rng + ?Sized>(f_true: f64, settings: &RamseySettings<f64>, rng: &mut R) -> Outcome {
    let p0 = likelihood_exact(Outcome::Zero, settings, f_true);
    let u: f64 = rng.random();
    if u < p0 {
        Outcome::Zero
    } else {
        Outcome::One
    }
}

/// Elapsed experiment time; each shot costs its sensing time plus a fixed overhead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentClock {
    pub t: f64,
    pub t_oh: f64,
}

impl ExperimentClock {
    pub fn new(t_oh: f64) -> Self {
        Self { t: 0.0, t_oh }
    }

    /// `tau + t_oh`
    #[inline]
    pub fn interval(&self, tau: f64) -> f64 {
        tau + self.t_oh
    }

    /// Advance by one shot; returns the interval.
    pub fn advance(&mut self, tau: f64) -> f64 {
        let dt = self.interval(tau);
        self.t += dt;
        dt
    }
}
