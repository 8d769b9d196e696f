use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::ControllerConfig;
use crate::error::{Error, Result};
use crate::grid_filter::GridDistribution;
use crate::mixture::ReductionThresholds;
use crate::ramsey::FrequencyRange;

/// Hz per MHz.
pub const MHZ: f64 = 1e6;
/// Seconds per microsecond.
pub const US: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Gaussian,
    Grid,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Gaussian => "gaussian",
            FilterKind::Grid => "grid",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(FilterKind::Gaussian),
            "grid" => Ok(FilterKind::Grid),
            _ => Err(Error::config(format!("unknown filter {s:?} (expected gaussian or grid)"))),
        }
    }
}

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Stop once the experiment clock reaches this many seconds.
    TotalTime(f64),
    /// Stop after exactly this many shots.
    Measurements(usize),
}

/// Everything that determines one tracking run. Internal units are SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub filter: FilterKind,
    /// Overhead time per shot, seconds.
    pub t_oh: f64,
    /// Coherence time, seconds (`inf` for none).
    #[serde(with = "maybe_infinite")]
    pub t2_star: f64,
    /// Diffusion coefficient, Hz / sqrt(s).
    pub kappa: f64,
    pub budget: Budget,
    pub controller: ControllerConfig<f64>,
    pub thresholds: ReductionThresholds<f64>,
    pub windowing: bool,
    /// Grid size; `None` means `10 * 2^N`.
    pub grid_points: Option<usize>,
    pub seed: u64,
    /// Failed-run threshold on the MSE, MHz^2.
    pub fail_threshold: f64,
    /// Initial frequency, Hz; drawn per seed when `None`.
    pub f0: Option<f64>,
    /// Leading shots excluded from the compute-time average.
    pub warmup: usize,
}

impl Default for RunConfig {
    /// Reference settings: T2* = 100 us, t_oh = 10 us, kappa = 10 MHz Hz^(1/2), 5 ms runs.
    fn default() -> Self {
        let mut controller = ControllerConfig::new(20e-9, 10);
        controller.fom_threshold = DEFAULT_FOM_THRESHOLD;
        // short-to-long leaves the f <-> -f mirror unresolved whenever theta stays at 0
        controller.long_to_short = true;
        Self {
            filter: FilterKind::Gaussian,
            t_oh: 10.0 * US,
            t2_star: 100.0 * US,
            kappa: 10.0 * MHZ,
            budget: Budget::TotalTime(5e-3),
            controller,
            thresholds: ReductionThresholds::default(),
            windowing: true,
            grid_points: None,
            seed: 0,
            fail_threshold: 0.15,
            f0: None,
            warmup: 100,
        }
    }
}

/// Figure-of-merit threshold used unless configured otherwise.
pub const DEFAULT_FOM_THRESHOLD: f64 = 1.0;

impl RunConfig {
    pub fn with_filter(mut self, filter: FilterKind) -> Self {
        self.filter = filter;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tau_min(&self) -> f64 {
        self.controller.tau_min
    }

    pub fn range(&self) -> Result<FrequencyRange<f64>> {
        FrequencyRange::for_tau_min(self.tau_min())
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
            .unwrap_or_else(|| GridDistribution::<f64>::default_points(self.controller.n_sensing))
    }

    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        if !(self.t_oh >= 0.0) || !self.t_oh.is_finite() {
            return Err(Error::config("overhead time must be non-negative"));
        }
        if !(self.t2_star > 0.0) {
            return Err(Error::config("T2* must be positive"));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::config("kappa must be non-negative"));
        }
        match self.budget {
            Budget::TotalTime(t) if !(t > 0.0) || !t.is_finite() => {
                return Err(Error::config("total time must be positive"))
            }
            Budget::Measurements(0) => return Err(Error::config("measurement budget must be positive")),
            _ => {}
        }
        let th = &self.thresholds;
        if !(th.amplitude > 0.0 && th.amplitude < 1.0) {
            return Err(Error::config("amplitude threshold must lie in (0, 1)"));
        }
        if !(th.kl > 0.0) {
            return Err(Error::config("KL threshold must be positive"));
        }
        if self.grid_points() < 2 {
            return Err(Error::config("grid needs at least 2 points"));
        }
        if let Some(f0) = self.f0 {
            if !self.range()?.contains(f0) {
                return Err(Error::config(format!("f0 = {f0} Hz is outside the prior range")));
            }
        }
        Ok(())
    }

    /// Signal span needed to serve this run's budget without running out.
    pub fn signal_duration(&self) -> f64 {
        let longest = self.controller.tau_max() + self.t_oh;
        match self.budget {
            Budget::TotalTime(t) => t + longest,
            Budget::Measurements(n) => n as f64 * longest,
        }
    }

    /// Short hex digest of the configuration, seed excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_vec(&c).expect("config serialises");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    /// Apply one `key = value` setting. Times and rates use laboratory units
    /// (ns, us, ms, MHz, MHz Hz^(1/2)); see the README for the key list.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::config(format!("{key}: expected a number, got {value:?}")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::config(format!("{key}: expected an integer, got {value:?}")))
        };
        let flag = || -> Result<bool> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::config(format!("{key}: expected true/false, got {value:?}"))),
            }
        };
        match key {
            "filter" => self.filter = value.parse()?,
            "tau_min_ns" => self.controller.tau_min = num()? * 1e-9,
            "overhead_us" => self.t_oh = num()? * US,
            "t2star_us" => {
                self.t2_star = if value == "inf" { f64::INFINITY } else { num()? * US };
            }
            "kappa_mhz" => self.kappa = num()? * MHZ,
            "total_time_ms" => self.budget = Budget::TotalTime(num()? * 1e-3),
            "measurements" => self.budget = Budget::Measurements(int()? as usize),
            "n_sensing" => self.controller.n_sensing = int()? as u32,
            "g" => self.controller.g = int()? as u32,
            "f" => self.controller.f = int()? as u32,
            "fom_threshold" => self.controller.fom_threshold = num()?,
            "long_to_short" => self.controller.long_to_short = flag()?,
            "amp_threshold" => self.thresholds.amplitude = num()?,
            "kl_threshold" => self.thresholds.kl = num()?,
            "windowing" => self.windowing = flag()?,
            "grid_points" => self.grid_points = Some(int()? as usize),
            "seed" => self.seed = int()?,
            "fail_threshold" => self.fail_threshold = num()?,
            "f0_mhz" => self.f0 = Some(num()? * MHZ),
            "warmup" => self.warmup = int()? as usize,
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a plain-text `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

/// JSON has no infinity; write it as the string `"inf"`.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}
