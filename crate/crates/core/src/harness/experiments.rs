use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{FilterKind, RunConfig, MHZ, US};
use super::record::Summary;
use super::run::{make_signal, median, run_tracking};

/// Head-to-head comparison of two configurations on shared signals.
#[derive(Debug, Clone)]
pub struct CompareSpec {
    pub grid: RunConfig,
    pub gaussian: RunConfig,
    pub runs: usize,
    pub seed0: u64,
    /// Leading seeds re-run sequentially for the compute-time figures.
    pub timing_runs: usize,
}

impl CompareSpec {
    /// Grid and gaussian variants of `base`.
    pub fn from_base(base: &RunConfig, runs: usize, seed0: u64) -> Self {
        Self {
            grid: base.clone().with_filter(FilterKind::Grid),
            gaussian: base.clone().with_filter(FilterKind::Gaussian),
            runs,
            seed0,
            timing_runs: runs.min(20),
        }
    }

    fn check_shared(&self) -> Result<()> {
        let (a, b) = (&self.grid, &self.gaussian);
        a.validate()?;
        b.validate()?;
        let same = a.tau_min() == b.tau_min()
            && a.kappa == b.kappa
            && a.t_oh == b.t_oh
            && a.t2_star == b.t2_star
            && a.budget == b.budget
            && a.f0 == b.f0;
        if !same {
            return Err(Error::config(
                "compared configurations must share tau_min, kappa, overhead, T2*, budget and f0",
            ));
        }
        if self.runs == 0 {
            return Err(Error::config("comparison needs at least one run"));
        }
        Ok(())
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub t2star_us: f64,
    pub overhead_us: f64,
    pub kappa_mhz: f64,
    pub runs: usize,
    pub grid_fail_rate: f64,
    pub gaussian_fail_rate: f64,
    /// Mean MSE of the runs that did not fail, MHz^2.
    pub grid_mean_mse: f64,
    pub gaussian_mean_mse: f64,
    pub grid_mean_params: f64,
    pub gaussian_mean_params: f64,
    pub grid_median_tracking_params: f64,
    pub gaussian_median_tracking_params: f64,
    pub grid_compute_ns: f64,
    pub gaussian_compute_ns: f64,
    /// Grid compute time per shot over gaussian compute time per shot.
    pub speed_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub row: CompareRow,
    pub grid: Vec<Summary>,
    pub gaussian: Vec<Summary>,
}

/// Run both filters on the same signals. Accuracy runs are parallel; the compute-time
/// figures come from a separate sequential pass.
pub fn direct_compare(spec: &CompareSpec) -> Result<Comparison> {
    spec.check_shared()?;
    let seeds: Vec<u64> = (0..spec.runs as u64).map(|i| spec.seed0 + i).collect();
    let pairs: Vec<(Summary, Summary)> = seeds
        .par_iter()
        .map(|&seed| -> Result<(Summary, Summary)> {
            let signal = make_signal(&spec.gaussian, seed)?;
            let grid = run_tracking(&spec.grid.clone().with_seed(seed), &signal)?;
            let gauss = run_tracking(&spec.gaussian.clone().with_seed(seed), &signal)?;
            Ok((grid.summary, gauss.summary))
        })
        .collect::<Result<_>>()?;
    let (mut grid, mut gaussian): (Vec<Summary>, Vec<Summary>) = pairs.into_iter().unzip();

    let (grid_ns, gauss_ns) = timing_pass(spec, &seeds[..spec.timing_runs.min(seeds.len())])?;
    for (s, ns) in grid.iter_mut().zip(&grid_ns) {
        s.mean_compute_ns = *ns;
    }
    for (s, ns) in gaussian.iter_mut().zip(&gauss_ns) {
        s.mean_compute_ns = *ns;
    }
    let grid_compute_ns = mean(&grid_ns);
    let gaussian_compute_ns = mean(&gauss_ns);

    let cfg = &spec.gaussian;
    let row = CompareRow {
        t2star_us: cfg.t2_star / US,
        overhead_us: cfg.t_oh / US,
        kappa_mhz: cfg.kappa / MHZ,
        runs: spec.runs,
        grid_fail_rate: failed_fraction(&grid),
        gaussian_fail_rate: failed_fraction(&gaussian),
        grid_mean_mse: mean_successful_mse(&grid),
        gaussian_mean_mse: mean_successful_mse(&gaussian),
        grid_mean_params: mean(&grid.iter().map(|s| s.mean_params).collect::<Vec<_>>()),
        gaussian_mean_params: mean(&gaussian.iter().map(|s| s.mean_params).collect::<Vec<_>>()),
        grid_median_tracking_params: median(&grid.iter().map(|s| s.tracking_median_params).collect::<Vec<_>>()),
        gaussian_median_tracking_params: median(
            &gaussian.iter().map(|s| s.tracking_median_params).collect::<Vec<_>>(),
        ),
        grid_compute_ns,
        gaussian_compute_ns,
        speed_increase: grid_compute_ns / gaussian_compute_ns,
    };
    Ok(Comparison { row, grid, gaussian })
}

/// Sequential, single-threaded compute-time measurement, alternating the filters.
fn timing_pass(spec: &CompareSpec, seeds: &[u64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut grid = Vec::with_capacity(seeds.len());
    let mut gauss = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let signal = make_signal(&spec.gaussian, seed)?;
        grid.push(run_tracking(&spec.grid.clone().with_seed(seed), &signal)?.summary.mean_compute_ns);
        gauss.push(run_tracking(&spec.gaussian.clone().with_seed(seed), &signal)?.summary.mean_compute_ns);
    }
    Ok((grid, gauss))
}

/// Compute-time figures of a timing-only comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub runs: usize,
    pub grid_points: usize,
    pub grid_compute_ns: f64,
    pub gaussian_compute_ns: f64,
    pub speed_increase: f64,
}

/// Timing-only comparison: `spec.runs` seeds, strictly sequential.
pub fn bench(spec: &CompareSpec) -> Result<BenchRow> {
    spec.check_shared()?;
    let seeds: Vec<u64> = (0..spec.runs as u64).map(|i| spec.seed0 + i).collect();
    let (grid, gauss) = timing_pass(spec, &seeds)?;
    let (grid_compute_ns, gaussian_compute_ns) = (mean(&grid), mean(&gauss));
    Ok(BenchRow {
        runs: spec.runs,
        grid_points: spec.grid.grid_points(),
        grid_compute_ns,
        gaussian_compute_ns,
        speed_increase: grid_compute_ns / gaussian_compute_ns,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Values in MHz Hz^(1/2).
    Kappa,
    /// Values in microseconds.
    Overhead,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Kappa => "kappa",
            SweepAxis::Overhead => "overhead",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kappa" => Ok(SweepAxis::Kappa),
            "overhead" => Ok(SweepAxis::Overhead),
            _ => Err(Error::config(format!("unknown sweep axis {s:?} (expected kappa or overhead)"))),
        }
    }
}

impl SweepAxis {
    pub fn apply(self, cfg: &mut RunConfig, value: f64) {
        match self {
            SweepAxis::Kappa => cfg.kappa = value * MHZ,
            SweepAxis::Overhead => cfg.t_oh = value * US,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub runs: usize,
    pub gaussian_mean_mse: f64,
    pub grid_mean_mse: f64,
    /// Standard error of the mean MSE.
    pub gaussian_mse_stderr: f64,
    pub grid_mse_stderr: f64,
    pub gaussian_mean_params: f64,
    pub grid_mean_params: f64,
    pub gaussian_fail_rate: f64,
    pub grid_fail_rate: f64,
    pub gaussian_median_tracking_params: f64,
    pub grid_median_tracking_params: f64,
}

/// Statistical sweep: each run of each filter gets its own signal.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], runs_per_point: usize, seed0: u64) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    if runs_per_point == 0 {
        return Err(Error::config("sweep needs at least one run per point"));
    }
    let mut out = Vec::with_capacity(values.len());
    for (p, &value) in values.iter().enumerate() {
        let mut cfg = base.clone();
        axis.apply(&mut cfg, value);
        cfg.validate()?;
        let point_seed = seed0 + (2 * runs_per_point * p) as u64;
        let run_all = |filter: FilterKind, offset: u64| -> Result<Vec<Summary>> {
            (0..runs_per_point as u64)
                .into_par_iter()
                .map(|i| {
                    let seed = point_seed + 2 * i + offset;
                    let c = cfg.clone().with_filter(filter).with_seed(seed);
                    let signal = make_signal(&c, seed)?;
                    Ok(run_tracking(&c, &signal)?.summary)
                })
                .collect()
        };
        let gauss = run_all(FilterKind::Gaussian, 0)?;
        let grid = run_all(FilterKind::Grid, 1)?;
        let mses = |v: &[Summary]| mean(&v.iter().map(|s| s.mse).collect::<Vec<_>>());
        let errs = |v: &[Summary]| stderr(&v.iter().map(|s| s.mse).collect::<Vec<_>>());
        let params = |v: &[Summary]| mean(&v.iter().map(|s| s.mean_params).collect::<Vec<_>>());
        let med = |v: &[Summary]| median(&v.iter().map(|s| s.tracking_median_params).collect::<Vec<_>>());
        out.push(SweepRow {
            axis,
            value,
            runs: runs_per_point,
            gaussian_mean_mse: mses(&gauss),
            grid_mean_mse: mses(&grid),
            gaussian_mse_stderr: errs(&gauss),
            grid_mse_stderr: errs(&grid),
            gaussian_mean_params: params(&gauss),
            grid_mean_params: params(&grid),
            gaussian_fail_rate: failed_fraction(&gauss),
            grid_fail_rate: failed_fraction(&grid),
            gaussian_median_tracking_params: med(&gauss),
            grid_median_tracking_params: med(&grid),
        });
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; 0 for fewer than two values.
fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn failed_fraction(s: &[Summary]) -> f64 {
    s.iter().filter(|s| s.failed).count() as f64 / s.len().max(1) as f64
}

fn mean_successful_mse(s: &[Summary]) -> f64 {
    mean(&s.iter().filter(|s| !s.failed).map(|s| s.mse).collect::<Vec<_>>())
}
