use std::time::Instant;

use crate::control::{choose_phase, choose_sensing_time, figure_of_merit, sensing_schedule, SensingStep, SensingTimeState};
use crate::error::Result;
use crate::filter::TrackingFilter;
use crate::gaussian_filter::{GaussianFilter, GaussianFilterConfig};
use crate::grid_filter::GridFilter;
use crate::ramsey::{Outcome, RamseySettings};
use crate::sim::{draw_f0, generate_ground_truth, sample_measurement, stream_rng, ExperimentClock, GroundTruthSignal, Stream};

use super::config::{Budget, FilterKind, RunConfig, MHZ};
use super::record::{Row, RunRecord, Summary};

/// Ground truth for `cfg`, long enough for its budget. `f0` is drawn from `seed` unless fixed.
pub fn make_signal(cfg: &RunConfig, seed: u64) -> Result<GroundTruthSignal> {
    let range = cfg.range()?;
    let f0 = cfg.f0.unwrap_or_else(|| draw_f0(&range, seed));
    generate_ground_truth(f0, cfg.kappa, cfg.tau_min(), cfg.signal_duration(), &range, seed)
}

/// Run the sensing schedule then adaptive tracking on `signal`.
pub fn run_tracking(cfg: &RunConfig, signal: &GroundTruthSignal) -> Result<RunRecord> {
    cfg.validate()?;
    let range = cfg.range()?;
    match cfg.filter {
        FilterKind::Gaussian => {
            let mut fc = GaussianFilterConfig::new(cfg.kappa);
            fc.thresholds = cfg.thresholds;
            fc.windowing = cfg.windowing;
            run_with(cfg, signal, GaussianFilter::init_uniform(range, fc))
        }
        FilterKind::Grid => run_with(cfg, signal, GridFilter::new(&range, cfg.grid_points(), cfg.kappa)?),
    }
}

/// Shot-by-shot plan: the fixed sensing blocks, then adaptive tracking.
struct Planner<'a> {
    cfg: &'a RunConfig,
    schedule: Vec<SensingStep<f64>>,
    block: usize,
    rep: u32,
    tracking: Option<SensingTimeState>,
    tau: f64,
    theta: f64,
}

impl<'a> Planner<'a> {
    fn new<F: TrackingFilter<f64>>(cfg: &'a RunConfig, filter: &F) -> Self {
        let schedule = sensing_schedule(&cfg.controller);
        let first = schedule[0];
        let theta = choose_phase(filter, 1u64 << first.k, cfg.tau_min());
        Self {
            cfg,
            schedule,
            block: 0,
            rep: 0,
            tracking: None,
            tau: first.tau,
            theta,
        }
    }

    /// Settings for the next shot, given the state after the current one.
    fn advance<F: TrackingFilter<f64>>(&mut self, filter: &F) -> Result<()> {
        let ctl = &self.cfg.controller;
        let tau_min = self.cfg.tau_min();
        if self.tracking.is_none() {
            self.rep += 1;
            if self.rep < self.schedule[self.block].repetitions {
                return Ok(());
            }
            self.block += 1;
            self.rep = 0;
            if let Some(step) = self.schedule.get(self.block).copied() {
                self.tau = step.tau;
                self.theta = choose_phase(filter, 1u64 << step.k, tau_min);
                return Ok(());
            }
            let last = self.schedule[self.schedule.len() - 1];
            self.tracking = Some(SensingTimeState { k: last.k });
        }
        let state = self.tracking.expect("tracking phase");
        let fom = figure_of_merit(filter, self.tau)?;
        let next = choose_sensing_time(state, fom, ctl);
        self.tracking = Some(next);
        self.tau = next.tau(ctl);
        self.theta = choose_phase(filter, next.coefficient(), tau_min);
        Ok(())
    }
}

fn run_with<F: TrackingFilter<f64>>(cfg: &RunConfig, signal: &GroundTruthSignal, mut filter: F) -> Result<RunRecord> {
    let sensing_len: usize = sensing_schedule(&cfg.controller)
        .iter()
        .map(|s| s.repetitions as usize)
        .sum();
    let mut rng = stream_rng(cfg.seed, Stream::Measurement);
    let mut clock = ExperimentClock::new(cfg.t_oh);
    let mut plan = Planner::new(cfg, &filter);
    let budget_rows = match cfg.budget {
        Budget::Measurements(n) => n,
        Budget::TotalTime(_) => usize::MAX,
    };
    let mut rows: Vec<Row> = Vec::new();
    let mut truncated = false;
    let end = signal.duration();

    while rows.len() < budget_rows {
        if let Budget::TotalTime(t) = cfg.budget {
            if clock.t >= t {
                break;
            }
        }
        let tau = plan.tau;
        let theta = plan.theta;
        let dt = clock.interval(tau);
        if clock.t + dt > end {
            truncated = true;
            break;
        }
        let settings = RamseySettings::new(theta, tau, cfg.t2_star)?;
        let outcome: Outcome = sample_measurement(signal.at(clock.t)?, &settings, &mut rng);

        let start = Instant::now();
        filter = filter.update(outcome, &settings)?.predict(dt);
        plan.advance(&filter)?;
        let compute_ns = start.elapsed().as_nanos() as u64;

        clock.advance(tau);
        rows.push(Row {
            idx: rows.len(),
            time_s: clock.t,
            tau_s: tau,
            theta_rad: theta,
            outcome: outcome.bit(),
            estimate_hz: filter.estimate()?,
            truth_hz: signal.at(clock.t)?,
            n_params: filter.parameter_count(),
            compute_ns,
        });
    }

    let summary = summarize(cfg, &rows, sensing_len, truncated);
    Ok(RunRecord { rows, summary })
}

fn summarize(cfg: &RunConfig, rows: &[Row], sensing_len: usize, truncated: bool) -> Summary {
    let mse = mse_from_rows(rows, sensing_len);
    let n = rows.len().max(1) as f64;
    let mean_params = rows.iter().map(|r| r.n_params as f64).sum::<f64>() / n;
    let tracking: Vec<f64> = rows.iter().skip(sensing_len).map(|r| r.n_params as f64).collect();
    // fall back to every row when the run is shorter than the warm-up
    let timed = if rows.len() > cfg.warmup { &rows[cfg.warmup..] } else { rows };
    let mean_compute_ns = if timed.is_empty() {
        0.0
    } else {
        timed.iter().map(|r| r.compute_ns as f64).sum::<f64>() / timed.len() as f64
    };
    Summary {
        seed: cfg.seed,
        filter: cfg.filter,
        mse,
        failed: mse > cfg.fail_threshold,
        mean_params,
        tracking_median_params: median(&tracking),
        mean_compute_ns,
        n_meas: rows.len(),
        sensing_len,
        truncated,
        config_hash: cfg.hash(),
    }
}

/// Time-weighted mean squared error in MHz^2,
/// `sum dt_n (truth_n - est_n)^2 / sum dt_n` over the tracking rows.
///
/// `dt_n` is the spacing of consecutive `time_s` values. Falls back to every row when the
/// run never left the sensing schedule.
pub fn mse_from_rows(rows: &[Row], sensing_len: usize) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let start = if rows.len() > sensing_len { sensing_len } else { 0 };
    let mut prev = if start == 0 { 0.0 } else { rows[start - 1].time_s };
    let mut acc = 0.0;
    let mut span = 0.0;
    for r in &rows[start..] {
        let dt = r.time_s - prev;
        prev = r.time_s;
        let e = (r.truth_hz - r.estimate_hz) / MHZ;
        acc += dt * e * e;
        span += dt;
    }
    acc / span
}

/// MSE of a record, recomputed from its rows.
pub fn mse(record: &RunRecord) -> f64 {
    mse_from_rows(&record.rows, record.summary.sensing_len)
}

/// Fraction of records whose MSE exceeds `threshold`.
pub fn fail_rate(records: &[RunRecord], threshold: f64) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    records.iter().filter(|r| r.summary.mse > threshold).count() as f64 / records.len() as f64
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::US;

    fn row(time_s: f64, est: f64, truth: f64) -> Row {
        Row {
            idx: 0,
            time_s,
            tau_s: 1e-6,
            theta_rad: 0.0,
            outcome: 0,
            estimate_hz: est,
            truth_hz: truth,
            n_params: 3,
            compute_ns: 0,
        }
    }

    #[test]
    fn mse_examples() {
        let perfect: Vec<Row> = (1..10).map(|i| row(i as f64 * 1e-5, 5e6, 5e6)).collect();
        assert_eq!(mse_from_rows(&perfect, 0), 0.0);

        let offset: Vec<Row> = (1..10).map(|i| row(i as f64 * 1e-5, 5.3e6, 5e6)).collect();
        assert!((mse_from_rows(&offset, 0) - 0.09).abs() < 1e-12);

        // dt = 1, 2, 3 us; errors 0.1, 0.2, 0.3 MHz -> (1*.01 + 2*.04 + 3*.09) / 6
        let rows = vec![row(1e-6, 1.1e6, 1e6), row(3e-6, 1.2e6, 1e6), row(6e-6, 1.3e6, 1e6)];
        let expected = (1.0 * 0.01 + 2.0 * 0.04 + 3.0 * 0.09) / 6.0;
        assert!((mse_from_rows(&rows, 0) - expected).abs() < 1e-12);
        // skipping the first row as sensing: (2*.04 + 3*.09) / 5
        assert!((mse_from_rows(&rows, 1) - (0.08 + 0.27) / 5.0).abs() < 1e-12);
    }

    fn record(mse: f64) -> RunRecord {
        RunRecord {
            rows: vec![],
            summary: Summary {
                seed: 0,
                filter: FilterKind::Gaussian,
                mse,
                failed: false,
                mean_params: 0.0,
                tracking_median_params: 0.0,
                mean_compute_ns: 0.0,
                n_meas: 0,
                sensing_len: 0,
                truncated: false,
                config_hash: String::new(),
            },
        }
    }

    #[test]
    fn fail_rate_examples() {
        let perfect = vec![record(0.0), record(0.0)];
        assert_eq!(fail_rate(&perfect, 0.15), 0.0);
        let one_bad = vec![record(0.01), record(0.2), record(0.1), record(0.05)];
        assert_eq!(fail_rate(&one_bad, 0.15), 0.25);
        assert_eq!(fail_rate(&one_bad, f64::INFINITY), 0.0);
    }

    #[test]
    fn measurement_budget_sets_row_count() {
        let mut cfg = RunConfig::default();
        cfg.budget = Budget::Measurements(1000);
        let sig = make_signal(&cfg, 3).unwrap();
        let rec = run_tracking(&cfg, &sig).unwrap();
        assert_eq!(rec.rows.len(), 1000);
        assert!(!rec.summary.truncated);
        assert_eq!(rec.summary.sensing_len, 155);
        assert_eq!(mse(&rec), rec.summary.mse);
    }

    #[test]
    fn static_field_converges() {
        let mut cfg = RunConfig::default();
        cfg.kappa = 0.0;
        cfg.f0 = Some(17.3e6);
        cfg.budget = Budget::Measurements(400);
        let sig = make_signal(&cfg, 1).unwrap();
        for filter in [FilterKind::Gaussian, FilterKind::Grid] {
            let rec = run_tracking(&cfg.clone().with_filter(filter), &sig).unwrap();
            let last = rec.rows.last().unwrap();
            let tol = 1.0 / (2.0 * cfg.controller.tau_max());
            assert!((last.estimate_hz - 17.3e6).abs() < tol, "{filter}: {}", last.estimate_hz);
        }
    }

    #[test]
    fn same_seed_same_record() {
        let mut cfg = RunConfig::default();
        cfg.budget = Budget::TotalTime(1e-3);
        cfg.t_oh = 2.0 * US;
        let sig = make_signal(&cfg, 77).unwrap();
        let a = run_tracking(&cfg.clone().with_seed(77), &sig).unwrap();
        let b = run_tracking(&cfg.clone().with_seed(77), &sig).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn short_signal_truncates() {
        let cfg = RunConfig::default();
        let mut sig = make_signal(&cfg, 2).unwrap();
        sig.values.truncate(10_000);
        let rec = run_tracking(&cfg, &sig).unwrap();
        assert!(rec.summary.truncated);
        assert!(rec.rows.last().unwrap().time_s <= sig.duration());
    }

    #[test]
    fn handoff_after_sensing_schedule() {
        let mut cfg = RunConfig::default();
        cfg.budget = Budget::Measurements(200);
        let sig = make_signal(&cfg, 4).unwrap();
        let rec = run_tracking(&cfg, &sig).unwrap();
        let taus: Vec<f64> = rec.rows.iter().map(|r| r.tau_s).collect();
        // sensing rows follow the fixed schedule exactly
        let mut expected = Vec::new();
        for s in sensing_schedule(&cfg.controller) {
            expected.extend(std::iter::repeat_n(s.tau, s.repetitions as usize));
        }
        assert_eq!(&taus[..155], &expected[..]);
        // first tracking shot is one step from the last sensing time
        let ratio = taus[155] / taus[154];
        assert!(ratio == 0.5 || ratio == 1.0 || ratio == 2.0);
    }
}
