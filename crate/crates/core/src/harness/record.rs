use serde::{Deserialize, Serialize};

use super::config::FilterKind;

/// Header of the per-shot trajectory CSV.
pub const TRAJECTORY_CSV_HEADER: &str = "idx,time_s,tau_s,theta_rad,outcome,estimate_hz,truth_hz,n_params,compute_ns";
/// Header of the per-run summary CSV.
pub const RUNS_CSV_HEADER: &str = "seed,filter,mse,failed,mean_params,mean_compute_ns,n_meas";

/// One Ramsey shot and the filter state after processing it.
///
/// `estimate_hz` is the predicted estimate at `time_s` (end of the shot plus overhead)
/// and `truth_hz` the true frequency at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub idx: usize,
    pub time_s: f64,
    pub tau_s: f64,
    pub theta_rad: f64,
    pub outcome: u8,
    pub estimate_hz: f64,
    pub truth_hz: f64,
    pub n_params: usize,
    /// Wall time of update, prediction and next-setting choice.
    pub compute_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub filter: FilterKind,
    /// Time-averaged squared error over the tracking phase, MHz^2.
    pub mse: f64,
    pub failed: bool,
    /// Mean parameter count over all shots, sensing included.
    pub mean_params: f64,
    /// Median parameter count over tracking-phase shots.
    pub tracking_median_params: f64,
    /// Mean compute time per shot after the warm-up shots, ns.
    pub mean_compute_ns: f64,
    pub n_meas: usize,
    /// Number of leading rows belonging to the fixed sensing schedule.
    pub sensing_len: usize,
    /// The signal ran out before the budget did.
    pub truncated: bool,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<Row>,
    pub summary: Summary,
}

impl RunRecord {
    /// Record with all wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.compute_ns = 0);
        r.summary.mean_compute_ns = 0.0;
        r
    }

    pub fn tracking_rows(&self) -> &[Row] {
        &self.rows[self.summary.sensing_len.min(self.rows.len())..]
    }
}

/// Flat per-run line of the runs CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLine {
    pub seed: u64,
    pub filter: FilterKind,
    pub mse: f64,
    pub failed: bool,
    pub mean_params: f64,
    pub mean_compute_ns: f64,
    pub n_meas: usize,
}

impl From<&Summary> for RunLine {
    fn from(s: &Summary) -> Self {
        Self {
            seed: s.seed,
            filter: s.filter,
            mse: s.mse,
            failed: s.failed,
            mean_params: s.mean_params,
            mean_compute_ns: s.mean_compute_ns,
            n_meas: s.n_meas,
        }
    }
}
