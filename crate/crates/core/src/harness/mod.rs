//! End-to-end tracking runs, metrics, experiments and export.

pub mod config;
pub mod experiments;
pub mod export;
pub mod record;
pub mod run;

pub use config::{Budget, FilterKind, RunConfig};
pub use experiments::{bench, direct_compare, sweep, BenchRow, CompareRow, CompareSpec, Comparison, SweepAxis, SweepRow};
pub use export::Format;
pub use record::{Row, RunRecord, Summary};
pub use run::{fail_rate, make_signal, mse, run_tracking};
