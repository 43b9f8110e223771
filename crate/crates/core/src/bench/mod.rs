//! Benchmark harness: solver dispatch, subproblem timers and CSV sweeps.

mod runner;
mod sweep;
pub mod timers;

pub use runner::{run_method, Method, MethodRun, SOFT_IMPUTE_EPS};
pub use sweep::{
    column_means, run_sweep, summary_path, trial_csv, SummaryCell, SweepConfig, SweepParam, SweepSummary, TrialMetrics,
    TrialRow, METRIC_COLUMNS, TRIAL_COLUMNS,
};
pub use timers::{Section, SubproblemTimers};
