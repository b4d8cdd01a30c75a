//! Closed-loop scenarios, metrics and log files.

pub mod csvio;
pub mod metrics;
pub mod run;
pub mod scenario;

pub use csvio::{emit_csv, parse_csv, read_csv, write_csv, CsvLog, CsvRow};
pub use metrics::{attitude_error_std, compute_rmse, error_samples, first_time_below, rmse_of, ErrorSample, Rmse};
pub use run::{run_scenario, synthesize_rel_pose, RunLog, StepRecord};
pub use scenario::{builtin, Disturbance, Scenario, ScenarioFile, TrajectoryKind, BUILTIN};
