//! Configured experiments: single runs, initial-condition sweeps, the shell
//! reach-time estimate and the appendix checks, with their CSV outputs.

pub mod appendix;
pub mod assumption3;
pub mod config;
pub mod output;
pub mod sweep;

pub use appendix::{run_appendix, AppendixReport, AppendixRow};
pub use assumption3::{estimate_t_delta_delta, shell_states, ReachEstimate};
pub use config::{ConfigError, ExperimentConfig};
pub use output::{write_appendix, write_shell, write_sweep, write_trajectory};
pub use sweep::{
    analyze, run_batch, run_one, run_sweep, SweepResult, SweepSummary, TrajectoryReport,
    WORKERS_ENV,
};
