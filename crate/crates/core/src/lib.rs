//! Uniting control of the pendulum swing-up.
//!
//! The crate simulates a pendulum driven by an energy-based swing-up law that is
//! handed over to a local linear stabiliser by a dwell-time or hysteresis
//! supervisor, and measures how long trajectories take to settle at the upright
//! equilibrium. All numeric code is generic over [`Scalar`] (`f32`/`f64`); the
//! aliases at the crate root fix it to `f64`, which the experiment layer uses.

// NaN must fail every validity check, so bounds are written as `!(x > lo)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod experiments;
pub mod metrics;
pub mod pendulum;
pub mod scalar;
pub mod supervisor;

pub use error::{ParamError, SimError};
pub use scalar::Scalar;

pub type TimeGrid = dynamics::TimeGrid<f64>;
pub type Trajectory<const N: usize> = dynamics::Trajectory<f64, N>;
pub type State = pendulum::State<f64>;
pub type PendulumParams = pendulum::PendulumParams<f64>;
pub type DisturbanceSpec = pendulum::DisturbanceSpec<f64>;
pub type ControlLaws = controllers::ControlLaws<f64>;
pub type Supervisor = supervisor::Supervisor<f64>;
pub type SwitchEvent = supervisor::SwitchEvent<f64>;
pub type ClosedLoopSpec = closed_loop::ClosedLoopSpec<f64>;
pub type HybridTrajectory = closed_loop::HybridTrajectory<f64>;
pub type SettlingRecord = metrics::SettlingRecord<f64>;
pub type ReachDistribution = metrics::ReachDistribution<f64>;
pub type SampledGain<const R: usize, const C: usize> = excitation::SampledGain<f64, R, C>;
pub type Certificate = excitation::Certificate<f64>;
pub type Outcome = excitation::Outcome<f64>;

pub use controllers::GlobalLaw;
pub use excitation::ExcitationError;
pub use experiments::{ExperimentConfig, SweepResult, TrajectoryReport};
pub use pendulum::DisturbanceKind;
pub use supervisor::{Mode, SupervisorKind};
