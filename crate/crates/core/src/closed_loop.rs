//! Pendulum + supervisor + disturbance wired into one [`System`].

use crate::controllers::ControlLaws;
use crate::dynamics::{integrate, System, TimeGrid, Trajectory};
use crate::error::SimError;
use crate::pendulum::{plant_derivative, DisturbanceSignal, DisturbanceSpec, State};
use crate::scalar::Scalar;
use crate::supervisor::{Mode, Supervisor, SupervisorKind, SwitchEvent};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSpec<T> {
    pub laws: ControlLaws<T>,
    pub supervisor: SupervisorKind,
    pub disturbance: DisturbanceSpec<T>,
}

/// A closed-loop run: states plus the applied control, the active mode and the switch log.
///
/// `controls[i]` and `modes[i]` are what acts on the step leaving sample `i`.
#[derive(Debug, Clone)]
pub struct HybridTrajectory<T> {
    pub trajectory: Trajectory<T, 2>,
    pub controls: Vec<T>,
    pub modes: Vec<Mode>,
    pub events: Vec<SwitchEvent<T>>,
    /// Set when the run was cut short; the recorded prefix is still valid.
    pub diverged: Option<SimError>,
}

impl<T: Scalar> HybridTrajectory<T> {
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.trajectory.grid
    }

    pub fn states(&self) -> &[State<T>] {
        &self.trajectory.states
    }

    pub fn len(&self) -> usize {
        self.trajectory.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.states.is_empty()
    }

    /// Sample index at which the last switch into local mode happened, if the run ends in local mode.
    /// A run that starts local and never switches reports index 0.
    pub fn final_local_entry(&self) -> Option<usize> {
        if *self.modes.last()? != Mode::Local {
            return None;
        }
        match self.events.iter().rev().find(|e| e.to == Mode::Local) {
            Some(e) => Some(self.index_of(e.time)),
            None => Some(0),
        }
    }

    /// Grid index of an event time (event times are grid samples).
    pub fn index_of(&self, t: T) -> usize {
        let g = self.grid();
        ((t - g.t0()) / g.h()).round().to_usize().unwrap_or(0)
    }
}

struct ClosedLoop<T> {
    laws: ControlLaws<T>,
    supervisor: Supervisor<T>,
    disturbance: DisturbanceSignal<T>,
    controls: Vec<T>,
    modes: Vec<Mode>,
}

impl<T: Scalar> ClosedLoop<T> {
    #[inline]
    fn control(&self, x: &State<T>) -> T {
        match self.supervisor.mode() {
            Mode::Global => self.laws.global(x),
            Mode::Local => self.laws.local(x, self.supervisor.target()),
        }
    }
}

impl<T: Scalar> System<T, 2> for ClosedLoop<T> {
    #[inline]
    fn derivative(&self, t: T, x: &State<T>) -> State<T> {
        plant_derivative(
            x,
            self.control(x),
            self.disturbance.at(t),
            &self.laws.params,
        )
    }

    fn observe(&mut self, step: usize, t: T, x: &State<T>) {
        if step > 0 {
            self.supervisor.step(t, x);
            self.disturbance.resample();
        }
        self.modes.push(self.supervisor.mode());
        let u = self.control(x);
        self.controls.push(u);
    }
}

/// Simulates the switched closed loop from `x0`. `stream` selects the noise realisation.
pub fn simulate<T: Scalar>(
    spec: &ClosedLoopSpec<T>,
    x0: State<T>,
    grid: TimeGrid<T>,
    stream: u64,
) -> HybridTrajectory<T> {
    let mut system = ClosedLoop {
        laws: spec.laws,
        supervisor: Supervisor::init(spec.supervisor, grid.t0(), &x0, &spec.laws.params),
        disturbance: spec.disturbance.signal(stream),
        controls: Vec::with_capacity(grid.len()),
        modes: Vec::with_capacity(grid.len()),
    };
    let (trajectory, diverged) = match integrate(&mut system, x0, grid) {
        Ok(t) => (t, None),
        Err(d) => (d.partial, Some(d.error)),
    };
    HybridTrajectory {
        trajectory,
        controls: system.controls,
        modes: system.modes,
        events: system.supervisor.into_events(),
        diverged,
    }
}
