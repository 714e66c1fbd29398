//! Switching logic selecting the local or the global controller.
//!
//! The local law is engaged on `X_l = {|ψ| ≤ Δ}` and released outside
//! `X_Δ = {|ψ| ≤ β′(Δ, 0)}`; inside the annulus between the two sets the mode
//! never changes. A dwell time `τ_D` additionally gates every switch, including
//! the first one after `t0`. Conditions are evaluated at grid samples only.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pendulum::{beta_prime, nearest_odd_target, psi_norm, PendulumParams, State};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Local,
    Global,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::Global => "global",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisorKind {
    Dwell,
    Hysteresis,
    #[default]
    FixedGlobal,
    FixedLocal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent<T> {
    pub time: T,
    pub from: Mode,
    pub to: Mode,
    /// `|ψ|` at the switching sample.
    pub eta_norm: T,
}

/// Mode, last switching instant, frozen upright target and the switch log.
#[derive(Debug, Clone)]
pub struct Supervisor<T> {
    kind: SupervisorKind,
    engage_radius: T,
    release_radius: T,
    dwell: T,
    mode: Mode,
    last_switch: T,
    target: T,
    log: Vec<SwitchEvent<T>>,
}

/// Number of switches the dwell-time gate allows on `[t_start, t_end]`: `1 + (t_end − t_start)/τ_D`.
pub fn switch_count_bound<T: Scalar>(t_start: T, t_end: T, tau_d: T) -> T {
    assert!(
        tau_d > T::zero(),
        "switch_count_bound needs a positive dwell time"
    );
    assert!(t_end >= t_start, "interval must be ordered");
    T::one() + (t_end - t_start) / tau_d
}

impl<T: Scalar> Supervisor<T> {
    /// Initial mode: local iff `|ψ(x0)| ≤ Δ` (always global/local for the fixed variants).
    ///
    /// The hysteresis variant ignores `tau_d`.
    pub fn init(kind: SupervisorKind, t0: T, x0: &State<T>, p: &PendulumParams<T>) -> Self {
        let engage_radius = p.delta_cap;
        let release_radius = beta_prime(p.delta_cap, T::zero(), p);
        let dwell = match kind {
            SupervisorKind::Dwell => p.tau_d,
            _ => T::zero(),
        };
        let eta = psi_norm(x0);
        let mode = match kind {
            SupervisorKind::FixedGlobal => Mode::Global,
            SupervisorKind::FixedLocal => Mode::Local,
            SupervisorKind::Dwell | SupervisorKind::Hysteresis => {
                if eta <= engage_radius {
                    Mode::Local
                } else {
                    Mode::Global
                }
            }
        };
        Self {
            kind,
            engage_radius,
            release_radius,
            dwell,
            mode,
            last_switch: t0,
            target: nearest_odd_target(x0[0]),
            log: Vec::new(),
        }
    }

    #[inline]
    pub fn mode(&self) -> Mode {
        self.mode
    }

    #[inline]
    pub fn kind(&self) -> SupervisorKind {
        self.kind
    }

    /// Upright target frozen at the last entry into local mode.
    #[inline]
    pub fn target(&self) -> T {
        self.target
    }

    #[inline]
    pub fn last_switch_time(&self) -> T {
        self.last_switch
    }

    /// Δ, the engagement radius.
    #[inline]
    pub fn engage_radius(&self) -> T {
        self.engage_radius
    }

    /// β′(Δ, 0), the release radius.
    #[inline]
    pub fn release_radius(&self) -> T {
        self.release_radius
    }

    #[inline]
    pub fn dwell(&self) -> T {
        self.dwell
    }

    pub fn events(&self) -> &[SwitchEvent<T>] {
        &self.log
    }

    pub fn into_events(self) -> Vec<SwitchEvent<T>> {
        self.log
    }

    /// Evaluates the switching rule at sample time `t` (which must not precede the last switch).
    pub fn step(&mut self, t: T, x: &State<T>) -> (Mode, Option<SwitchEvent<T>>) {
        debug_assert!(t >= self.last_switch);
        if matches!(
            self.kind,
            SupervisorKind::FixedGlobal | SupervisorKind::FixedLocal
        ) {
            return (self.mode, None);
        }
        if t < self.last_switch + self.dwell {
            return (self.mode, None);
        }
        let eta = psi_norm(x);
        let next = match self.mode {
            Mode::Local if eta > self.release_radius => Mode::Global,
            Mode::Global if eta <= self.engage_radius => Mode::Local,
            _ => return (self.mode, None),
        };
        if next == Mode::Local {
            self.target = nearest_odd_target(x[0]);
        }
        let event = SwitchEvent {
            time: t,
            from: self.mode,
            to: next,
            eta_norm: eta,
        };
        self.mode = next;
        self.last_switch = t;
        self.log.push(event);
        (next, Some(event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(tau_d: f64) -> PendulumParams<f64> {
        PendulumParams {
            tau_d,
            ..PendulumParams::default()
        }
    }

    /// A state on the `x1 = π` line with `|ψ| = v`.
    fn at_norm(v: f64) -> [f64; 2] {
        [PI, v]
    }

    #[test]
    fn init_examples() {
        let p = params(0.0);
        let s = Supervisor::init(SupervisorKind::Hysteresis, 0.0, &[PI, 0.1], &p);
        assert_eq!(s.mode(), Mode::Local);
        assert_eq!(s.target(), PI);
        let s = Supervisor::init(SupervisorKind::Hysteresis, 0.0, &[0.0, 0.0], &p);
        assert_eq!(s.mode(), Mode::Global);
        let s = Supervisor::init(SupervisorKind::Dwell, 0.0, &at_norm(0.2), &p);
        assert_eq!(s.mode(), Mode::Local);
        let s = Supervisor::init(SupervisorKind::FixedLocal, 0.0, &[3.0 * PI - 0.5, 3.0], &p);
        assert_eq!(s.mode(), Mode::Local);
        assert_eq!(s.target(), 3.0 * PI);
        let s = Supervisor::init(SupervisorKind::FixedGlobal, 0.0, &[PI, 0.0], &p);
        assert_eq!(s.mode(), Mode::Global);
    }

    #[test]
    fn hysteresis_engages_inside_local_set() {
        let p = params(0.0);
        let mut s = Supervisor::init(SupervisorKind::Hysteresis, 0.0, &[0.0, 0.0], &p);
        let x = [3.0 * PI + 0.01, 0.15];
        let (mode, ev) = s.step(0.01, &x);
        assert_eq!(mode, Mode::Local);
        let ev = ev.unwrap();
        assert_eq!((ev.from, ev.to, ev.time), (Mode::Global, Mode::Local, 0.01));
        assert_eq!(s.target(), 3.0 * PI);
        assert_eq!(s.last_switch_time(), 0.01);
    }

    #[test]
    fn dwell_gate_blocks_early_release() {
        let p = params(1.0);
        let mut s = Supervisor::init(SupervisorKind::Dwell, 0.0, &at_norm(0.1), &p);
        assert_eq!(s.mode(), Mode::Local);
        assert_eq!(s.step(0.5, &at_norm(5.0)), (Mode::Local, None));
        // still inside the release set after the dwell elapsed
        assert_eq!(s.step(1.2, &at_norm(1.0)), (Mode::Local, None));
        let (mode, ev) = s.step(1.3, &at_norm(2.5));
        assert_eq!(mode, Mode::Global);
        assert!(ev.is_some());
    }

    #[test]
    fn dwell_applies_to_first_switch() {
        let p = params(1.0);
        let mut s = Supervisor::init(SupervisorKind::Dwell, 0.0, &[0.0, 0.0], &p);
        assert_eq!(s.step(0.99, &at_norm(0.0)).0, Mode::Global);
        assert_eq!(s.step(1.0, &at_norm(0.0)).0, Mode::Local);
    }

    #[test]
    fn annulus_never_switches() {
        let p = params(0.0);
        let release = beta_prime(0.2, 0.0, &p);
        for start in [[PI, 0.1], [0.0, 0.0]] {
            let mut s = Supervisor::init(SupervisorKind::Hysteresis, 0.0, &start, &p);
            let m0 = s.mode();
            for i in 1..200 {
                let v = 0.2 + (release - 0.2) * (i as f64 / 200.0);
                assert_eq!(s.step(i as f64 * 0.01, &at_norm(v)), (m0, None));
            }
        }
        // the boundary of the release set still counts as inside
        let mut s = Supervisor::init(SupervisorKind::Hysteresis, 0.0, &[PI, 0.0], &p);
        assert_eq!(s.step(0.01, &at_norm(release)).0, Mode::Local);
    }

    #[test]
    fn fixed_variants_never_switch() {
        let p = params(0.0);
        for kind in [SupervisorKind::FixedGlobal, SupervisorKind::FixedLocal] {
            let mut s = Supervisor::init(kind, 0.0, &[PI, 0.0], &p);
            let m0 = s.mode();
            for i in 1..100 {
                let v = if i % 2 == 0 { 0.0 } else { 10.0 };
                assert_eq!(s.step(i as f64, &at_norm(v)), (m0, None));
            }
            assert!(s.events().is_empty());
        }
    }

    #[test]
    fn switch_bounds() {
        assert_eq!(switch_count_bound(0.0, 10.0, 1.0), 11.0);
        assert_eq!(switch_count_bound(0.0, 10.0, 10.0), 2.0);
        assert!((switch_count_bound(5.0f64, 5.0 + 1e-12, 0.5) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_records_every_switch() {
        let p = params(0.0);
        let mut s = Supervisor::init(SupervisorKind::Hysteresis, 0.0, &[0.0, 0.0], &p);
        let seq = [0.1, 3.0, 0.1, 3.0];
        for (i, v) in seq.iter().enumerate() {
            s.step((i + 1) as f64, &at_norm(*v));
        }
        let log = s.into_events();
        assert_eq!(log.len(), 4);
        assert!(log
            .windows(2)
            .all(|w| w[0].time < w[1].time && w[0].to == w[1].from));
        assert!(log.iter().all(|e| e.from != e.to));
    }
}
