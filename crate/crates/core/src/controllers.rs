//! Feedback laws: the energy-based swing-up controller (discontinuous and smooth),
//! the local linear stabiliser around an upright equilibrium, and the linear
//! law for the linearised plant.

use serde::{Deserialize, Serialize};

use crate::pendulum::{energy, PendulumParams, State};
use crate::scalar::Scalar;

#[inline]
fn energy_argument<T: Scalar>(x: &State<T>, p: &PendulumParams<T>) -> T {
    (energy(x, p) - p.target_energy()) * x[1] * x[0].cos()
}

/// `u = −u_max · sign((H − H*)·x2·cos x1)` with `sign(0) = +1`.
#[inline]
pub fn global_sign<T: Scalar>(x: &State<T>, p: &PendulumParams<T>) -> T {
    -p.u_max * energy_argument(x, p).sign_nonneg()
}

/// `u = −u_max · tanh(c·(H − H*)·x2·cos x1)`.
#[inline]
pub fn global_smooth<T: Scalar>(x: &State<T>, p: &PendulumParams<T>) -> T {
    -p.u_max * (p.c * energy_argument(x, p)).tanh()
}

/// `u = (k + 1)/(1 − Δ) · ((x1 − nπ) + x2)` around the frozen target `nπ`.
#[inline]
pub fn local_linear<T: Scalar>(x: &State<T>, target: T, p: &PendulumParams<T>) -> T {
    (p.k + T::one()) / (T::one() - p.delta_cap) * ((x[0] - target) + x[1])
}

/// `u = −K1(x1 − nπ) − K2·x2 − ω²·x1` for the linear plant.
#[inline]
pub fn linear_plant_control<T: Scalar>(
    x: &State<T>,
    target: T,
    k1: T,
    k2: T,
    p: &PendulumParams<T>,
) -> T {
    -k1 * (x[0] - target) - k2 * x[1] - p.omega * p.omega * x[0]
}

/// Which energy controller acts as the global law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalLaw {
    #[default]
    Sign,
    Smooth,
}

/// The pair of laws the supervisor selects between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLaws<T> {
    pub params: PendulumParams<T>,
    pub global: GlobalLaw,
    /// Clamp the local law to `[−u_max, u_max]`.
    pub saturate_local: bool,
}

impl<T: Scalar> ControlLaws<T> {
    #[inline]
    pub fn global(&self, x: &State<T>) -> T {
        match self.global {
            GlobalLaw::Sign => global_sign(x, &self.params),
            GlobalLaw::Smooth => global_smooth(x, &self.params),
        }
    }

    #[inline]
    pub fn local(&self, x: &State<T>, target: T) -> T {
        let u = local_linear(x, target, &self.params);
        if self.saturate_local {
            u.max(-self.params.u_max).min(self.params.u_max)
        } else {
            u
        }
    }
}
