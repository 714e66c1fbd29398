//! The controlled pendulum, its linear model, the two outputs used by the
//! supervisor and the comparison functions that size the switching sets.
//!
//! Angles are never wrapped: `x1` lives on the real line and the upright
//! equilibria are the points `(nπ, 0)` with `n` odd.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::scalar::Scalar;

/// Pendulum state `(angle, angular velocity)`.
pub type State<T> = [T; 2];

/// Plant, controller and supervisor constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams<T> {
    /// Natural frequency ω.
    pub omega: T,
    /// Bound of the swing-up torque.
    pub u_max: T,
    /// Sharpness of the smooth energy controller.
    pub c: T,
    /// Local linear gain, must exceed `0.5·ω⁴`.
    pub k: T,
    /// Radius Δ of the local engagement set `|ψ| ≤ Δ`.
    pub delta_cap: T,
    /// Dwell time of the supervisor; zero selects the hysteresis variant.
    pub tau_d: T,
}

impl<T: Scalar> PendulumParams<T> {
    /// Checks every constraint and returns the parameters unchanged on success.
    pub fn validated(self) -> Result<Self, ParamError> {
        let PendulumParams {
            omega,
            u_max,
            c,
            k,
            delta_cap,
            tau_d,
        } = self;
        let finite = [
            ("omega", omega),
            ("u_max", u_max),
            ("c", c),
            ("k", k),
            ("delta_cap", delta_cap),
            ("tau_d", tau_d),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(ParamError::new(key, "must be finite"));
            }
        }
        if !(omega > T::zero()) {
            return Err(ParamError::new("omega", "must be positive"));
        }
        if !(u_max > T::zero()) {
            return Err(ParamError::new("u_max", "must be positive"));
        }
        if !(c > T::zero()) {
            return Err(ParamError::new("c", "must be positive"));
        }
        if !(k > T::lit(0.5) * omega.powi(4)) {
            return Err(ParamError::new(
                "k",
                format!(
                    "k must exceed 0.5*omega^4 = {} (got {k})",
                    T::lit(0.5) * omega.powi(4)
                ),
            ));
        }
        if !(delta_cap > T::zero() && delta_cap < T::one()) {
            return Err(ParamError::new(
                "delta_cap",
                format!("the local set radius must satisfy 0 < delta_cap < 1 (got {delta_cap})"),
            ));
        }
        if tau_d < T::zero() {
            return Err(ParamError::new("tau_d", "dwell time must be non-negative"));
        }
        if !(beta_prime(delta_cap, T::zero(), &self) > delta_cap) {
            return Err(ParamError::new(
                "delta_cap",
                "release radius beta'(delta_cap, 0) must exceed delta_cap",
            ));
        }
        kappa(&self)?;
        Ok(self)
    }

    /// Upright energy level `H* = 2ω²`.
    #[inline]
    pub fn target_energy(&self) -> T {
        T::lit(2.0) * self.omega * self.omega
    }
}

impl Default for PendulumParams<f64> {
    fn default() -> Self {
        Self {
            omega: 1.0,
            u_max: 0.1,
            c: 20.0,
            k: 1.0,
            delta_cap: 0.2,
            tau_d: 0.0,
        }
    }
}

impl Default for PendulumParams<f32> {
    fn default() -> Self {
        Self {
            omega: 1.0,
            u_max: 0.1,
            c: 20.0,
            k: 1.0,
            delta_cap: 0.2,
            tau_d: 0.0,
        }
    }
}

/// `(ẋ1, ẋ2) = (x2, −ω² sin x1 + cos x1 · (u + d))`; the disturbance is matched with the torque.
#[inline]
pub fn plant_derivative<T: Scalar>(x: &State<T>, u: T, d: T, p: &PendulumParams<T>) -> State<T> {
    let (s, c) = x[0].sin_cos();
    [x[1], -p.omega * p.omega * s + c * (u + d)]
}

/// Linear model `(ẋ1, ẋ2) = (x2, −ω² x1 + u)`.
#[inline]
pub fn linear_plant_derivative<T: Scalar>(x: &State<T>, u: T, p: &PendulumParams<T>) -> State<T> {
    [x[1], -p.omega * p.omega * x[0] + u]
}

/// Energy `H(x) = 0.5·x2² + ω²(1 − cos x1)`.
#[inline]
pub fn energy<T: Scalar>(x: &State<T>, p: &PendulumParams<T>) -> T {
    T::lit(0.5) * x[1] * x[1] + p.omega * p.omega * (T::one() - x[0].cos())
}

/// Energy error `y = H(x) − H*`.
#[inline]
pub fn output_y<T: Scalar>(x: &State<T>, p: &PendulumParams<T>) -> T {
    energy(x, p) - p.target_energy()
}

/// `ψ = (1 + cos x1, x2)`, zero exactly at the upright equilibria.
#[inline]
pub fn output_psi<T: Scalar>(x: &State<T>) -> [T; 2] {
    [T::one() + x[0].cos(), x[1]]
}

#[inline]
pub fn psi_norm<T: Scalar>(x: &State<T>) -> T {
    let [a, b] = output_psi(x);
    a.hypot(b)
}

/// Energy tolerance `δ(Δ) = min{0.5Δ², ω²Δ}` whose shell `|y| ≤ δ` every orbit
/// leaves only after crossing `|ψ| ≤ Δ`.
pub fn delta_of<T: Scalar>(delta_cap: T, p: &PendulumParams<T>) -> T {
    debug_assert!(delta_cap >= T::zero());
    let quad = T::lit(0.5) * delta_cap * delta_cap;
    let lin = p.omega * p.omega * delta_cap;
    quad.min(lin)
}

/// `σ(s) = 2√6 · max{s, √s}`.
#[inline]
pub fn sigma<T: Scalar>(s: T) -> T {
    T::lit(2.0) * T::lit(6.0).sqrt() * s.max(s.sqrt())
}

/// Decay rate of the local Lyapunov function,
/// `κ = min{1, 2/(1−Δ)·[k + 1 − (1 + 0.5ω⁴)/(1 − Δ)]}`.
pub fn kappa<T: Scalar>(p: &PendulumParams<T>) -> Result<T, ParamError> {
    let one = T::one();
    let gap = one - p.delta_cap;
    let bracket = p.k + one - (one + T::lit(0.5) * p.omega.powi(4)) / gap;
    if !(bracket > T::zero()) {
        return Err(ParamError::new(
            "k",
            format!(
                "local gain too small for delta_cap = {}: k + 1 - (1 + 0.5*omega^4)/(1 - delta_cap) = {bracket} must be positive",
                p.delta_cap
            ),
        ));
    }
    Ok(one.min(T::lit(2.0) / gap * bracket))
}

/// Local output envelope `β′(s, r) = σ(s)·e^{−0.5κr}`.
///
/// Parameters are assumed validated; with an invalid `κ` the rate falls back to zero.
pub fn beta_prime<T: Scalar>(s: T, r: T, p: &PendulumParams<T>) -> T {
    let rate = kappa(p).unwrap_or_else(|_| T::zero());
    sigma(s) * (-T::lit(0.5) * rate * r).exp()
}

/// Odd `n` minimising `|x1 − nπ|`; ties go to the larger `n`.
pub fn nearest_odd_multiple<T: Scalar>(x1: T) -> i64 {
    let q = (x1 / T::PI() - T::one()) * T::lit(0.5);
    let m = (q + T::lit(0.5)).floor();
    2 * m.to_i64().expect("angle within i64 range") + 1
}

/// The upright target `nπ` nearest to `x1`.
#[inline]
pub fn nearest_odd_target<T: Scalar>(x1: T) -> T {
    T::lit(nearest_odd_multiple(x1) as f64) * T::PI()
}

/// `|x1 − nπ|` for the nearest odd `n`.
#[inline]
pub fn target_distance<T: Scalar>(x1: T) -> T {
    (x1 - nearest_odd_target(x1)).abs()
}

/// External torque entering alongside the control.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    #[default]
    Zero,
    Constant,
    Sinusoid,
    SeededUniformNoise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec<T> {
    pub kind: DisturbanceKind,
    pub amplitude: T,
    /// Angular frequency, sinusoid only.
    pub frequency: T,
    /// Noise seed, noise only.
    pub seed: u64,
}

impl<T: Scalar> DisturbanceSpec<T> {
    pub fn zero() -> Self {
        Self {
            kind: DisturbanceKind::Zero,
            amplitude: T::zero(),
            frequency: T::zero(),
            seed: 0,
        }
    }

    pub fn sinusoid(amplitude: T, frequency: T) -> Self {
        Self {
            kind: DisturbanceKind::Sinusoid,
            amplitude,
            frequency,
            seed: 0,
        }
    }

    pub fn validated(self) -> Result<Self, ParamError> {
        if !(self.amplitude >= T::zero()) || !self.amplitude.is_finite() {
            return Err(ParamError::new(
                "disturbance_amplitude",
                "must be finite and non-negative",
            ));
        }
        if !self.frequency.is_finite() {
            return Err(ParamError::new("disturbance_frequency", "must be finite"));
        }
        Ok(self)
    }

    /// `true` when the disturbance is identically zero.
    pub fn is_zero(&self) -> bool {
        self.kind == DisturbanceKind::Zero || self.amplitude == T::zero()
    }

    /// Signal generator for one trajectory; `stream` separates noise realisations
    /// of different trajectories sharing the seed.
    pub fn signal(&self, stream: u64) -> DisturbanceSignal<T> {
        let rng = match self.kind {
            DisturbanceKind::SeededUniformNoise => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(stream);
                Some(rng)
            }
            _ => None,
        };
        let mut s = DisturbanceSignal {
            spec: *self,
            rng,
            held: T::zero(),
        };
        s.resample();
        s
    }
}

/// Disturbance realisation. Noise is drawn once per sample and held over the step.
#[derive(Debug, Clone)]
pub struct DisturbanceSignal<T> {
    spec: DisturbanceSpec<T>,
    rng: Option<ChaCha8Rng>,
    held: T,
}

impl<T: Scalar> DisturbanceSignal<T> {
    #[inline]
    pub fn at(&self, t: T) -> T {
        let a = self.spec.amplitude;
        match self.spec.kind {
            DisturbanceKind::Zero => T::zero(),
            DisturbanceKind::Constant => a,
            DisturbanceKind::Sinusoid => a * (self.spec.frequency * t).sin(),
            DisturbanceKind::SeededUniformNoise => self.held,
        }
    }

    /// Draws the next held noise value; no effect for deterministic kinds.
    pub fn resample(&mut self) {
        if let Some(rng) = self.rng.as_mut() {
            let a = self.spec.amplitude.as_f64();
            self.held = if a > 0.0 {
                T::lit(rng.gen_range(-a..=a))
            } else {
                T::zero()
            };
        }
    }
}
