//! Fixed-step Runge–Kutta integration on a uniform sample clock.
//!
//! Every simulated system in the crate (the pendulum closed loops as well as the
//! time-varying test systems of [`crate::excitation`]) is driven through
//! [`integrate`]. Switching logic and sampled disturbances hook in through
//! [`System::observe`], which runs once per grid sample, so anything decided
//! there is held constant over the following step.

use std::fmt;

use crate::error::SimError;
use crate::scalar::Scalar;

/// Any state component above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Uniform sample clock `t_i = t0 + i·h`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    t0: T,
    h: T,
    n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, h: T, n_steps: usize) -> Result<Self, SimError> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(SimError::InvalidGrid(format!(
                "step h = {h} must be positive"
            )));
        }
        if !t0.is_finite() {
            return Err(SimError::InvalidGrid(format!("t0 = {t0} must be finite")));
        }
        if n_steps == 0 {
            return Err(SimError::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { t0, h, n_steps })
    }

    /// Grid covering `[t0, t_end]` with the number of steps rounded to the nearest integer.
    pub fn spanning(t0: T, t_end: T, h: T) -> Result<Self, SimError> {
        if !(t_end > t0) {
            return Err(SimError::InvalidGrid(format!(
                "t_end = {t_end} must exceed t0 = {t0}"
            )));
        }
        let n = ((t_end - t0) / h).round();
        let n = n.to_usize().ok_or_else(|| {
            SimError::InvalidGrid(format!("cannot cover [{t0}, {t_end}] with h = {h}"))
        })?;
        Self::new(t0, h, n)
    }

    #[inline]
    pub fn t0(&self) -> T {
        self.t0
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of samples, `n_steps + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample time `t0 + i·h`, computed from the index so no drift accumulates.
    #[inline]
    pub fn time(&self, i: usize) -> T {
        self.t0 + T::from_index(i) * self.h
    }

    #[inline]
    pub fn t_end(&self) -> T {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }
}

/// A vector field `ẋ = f(t, x)` together with an optional per-sample hook.
///
/// `observe` runs at every grid sample, starting with the initial state, before the
/// step leaving that sample is taken.
pub trait System<T: Scalar, const N: usize> {
    fn derivative(&self, t: T, x: &[T; N]) -> [T; N];

    fn observe(&mut self, _step: usize, _t: T, _x: &[T; N]) {}
}

impl<T, F, const N: usize> System<T, N> for F
where
    T: Scalar,
    F: Fn(T, &[T; N]) -> [T; N],
{
    #[inline]
    fn derivative(&self, t: T, x: &[T; N]) -> [T; N] {
        self(t, x)
    }
}

#[inline]
fn axpy<T: Scalar, const N: usize>(x: &[T; N], a: T, k: &[T; N]) -> [T; N] {
    let mut out = *x;
    for (o, &ki) in out.iter_mut().zip(k) {
        *o += a * ki;
    }
    out
}

#[inline]
fn all_finite<T: Scalar, const N: usize>(v: &[T; N]) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// One classical fourth-order Runge–Kutta step of size `h` from `(t, x)`.
pub fn rk4_step<T, S, const N: usize>(field: &S, t: T, x: &[T; N], h: T) -> Result<[T; N], SimError>
where
    T: Scalar,
    S: System<T, N> + ?Sized,
{
    let half = T::lit(0.5) * h;
    let check = |k: [T; N], at: T| {
        if all_finite(&k) {
            Ok(k)
        } else {
            Err(SimError::Diverged {
                time: at.as_f64(),
                reason: "non-finite derivative".into(),
            })
        }
    };
    let k1 = check(field.derivative(t, x), t)?;
    let k2 = check(field.derivative(t + half, &axpy(x, half, &k1)), t + half)?;
    let k3 = check(field.derivative(t + half, &axpy(x, half, &k2)), t + half)?;
    let k4 = check(field.derivative(t + h, &axpy(x, h, &k3)), t + h)?;

    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *x;
    for i in 0..N {
        out[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    Ok(out)
}

/// States sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T, const N: usize> {
    pub grid: TimeGrid<T>,
    pub states: Vec<[T; N]>,
}

impl<T: Scalar, const N: usize> Trajectory<T, N> {
    /// `true` when every grid sample has been recorded.
    pub fn is_complete(&self) -> bool {
        self.states.len() == self.grid.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = (T, &[T; N])> + '_ {
        self.states
            .iter()
            .enumerate()
            .map(|(i, x)| (self.grid.time(i), x))
    }

    pub fn last(&self) -> &[T; N] {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }
}

/// A run aborted by divergence; keeps everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct Diverged<T, const N: usize> {
    pub partial: Trajectory<T, N>,
    pub error: SimError,
}

impl<T, const N: usize> fmt::Display for Diverged<T, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} samples",
            self.error,
            self.partial.states.len()
        )
    }
}

impl<T: fmt::Debug, const N: usize> std::error::Error for Diverged<T, N> {}

/// Integrates `system` from `x0` over `grid`, recording every sample.
pub fn integrate<T, S, const N: usize>(
    system: &mut S,
    x0: [T; N],
    grid: TimeGrid<T>,
) -> Result<Trajectory<T, N>, Diverged<T, N>>
where
    T: Scalar,
    S: System<T, N> + ?Sized,
{
    let mut states = Vec::with_capacity(grid.len());
    let limit = T::lit(DIVERGENCE_LIMIT);
    let out_of_range = |x: &[T; N]| x.iter().any(|c| !c.is_finite() || c.abs() > limit);

    if out_of_range(&x0) {
        return Err(Diverged {
            partial: Trajectory { grid, states },
            error: SimError::Diverged {
                time: grid.t0().as_f64(),
                reason: "initial state is not finite".into(),
            },
        });
    }

    let mut x = x0;
    states.push(x);
    system.observe(0, grid.t0(), &x);
    for i in 0..grid.n_steps() {
        let t = grid.time(i);
        match rk4_step(system, t, &x, grid.h()) {
            Ok(next) => x = next,
            Err(error) => {
                return Err(Diverged {
                    partial: Trajectory { grid, states },
                    error,
                })
            }
        }
        let t_next = grid.time(i + 1);
        if out_of_range(&x) {
            return Err(Diverged {
                partial: Trajectory { grid, states },
                error: SimError::Diverged {
                    time: t_next.as_f64(),
                    reason: format!("state magnitude exceeded {DIVERGENCE_LIMIT:e}"),
                },
            });
        }
        states.push(x);
        system.observe(i + 1, t_next, &x);
    }
    Ok(Trajectory { grid, states })
}
