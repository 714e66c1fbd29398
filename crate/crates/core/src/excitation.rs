//! Windowed-integral excitation checks and numerical checks of the decay
//! estimates built on them.
//!
//! A gain `R(t)` is persistently exciting with `(L, ϑ)` when every window
//! `∫_t^{t+L} R Rᵀ` dominates `ϑ I`; a square gain `A(t)` is positive in average
//! with `(L, ν)` when `∫_t^{t+ℓ} A ≥ ν ℓ I` for every `ℓ ≥ L`. Both are checked
//! on sampled windows only, so a certificate means "certified on the sampled
//! windows". Window integrals use cumulative composite Simpson sums on the even
//! grid samples; window starts and lengths are snapped to multiples of `2h`.

use std::array;

use thiserror::Error;

use crate::dynamics::{integrate, TimeGrid};
use crate::scalar::Scalar;

/// Row-major `R × C` matrix.
pub type Mat<T, const R: usize, const C: usize> = [[T; C]; R];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExcitationError {
    #[error("gain has {got} samples but the grid has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite gain entry at t = {t}")]
    NonFinite { t: f64 },
    #[error("gain is not symmetric at t = {t} (asymmetry {asymmetry:e})")]
    NotSymmetric { t: f64, asymmetry: f64 },
    #[error("window [{t}, {t} + {ell}] leaves the sampled horizon")]
    WindowOutOfRange { t: f64, ell: f64 },
    #[error("invalid {0}")]
    InvalidParameter(&'static str),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("simulation diverged at t = {0}")]
    Diverged(f64),
}

/// Gain samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGain<T, const R: usize, const C: usize> {
    grid: TimeGrid<T>,
    values: Vec<Mat<T, R, C>>,
}

impl<T: Scalar, const R: usize, const C: usize> SampledGain<T, R, C> {
    pub fn new(grid: TimeGrid<T>, values: Vec<Mat<T, R, C>>) -> Result<Self, ExcitationError> {
        if values.len() != grid.len() {
            return Err(ExcitationError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        for (i, m) in values.iter().enumerate() {
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(ExcitationError::NonFinite {
                    t: grid.time(i).as_f64(),
                });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(
        grid: TimeGrid<T>,
        f: impl Fn(T) -> Mat<T, R, C>,
    ) -> Result<Self, ExcitationError> {
        let values = grid.times().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Mat<T, R, C>] {
        &self.values
    }
}

impl<T: Scalar, const N: usize> SampledGain<T, N, N> {
    /// Largest `|A_ij − A_ji|` over all samples, with the time where it occurs.
    pub fn max_asymmetry(&self) -> (T, T) {
        let mut worst = (T::zero(), self.grid.t0());
        for (k, m) in self.values.iter().enumerate() {
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate().skip(i + 1) {
                    let a = (v - m[j][i]).abs();
                    if a > worst.0 {
                        worst = (a, self.grid.time(k));
                    }
                }
            }
        }
        worst
    }

    fn require_symmetric(&self) -> Result<(), ExcitationError> {
        let scale = self
            .values
            .iter()
            .flatten()
            .flatten()
            .fold(T::one(), |m, v| m.max(v.abs()));
        let (asym, t) = self.max_asymmetry();
        if asym > T::lit(1e-12) * scale {
            return Err(ExcitationError::NotSymmetric {
                t: t.as_f64(),
                asymmetry: asym.as_f64(),
            });
        }
        Ok(())
    }

    /// Smallest eigenvalue over all samples.
    pub fn min_eigenvalue(&self) -> T {
        self.values
            .iter()
            .map(lambda_min)
            .fold(T::infinity(), T::min)
    }
}

fn zero<T: Scalar, const R: usize, const C: usize>() -> Mat<T, R, C> {
    [[T::zero(); C]; R]
}

fn gram<T: Scalar, const R: usize, const C: usize>(m: &Mat<T, R, C>) -> Mat<T, R, R> {
    array::from_fn(|i| array::from_fn(|j| (0..C).map(|k| m[i][k] * m[j][k]).sum()))
}

/// Smallest eigenvalue of a symmetric matrix (closed form up to 2×2).
pub fn lambda_min<T: Scalar, const N: usize>(m: &Mat<T, N, N>) -> T {
    match N {
        0 => T::infinity(),
        1 => m[0][0],
        2 => {
            let (a, b, d) = (m[0][0], T::lit(0.5) * (m[0][1] + m[1][0]), m[1][1]);
            let mid = T::lit(0.5) * (a + d);
            let half = T::lit(0.5) * (a - d);
            mid - half.hypot(b)
        }
        _ => {
            let dm =
                nalgebra::DMatrix::<f64>::from_fn(N, N, |i, j| 0.5 * (m[i][j] + m[j][i]).as_f64());
            T::lit(dm.symmetric_eigenvalues().min())
        }
    }
}

/// Relative allowance for rounding in the window sums, so exact levels certify.
const ROUNDING: f64 = 1e-12;

/// Cumulative Simpson integrals of a matrix integrand at the even samples.
struct WindowIntegrals<T, const N: usize> {
    grid: TimeGrid<T>,
    prefix: Vec<Mat<T, N, N>>,
}

impl<T: Scalar, const N: usize> WindowIntegrals<T, N> {
    fn new(grid: TimeGrid<T>, integrand: impl Fn(usize) -> Mat<T, N, N>) -> Self {
        let pairs = grid.n_steps() / 2;
        let w = grid.h() * T::lit(2.0) / T::lit(6.0);
        let four = T::lit(4.0);
        let mut prefix = Vec::with_capacity(pairs + 1);
        let mut acc: Mat<T, N, N> = zero();
        prefix.push(acc);
        for m in 0..pairs {
            let (f0, f1, f2) = (integrand(2 * m), integrand(2 * m + 1), integrand(2 * m + 2));
            for i in 0..N {
                for j in 0..N {
                    acc[i][j] += w * (f0[i][j] + four * f1[i][j] + f2[i][j]);
                }
            }
            prefix.push(acc);
        }
        Self { grid, prefix }
    }

    fn pair_width(&self) -> T {
        self.grid.h() * T::lit(2.0)
    }

    /// Nearest pair count for a duration.
    fn pairs_in(&self, span: T) -> usize {
        (span / self.pair_width()).round().to_usize().unwrap_or(0)
    }

    fn start_pair(&self, t: T) -> usize {
        ((t - self.grid.t0()) / self.pair_width())
            .round()
            .to_usize()
            .unwrap_or(0)
    }

    fn time_of(&self, pair: usize) -> T {
        self.grid.time(2 * pair)
    }

    fn window(&self, start: usize, span: usize) -> Option<Mat<T, N, N>> {
        let end = self.prefix.get(start + span)?;
        let begin = &self.prefix[start];
        Some(array::from_fn(|i| {
            array::from_fn(|j| end[i][j] - begin[i][j])
        }))
    }
}

/// Windows that satisfied the level everywhere they were sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate<T> {
    /// Window length `L` after snapping to the quadrature grid.
    pub window: T,
    /// `ϑ` for excitation, `ν` for positivity in average.
    pub level: T,
    pub t_first: T,
    pub t_last: T,
    pub ell_max: T,
    pub windows_checked: usize,
    /// Smallest slack over the sampled windows.
    pub min_margin: T,
}

/// The sampled window with the most negative slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counterexample<T> {
    pub t: T,
    pub ell: T,
    pub margin: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    Certified(Certificate<T>),
    Violated(Counterexample<T>),
}

impl<T: Scalar> Outcome<T> {
    pub fn is_certified(&self) -> bool {
        matches!(self, Outcome::Certified(_))
    }

    /// Smallest slack, negative when violated.
    pub fn margin(&self) -> T {
        match self {
            Outcome::Certified(c) => c.min_margin,
            Outcome::Violated(c) => c.margin,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate<T>> {
        match self {
            Outcome::Certified(c) => Some(c),
            Outcome::Violated(_) => None,
        }
    }
}

/// `n` evenly spaced window starts on `[t0, t_end − ell_max]`.
pub fn window_starts<T: Scalar>(grid: &TimeGrid<T>, ell_max: T, n: usize) -> Vec<T> {
    let last = grid.t_end() - ell_max;
    if n <= 1 || last <= grid.t0() {
        return vec![grid.t0()];
    }
    let step = (last - grid.t0()) / T::from_index(n - 1);
    (0..n)
        .map(|i| grid.t0() + T::from_index(i) * step)
        .collect()
}

/// Window lengths `L·(1 + 3i/(n − 1))`, i.e. from `L` to `4L`.
pub fn window_lengths<T: Scalar>(window: T, n: usize) -> Vec<T> {
    if n <= 1 {
        return vec![window];
    }
    (0..n)
        .map(|i| window * (T::one() + T::lit(3.0) * T::from_index(i) / T::from_index(n - 1)))
        .collect()
}

/// Evaluates `slack(ℓ, λ_min(∫_t^{t+ℓ}))` over all sampled windows.
fn sweep_windows<T: Scalar, const N: usize>(
    integrals: &WindowIntegrals<T, N>,
    window: T,
    level: T,
    ell_samples: &[T],
    t_samples: &[T],
    slack: impl Fn(T, T) -> T,
) -> Result<Outcome<T>, ExcitationError> {
    if t_samples.is_empty() || ell_samples.is_empty() {
        return Err(ExcitationError::InvalidParameter("empty window sample set"));
    }
    let mut worst: Option<Counterexample<T>> = None;
    let mut all_hold = true;
    let mut count = 0;
    let mut ell_max = T::zero();
    let mut t_range = (T::infinity(), T::neg_infinity());
    for &t in t_samples {
        let s = integrals.start_pair(t);
        let t_snap = integrals.time_of(s);
        for &ell in ell_samples {
            let k = integrals.pairs_in(ell);
            let ell_snap = T::from_index(k) * integrals.pair_width();
            let m = integrals
                .window(s, k)
                .ok_or(ExcitationError::WindowOutOfRange {
                    t: t.as_f64(),
                    ell: ell.as_f64(),
                })?;
            let lam = lambda_min(&m);
            let margin = slack(ell_snap, lam);
            all_hold &= margin >= -T::lit(ROUNDING) * (T::one() + lam.abs());
            count += 1;
            ell_max = ell_max.max(ell_snap);
            t_range = (t_range.0.min(t_snap), t_range.1.max(t_snap));
            if worst.is_none_or(|w| margin < w.margin) {
                worst = Some(Counterexample {
                    t: t_snap,
                    ell: ell_snap,
                    margin,
                });
            }
        }
    }
    let worst = worst.expect("at least one window");
    if all_hold {
        Ok(Outcome::Certified(Certificate {
            window: T::from_index(integrals.pairs_in(window)) * integrals.pair_width(),
            level,
            t_first: t_range.0,
            t_last: t_range.1,
            ell_max,
            windows_checked: count,
            min_margin: worst.margin,
        }))
    } else {
        Ok(Outcome::Violated(worst))
    }
}

fn gram_integrals<T: Scalar, const R: usize, const C: usize>(
    r: &SampledGain<T, R, C>,
) -> WindowIntegrals<T, R> {
    let grams: Vec<_> = r.values.iter().map(gram).collect();
    WindowIntegrals::new(r.grid, |i| grams[i])
}

/// `λ_min(∫_t^{t+L} R Rᵀ) ≥ ϑ` at every sampled `t`.
pub fn pe_check<T: Scalar, const R: usize, const C: usize>(
    r: &SampledGain<T, R, C>,
    window: T,
    theta: T,
    t_samples: &[T],
) -> Result<Outcome<T>, ExcitationError> {
    if !(window > T::zero() && window.is_finite()) {
        return Err(ExcitationError::InvalidParameter("window length"));
    }
    if !(theta > T::zero()) {
        return Err(ExcitationError::InvalidParameter("excitation level"));
    }
    let integrals = gram_integrals(r);
    sweep_windows(&integrals, window, theta, &[window], t_samples, |_, lam| {
        lam - theta
    })
}

/// Smallest `λ_min(∫_t^{t+L} R Rᵀ)` over every window start on the quadrature grid,
/// with the start where it occurs.
pub fn pe_level<T: Scalar, const R: usize, const C: usize>(
    r: &SampledGain<T, R, C>,
    window: T,
) -> Result<(T, T), ExcitationError> {
    if !(window > T::zero() && window.is_finite()) {
        return Err(ExcitationError::InvalidParameter("window length"));
    }
    let integrals = gram_integrals(r);
    let k = integrals.pairs_in(window);
    let pairs = integrals.prefix.len() - 1;
    if k == 0 || k > pairs {
        return Err(ExcitationError::WindowOutOfRange {
            t: r.grid.t0().as_f64(),
            ell: window.as_f64(),
        });
    }
    let mut best = (T::infinity(), r.grid.t0());
    for s in 0..=pairs - k {
        let lam = lambda_min(&integrals.window(s, k).expect("in range"));
        if lam < best.0 {
            best = (lam, integrals.time_of(s));
        }
    }
    Ok(best)
}

/// `λ_min(∫_t^{t+ℓ} R Rᵀ) ≥ ϑℓ/(2L)` for every sampled `t` and `ℓ ≥ L`.
///
/// The `(L, ϑ)` excitation itself is checked first on the same `t` samples; if it
/// fails the lemma does not apply and a precondition error is returned.
pub fn lemma_a1_check<T: Scalar, const R: usize, const C: usize>(
    r: &SampledGain<T, R, C>,
    window: T,
    theta: T,
    ell_samples: &[T],
    t_samples: &[T],
) -> Result<Outcome<T>, ExcitationError> {
    if ell_samples.iter().any(|&l| l < window) {
        return Err(ExcitationError::InvalidParameter(
            "window sample shorter than L",
        ));
    }
    if let Outcome::Violated(c) = pe_check(r, window, theta, t_samples)? {
        return Err(ExcitationError::PreconditionFailed(format!(
            "gain is not ({}, {})-PE: window at t = {} falls short by {}",
            window, theta, c.t, -c.margin
        )));
    }
    let integrals = gram_integrals(r);
    let l_snap = T::from_index(integrals.pairs_in(window)) * integrals.pair_width();
    let rate = theta / (T::lit(2.0) * l_snap);
    sweep_windows(
        &integrals,
        window,
        theta,
        ell_samples,
        t_samples,
        |ell, lam| lam - rate * ell,
    )
}

/// `λ_min(∫_t^{t+ℓ} A) ≥ νℓ` for every sampled `t` and `ℓ ≥ L`; `A` must be symmetric.
pub fn pa_check<T: Scalar, const N: usize>(
    a: &SampledGain<T, N, N>,
    window: T,
    nu: T,
    ell_samples: &[T],
    t_samples: &[T],
) -> Result<Outcome<T>, ExcitationError> {
    if !(window >= T::zero()) {
        return Err(ExcitationError::InvalidParameter("window length"));
    }
    if !(nu > T::zero()) {
        return Err(ExcitationError::InvalidParameter(
            "average positivity level",
        ));
    }
    if ell_samples.iter().any(|&l| l < window || !(l > T::zero())) {
        return Err(ExcitationError::InvalidParameter(
            "window sample shorter than L",
        ));
    }
    a.require_symmetric()?;
    let integrals = WindowIntegrals::new(a.grid, |i| a.values[i]);
    sweep_windows(
        &integrals,
        window,
        nu,
        ell_samples,
        t_samples,
        |ell, lam| lam - nu * ell,
    )
}

/// Right-hand side of the linear estimate at `t` (`t0` the initial time).
pub fn lemma_a2_bound<T: Scalar>(
    p0_norm: T,
    t: T,
    t0: T,
    window: T,
    nu: T,
    a_floor: T,
    b_sup: T,
) -> T {
    let tail = (-nu * window).exp() / nu;
    if a_floor > T::zero() {
        p0_norm * (-nu * (t - t0 - (T::one() + a_floor / nu) * window)).exp()
            + b_sup * (window + tail + ((a_floor * window).exp() - T::one()) / a_floor)
    } else {
        p0_norm * (-nu * (t - t0 - window)).exp() + b_sup * (window + tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Report<T> {
    /// `max_t |p(t)| − bound(t)`; non-positive when the estimate holds.
    pub max_violation: T,
    pub worst_t: T,
    /// Samplewise supremum of `|b|`.
    pub b_sup: T,
    pub certificate: Certificate<T>,
}

/// Simulates `ṗ = −A(t)p + b(t)` and compares `|p|` with the linear estimate.
///
/// `A` is sampled on `grid` and must be symmetric, bounded below by `−a_floor·I`
/// and `(L, ν)`-positive in average on 200 window starts with `ℓ` from `L` to `4L`.
pub fn lemma_a2_check<T, const N: usize>(
    a: impl Fn(T) -> Mat<T, N, N>,
    b: impl Fn(T) -> [T; N],
    p0: [T; N],
    window: T,
    nu: T,
    a_floor: T,
    grid: TimeGrid<T>,
) -> Result<A2Report<T>, ExcitationError>
where
    T: Scalar,
{
    if !(a_floor >= T::zero()) {
        return Err(ExcitationError::InvalidParameter("lower bound of A"));
    }
    if !(window > T::zero()) {
        return Err(ExcitationError::InvalidParameter("window length"));
    }
    let sampled = SampledGain::from_fn(grid, &a)?;
    sampled.require_symmetric()?;
    let floor = sampled.min_eigenvalue();
    if floor < -a_floor - T::lit(1e-12) {
        return Err(ExcitationError::PreconditionFailed(format!(
            "A(t) reaches eigenvalue {floor}, below -{a_floor}"
        )));
    }
    let ells = window_lengths(window, 8);
    let starts = window_starts(&grid, *ells.last().expect("non-empty"), 200);
    let certificate = match pa_check(&sampled, window, nu, &ells, &starts)? {
        Outcome::Certified(c) => c,
        Outcome::Violated(c) => {
            return Err(ExcitationError::PreconditionFailed(format!(
                "A is not ({window}, {nu})-PA: window [{}, +{}] falls short by {}",
                c.t, c.ell, -c.margin
            )))
        }
    };

    let b_sup = grid.times().map(|t| norm(&b(t))).fold(T::zero(), T::max);
    let field = |t: T, p: &[T; N]| -> [T; N] {
        let m = a(t);
        let bt = b(t);
        array::from_fn(|i| bt[i] - (0..N).map(|j| m[i][j] * p[j]).sum::<T>())
    };
    let traj = integrate(&mut { field }, p0, grid)
        .map_err(|d| ExcitationError::Diverged(d.partial.grid.t_end().as_f64()))?;
    let p0_norm = norm(&p0);
    let mut worst = (T::neg_infinity(), grid.t0());
    for (t, p) in traj.samples() {
        let v = norm(p) - lemma_a2_bound(p0_norm, t, grid.t0(), window, nu, a_floor, b_sup);
        if v > worst.0 {
            worst = (v, t);
        }
    }
    Ok(A2Report {
        max_violation: worst.0,
        worst_t: worst.1,
        b_sup,
        certificate,
    })
}

fn norm<T: Scalar, const N: usize>(x: &[T; N]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A3Report<T> {
    /// `max_{t ≥ L} |p(t) − z(τ(t))|`.
    pub rescale_error: T,
    /// `max_{t ≥ L} |p(t)| − [β(|z0|, νt) + γ(sup_{s ≤ t} |d(τ(s))|)]`.
    pub bound_violation: T,
    pub tau_min: T,
    pub tau_max: T,
    pub certificate: Certificate<T>,
}

/// Cubic Hermite samples of a solution on a uniform grid in `τ`.
struct HermiteTrack<T, const N: usize> {
    origin: T,
    step: T,
    values: Vec<[T; N]>,
    slopes: Vec<[T; N]>,
}

impl<T: Scalar, const N: usize> HermiteTrack<T, N> {
    fn at(&self, tau: T) -> [T; N] {
        let s = (tau - self.origin) / self.step;
        let last = self.values.len() - 1;
        let k = s
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(last.saturating_sub(1));
        let u = s - T::from_index(k);
        let (u2, u3) = (u * u, u * u * u);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * u3 - three * u2 + T::one();
        let h10 = u3 - two * u2 + u;
        let h01 = -two * u3 + three * u2;
        let h11 = u3 - u2;
        let (y0, y1, m0, m1) = (
            &self.values[k],
            &self.values[k + 1],
            &self.slopes[k],
            &self.slopes[k + 1],
        );
        array::from_fn(|i| {
            h00 * y0[i] + h10 * self.step * m0[i] + h01 * y1[i] + h11 * self.step * m1[i]
        })
    }
}

/// Checks the rescaled-time estimate for `ṗ = a(t) f(p, d(τ(t)))`, `τ = ∫_0^t a`.
///
/// `z` solves `dz/dτ = f(z, d(τ))` from `z0`, tabulated forward and backward in `τ`
/// (τ can dip below zero before `t = L`) and interpolated at `τ(t)`. `beta` and
/// `gamma` are the comparison functions of the estimate assumed for `z`; `a` must be
/// `(L, ν)`-positive in average on the grid.
#[allow(clippy::too_many_arguments)]
pub fn lemma_a3_check<T, const N: usize, const M: usize>(
    f: impl Fn(&[T; N], &[T; M]) -> [T; N],
    a: impl Fn(T) -> T,
    d: impl Fn(T) -> [T; M],
    z0: [T; N],
    window: T,
    nu: T,
    grid: TimeGrid<T>,
    beta: impl Fn(T, T) -> T,
    gamma: impl Fn(T) -> T,
) -> Result<A3Report<T>, ExcitationError>
where
    T: Scalar,
{
    if grid.t0() != T::zero() {
        return Err(ExcitationError::InvalidParameter(
            "grid must start at t = 0",
        ));
    }
    let gain = SampledGain::from_fn(grid, |t| [[a(t)]])?;
    let ells = window_lengths(window, 8);
    let starts = window_starts(&grid, *ells.last().expect("non-empty"), 200);
    let certificate = match pa_check(&gain, window, nu, &ells, &starts)? {
        Outcome::Certified(c) => c,
        Outcome::Violated(c) => {
            return Err(ExcitationError::PreconditionFailed(format!(
                "a is not ({window}, {nu})-PA: window [{}, +{}] falls short by {}",
                c.t, c.ell, -c.margin
            )))
        }
    };

    // τ at every half step, so RK4 stages of the p-system can read d(τ(t)) exactly.
    let h = grid.h();
    let half_grid = TimeGrid::new(T::zero(), h * T::lit(0.5), 2 * grid.n_steps())
        .map_err(|_| ExcitationError::InvalidParameter("grid"))?;
    let tau_field = |t: T, _x: &[T; 1]| [a(t)];
    let tau_track = integrate(&mut { tau_field }, [T::zero()], half_grid)
        .map_err(|e| ExcitationError::Diverged(e.partial.grid.t_end().as_f64()))?;
    let tau: Vec<T> = tau_track.states.iter().map(|s| s[0]).collect();
    let tau_at = |t: T| -> T {
        let i = (t / (h * T::lit(0.5)))
            .round()
            .to_usize()
            .unwrap_or(0)
            .min(tau.len() - 1);
        tau[i]
    };

    let p_field = |t: T, p: &[T; N]| -> [T; N] {
        let g = a(t);
        let v = f(p, &d(tau_at(t)));
        array::from_fn(|i| g * v[i])
    };
    let p_traj = integrate(&mut { p_field }, z0, grid)
        .map_err(|e| ExcitationError::Diverged(e.partial.grid.t_end().as_f64()))?;

    let tau_min = tau.iter().cloned().fold(T::zero(), T::min);
    let tau_max = tau.iter().cloned().fold(T::zero(), T::max);
    let z_track = tabulate_in_tau(&f, &d, z0, tau_min, tau_max, h)?;

    let mut rescale_error = T::zero();
    let mut bound_violation = T::neg_infinity();
    let mut d_sup = T::zero();
    for (i, p) in p_traj.states.iter().enumerate() {
        let t = grid.time(i);
        let tau_t = tau[2 * i];
        d_sup = d_sup.max(norm(&d(tau_t)));
        if t < window {
            continue;
        }
        let z = z_track.at(tau_t);
        let gap: [T; N] = array::from_fn(|k| p[k] - z[k]);
        rescale_error = rescale_error.max(norm(&gap));
        bound_violation = bound_violation.max(norm(p) - (beta(norm(&z0), nu * t) + gamma(d_sup)));
    }
    Ok(A3Report {
        rescale_error,
        bound_violation,
        tau_min,
        tau_max,
        certificate,
    })
}

/// `z` on a uniform `τ` grid covering `[tau_min, tau_max]`, with `z(0) = z0`.
fn tabulate_in_tau<T: Scalar, const N: usize, const M: usize>(
    f: &impl Fn(&[T; N], &[T; M]) -> [T; N],
    d: &impl Fn(T) -> [T; M],
    z0: [T; N],
    tau_min: T,
    tau_max: T,
    step: T,
) -> Result<HermiteTrack<T, N>, ExcitationError> {
    let steps = |span: T| (span / step).ceil().to_usize().unwrap_or(0).max(1) + 1;
    let fwd_grid = TimeGrid::new(T::zero(), step, steps(tau_max))
        .map_err(|_| ExcitationError::InvalidParameter("tau grid"))?;
    let fwd_field = |s: T, z: &[T; N]| f(z, &d(s));
    let fwd = integrate(&mut { fwd_field }, z0, fwd_grid)
        .map_err(|e| ExcitationError::Diverged(e.partial.grid.t_end().as_f64()))?;
    let back_grid = TimeGrid::new(T::zero(), step, steps(-tau_min))
        .map_err(|_| ExcitationError::InvalidParameter("tau grid"))?;
    // w(s) = z(−s) runs the same field backwards
    let back_field = |s: T, w: &[T; N]| {
        let v = f(w, &d(-s));
        array::from_fn(|i| -v[i])
    };
    let back = integrate(&mut { back_field }, z0, back_grid)
        .map_err(|e| ExcitationError::Diverged(e.partial.grid.t_end().as_f64()))?;

    let n_back = back.states.len() - 1;
    let origin = -T::from_index(n_back) * step;
    let mut values = Vec::with_capacity(n_back + fwd.states.len());
    values.extend(back.states[1..].iter().rev());
    values.extend(fwd.states.iter());
    let slopes = values
        .iter()
        .enumerate()
        .map(|(k, z)| f(z, &d(origin + T::from_index(k) * step)))
        .collect();
    Ok(HermiteTrack {
        origin,
        step,
        values,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// A grid whose step divides `2π` exactly into 500 Simpson pairs.
    fn periodic_grid(periods: usize) -> TimeGrid<f64> {
        TimeGrid::new(0.0, 2.0 * PI / 1000.0, 1000 * periods).unwrap()
    }

    fn scalar(grid: TimeGrid<f64>, f: impl Fn(f64) -> f64) -> SampledGain<f64, 1, 1> {
        SampledGain::from_fn(grid, |t| [[f(t)]]).unwrap()
    }

    #[test]
    fn closed_form_eigenvalue_matches_symmetric_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (a, b, d) = (
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let oracle = nalgebra::Matrix2::new(a, b, b, d)
                .symmetric_eigenvalues()
                .min();
            assert_abs_diff_eq!(lambda_min(&[[a, b], [b, d]]), oracle, epsilon = 1e-12);
        }
        assert_eq!(lambda_min(&[[3.0]]), 3.0);
        let m = [[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 4.0]];
        assert_abs_diff_eq!(lambda_min(&m), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn sample_count_must_match_grid() {
        let g = TimeGrid::new(0.0, 0.1, 10).unwrap();
        assert!(matches!(
            SampledGain::<f64, 1, 1>::new(g, vec![[[1.0]]; 3]),
            Err(ExcitationError::LengthMismatch {
                expected: 11,
                got: 3
            })
        ));
        assert!(matches!(
            SampledGain::from_fn(g, |t| [[if t > 0.5 { f64::NAN } else { 1.0 }]]),
            Err(ExcitationError::NonFinite { .. })
        ));
    }

    #[test]
    fn sine_is_excited_over_its_period() {
        let g = periodic_grid(20);
        let r = scalar(g, f64::sin);
        let starts = window_starts(&g, 2.0 * PI, 200);
        let out = pe_check(&r, 2.0 * PI, PI - 1e-9, &starts).unwrap();
        let cert = out.certificate().expect("certified");
        assert_abs_diff_eq!(cert.window, 2.0 * PI, epsilon = 1e-12);
        assert!(
            cert.min_margin < 1e-8,
            "windows integrate to π exactly: {}",
            cert.min_margin
        );
        assert!(!pe_check(&r, 2.0 * PI, PI + 1e-6, &starts)
            .unwrap()
            .is_certified());
        let (level, _) = pe_level(&r, 2.0 * PI).unwrap();
        assert_abs_diff_eq!(level, PI, epsilon = 1e-10);
    }

    #[test]
    fn sine_on_a_non_aligned_grid_needs_quadrature_slack() {
        let g = TimeGrid::spanning(0.0, 100.0, 0.01).unwrap();
        let r = scalar(g, f64::sin);
        let starts = window_starts(&g, 2.0 * PI, 200);
        assert!(pe_check(&r, 2.0 * PI, PI - 0.01, &starts)
            .unwrap()
            .is_certified());
    }

    #[test]
    fn zero_and_constant_gains() {
        let g = TimeGrid::spanning(0.0, 20.0, 0.01).unwrap();
        let starts = window_starts(&g, 1.0, 200);
        let zero = scalar(g, |_| 0.0);
        match pe_check(&zero, 1.0, 1e-3, &starts).unwrap() {
            Outcome::Violated(c) => assert_abs_diff_eq!(c.margin, -1e-3, epsilon = 1e-15),
            other => panic!("{other:?}"),
        }
        let one = scalar(g, |_| 1.0);
        let cert = *pe_check(&one, 1.0, 1.0, &starts)
            .unwrap()
            .certificate()
            .unwrap();
        assert_eq!((cert.window, cert.level), (1.0, 1.0));
        assert_eq!(cert.windows_checked, 200);
    }

    #[test]
    fn pe_rejects_bad_parameters() {
        let g = TimeGrid::spanning(0.0, 10.0, 0.01).unwrap();
        let r = scalar(g, |_| 1.0);
        assert!(pe_check(&r, 0.0, 1.0, &[0.0]).is_err());
        assert!(pe_check(&r, 1.0, 0.0, &[0.0]).is_err());
        assert!(pe_check(&r, 1.0, 1.0, &[]).is_err());
        assert!(matches!(
            pe_check(&r, 5.0, 1.0, &[8.0]),
            Err(ExcitationError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn averaged_excitation_of_sine() {
        let g = periodic_grid(20);
        let r = scalar(g, f64::sin);
        let starts = window_starts(&g, 4.0 * PI, 100);
        let out = lemma_a1_check(&r, 2.0 * PI, PI, &[4.0 * PI], &starts).unwrap();
        // ∫ over 4π is 2π against the required (π / 4π)·4π = π
        assert_abs_diff_eq!(out.margin(), PI, epsilon = 1e-8);
        let at_l = lemma_a1_check(&r, 2.0 * PI, PI, &[2.0 * PI], &starts).unwrap();
        assert_abs_diff_eq!(at_l.margin(), 0.5 * PI, epsilon = 1e-8);
    }

    #[test]
    fn averaged_excitation_needs_excitation() {
        let g = TimeGrid::spanning(0.0, 40.0, 0.01).unwrap();
        // excited only on the first half of the horizon
        let r = scalar(g, |t| if t < 20.0 { t.sin() } else { 0.0 });
        let starts = window_starts(&g, 4.0 * PI, 50);
        let err = lemma_a1_check(&r, 2.0 * PI, 3.0, &[2.0 * PI, 4.0 * PI], &starts).unwrap_err();
        assert!(
            matches!(err, ExcitationError::PreconditionFailed(_)),
            "{err}"
        );
        assert!(matches!(
            lemma_a1_check(&r, 2.0 * PI, 3.0, &[PI], &starts),
            Err(ExcitationError::InvalidParameter(_))
        ));
    }

    #[test]
    fn positivity_in_average_examples() {
        let g = TimeGrid::spanning(0.0, 100.0, 0.01).unwrap();
        let ells = window_lengths(4.0, 8);
        let starts = window_starts(&g, 16.0, 200);
        for window in [0.5, 4.0] {
            let one = scalar(g, |_| 1.0);
            let e = window_lengths(window, 4);
            assert!(pa_check(&one, window, 1.0, &e, &starts)
                .unwrap()
                .is_certified());
        }
        let a = scalar(g, |t| 0.5 + 0.5 * t.sin());
        let out = pa_check(&a, 4.0, 0.25, &ells, &starts).unwrap();
        assert!(out.is_certified());
        // the closed-form floor 0.5ℓ − 1 leaves at least 0.25ℓ − 1 ≥ 0 at ℓ = 4
        assert!(out.margin() >= -1e-9);
        let s = scalar(g, f64::sin);
        assert!(!pa_check(&s, 4.0, 0.01, &ells, &starts)
            .unwrap()
            .is_certified());
    }

    #[test]
    fn positivity_in_average_requires_symmetry() {
        let g = TimeGrid::spanning(0.0, 20.0, 0.01).unwrap();
        let a = SampledGain::from_fn(g, |t| [[1.0, t], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            pa_check(&a, 1.0, 0.5, &[1.0], &[0.0]),
            Err(ExcitationError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn linear_estimate_with_constant_gain() {
        let g = TimeGrid::spanning(0.0, 50.0, 0.01).unwrap();
        let nu = 0.5;
        let rep = lemma_a2_check(|_| [[nu]], |_| [0.0], [2.0], 1.0, nu, 0.0, g).unwrap();
        // p = 2e^{−νt} sits below 2e^{−ν(t − L)} everywhere and the gap closes as t grows
        assert!(
            rep.max_violation <= 0.0 && rep.max_violation > -1e-9,
            "{rep:?}"
        );
        assert_eq!(rep.b_sup, 0.0);
        let zero = lemma_a2_check(|_| [[nu]], |_| [0.0], [0.0], 1.0, nu, 0.0, g).unwrap();
        assert_eq!(zero.max_violation, 0.0);
    }

    #[test]
    fn linear_estimate_with_oscillating_gain() {
        let g = TimeGrid::spanning(0.0, 100.0, 0.01).unwrap();
        let rep = lemma_a2_check(
            |t: f64| [[0.5 + 0.5 * t.sin()]],
            |t: f64| [0.1 * (3.0 * t).cos()],
            [5.0],
            4.0,
            0.25,
            0.0,
            g,
        )
        .unwrap();
        assert!(rep.max_violation <= 0.0, "{rep:?}");
        assert_abs_diff_eq!(rep.b_sup, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn linear_estimate_preconditions() {
        let g = TimeGrid::spanning(0.0, 60.0, 0.01).unwrap();
        let below = lemma_a2_check(
            |t: f64| [[0.5 + t.sin()]],
            |_| [0.0],
            [1.0],
            4.0,
            0.1,
            0.2,
            g,
        );
        assert!(matches!(below, Err(ExcitationError::PreconditionFailed(_))));
        let uncertified = lemma_a2_check(|t: f64| [[t.sin()]], |_| [0.0], [1.0], 4.0, 0.1, 1.0, g);
        assert!(matches!(
            uncertified,
            Err(ExcitationError::PreconditionFailed(_))
        ));
        let skew = lemma_a2_check(
            |_| [[1.0, 0.5], [-0.5, 1.0]],
            |_| [0.0, 0.0],
            [1.0, 1.0],
            1.0,
            0.5,
            0.0,
            g,
        );
        assert!(matches!(skew, Err(ExcitationError::NotSymmetric { .. })));
    }

    #[test]
    fn linear_bound_shapes() {
        // the floor-free variant is the limit of the general one as the floor vanishes
        let (p0, t, l, nu, b) = (3.0, 7.0, 2.0, 0.4, 0.3);
        let general = lemma_a2_bound(p0, t, 0.0, l, nu, 1e-9, b);
        let plain = lemma_a2_bound(p0, t, 0.0, l, nu, 0.0, b);
        assert_abs_diff_eq!(general, plain + b * l, epsilon = 1e-6);
        assert!(lemma_a2_bound(p0, t, 0.0, l, nu, 0.5, b) > general);
    }

    fn iss_check(
        a: impl Fn(f64) -> f64,
        d: f64,
        z0: f64,
        window: f64,
        nu: f64,
        t_end: f64,
    ) -> A3Report<f64> {
        lemma_a3_check(
            |z: &[f64; 1], d: &[f64; 1]| [-z[0] + d[0]],
            a,
            |_| [d],
            [z0],
            window,
            nu,
            TimeGrid::spanning(0.0, t_end, 0.01).unwrap(),
            |s, r| s * (-r).exp(),
            |s| s,
        )
        .unwrap()
    }

    #[test]
    fn rescaled_estimate_example() {
        let rep = iss_check(|t| 0.5 + 0.5 * t.sin(), 0.2, 3.0, 4.0, 0.25, 60.0);
        assert!(rep.rescale_error <= 1e-5, "{rep:?}");
        assert!(rep.bound_violation <= 1e-6, "{rep:?}");
        assert!(rep.tau_min >= 0.0);
    }

    #[test]
    fn rescaled_estimate_identity_and_zero() {
        let same = iss_check(|_| 1.0, 0.2, 3.0, 1.0, 1.0, 20.0);
        assert!(same.rescale_error <= 1e-12, "{same:?}");
        let zero = iss_check(|t| 0.5 + 0.5 * t.sin(), 0.0, 0.0, 4.0, 0.25, 30.0);
        assert_eq!(zero.rescale_error, 0.0);
        assert_eq!(zero.bound_violation, 0.0);
    }

    #[test]
    fn rescaled_time_may_run_backwards() {
        // τ dips below zero before recovering, so z is needed at negative τ
        let rep = iss_check(|t| 0.1 + t.cos(), 0.1, 2.0, 60.0, 0.05, 400.0);
        assert!(rep.tau_min < 0.0);
        assert!(rep.rescale_error <= 1e-5, "{rep:?}");
    }

    #[test]
    fn certified_levels_are_stable_under_refinement() {
        let r = |t: f64| {
            [
                [1.0 + t.sin(), 0.3 * (2.0 * t).cos()],
                [0.5 * (0.7 * t).sin(), 0.2 + t.cos()],
            ]
        };
        let level_at = |h: f64| {
            let g = TimeGrid::spanning(0.0, 60.0, h).unwrap();
            pe_level(&SampledGain::from_fn(g, r).unwrap(), 5.0)
                .unwrap()
                .0
        };
        let (coarse, fine) = (level_at(0.02), level_at(0.01));
        assert!(coarse > 0.0);
        assert!((coarse - fine).abs() < 0.01 * fine, "{coarse} vs {fine}");

        let margin_at = |h: f64| {
            let g = TimeGrid::spanning(0.0, 60.0, h).unwrap();
            let a = scalar(g, |t| 0.5 + 0.5 * t.sin());
            pa_check(
                &a,
                4.0,
                0.25,
                &window_lengths(4.0, 8),
                &window_starts(&g, 16.0, 100),
            )
            .unwrap()
            .margin()
        };
        let (coarse, fine) = (margin_at(0.02), margin_at(0.01));
        assert!(
            (coarse - fine).abs() < 0.01 * fine.abs(),
            "{coarse} vs {fine}"
        );
    }
}
