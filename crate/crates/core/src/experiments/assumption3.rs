//! Empirical reach time from the energy shell `|y| = δ(Δ)` into `|ψ| ≤ Δ` under the
//! global law alone with no disturbance.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::controllers::ControlLaws;
use crate::dynamics::rk4_step;
use crate::pendulum::{delta_of, plant_derivative, psi_norm, PendulumParams, State};

use super::config::ExperimentConfig;
use super::sweep::with_workers;

#[derive(Debug, Clone, PartialEq)]
pub struct ReachEstimate {
    pub delta_cap: f64,
    pub delta: f64,
    pub samples: Vec<State<f64>>,
    /// First sample time with `|ψ| ≤ Δ`; `None` past the cutoff.
    pub times: Vec<Option<f64>>,
    /// Largest reach time among the samples that made it.
    pub max_time: f64,
    pub worst: State<f64>,
    pub cutoff: f64,
    pub cutoff_exceeded: usize,
}

impl ReachEstimate {
    /// `true` when every sample reached the local set before the cutoff.
    pub fn complete(&self) -> bool {
        self.cutoff_exceeded == 0
    }
}

/// Points on a closed energy level, `x1 = a·cos θ` at evenly spaced `θ`, with the sign of
/// `x2` following `sin θ`. `θ = 0` is the turnaround point `(a, 0)` of a libration.
fn level_points(
    level: f64,
    amplitude: f64,
    m: usize,
    p: &PendulumParams<f64>,
) -> impl Iterator<Item = State<f64>> + '_ {
    let w2 = p.omega * p.omega;
    (0..m).map(move |j| {
        let th = TAU * j as f64 / m as f64;
        let x1 = amplitude * th.cos();
        let v = (2.0 * (level - w2 * (1.0 - x1.cos()))).max(0.0).sqrt();
        [x1, if th.sin() >= 0.0 { v } else { -v }]
    })
}

/// `n` states on the shell `|H − H*| = δ(Δ)`: the first half on the lower level
/// (librations, when it exists), the rest on the upper level (rotations).
pub fn shell_states(n: usize, delta_cap: f64, p: &PendulumParams<f64>) -> Vec<State<f64>> {
    let w2 = p.omega * p.omega;
    let delta = delta_of(delta_cap, p);
    let h_star = p.target_energy();
    let lower = h_star - delta;
    let n_lower = if lower >= 0.0 { n.div_ceil(2) } else { 0 };
    let amp_lower = (1.0 - lower / w2).clamp(-1.0, 1.0).acos();
    let mut out: Vec<_> = level_points(lower, amp_lower, n_lower, p).collect();
    out.extend(level_points(h_star + delta, PI, n - n_lower, p));
    out
}

/// First grid time with `|ψ| ≤ Δ` under the global law, or `None` past `cutoff`.
pub fn time_to_local_set(
    x0: State<f64>,
    laws: &ControlLaws<f64>,
    delta_cap: f64,
    h: f64,
    cutoff: f64,
) -> Option<f64> {
    let p = laws.params;
    let field = |_t: f64, x: &State<f64>| plant_derivative(x, laws.global(x), 0.0, &p);
    let n_max = (cutoff / h).ceil() as usize;
    let mut x = x0;
    for i in 0..=n_max {
        if psi_norm(&x) <= delta_cap {
            return Some(i as f64 * h);
        }
        x = rk4_step(&field, i as f64 * h, &x, h).ok()?;
    }
    None
}

/// Maximum reach time over `n_samples` shell states; the cutoff is ten reference periods.
pub fn estimate_t_delta_delta(
    cfg: &ExperimentConfig,
    n_samples: usize,
    delta_cap: f64,
) -> ReachEstimate {
    let mut laws = cfg.closed_loop().laws;
    laws.params.delta_cap = delta_cap;
    let samples = shell_states(n_samples, delta_cap, &laws.params);
    let cutoff = 10.0 * cfg.period;
    let times: Vec<Option<f64>> = with_workers(|| {
        samples
            .par_iter()
            .map(|&x0| time_to_local_set(x0, &laws, delta_cap, cfg.h, cutoff))
            .collect()
    });
    let mut max_time = 0.0;
    let mut worst = samples.first().copied().unwrap_or([0.0, 0.0]);
    for (x, t) in samples.iter().zip(&times) {
        if let Some(t) = *t {
            if t > max_time {
                max_time = t;
                worst = *x;
            }
        }
    }
    let cutoff_exceeded = times.iter().filter(|t| t.is_none()).count();
    if cutoff_exceeded > 0 {
        log::warn!(
            "{cutoff_exceeded} shell samples did not reach |psi| <= {delta_cap} within {cutoff} s"
        );
    }
    ReachEstimate {
        delta_cap,
        delta: delta_of(delta_cap, &laws.params),
        samples,
        times,
        max_time,
        worst,
        cutoff,
        cutoff_exceeded,
    }
}
