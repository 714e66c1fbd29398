//! Randomized families for the excitation checks.
//!
//! * 50 trigonometric 2×2 gains: the excitation level is measured on every
//!   window start, then the averaged bound is checked for `ℓ` from `L` to `4L`.
//! * 100 linear systems `ṗ = −A(t)p + b(t)`, half scalar and half 2×2. Each
//!   eigenvalue path is `a(t) = m + Σ c_k sin(w_k t + φ_k)`, whose windows satisfy
//!   `∫ a ≥ mℓ − Σ 2|c_k|/w_k`, so `m` is chosen to make `(L, ν)` hold by
//!   construction. The 2×2 gains rotate a diagonal pair by a fixed angle, so
//!   `A(t)` commutes with itself at all times.
//! * 50 rescaled systems `ṗ = a(t)(−kp + d)` with the same kind of scalar gain.
//!
//! Trials are independent, seeded by `seed + trial`, and reported in trial order.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::TimeGrid;
use crate::excitation::{
    lemma_a1_check, lemma_a2_check, lemma_a3_check, pe_level, window_lengths, window_starts,
    ExcitationError, Mat, SampledGain,
};

use super::sweep::with_workers;

pub const PE_TRIALS: usize = 50;
pub const PA_TRIALS: usize = 100;
pub const ISS_TRIALS: usize = 50;
/// Integration slack allowed on the simulated estimates.
pub const SIM_TOL: f64 = 1e-6;
/// Allowed gap between the two time scales of a rescaled run.
pub const RESCALE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixRow {
    pub trial: usize,
    pub seed: u64,
    pub lemma: &'static str,
    /// Slack of the check; negative means the inequality failed.
    pub margin: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AppendixReport {
    pub rows: Vec<AppendixRow>,
    pub elapsed: Duration,
}

impl AppendixReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AppendixRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn rows_for(&self, lemma: &str) -> impl Iterator<Item = &AppendixRow> + '_ {
        let lemma = lemma.to_string();
        self.rows.iter().filter(move |r| r.lemma == lemma)
    }
}

/// `m + Σ c_k sin(w_k t + φ_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigPath {
    pub mean: f64,
    pub terms: [(f64, f64, f64); 2],
}

impl TrigPath {
    pub fn at(&self, t: f64) -> f64 {
        self.mean
            + self
                .terms
                .iter()
                .map(|&(c, w, ph)| c * (w * t + ph).sin())
                .sum::<f64>()
    }

    /// `Σ 2|c_k|/w_k`, the largest shortfall of any window integral below `mℓ`.
    pub fn oscillation_budget(&self) -> f64 {
        self.terms.iter().map(|&(c, w, _)| 2.0 * c.abs() / w).sum()
    }

    /// `max(0, Σ|c_k| − m)`, a lower bound on `−a(t)`.
    pub fn floor(&self) -> f64 {
        (self.terms.iter().map(|&(c, _, _)| c.abs()).sum::<f64>() - self.mean).max(0.0)
    }

    /// Random oscillation with the mean set so that `(window, nu)` holds.
    pub fn positive_in_average(rng: &mut impl Rng, window: f64, nu: f64) -> Self {
        let mut terms = [(0.0, 1.0, 0.0); 2];
        for term in &mut terms {
            *term = (
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.3..3.0),
                rng.gen_range(0.0..2.0 * PI),
            );
        }
        let mut path = Self { mean: 0.0, terms };
        path.mean = nu + path.oscillation_budget() / window;
        path
    }
}

fn grid(t_end: f64) -> TimeGrid<f64> {
    TimeGrid::spanning(0.0, t_end, 0.01).expect("valid grid")
}

fn row(trial: usize, seed: u64, lemma: &'static str, margin: f64, tol: f64) -> AppendixRow {
    AppendixRow {
        trial,
        seed,
        lemma,
        margin,
        pass: margin >= -tol,
        note: None,
    }
}

fn failed(trial: usize, seed: u64, lemma: &'static str, err: ExcitationError) -> AppendixRow {
    AppendixRow {
        trial,
        seed,
        lemma,
        margin: f64::NAN,
        pass: false,
        note: Some(err.to_string()),
    }
}

/// Constant plus two `(amplitude, frequency, phase)` sine terms.
type Entry = (f64, [(f64, f64, f64); 2]);

/// A random 2×2 trigonometric gain, excitation level measured on every window, then the averaged bound.
pub fn pe_trial(trial: usize, seed: u64) -> AppendixRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: [[Entry; 2]; 2] = std::array::from_fn(|_| {
        std::array::from_fn(|_| {
            (
                rng.gen_range(-0.5..0.5),
                std::array::from_fn(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.3..3.0),
                        rng.gen_range(0.0..2.0 * PI),
                    )
                }),
            )
        })
    });
    let window = rng.gen_range(4.0..8.0);
    let g = grid(60.0);
    let r = |t: f64| -> Mat<f64, 2, 2> {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let (c, terms) = coeffs[i][j];
                c + terms
                    .iter()
                    .map(|&(a, w, ph)| a * (w * t + ph).sin())
                    .sum::<f64>()
            })
        })
    };
    let gain = match SampledGain::from_fn(g, r) {
        Ok(gain) => gain,
        Err(e) => return failed(trial, seed, "a1", e),
    };
    let ells = window_lengths(window, 8);
    let ell_max = *ells.last().expect("non-empty");
    let theta = match pe_level(&gain, window) {
        Ok((level, _)) if level > 0.0 => level,
        Ok((level, _)) => {
            let mut r = row(trial, seed, "a1", level, 0.0);
            r.pass = false;
            r.note = Some("gain is not excited".into());
            return r;
        }
        Err(e) => return failed(trial, seed, "a1", e),
    };
    let starts = window_starts(&g, ell_max, 200);
    match lemma_a1_check(&gain, window, theta, &ells, &starts) {
        Ok(out) => row(trial, seed, "a1", out.margin(), 0.0),
        Err(e) => failed(trial, seed, "a1", e),
    }
}

/// A random certified linear system, scalar for even trials and 2×2 for odd ones.
pub fn pa_trial(trial: usize, seed: u64) -> AppendixRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = rng.gen_range(2.0..6.0);
    let nu0 = rng.gen_range(0.05..0.5);
    // a little slack below the constructed level absorbs quadrature rounding
    let nu = 0.98 * nu0;
    let g = grid(60.0);
    let b_amp: [(f64, f64, f64, f64); 2] = std::array::from_fn(|_| {
        (
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.3..3.0),
            rng.gen_range(0.0..2.0 * PI),
        )
    });
    let b_at = |k: usize, t: f64| {
        let (c0, c1, w, ph) = b_amp[k];
        c0 + c1 * (w * t + ph).cos()
    };
    let result = if trial.is_multiple_of(2) {
        let path = TrigPath::positive_in_average(&mut rng, window, nu0);
        let p0 = [rng.gen_range(-5.0..5.0)];
        lemma_a2_check(
            |t| [[path.at(t)]],
            |t| [b_at(0, t)],
            p0,
            window,
            nu,
            path.floor(),
            g,
        )
    } else {
        let paths = [
            TrigPath::positive_in_average(&mut rng, window, nu0),
            TrigPath::positive_in_average(&mut rng, window, nu0),
        ];
        let angle: f64 = rng.gen_range(0.0..PI);
        let (s, c) = angle.sin_cos();
        let p0 = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let a = move |t: f64| -> Mat<f64, 2, 2> {
            let (d1, d2) = (paths[0].at(t), paths[1].at(t));
            let off = s * c * (d1 - d2);
            [
                [c * c * d1 + s * s * d2, off],
                [off, s * s * d1 + c * c * d2],
            ]
        };
        let floor = paths[0].floor().max(paths[1].floor());
        lemma_a2_check(a, |t| [b_at(0, t), b_at(1, t)], p0, window, nu, floor, g)
    };
    match result {
        Ok(rep) => row(trial, seed, "a2", -rep.max_violation, SIM_TOL),
        Err(e) => failed(trial, seed, "a2", e),
    }
}

/// A random rescaled linear system `ṗ = a(t)(−kp + d(τ))` with `β(s, r) = s·e^{−kr}`, `γ(s) = s/k`.
pub fn iss_trial(trial: usize, seed: u64) -> [AppendixRow; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = rng.gen_range(2.0..6.0);
    let nu0 = rng.gen_range(0.1..0.5);
    let nu = 0.98 * nu0;
    let path = TrigPath::positive_in_average(&mut rng, window, nu0);
    let k = rng.gen_range(0.5..2.0);
    let (d0, d1, w) = (
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(0.3..3.0),
    );
    let z0 = [rng.gen_range(-5.0..5.0)];
    let out = lemma_a3_check(
        |z: &[f64; 1], d: &[f64; 1]| [-k * z[0] + d[0]],
        |t| path.at(t),
        |tau| [d0 + d1 * (w * tau).sin()],
        z0,
        window,
        nu,
        grid(40.0),
        |s, r| s * (-k * r).exp(),
        |s| s / k,
    );
    match out {
        Ok(rep) => [
            row(
                trial,
                seed,
                "a3-rescale",
                RESCALE_TOL - rep.rescale_error,
                0.0,
            ),
            row(trial, seed, "a3-bound", -rep.bound_violation, SIM_TOL),
        ],
        Err(e) => [
            failed(trial, seed, "a3-rescale", e.clone()),
            failed(trial, seed, "a3-bound", e),
        ],
    }
}

/// Runs every family; trial `i` uses seed `seed + i`.
pub fn run_appendix(seed: u64) -> AppendixReport {
    let start = Instant::now();
    let seed_of = |i: usize| seed.wrapping_add(i as u64);
    let rows = with_workers(|| {
        let total = PE_TRIALS + PA_TRIALS + ISS_TRIALS;
        let per_trial: Vec<Vec<AppendixRow>> = (0..total)
            .into_par_iter()
            .map(|i| {
                if i < PE_TRIALS {
                    vec![pe_trial(i, seed_of(i))]
                } else if i < PE_TRIALS + PA_TRIALS {
                    vec![pa_trial(i, seed_of(i))]
                } else {
                    iss_trial(i, seed_of(i)).to_vec()
                }
            })
            .collect();
        per_trial.into_iter().flatten().collect()
    });
    AppendixReport {
        rows,
        elapsed: start.elapsed(),
    }
}
