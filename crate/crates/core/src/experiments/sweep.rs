//! Batch sweep over a grid of initial conditions.

use rayon::prelude::*;

use crate::closed_loop::{simulate, HybridTrajectory};
use crate::metrics::{
    build_distribution, local_envelope_check, settling_time, ReachDistribution, SettlingRecord,
};
use crate::pendulum::{beta_prime, energy, output_y, psi_norm, target_distance, State};
use crate::supervisor::Mode;

use super::config::ExperimentConfig;

/// Environment variable holding the worker count of the sweep pool (unset or 0: all cores).
pub const WORKERS_ENV: &str = "UNITING_WORKERS";

/// Everything recorded about one initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub x0: State<f64>,
    pub t_x: Option<f64>,
    pub t_h: Option<f64>,
    pub switches: usize,
    pub diverged: bool,
    /// Time of the last switch into local mode, if the run ends local.
    pub final_local_entry: Option<f64>,
    /// `max |ψ| − σ(Δ)e^{−0.5κ(t − t′)}` after the final local entry.
    pub envelope_violation: Option<f64>,
    /// Smallest gap between consecutive switches.
    pub min_switch_gap: Option<f64>,
    /// Largest one-step change of `|ψ|`.
    pub eps_sample: f64,
    /// Every switch into local mode lies within `eps_sample` of `|ψ| ≤ Δ`, every switch
    /// into global mode beyond `β′(Δ, 0) − eps_sample`, and every inter-switch segment
    /// visits both sides of the annulus.
    pub annulus_ok: bool,
    pub max_abs_x2: f64,
    pub max_abs_y: f64,
}

impl TrajectoryReport {
    pub fn record(&self) -> SettlingRecord<f64> {
        SettlingRecord {
            x0: self.x0,
            t_x: self.t_x,
            t_h: self.t_h,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub entropy_x: f64,
    pub entropy_h: f64,
    /// Earliest bin edge where the cdf reaches 0.99.
    pub t_x_99: Option<f64>,
    pub t_h_99: Option<f64>,
    pub unreached_x: usize,
    pub unreached_h: usize,
    pub max_switches: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub reports: Vec<TrajectoryReport>,
    pub distribution: ReachDistribution<f64>,
    pub summary: SweepSummary,
}

/// Settling times and supervisor diagnostics of a finished run.
pub fn analyze(run: &HybridTrajectory<f64>, cfg: &ExperimentConfig) -> TrajectoryReport {
    let p = cfg.params();
    let grid = *run.grid();
    let states = run.states();
    let x0 = states[0];
    let diverged = run.diverged.is_some();

    let (t_x, t_h) = if diverged {
        (None, None)
    } else {
        let h_star = p.target_energy();
        let dev_x: Vec<f64> = states.iter().map(|x| target_distance(x[0])).collect();
        let dev_h: Vec<f64> = states
            .iter()
            .map(|x| (energy(x, &p) - h_star).abs())
            .collect();
        (
            settling_time(&dev_x, cfg.tol_x, &grid).expect("non-empty"),
            settling_time(&dev_h, cfg.energy_band(), &grid).expect("non-empty"),
        )
    };

    let psi: Vec<f64> = states.iter().map(psi_norm).collect();
    let eps_sample = psi
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    let (max_abs_x2, max_abs_y) = states.iter().fold((0.0f64, 0.0f64), |(a, b), x| {
        (a.max(x[1].abs()), b.max(output_y(x, &p).abs()))
    });

    let final_local_entry = if diverged {
        None
    } else {
        run.final_local_entry()
    };
    let envelope_violation = match final_local_entry {
        Some(entry) if cfg.disturbance_spec().is_zero() => {
            Some(local_envelope_check(states, &grid, entry, &p).expect("entry inside run"))
        }
        _ => None,
    };

    let events = &run.events;
    let min_switch_gap = events
        .windows(2)
        .map(|w| w[1].time - w[0].time)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));

    let engage = p.delta_cap;
    let release = beta_prime(p.delta_cap, 0.0, &p);
    let mut annulus_ok = events.iter().all(|e| match e.to {
        Mode::Local => e.eta_norm <= engage + eps_sample,
        Mode::Global => e.eta_norm > release - eps_sample,
    });
    for w in events.windows(2) {
        let (i, j) = (run.index_of(w[0].time), run.index_of(w[1].time));
        let seg = &psi[i..=j];
        let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        annulus_ok &= lo <= engage + eps_sample && hi >= release - eps_sample;
    }

    TrajectoryReport {
        x0,
        t_x,
        t_h,
        switches: events.len(),
        diverged,
        final_local_entry: final_local_entry.map(|i| grid.time(i)),
        envelope_violation,
        min_switch_gap,
        eps_sample,
        annulus_ok,
        max_abs_x2,
        max_abs_y,
    }
}

/// Simulates and analyses one initial condition; `index` selects the noise stream.
pub fn run_one(cfg: &ExperimentConfig, index: usize, x0: State<f64>) -> TrajectoryReport {
    let run = simulate(&cfg.closed_loop(), x0, cfg.grid(), index as u64);
    analyze(&run, cfg)
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`].
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("falling back to the global pool: {e}");
            f()
        }
    }
}

/// Runs the given initial conditions in parallel; results keep the input order.
pub fn run_batch(cfg: &ExperimentConfig, ics: &[State<f64>]) -> Vec<TrajectoryReport> {
    with_workers(|| {
        ics.par_iter()
            .enumerate()
            .map(|(i, &x0)| run_one(cfg, i, x0))
            .collect()
    })
}

/// One simulation per grid point, aggregated into settling-time statistics.
pub fn run_sweep(cfg: &ExperimentConfig) -> SweepResult {
    let ics = cfg.initial_conditions();
    let reports = run_batch(cfg, &ics);
    summarize(reports, cfg)
}

pub fn summarize(reports: Vec<TrajectoryReport>, cfg: &ExperimentConfig) -> SweepResult {
    let records: Vec<_> = reports.iter().map(TrajectoryReport::record).collect();
    let distribution = build_distribution(&records, cfg.n_bins, cfg.t_end).expect("non-empty grid");
    let summary = SweepSummary {
        entropy_x: distribution.entropy_x,
        entropy_h: distribution.entropy_h,
        t_x_99: distribution.quantile_x(0.99),
        t_h_99: distribution.quantile_h(0.99),
        unreached_x: distribution.unreached_x,
        unreached_h: distribution.unreached_h,
        max_switches: reports.iter().map(|r| r.switches).max().unwrap_or(0),
        diverged: reports.iter().filter(|r| r.diverged).count(),
    };
    SweepResult {
        reports,
        distribution,
        summary,
    }
}
