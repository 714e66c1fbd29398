//! CSV emission. Floats use the shortest representation that round-trips;
//! a missing settling time is written as `NaN`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use csv::Writer;

use crate::closed_loop::HybridTrajectory;
use crate::pendulum::{energy, output_y, psi_norm, PendulumParams};

use super::appendix::AppendixReport;
use super::assumption3::ReachEstimate;
use super::sweep::SweepResult;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SWITCHES_FILE: &str = "switches.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const DIST_FILE: &str = "dist.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SHELL_FILE: &str = "assumption3.csv";
pub const APPENDIX_FILE: &str = "appendix.csv";

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), num)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn create(dir: &Path, name: &str) -> io::Result<(Writer<fs::File>, PathBuf)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((Writer::from_path(&path)?, path))
}

/// `t,x1,x2,u,mode,H,y,psi_norm` and the switch log `t,from,to,eta_norm`.
pub fn write_trajectory(
    run: &HybridTrajectory<f64>,
    p: &PendulumParams<f64>,
    dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    let (mut w, traj_path) = create(dir, TRAJECTORY_FILE)?;
    w.write_record(["t", "x1", "x2", "u", "mode", "H", "y", "psi_norm"])?;
    let grid = run.grid();
    for (i, x) in run.states().iter().enumerate() {
        w.write_record([
            num(grid.time(i)),
            num(x[0]),
            num(x[1]),
            num(run.controls[i]),
            run.modes[i].to_string(),
            num(energy(x, p)),
            num(output_y(x, p)),
            num(psi_norm(x)),
        ])?;
    }
    w.flush()?;

    let (mut w, log_path) = create(dir, SWITCHES_FILE)?;
    w.write_record(["t", "from", "to", "eta_norm"])?;
    for e in &run.events {
        w.write_record([
            num(e.time),
            e.from.to_string(),
            e.to.to_string(),
            num(e.eta_norm),
        ])?;
    }
    w.flush()?;
    Ok(vec![traj_path, log_path])
}

/// `sweep.csv`, `dist.csv` and `summary.csv`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let (mut w, sweep_path) = create(dir, SWEEP_FILE)?;
    w.write_record([
        "x1_0",
        "x2_0",
        "T_x",
        "T_H",
        "reached_x",
        "reached_H",
        "switches",
    ])?;
    for r in &result.reports {
        w.write_record([
            num(r.x0[0]),
            num(r.x0[1]),
            opt(r.t_x),
            opt(r.t_h),
            flag(r.t_x.is_some()).to_string(),
            flag(r.t_h.is_some()).to_string(),
            r.switches.to_string(),
        ])?;
    }
    w.flush()?;

    let d = &result.distribution;
    let (mut w, dist_path) = create(dir, DIST_FILE)?;
    w.write_record(["t", "cdf_x", "cdf_H", "pdf_x", "pdf_H"])?;
    for i in 0..d.n_bins() {
        w.write_record([
            num(d.edge(i)),
            num(d.cdf_x[i]),
            num(d.cdf_h[i]),
            num(d.pdf_x[i]),
            num(d.pdf_h[i]),
        ])?;
    }
    w.flush()?;

    let s = &result.summary;
    let (mut w, summary_path) = create(dir, SUMMARY_FILE)?;
    w.write_record([
        "E_x",
        "E_H",
        "t_x_99",
        "t_H_99",
        "unreached_x",
        "unreached_H",
    ])?;
    w.write_record([
        num(s.entropy_x),
        num(s.entropy_h),
        opt(s.t_x_99),
        opt(s.t_h_99),
        s.unreached_x.to_string(),
        s.unreached_h.to_string(),
    ])?;
    w.flush()?;
    Ok(vec![sweep_path, dist_path, summary_path])
}

/// One row per shell sample: `x1,x2,t_reach` (`NaN` past the cutoff).
pub fn write_shell(est: &ReachEstimate, dir: &Path) -> io::Result<PathBuf> {
    let (mut w, path) = create(dir, SHELL_FILE)?;
    w.write_record(["x1", "x2", "t_reach"])?;
    for (x, t) in est.samples.iter().zip(&est.times) {
        w.write_record([num(x[0]), num(x[1]), opt(*t)])?;
    }
    w.flush()?;
    Ok(path)
}

/// One row per check: `trial,seed,lemma,margin,pass`.
pub fn write_appendix(report: &AppendixReport, dir: &Path) -> io::Result<PathBuf> {
    let (mut w, path) = create(dir, APPENDIX_FILE)?;
    w.write_record(["trial", "seed", "lemma", "margin", "pass"])?;
    for r in &report.rows {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.lemma.to_string(),
            num(r.margin),
            flag(r.pass).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}
