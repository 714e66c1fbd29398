use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use uniting_core::closed_loop::simulate;
use uniting_core::experiments::{
    analyze, estimate_t_delta_delta, run_appendix, run_sweep, write_appendix, write_shell,
    write_sweep, write_trajectory, ConfigError, ExperimentConfig, WORKERS_ENV,
};

const CONFIG_ERROR: u8 = 2;
const CHECK_FAILED: u8 = 3;

/// Pendulum swing-up under a uniting (global/local) supervisor.
#[derive(Parser)]
#[command(version, after_help = format!("The sweep worker pool size is read from {WORKERS_ENV} (unset or 0: all cores)."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop run from (x1_0, x2_0); writes trajectory.csv and switches.csv.
    Simulate(Common),
    /// Every initial condition of the grid; writes sweep.csv, dist.csv and summary.csv.
    Sweep(Common),
    /// Reach time from the energy shell into the local set under the global law.
    Assumption3(Common),
    /// Randomized checks of the excitation lemmas; writes appendix.csv.
    Appendix(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file; missing keys take their defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set supervisor=hysteresis`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

enum Outcome {
    Ok,
    CheckFailed(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c)
        | Command::Sweep(c)
        | Command::Assumption3(c)
        | Command::Appendix(c) => c,
    };
    let cfg = match ExperimentConfig::load(common.config.as_deref(), &common.overrides) {
        Ok(cfg) => cfg,
        Err(e) => return config_error(&e),
    };
    if common.print_config {
        print!("{}", cfg.to_toml_string());
        return ExitCode::SUCCESS;
    }
    let result = match cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Assumption3(_) => cmd_assumption3(&cfg),
        Command::Appendix(_) => cmd_appendix(&cfg),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn config_error(e: &ConfigError) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(CONFIG_ERROR)
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "not reached".into(), |t| format!("{t:.2} s"))
}

fn cmd_simulate(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let x0 = [cfg.x1_0, cfg.x2_0];
    let run = simulate(&cfg.closed_loop(), x0, cfg.grid(), 0);
    let files =
        write_trajectory(&run, &cfg.params(), &cfg.output_dir).context("writing trajectory")?;
    let report = analyze(&run, cfg);
    println!("x0 = ({}, {})", x0[0], x0[1]);
    println!(
        "T_x = {}, T_H = {}, switches = {}",
        fmt_time(report.t_x),
        fmt_time(report.t_h),
        report.switches
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(match &run.diverged {
        Some(e) => Outcome::CheckFailed(e.to_string()),
        None => Outcome::Ok,
    })
}

fn cmd_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let result = run_sweep(cfg);
    let files = write_sweep(&result, &cfg.output_dir).context("writing sweep")?;
    let s = &result.summary;
    println!("initial conditions: {}", result.reports.len());
    println!("E_x = {:.4}, E_H = {:.4}", s.entropy_x, s.entropy_h);
    println!(
        "t_x_99 = {}, t_H_99 = {}",
        fmt_time(s.t_x_99),
        fmt_time(s.t_h_99)
    );
    println!(
        "unreached: x {}, H {}; max switches {}",
        s.unreached_x, s.unreached_h, s.max_switches
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(if s.diverged > 0 {
        Outcome::CheckFailed(format!("{} trajectories diverged", s.diverged))
    } else {
        Outcome::Ok
    })
}

fn cmd_assumption3(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let est = estimate_t_delta_delta(cfg, cfg.boundary_samples, cfg.delta_cap);
    let path = write_shell(&est, &cfg.output_dir).context("writing shell samples")?;
    // half a reference period plus a quarter for the orbit convention
    let budget = 1.25 * 0.5 * cfg.period;
    println!("samples: {}, delta = {}", est.samples.len(), est.delta);
    println!(
        "T_delta_delta = {:.2} s (budget {budget:.3} s), worst sample ({}, {})",
        est.max_time, est.worst[0], est.worst[1]
    );
    println!("wrote {}", path.display());
    Ok(if !est.complete() {
        Outcome::CheckFailed(format!(
            "{} samples exceeded the {} s cutoff",
            est.cutoff_exceeded, est.cutoff
        ))
    } else if est.max_time > budget {
        Outcome::CheckFailed(format!(
            "reach time {:.2} s exceeds {budget:.3} s",
            est.max_time
        ))
    } else {
        Outcome::Ok
    })
}

fn cmd_appendix(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let report = run_appendix(cfg.seed);
    let path = write_appendix(&report, &cfg.output_dir).context("writing appendix report")?;
    let failed: Vec<_> = report.failures().collect();
    println!(
        "checks: {}, failed: {}, elapsed {:.2} s (certified on sampled windows)",
        report.rows.len(),
        failed.len(),
        report.elapsed.as_secs_f64()
    );
    for r in &failed {
        println!(
            "  trial {} ({}): margin {} {}",
            r.trial,
            r.lemma,
            r.margin,
            r.note.as_deref().unwrap_or("")
        );
    }
    println!("wrote {}", path.display());
    Ok(if failed.is_empty() {
        Outcome::Ok
    } else {
        Outcome::CheckFailed(format!("{} appendix checks failed", failed.len()))
    })
}
