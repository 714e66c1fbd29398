//! Flat key/value experiment configuration.
//!
//! Every key is optional; an empty file resolves to the swing-up baseline
//! (literal sign law, no supervisor, `ω = 1`, `u_max = 0.1`, ICs on
//! `[−10, 10] × [−3, 3]`, `t_end = 200`, `h = 0.01`). Unknown keys are errors.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_loop::ClosedLoopSpec;
use crate::controllers::{ControlLaws, GlobalLaw};
use crate::dynamics::TimeGrid;
use crate::error::ParamError;
use crate::pendulum::{sigma, DisturbanceKind, DisturbanceSpec, PendulumParams};
use crate::supervisor::SupervisorKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("malformed override `{0}`: expected key=value")]
    Override(String),
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub omega: f64,
    pub u_max: f64,
    pub c: f64,
    pub k: f64,
    pub delta_cap: f64,
    pub tau_d: f64,
    pub controller: GlobalLaw,
    pub supervisor: SupervisorKind,
    pub saturate_local: bool,

    pub disturbance: DisturbanceKind,
    pub disturbance_amplitude: f64,
    pub disturbance_frequency: f64,
    pub seed: u64,

    pub t_end: f64,
    pub h: f64,

    pub x1_min: f64,
    pub x1_max: f64,
    pub x1_step: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    pub x2_step: f64,

    /// Initial state of `simulate`.
    pub x1_0: f64,
    pub x2_0: f64,

    /// Band radius for the angle settling time.
    pub tol_x: f64,
    /// Band radius for the energy settling time, as a fraction of `H* = 2ω²`.
    pub tol_h: f64,
    /// Target `|ψ|` radius for the local decay budget; `None` uses the radius that implies the angle band.
    pub lambda: Option<f64>,
    pub n_bins: usize,

    /// States on the shell `|y| = δ(Δ)` for the reach-time estimate.
    pub boundary_samples: usize,
    /// Reference oscillation period used for the reach-time budget and cutoff.
    pub period: f64,

    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = PendulumParams::<f64>::default();
        Self {
            omega: p.omega,
            u_max: p.u_max,
            c: p.c,
            k: p.k,
            delta_cap: p.delta_cap,
            tau_d: p.tau_d,
            controller: GlobalLaw::Sign,
            supervisor: SupervisorKind::FixedGlobal,
            saturate_local: false,
            disturbance: DisturbanceKind::Zero,
            disturbance_amplitude: 0.0,
            disturbance_frequency: 1.0,
            seed: 0,
            t_end: 200.0,
            h: 0.01,
            x1_min: -10.0,
            x1_max: 10.0,
            x1_step: 0.2,
            x2_min: -3.0,
            x2_max: 3.0,
            x2_step: 0.1,
            x1_0: 0.1,
            x2_0: 0.0,
            tol_x: 0.05 * PI,
            tol_h: 0.05,
            lambda: None,
            n_bins: 20_000,
            boundary_samples: 200,
            period: 7.41,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to a bare string.
fn parse_override(item: &str) -> Result<(String, toml::Value), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(item.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(item.to_string()));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides, then validates.
    pub fn from_toml_str<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text)?;
        for item in overrides {
            let (key, value) = parse_override(item.as_ref())?;
            table.insert(key, value);
        }
        let cfg: Self = table.try_into()?;
        cfg.validated()
    }

    pub fn load<S: AsRef<str>>(path: Option<&Path>, overrides: &[S]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(path) => fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// The uniting experiment: smooth law, local law, hysteresis supervisor.
    pub fn uniting() -> Self {
        Self {
            controller: GlobalLaw::Smooth,
            supervisor: SupervisorKind::Hysteresis,
            ..Self::default()
        }
    }

    pub fn validated(self) -> Result<Self, ConfigError> {
        self.params().validated()?;
        self.disturbance_spec().validated()?;
        let positive = [
            ("t_end", self.t_end),
            ("h", self.h),
            ("x1_step", self.x1_step),
            ("x2_step", self.x2_step),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new(key, "must be positive and finite").into());
            }
        }
        let finite = [
            ("x1_min", self.x1_min),
            ("x1_max", self.x1_max),
            ("x2_min", self.x2_min),
            ("x2_max", self.x2_max),
            ("x1_0", self.x1_0),
            ("x2_0", self.x2_0),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(ParamError::new(key, "must be finite").into());
            }
        }
        if self.x1_max < self.x1_min {
            return Err(ParamError::new("x1_max", "must not be below x1_min").into());
        }
        if self.x2_max < self.x2_min {
            return Err(ParamError::new("x2_max", "must not be below x2_min").into());
        }
        if self.h > self.t_end {
            return Err(ParamError::new("h", "must not exceed t_end").into());
        }
        if !(self.tol_x > 0.0 && self.tol_x < PI) {
            return Err(ParamError::new("tol_x", "must lie in (0, pi)").into());
        }
        if !(self.tol_h > 0.0 && self.tol_h.is_finite()) {
            return Err(ParamError::new("tol_h", "must be positive").into());
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l <= sigma(self.delta_cap)) {
                return Err(ParamError::new("lambda", "must lie in (0, sigma(delta_cap)]").into());
            }
        }
        if self.n_bins == 0 {
            return Err(ParamError::new("n_bins", "must be at least 1").into());
        }
        if self.boundary_samples == 0 {
            return Err(ParamError::new("boundary_samples", "must be at least 1").into());
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(ParamError::new("period", "must be positive").into());
        }
        if self.supervisor == SupervisorKind::Hysteresis && self.tau_d != 0.0 {
            log::warn!(
                "tau_d = {} is ignored by the hysteresis supervisor",
                self.tau_d
            );
        }
        Ok(self)
    }

    pub fn params(&self) -> PendulumParams<f64> {
        PendulumParams {
            omega: self.omega,
            u_max: self.u_max,
            c: self.c,
            k: self.k,
            delta_cap: self.delta_cap,
            tau_d: self.tau_d,
        }
    }

    pub fn disturbance_spec(&self) -> DisturbanceSpec<f64> {
        DisturbanceSpec {
            kind: self.disturbance,
            amplitude: self.disturbance_amplitude,
            frequency: self.disturbance_frequency,
            seed: self.seed,
        }
    }

    pub fn closed_loop(&self) -> ClosedLoopSpec<f64> {
        ClosedLoopSpec {
            laws: ControlLaws {
                params: self.params(),
                global: self.controller,
                saturate_local: self.saturate_local,
            },
            supervisor: self.supervisor,
            disturbance: self.disturbance_spec(),
        }
    }

    pub fn grid(&self) -> TimeGrid<f64> {
        TimeGrid::spanning(0.0, self.t_end, self.h).expect("validated grid")
    }

    /// Absolute energy band `tol_h · H*`.
    pub fn energy_band(&self) -> f64 {
        self.tol_h * self.params().target_energy()
    }

    /// `|ψ|` radius for the local decay budget. By default the largest radius that forces
    /// the angle into its band: `1 + cos x1 ≤ 1 − cos(tol_x)` is equivalent to
    /// `|x1 − nπ| ≤ tol_x` for the nearest target.
    pub fn band_lambda(&self) -> f64 {
        self.lambda.unwrap_or(1.0 - self.tol_x.cos())
    }

    /// Initial-condition axes: `min + i·step` for `i = 0..=⌊(max − min)/step⌋`.
    pub fn ic_axes(&self) -> (Vec<f64>, Vec<f64>) {
        (
            axis(self.x1_min, self.x1_max, self.x1_step),
            axis(self.x2_min, self.x2_max, self.x2_step),
        )
    }

    /// Initial conditions in row-major order (`x1` outer, `x2` inner).
    pub fn initial_conditions(&self) -> Vec<[f64; 2]> {
        let (a1, a2) = self.ic_axes();
        a1.iter()
            .flat_map(|&x1| a2.iter().map(move |&x2| [x1, x2]))
            .collect()
    }
}

fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
    // relative slack so 20/0.2 counts as 100 steps despite rounding
    let n = ((max - min) / step * (1.0 + 1e-12) + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}
