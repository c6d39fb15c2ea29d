//! Flat `key = value` run configuration.
//!
//! Values are layered: built-in defaults, then the config file, then command
//! line flags. Keys may be written with `-` or `_` and with or without a
//! leading `--`, so a flag name can be pasted into a file unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use kimura::integrator::SolverConfig;
use kimura::{GridSpec, InitialCondition};

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "delta",
    "epsilon",
    "cells",
    "tau",
    "t_final",
    "output_every",
    "damped_start",
    "ic",
    "left",
    "right",
    "split",
    "x0",
    "sigma",
    "bulk",
    "a0",
    "b0",
    "snapshots",
];

const DEFAULTS: &[(&str, &str)] = &[
    ("delta", "1e-3"),
    ("epsilon", "1e-3"),
    ("cells", "10000"),
    ("tau", "1e-4"),
    ("t_final", "10"),
    ("output_every", "100"),
    ("damped_start", "0"),
    ("ic", "uniform"),
    ("split", "0.5"),
    ("x0", "0.4"),
    ("sigma", "0.1"),
    ("a0", "0.49"),
    ("b0", "0.49"),
];

pub fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

/// Layered string settings, checked against a key set.
#[derive(Debug, Clone)]
pub struct Settings {
    known: &'static [&'static str],
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(known: &'static [&'static str]) -> Self {
        Self { known, values: BTreeMap::new() }
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = normalize_key(key);
        if !self.known.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn parse_text(&mut self, text: &str) -> CliResult<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            self.set(key, value).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("line {}: {msg}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.parse_text(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        self.parse(key)?.ok_or_else(|| CliError::Config(format!("missing `{key}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub cells: usize,
    pub solver: SolverConfig,
    pub ic: InitialCondition,
    pub snapshots: Vec<f64>,
}

impl RunConfig {
    /// Defaults, then `file`, then `overrides`, validated as a whole.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> CliResult<Self> {
        let mut settings = Settings::new(KEYS);
        for (k, v) in DEFAULTS {
            settings.set(k, v)?;
        }
        if let Some(path) = file {
            settings.load_file(path)?;
        }
        for (k, v) in overrides {
            settings.set(k, v)?;
        }
        Self::from_settings(&settings)
    }

    pub fn from_settings(s: &Settings) -> CliResult<Self> {
        let delta: f64 = s.require("delta")?;
        let epsilon: f64 = s.require("epsilon")?;
        let cells: usize = s.require("cells")?;
        GridSpec::new(delta, cells)?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(CliError::Config(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let solver = SolverConfig::new(s.require("tau")?, s.require("t_final")?, s.require("output_every")?)?
            .with_damped_start(s.require("damped_start")?);

        let scale = 1.0 / (1.0 - 2.0 * delta);
        let ic = match s.require::<String>("ic")?.as_str() {
            "uniform" => InitialCondition::Uniform,
            "step" => InitialCondition::Step {
                left_value: s.parse("left")?.unwrap_or(0.5 * scale),
                right_value: s.parse("right")?.unwrap_or(1.5 * scale),
                split_point: s.require("split")?,
            },
            "gaussian" => InitialCondition::Gaussian { x0: s.require("x0")?, sigma: s.require("sigma")? },
            "boundary-mass" | "boundary_mass" => InitialCondition::WithBoundaryMass {
                bulk_value: s.parse("bulk")?.unwrap_or(0.02 * scale),
                a0: s.require("a0")?,
                b0: s.require("b0")?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown ic `{other}` (expected uniform, step, gaussian or boundary-mass)"
                )))
            }
        };
        // Catches negative values, sigma <= 0 and a0 + b0 > 1 before any run.
        kimura::grid::init_state(&GridSpec::new(delta, cells.min(64))?, &ic)?;

        let snapshots = match s.get("snapshots") {
            None | Some("") => vec![solver.t_final],
            Some(list) => list
                .split(',')
                .map(|t| {
                    let t: f64 = t
                        .trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("`snapshots`: cannot parse `{t}`")))?;
                    if !(t >= 0.0 && t <= solver.t_final) {
                        return Err(CliError::Config(format!("snapshot time {t} outside [0, t_final]")));
                    }
                    Ok(t)
                })
                .collect::<CliResult<Vec<_>>>()?,
        };
        Ok(Self { delta, epsilon, cells, solver, ic, snapshots })
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.delta, self.cells).expect("validated on load")
    }
}
