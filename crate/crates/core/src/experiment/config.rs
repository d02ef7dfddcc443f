//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "command": "grover",
//!   "scheme": { "n": 4, "m": 1, "tau": 1.0, "omega": 3.141592653589793, "gamma": 0.0 },
//!   "seed": 7
//! }
//! ```
//!
//! Key paths: `command`, `scheme.{n,m,tau,omega,gamma,ancilla_dim,v_sequence}`,
//! `probe`, `seed`, `output_dir`, `format`, `restarts`, `n_values`,
//! `success_threshold`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Intertwiner, SchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Grover,
    Bounds,
    Qfi,
    Conjecture,
    Scan,
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Grover => "grover",
            Command::Bounds => "bounds",
            Command::Qfi => "qfi",
            Command::Conjecture => "conjecture",
            Command::Scan => "scan",
            Command::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    GroverDiffusion,
    SwapParallel,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    /// Uniform superposition over the full register.
    #[default]
    Uniform,
    /// Haar-random pure state drawn from the run seed.
    Haar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub omega: f64,
    pub gamma: f64,
    #[serde(default)]
    pub ancilla_dim: usize,
    #[serde(default)]
    pub v_sequence: Layout,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("metrosearch-out")
}

fn default_restarts() -> usize {
    50
}

fn default_threshold() -> f64 {
    crate::protocol::DEFAULT_SUCCESS_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub probe: Probe,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Database sizes for the `bounds` crossover table and the `scan` grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Builds the simulator configuration, reporting the offending key path.
    pub fn scheme_config(&self) -> Result<SchemeConfig<f64>> {
        let s = &self.scheme;
        let v = match s.v_sequence {
            Layout::GroverDiffusion => Intertwiner::GroverDiffusion,
            Layout::SwapParallel => Intertwiner::SwapParallel,
            Layout::Identity => Intertwiner::Identity,
        };
        SchemeConfig::new(s.n, s.m, s.tau, s.omega, s.gamma, s.ancilla_dim, v).map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::Config(format!("scheme.{name}: {reason}")),
            Error::SizeLimit { dim, cap } => {
                Error::Config(format!("scheme: register dimension {dim} exceeds the cap {cap}"))
            }
            other => Error::Config(format!("scheme: {other}")),
        })
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self, command: Command) -> Result<SchemeConfig<f64>> {
        let cfg = self.scheme_config()?;
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return Err(Error::Config("success_threshold: must lie in (0, 1]".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts: must be at least 1".into()));
        }
        if let Some(ns) = &self.n_values {
            if ns.is_empty() {
                return Err(Error::Config("n_values: must not be empty".into()));
            }
            if ns.contains(&0) {
                return Err(Error::Config("n_values: database sizes must be positive".into()));
            }
        }
        match command {
            Command::Bounds if !(self.scheme.omega > 0.0) => {
                return Err(Error::Config("scheme.omega: query bounds need omega > 0".into()));
            }
            Command::Scan => {
                if self.scheme.v_sequence != Layout::GroverDiffusion {
                    return Err(Error::Config("scheme.v_sequence: scan runs grover_diffusion".into()));
                }
                for &n in self.n_values.as_deref().unwrap_or(&[]) {
                    SchemeConfig { n, ..cfg.clone() }
                        .validate()
                        .map_err(|e| Error::Config(format!("n_values: N = {n}: {e}")))?;
                }
            }
            Command::Conjecture => {
                let restricted = self.scheme.v_sequence == Layout::SwapParallel || self.scheme.m <= 1;
                if !restricted {
                    return Err(Error::Config(
                        "scheme.v_sequence: conjecture needs swap_parallel or m = 1".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(cfg)
    }
}
