//! Experiment configuration: a flat JSON object whose keys mirror the
//! `strong-rate` knobs, with strict (typo-rejecting) parsing.
//!
//! Precedence is flags > file > built-in defaults. Every key is optional
//! in the file; whatever a subcommand needs and cannot find in either
//! place is reported as a usage error. Unknown keys are rejected by name,
//! so `alhpa` can never silently become a default `alpha`.
//!
//! The `config` block echoed into every convergence report is itself a
//! valid configuration file: feeding it back through `--config` re-runs
//! the identical experiment (bit-identical report, any `--threads`).

use anyhow::Context;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// File-backed experiment settings. All fields optional; subcommand flags
/// override any that are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Subcommand to run when none is given on the command line.
    pub command: Option<String>,
    /// Fractional order alpha in (1, 4).
    pub alpha: Option<f64>,
    /// Diffusion map name (cos, one, tanh, zero).
    pub g: Option<String>,
    /// Weight exponent delta for the theoretical rate.
    pub delta: Option<f64>,
    /// Initial-condition smoothness eta (datum a_j = j^{-(2 eta + 1)}).
    pub eta: Option<f64>,
    /// Moment order p of the strong error.
    pub p: Option<f64>,
    /// Grid levels n, strictly increasing.
    pub levels: Option<Vec<usize>>,
    /// Reference spectral truncation N.
    pub ref_n: Option<usize>,
    /// Time horizon T.
    pub t_final: Option<f64>,
    /// Number of time steps K.
    pub steps: Option<usize>,
    /// Monte-Carlo sample count.
    pub samples: Option<usize>,
    /// Master seed for the noise bundles.
    pub seed: Option<u64>,
    /// Reuse the initial diffusion matrix for every step.
    pub frozen_diffusion: Option<bool>,
    /// Which theorem's rate to report (1 or 2).
    pub theorem: Option<u8>,
    /// Write the primary artifact here instead of stdout.
    pub output: Option<PathBuf>,
    /// Relative tolerance of the Balakrishnan quadrature.
    pub rel_tol: Option<f64>,
}

impl ExperimentConfig {
    /// Parses a JSON config file, rejecting unknown keys by name.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        Ok(config)
    }

    /// JSON rendering; `load` of the result reproduces `self` exactly.
    #[cfg(test)]
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serializes");
        out.push('\n');
        out
    }
}
