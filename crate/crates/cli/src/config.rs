//! Run configuration shared by every subcommand.
//!
//! A config file is a flat TOML table with the same keys as the long flags
//! (underscores instead of dashes). Flags win over file values, and the
//! merged result is what gets written back as the effective config.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub experiment: Option<String>,
    pub instance: Option<PathBuf>,
    pub bundled: Option<bool>,
    pub add_clause: Option<Vec<String>>,
    pub engine: Option<String>,
    pub kind: Option<String>,
    pub target: Option<String>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub strength: Option<f64>,
    pub steps: Option<usize>,
    pub total_time: Option<f64>,
    pub n_measurements: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub strengths: Option<Vec<f64>>,
    pub scan_time: Option<f64>,
    pub theta: Option<f64>,
    pub theta_stop: Option<f64>,
    pub theta_points: Option<usize>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub planted: Option<bool>,
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Values set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        overlay!(self, flags;
            command, experiment, instance, bundled, add_clause, engine, kind, target, alpha, gamma,
            strength, steps, total_time, n_measurements, t_grid, n_grid, strengths, scan_time, theta,
            theta_stop, theta_points, seed, n, planted, out);
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
