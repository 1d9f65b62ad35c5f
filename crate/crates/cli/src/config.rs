//! Run configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_517;

/// Environment variable naming the default directory for plot files.
pub const OUT_DIR_ENV: &str = "HEMIWIDTH_OUT_DIR";

/// Tolerance keys accepted by `--tol KEY=VALUE`, with defaults.
pub const TOLERANCE_DEFAULTS: &[(&str, f64, &str)] = &[
    ("calibration.residual", 1e-8, "max |ℓᵢ − target| after Newton calibration"),
    ("calibration.condition", 1e3, "largest accepted Jacobian condition number"),
    ("geodesic.local", 1e-12, "Dormand–Prince local error per step"),
    ("geodesic.closure", 1e-6, "great-circle closure after arc 2π"),
    ("geodesic.joachimsthal", 1e-7, "drift of the Joachimsthal integral"),
    ("geodesic.constraint", 1e-8, "drift off the surface, of speed and of tangency"),
    ("geodesic.reversibility", 1e-6, "forward then backward return error"),
    ("billiards.closure", 1e-8, "closure error of a polished closed trajectory"),
    ("billiards.classification", 1e-6, "length deviation when matching principal curves"),
    ("billiards.dedup", 1e-5, "distance at which two trajectories coincide"),
    ("billiards.grazing", 1e-6, "normal velocity below which a hit is grazing"),
    ("billiards.length", 1e-5, "reported lengths vs calibration targets"),
    ("billiards.seam", 1e-6, "velocity jump at seams of the unfolded curve"),
    ("crofton.modulus", 1e-8, "root modulus distance from 1 counted as on the circle"),
    ("crofton.cluster", 1e-7, "angular distance merging roots into one point"),
    ("crofton.standard_errors", 3.0, "Monte Carlo agreement in standard errors"),
    ("crofton.quadrature", 1e-3, "quadrature agreement with closed forms, in units of π"),
    ("crofton.agreement", 5e-3, "relative agreement of quadrature and tracing"),
    ("crofton.singular", 1e-6, "surface gradient below which tracing is flagged"),
    ("sweepout.bound", 0.02, "allowed excess of the sampled sup over π·d"),
    ("sweepout.attain", 0.05, "allowed shortfall of the sampled sup below π·d"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances(BTreeMap<&'static str, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Self(TOLERANCE_DEFAULTS.iter().map(|(k, v, _)| (*k, *v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        *self
            .0
            .get(key)
            .unwrap_or_else(|| panic!("tolerance key {key} missing from defaults"))
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let Some((k, _, _)) = TOLERANCE_DEFAULTS.iter().find(|(k, _, _)| *k == key) else {
            let known: Vec<&str> = TOLERANCE_DEFAULTS.iter().map(|t| t.0).collect();
            return Err(CliError::Usage(format!(
                "unknown tolerance {key:?}; known keys: {}",
                known.join(", ")
            )));
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(CliError::Usage(format!("tolerance {key} must be positive and finite")));
        }
        self.0.insert(k, value);
        Ok(())
    }

    /// Applies `KEY=VALUE` overrides in order.
    pub fn with_overrides<S: AsRef<str>>(overrides: &[S]) -> Result<Self, CliError> {
        let mut t = Self::default();
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--tol expects KEY=VALUE, got {o:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--tol {k}: {v:?} is not a number")))?;
            t.set(k.trim(), v)?;
        }
        Ok(t)
    }

    /// Keys whose value differs from the default.
    pub fn overridden(&self) -> BTreeMap<&'static str, f64> {
        let d = Self::default();
        self.0
            .iter()
            .filter(|(k, v)| d.0.get(*k) != Some(v))
            .map(|(k, v)| (*k, *v))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub plot: bool,
    /// Include wall-clock timing in the report. Off by default so that
    /// identical runs give identical bytes.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            tolerances: Tolerances::default(),
            format: OutputFormat::Text,
            out: None,
            plot: false,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances.get(key)
    }

    /// Directory for plot files: next to `--out`, else `$HEMIWIDTH_OUT_DIR`,
    /// else the working directory.
    pub fn plot_dir(&self) -> PathBuf {
        if let Some(parent) = self.out.as_ref().and_then(|o| o.parent()) {
            if !parent.as_os_str().is_empty() {
                return parent.to_path_buf();
            }
        }
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Derived seed for an independent stream within one run.
    pub fn stream_seed(&self, stream: u64) -> u64 {
        self.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}
