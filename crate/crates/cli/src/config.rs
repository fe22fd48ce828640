//! Run configuration: one TOML file, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walklab_core::lattice_walk::{KernelPolicy, LawPreset};
use walklab_core::observables::{ARule, ObservableSpec, TableValue};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Exact,
    OceanDemo,
    ChainSweep,
    LltReport,
    BetaFit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Exact => "exact",
            Command::OceanDemo => "ocean-demo",
            Command::ChainSweep => "chain-sweep",
            Command::LltReport => "llt-report",
            Command::BetaFit => "beta-fit",
        }
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present, must name the command being run.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub law: Option<LawPreset>,
    #[serde(default)]
    pub observable: Option<ObservableSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub exact: Option<ExactSection>,
    #[serde(default)]
    pub ocean: Option<OceanSection>,
    #[serde(default)]
    pub chain_sweep: Option<ChainSweepSection>,
    #[serde(default)]
    pub llt: Option<LltSection>,
    #[serde(default)]
    pub beta_fit: Option<BetaFitSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub kernel_trim: f64,
    pub kernel_max_truncated: f64,
    pub kernel_max_sites: usize,
    pub ks_max: f64,
    pub settle: f64,
    pub mc_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = KernelPolicy::default();
        Self {
            kernel_trim: p.trim_threshold,
            kernel_max_truncated: p.max_truncated,
            kernel_max_sites: p.max_sites,
            ks_max: 0.05,
            settle: 0.05,
            mc_z: 4.0,
        }
    }
}

impl Tolerances {
    pub fn policy(&self) -> KernelPolicy {
        KernelPolicy {
            trim_threshold: self.kernel_trim,
            max_truncated: self.kernel_max_truncated,
            max_sites: self.kernel_max_sites,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CheckpointSpec {
    List(Vec<u64>),
    Geometric { first: u64, last: u64, theta: f64 },
    Dyadic { k0: u32, k1: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatName {
    #[default]
    Rms,
    MeanAbs,
    Quantile,
}

fn default_q() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub trials: u64,
    pub checkpoints: CheckpointSpec,
    #[serde(default)]
    pub statistic: StatName,
    #[serde(default = "default_q")]
    pub quantile: f64,
    /// Compare `T_N / N` at the last checkpoint with the arcsine law.
    #[serde(default)]
    pub arcsine: bool,
    /// Exceedance table `P(|T_N / N - mean| > delta)`.
    #[serde(default)]
    pub lln_delta: Option<f64>,
    #[serde(default)]
    pub lln_mean: Option<f64>,
    /// Acceptance band for the fitted exponent.
    #[serde(default)]
    pub band: Option<[f64; 2]>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSection {
    pub horizon: u64,
    #[serde(default)]
    pub x0: Option<Vec<i64>>,
    #[serde(default)]
    pub pairs: bool,
    /// Cross-check against path enumeration when it is small enough.
    #[serde(default = "default_true")]
    pub oracle: bool,
    #[serde(default)]
    pub budget: Option<u64>,
    /// Horizons for a log-log fit of the variance.
    #[serde(default)]
    pub variance_scan: Option<Vec<u64>>,
}

fn default_alpha() -> f64 {
    2.0
}
fn default_b1() -> u64 {
    16
}
fn default_trace_n() -> u64 {
    60
}
fn default_event_n() -> Vec<u64> {
    vec![1, 2, 3, 4]
}
fn default_event_trials() -> u64 {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OceanSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_b1")]
    pub b1: u64,
    #[serde(default)]
    pub a_rule: ARule,
    /// Dimension of the block-cylinder extension; 1 for the plain observable.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub schedule_n: Option<u64>,
    #[serde(default = "default_trace_n")]
    pub trace_n: u64,
    #[serde(default = "default_event_n")]
    pub event_n: Vec<u64>,
    #[serde(default = "default_event_trials")]
    pub event_trials: u64,
}

impl Default for OceanSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            b1: default_b1(),
            a_rule: ARule::default(),
            d: None,
            schedule_n: None,
            trace_n: default_trace_n(),
            event_n: default_event_n(),
            event_trials: default_event_trials(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRow {
    pub row1: [f64; 3],
    pub row2: [f64; 3],
    pub pi: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSweepSection {
    pub delta: f64,
    pub points: usize,
    pub pi: [f64; 3],
    /// Re-verify every k-th cell by sampling; 0 disables.
    pub mc_every: usize,
    pub mc_trials: u64,
    /// Extra chains evaluated as given.
    pub chains: Vec<ChainRow>,
}

impl Default for ChainSweepSection {
    fn default() -> Self {
        Self {
            delta: 0.1,
            points: 10,
            pi: [1.0, 0.0, 0.0],
            mc_every: 50,
            mc_trials: 100_000,
            chains: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LltSection {
    pub n: Vec<u64>,
    pub derivatives: bool,
}

impl Default for LltSection {
    fn default() -> Self {
        Self {
            n: vec![100, 400],
            derivatives: false,
        }
    }
}

fn default_samples() -> usize {
    16
}
fn default_beta_budget() -> u64 {
    2_000_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaFitSection {
    pub mean: f64,
    #[serde(default)]
    pub gamma: f64,
    pub scales: Vec<i64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub corners: Option<Vec<(i64, i64)>>,
    #[serde(default = "default_beta_budget")]
    pub budget: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Parse a file and load any table-observable CSV relative to it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(spec) = cfg.observable.as_mut() {
            resolve_tables(spec, path.parent().unwrap_or(Path::new(".")))?;
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, ignoring thread count and output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.out = None;
        let v = serde_json::to_value(&c).expect("config serializes");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn law(&self) -> Result<&LawPreset, CliError> {
        self.law.as_ref().ok_or_else(|| CliError::Config("missing [law] section".into()))
    }

    pub fn observable(&self) -> Result<&ObservableSpec, CliError> {
        self.observable
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [observable] section".into()))
    }
}

/// Replace `csv = "file"` in table observables by the rows it contains.
pub fn resolve_tables(spec: &mut ObservableSpec, base: &Path) -> Result<(), CliError> {
    match spec {
        ObservableSpec::Table { d, rows, csv, .. } => {
            if let Some(file) = csv.take() {
                let path = base.join(&file);
                let mut reader = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .comment(Some(b'#'))
                    .trim(csv::Trim::All)
                    .from_path(&path)
                    .map_err(|e| CliError::Config(format!("table {}: {e}", path.display())))?;
                for rec in reader.records() {
                    let rec = rec.map_err(|e| CliError::Config(format!("table {}: {e}", path.display())))?;
                    if rec.len() != *d + 1 {
                        return Err(CliError::Config(format!(
                            "table {}: expected {} columns, got {}",
                            path.display(),
                            *d + 1,
                            rec.len()
                        )));
                    }
                    let parse_err = |f: &str| CliError::Config(format!("table {}: bad number '{f}'", path.display()));
                    let site = rec
                        .iter()
                        .take(*d)
                        .map(|f| f.parse::<i64>().map_err(|_| parse_err(f)))
                        .collect::<Result<Vec<_>, _>>()?;
                    let value = rec[*d].parse::<f64>().map_err(|_| parse_err(&rec[*d]))?;
                    rows.push(TableValue { site, value });
                }
            }
            Ok(())
        }
        ObservableSpec::Affine { inner, .. } => resolve_tables(inner, base),
        _ => Ok(()),
    }
}
