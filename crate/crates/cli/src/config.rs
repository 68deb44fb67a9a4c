//! Run configuration. Frequencies are GHz (nu = omega/2pi), times ns.

use std::path::{Path, PathBuf};

use rqrsim::dynamics::{LindbladSpec, PulseSchedule};
use rqrsim::kerr::{Encoding, NumericLevels};
use rqrsim::rqr::RqrParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: RqrParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub cz: CzConfig,
    #[serde(default)]
    pub kerr: KerrConfig,
    #[serde(default)]
    pub encoded: EncodedConfig,
    #[serde(default)]
    pub oracles: OracleConfig,
}

fn default_seed() -> u64 {
    7
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            model: RqrParams::reference(8.0),
            output: OutputConfig::default(),
            scan: ScanConfig::default(),
            cz: CzConfig::default(),
            kerr: KerrConfig::default(),
            encoded: EncodedConfig::default(),
            oracles: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        rqrsim::rqr::couplings::linear_grid(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Coupler-frequency grid of the coupling scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub grid: Grid,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { grid: Grid { start: 7.0, stop: 9.0, points: 200 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub restarts: usize,
    pub max_evals: usize,
    pub perturbation: f64,
    pub threshold: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { restarts: 8, max_evals: 600, perturbation: 0.05, threshold: 0.9999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzConfig {
    pub resonator_cutoff: usize,
    /// Fixed idle coupler frequency; searched on `idle_grid` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idle_nu_q: Option<f64>,
    pub idle_grid: Grid,
    pub rtol: f64,
    /// Samples of the recorded trajectories, including both ends.
    pub trajectory_points: usize,
    pub schedule: PulseSchedule,
    pub lindblad: LindbladSpec,
    pub optimize: OptimizeConfig,
}

impl Default for CzConfig {
    fn default() -> Self {
        Self {
            resonator_cutoff: 2,
            idle_nu_q: None,
            idle_grid: Grid { start: 7.0, stop: 9.0, points: 201 },
            rtol: 1e-10,
            trajectory_points: 76,
            schedule: PulseSchedule::reference(),
            lindblad: LindbladSpec::reference(),
            optimize: OptimizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Ideal,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinomialScanConfig {
    pub enabled: bool,
    /// Coupler detunings from the mean resonator frequency.
    pub detunings: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub threshold: f64,
}

impl Default for BinomialScanConfig {
    fn default() -> Self {
        Self { enabled: true, detunings: vec![0.0, 0.05, 0.1, 0.2], t_max: 60.0, dt: 0.25, threshold: 0.999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KerrConfig {
    pub dims: Vec<usize>,
    pub n_iters: Vec<usize>,
    pub source: Source,
    pub levels: NumericLevels,
    /// Photon number and iteration count of the emitted plan.
    pub plan_n: usize,
    pub plan_iterations: usize,
    pub binomial: BinomialScanConfig,
}

impl Default for KerrConfig {
    fn default() -> Self {
        Self {
            dims: (2..=14).collect(),
            n_iters: vec![1, 2, 3, 4],
            source: Source::Ideal,
            levels: NumericLevels::reference(),
            plan_n: 9,
            plan_iterations: 4,
            binomial: BinomialScanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodedConfig {
    /// Cross-Kerr strength in GHz; the binomial gate runs for 1/(8 chi) and
    /// the cat gate for 1/(2 chi).
    pub chi: f64,
    pub encodings: Vec<Encoding>,
}

impl Default for EncodedConfig {
    fn default() -> Self {
        let s = std::f64::consts::SQRT_2;
        Self {
            chi: 0.001,
            encodings: vec![Encoding::Binomial { cutoff: 8 }, Encoding::Cat { alpha: s, beta: s, cutoff: 25 }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub nu: f64,
    pub g: f64,
    pub alpha: f64,
    pub ladder_nu_q: Vec<f64>,
    pub ladder_max_excitation: usize,
    pub chi_detunings: Vec<f64>,
    pub hint_deltas: Vec<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            nu: 7.0,
            g: 0.1,
            alpha: 0.3,
            ladder_nu_q: vec![6.5, 7.0, 7.4, 8.3],
            ladder_max_excitation: 8,
            chi_detunings: vec![0.8, 1.0, 1.5, 2.0, 3.0],
            hint_deltas: vec![0.01, 0.02, 0.03, 0.04, 0.05],
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        if self.scan.grid.points == 0 {
            return Err(CliError::Config("scan.grid.points must be positive".into()));
        }
        if self.cz.trajectory_points < 2 {
            return Err(CliError::Config("cz.trajectory_points must be at least 2".into()));
        }
        if !(self.cz.rtol > 0.0 && self.cz.rtol < 1e-3) {
            return Err(CliError::Config("cz.rtol must be in (0, 1e-3)".into()));
        }
        if self.kerr.dims.iter().any(|&d| d < 2) || self.kerr.n_iters.iter().any(|&k| !(1..=4).contains(&k)) {
            return Err(CliError::Config("kerr.dims must be >= 2 and kerr.n_iters in 1..=4".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(self.encoded.chi > 0.0) {
            return Err(CliError::Config("encoded.chi must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text of the configuration (all defaults filled in).
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
