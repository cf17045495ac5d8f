use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snsqkd::estimator::OptimizerGrid;
use snsqkd::oracle::SuiteConfig;
use snsqkd::{ChannelParams, ModelOptions, PhaseMode, ProtocolParams};

use crate::Failure;

/// One experiment, read from a single JSON document.
///
/// Precedence: command-line flags override fields given here, which override
/// built-in defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required by `simulate`; `curve` and `optimize` only read `f`,
    /// `n_windows` and `phase_mode` from it.
    #[serde(default)]
    pub protocol: Option<ProtocolParams>,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub options: ModelOptions,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub grid: OptimizerGrid,
    #[serde(default)]
    pub verify: SuiteConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory for reports; `--out` overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub distances_km: Vec<f64>,
    pub e_a: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        // serde_json reports "at line L column C".
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
    }

    pub fn phase_mode(&self) -> PhaseMode {
        self.protocol.as_ref().map(|p| p.phase_mode).unwrap_or_default()
    }

    pub fn f(&self) -> f64 {
        self.protocol.as_ref().map_or(1.1, |p| p.f)
    }

    pub fn n_windows(&self) -> u64 {
        self.protocol.as_ref().map_or(1, |p| p.n_windows)
    }

    /// Compact JSON echo written at the top of every CSV. The output path is
    /// left out so reruns into different directories stay byte-identical.
    pub fn echo(&self) -> String {
        let echo = ExperimentConfig {
            output: None,
            ..self.clone()
        };
        serde_json::to_string(&echo).expect("config serializes")
    }
}
