//! Run configuration: a JSON file mirroring these field names, with
//! command-line flags taking precedence over file values.

use std::path::PathBuf;

use panelcast::train::TrainConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LAG: usize = panelcast::trials::DEFAULT_LAG;
pub const DEFAULT_MEAN_WINDOW: usize = panelcast::trials::DEFAULT_MEAN_WINDOW;
pub const DEFAULT_STD_WINDOW: usize = panelcast::trials::DEFAULT_STD_WINDOW;
pub const DEFAULT_N_TRIALS: usize = 50;

/// Everything a run needs. Any subset may appear in the JSON file; missing
/// fields take the defaults below. Unknown fields are rejected so typos
/// fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Panel CSV to read (for `train`/`trials`) or write (for `synth`).
    pub data_path: PathBuf,
    /// Directory that receives all output artifacts.
    pub out_dir: PathBuf,
    /// Training hyperparameters.
    pub train: TrainConfig,
    /// Number of lagged years per input sequence.
    pub lag: usize,
    /// Rolling-mean window over the violent-crime series.
    pub rolling_mean_window: usize,
    /// Rolling-standard-deviation window over the violent-crime series.
    pub rolling_std_window: usize,
    /// Number of repeated trials for the `trials` command.
    pub n_trials: usize,
    /// Trial i runs with seed base_seed + i.
    pub base_seed: u64,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::from("panel.csv"),
            out_dir: PathBuf::from("out"),
            train: TrainConfig::default(),
            lag: DEFAULT_LAG,
            rolling_mean_window: DEFAULT_MEAN_WINDOW,
            rolling_std_window: DEFAULT_STD_WINDOW,
            n_trials: DEFAULT_N_TRIALS,
            base_seed: 0,
        }
    }
}

impl CliConfig {
    /// Field-naming check mirroring the training config's own validation.
    /// Returns the offending field's name and constraint.
    pub fn validate(&self) -> Result<(), String> {
        if self.lag < 1 {
            return Err("lag must be at least 1".into());
        }
        if self.rolling_mean_window < 1 {
            return Err("rolling_mean_window must be at least 1".into());
        }
        if self.rolling_std_window < 2 {
            return Err("rolling_std_window must be at least 2".into());
        }
        if self.n_trials < 1 {
            return Err("n_trials must be at least 1".into());
        }
        self.train.validate().map_err(|e| e.to_string())
    }
}
