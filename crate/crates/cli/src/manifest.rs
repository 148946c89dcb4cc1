use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sugar_core::eval::MetricMap;
use sugar_core::SugarConfig;

use crate::{io_failure, read_text, Failure};

/// Everything needed to rerun a command. `args` replays it exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<SugarConfig>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub wall_time_secs: f64,
    pub metrics: MetricMap,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(args: Vec<String>) -> Self {
        RunManifest {
            command: String::new(),
            args,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            wall_time_secs: 0.0,
            metrics: MetricMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        serde_json::from_str(&read_text(path)?).map_err(|e| io_failure(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
    }
}
