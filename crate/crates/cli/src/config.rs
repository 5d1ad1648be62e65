//! Run configuration: JSON document plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use causalsel::discovery::DiscoveryConfig;
use causalsel::ingest::IngestSchema;
use causalsel::selection::{SelectionMethod, SweepConfig};
use causalsel::series::ExtremumMode;
use causalsel::synth::SyntheticSpec;
use causalsel::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    pub source: PathBuf,
    /// Inline ingestion schema; alternatively `schema_path` points at a
    /// separate JSON document.
    #[serde(default)]
    pub schema: Option<IngestSchema>,
    #[serde(default)]
    pub schema_path: Option<PathBuf>,
}

impl DataConfig {
    pub fn resolve_schema(&self) -> Result<IngestSchema> {
        match (&self.schema, &self.schema_path) {
            (Some(s), None) => Ok(s.clone()),
            (None, Some(p)) => IngestSchema::from_path(p),
            (Some(_), Some(_)) => Err(Error::Config(
                "give either an inline schema or a schema_path, not both".to_string(),
            )),
            (None, None) => Err(Error::Config(
                "data config needs a schema or a schema_path".to_string(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentConfig {
    pub ref_var: String,
    pub mode: ExtremumMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    /// Feature count for lagged-correlation and random selection.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// The full, serializable run configuration. A run directory always
/// contains the exact resolved config that produced it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub alignment: Option<AlignmentConfig>,
    #[serde(default)]
    pub split: Option<SplitConfig>,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub selection: Option<SelectionConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub synth: Option<SyntheticSpec>,
    /// Where to write the run; execution detail, not part of the
    /// serialized config echo (so the config hash identifies the run
    /// semantics regardless of where or how parallel it ran).
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; results are thread-count invariant, so this is
    /// also excluded from the echo.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config '{}': {e}", path.display())))?;
        Ok(config)
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a data section".to_string()))
    }

    pub fn targets(&self) -> Result<&[String]> {
        if self.targets.is_empty() {
            return Err(Error::Config("no targets configured".to_string()));
        }
        Ok(&self.targets)
    }
}
