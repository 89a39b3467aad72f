//! Stage commands over the core library: vocabulary dumps, candidate
//! selection, ranking, mapping composition, evaluation and the end-to-end
//! pipeline. Stages talk to each other only through files in the output
//! directory and are skipped when their input digests are unchanged.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod inputs;
pub mod layout;

use std::path::Path;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use layout::{Layout, RunOptions, StageOutcome};

/// Reads the config file and applies command-line overrides.
pub fn load_config(path: &Path, opts: &RunOptions) -> CliResult<PipelineConfig> {
    let mut config = PipelineConfig::load(path)?;
    apply_overrides(&mut config, opts)?;
    Ok(config)
}

pub fn apply_overrides(config: &mut PipelineConfig, opts: &RunOptions) -> CliResult<()> {
    if let Some(n) = opts.sample {
        config.sample = Some(n);
    }
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    if let Some(w) = opts.workers {
        config.workers = Some(w);
    }
    config.validate().map_err(CliError::Config)
}
