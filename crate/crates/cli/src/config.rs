use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cmom_core::compose::ModelConfig;
use cmom_core::eval::CostModel;
use cmom_core::owl::ParseOptions;
use cmom_core::patterns::DEFAULT_EXAMPLE_LIMIT;
use cmom_core::selection::SelectionConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything one run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_task")]
    pub task: String,
    pub source_ontology: PathBuf,
    pub target_ontologies: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Directory of reference logical definitions. Absent: the
    /// equivalence axioms of the source ontology.
    #[serde(default)]
    pub references: Option<PathBuf>,
    #[serde(default)]
    pub examples: ExampleSettings,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub model: ModelConfig,
    /// `total_target_classes` is always recomputed from the targets.
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub parse: ParseSettings,
    /// Draw this many reference entries instead of using all of them.
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_task() -> String {
    "task".into()
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleSettings {
    /// Directory of example files. Absent: same entries as the references.
    pub dir: Option<PathBuf>,
    pub limit: usize,
}

impl Default for ExampleSettings {
    fn default() -> Self {
        ExampleSettings {
            dir: None,
            limit: DEFAULT_EXAMPLE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseSettings {
    pub internal_synonym_properties: Vec<String>,
    pub external_synonym_properties: Vec<String>,
}

impl ParseSettings {
    pub fn options(&self) -> ParseOptions {
        ParseOptions {
            internal_synonym_properties: self.internal_synonym_properties.clone(),
            external_synonym_properties: self.external_synonym_properties.clone(),
            ..ParseOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingSettings {
    /// Lexical strategy only.
    None,
    /// Offline feature-hashing vectors.
    Hashing {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Precomputed `{text, vector}` lines.
    File { path: PathBuf },
    /// OpenAI-compatible `/embeddings` endpoint.
    Remote {
        #[serde(default = "default_embedding_model")]
        model: String,
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

fn default_dimension() -> usize {
    256
}

fn default_embedding_model() -> String {
    "text-embedding-3-small".into()
}

fn default_in_flight() -> usize {
    4
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings::Hashing {
            dimension: default_dimension(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::Config)?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .with_context(|| format!("config {}", path.display()))
            .map_err(CliError::Config)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate().map_err(CliError::Config)?;
        Ok(config)
    }

    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let mut config: PipelineConfig = toml::from_str(text).context("config").map_err(CliError::Config)?;
        config.resolve_paths(base);
        config.validate().map_err(CliError::Config)?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.source_ontology);
        self.target_ontologies.iter_mut().for_each(join);
        join(&mut self.output_dir);
        if let Some(p) = self.references.as_mut() {
            join(p);
        }
        if let Some(p) = self.examples.dir.as_mut() {
            join(p);
        }
        if let EmbeddingSettings::File { path } = &mut self.embedding {
            join(path);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.target_ontologies.is_empty() {
            bail!("at least one target ontology is required");
        }
        if self.examples.limit == 0 {
            bail!("examples.limit must be positive");
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        if self.sample == Some(0) {
            bail!("sample size must be positive");
        }
        self.selection.validate()?;
        self.model.validate()?;
        let mut cost = self.cost.clone();
        cost.total_target_classes = cost.total_target_classes.max(1);
        cost.validate()?;
        match &self.embedding {
            EmbeddingSettings::Hashing { dimension: 0, .. } => bail!("embedding dimension must be positive"),
            EmbeddingSettings::Remote { max_in_flight: 0, .. } => bail!("embedding max_in_flight must be positive"),
            _ => {}
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}
