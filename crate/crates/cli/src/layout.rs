use std::path::{Path, PathBuf};

use cmom_core::compose::PromptVariant;

/// Stable names of everything written under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn vocab_dir(&self) -> PathBuf {
        self.root.join("vocab")
    }

    pub fn source_vocab(&self) -> PathBuf {
        self.vocab_dir().join("source.jsonl")
    }

    pub fn target_vocab(&self) -> PathBuf {
        self.vocab_dir().join("target.jsonl")
    }

    pub fn class_counts(&self) -> PathBuf {
        self.vocab_dir().join("counts.json")
    }

    pub fn candidates_dir(&self) -> PathBuf {
        self.root.join("candidates")
    }

    pub fn candidates(&self) -> PathBuf {
        self.candidates_dir().join("candidates.jsonl")
    }

    pub fn tasks(&self) -> PathBuf {
        self.candidates_dir().join("tasks.json")
    }

    pub fn ranked(&self, k: usize) -> PathBuf {
        self.candidates_dir().join(format!("ranked-top{k}.jsonl"))
    }

    pub fn examples_index(&self) -> PathBuf {
        self.root.join("examples-index.jsonl")
    }

    pub fn mappings(&self, variant: PromptVariant) -> PathBuf {
        self.root.join("mappings").join(variant.as_str())
    }

    pub fn generation_log(&self, variant: PromptVariant) -> PathBuf {
        self.mappings(variant).join("generation.jsonl")
    }

    pub fn prompt_log(&self, variant: PromptVariant) -> PathBuf {
        self.mappings(variant).join("prompts.jsonl")
    }

    pub fn audit_log(&self, variant: PromptVariant) -> PathBuf {
        self.mappings(variant).join("audit.jsonl")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn report_tsv(&self, name: &str) -> PathBuf {
        self.reports_dir().join(format!("{name}.tsv"))
    }

    pub fn report_json(&self, name: &str) -> PathBuf {
        self.reports_dir().join(format!("{name}.report.json"))
    }

    pub fn summary(&self, name: &str) -> PathBuf {
        self.reports_dir().join(format!("{name}.summary.json"))
    }

    pub fn summaries(&self) -> PathBuf {
        self.reports_dir().join("summary.jsonl")
    }
}

/// Command-line overrides shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mock_model: bool,
    pub workers: Option<usize>,
    pub sample: Option<usize>,
    pub seed: Option<u64>,
    pub approx_ged: bool,
}

/// What a stage did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: String,
    /// Inputs unchanged since the last run; nothing recomputed.
    pub cached: bool,
}

impl StageOutcome {
    pub fn ran(stage: impl Into<String>) -> Self {
        StageOutcome {
            stage: stage.into(),
            cached: false,
        }
    }

    pub fn cached(stage: impl Into<String>) -> Self {
        StageOutcome {
            stage: stage.into(),
            cached: true,
        }
    }
}
