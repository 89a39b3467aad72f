use std::fs::File;
use std::io::BufWriter;

use anyhow::Context;
use cmom_core::vocabulary::{Vocabulary, VocabularyKind};
use log::info;

use crate::cache::{Fingerprint, StageCache};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::{read_ontology, read_targets, write_json, ClassCounts};
use crate::layout::{Layout, StageOutcome};

pub const STAGE: &str = "vocab";

pub(crate) fn fingerprint(config: &PipelineConfig) -> CliResult<String> {
    let mut fp = Fingerprint::new(STAGE)
        .json("parse", &config.parse)
        .and_then(|fp| fp.file(&config.source_ontology))
        .map_err(CliError::Parse)?;
    for t in &config.target_ontologies {
        fp = fp.file(t).map_err(CliError::Parse)?;
    }
    Ok(fp.finish())
}

/// Writes the source and unified target vocabulary dumps plus per-ontology
/// class counts.
pub fn cmd_vocab(config: &PipelineConfig) -> CliResult<StageOutcome> {
    let layout = Layout::new(&config.output_dir);
    let cache = StageCache::new(layout.root());
    let digest = fingerprint(config)?;
    let outputs = [layout.source_vocab(), layout.target_vocab(), layout.class_counts()];
    if cache.is_fresh(STAGE, &digest, &outputs) {
        info!("vocab: up to date");
        return Ok(StageOutcome::cached(STAGE));
    }
    cache.invalidate(STAGE);

    let options = config.parse.options();
    let source_ontology = read_ontology(&config.source_ontology, &options)?;
    let targets = read_targets(config)?;
    let build = |ontologies: &[&cmom_core::Ontology], kind| {
        Vocabulary::build(ontologies, kind)
            .context("building vocabulary")
            .map_err(CliError::Parse)
    };
    let source = build(&[&source_ontology], VocabularyKind::Source)?;
    let target_refs: Vec<_> = targets.iter().collect();
    let target = build(&target_refs, VocabularyKind::Target)?;
    for (tag, n) in target.class_counts() {
        info!("target {tag}: {n} classes");
    }
    info!(
        "vocab: {} source names, {} target names, N = {}",
        source.len(),
        target.len(),
        target.total_class_count()
    );

    let write = |vocab: &Vocabulary, path: &std::path::Path| -> anyhow::Result<()> {
        std::fs::create_dir_all(layout.vocab_dir())?;
        let out = BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
        vocab.dump(out)?;
        Ok(())
    };
    write(&source, &layout.source_vocab()).map_err(CliError::Config)?;
    write(&target, &layout.target_vocab()).map_err(CliError::Config)?;
    let counts = ClassCounts {
        source: source.class_counts().to_vec(),
        target: target.class_counts().to_vec(),
    };
    write_json(&layout.class_counts(), &counts).map_err(CliError::Config)?;
    cache.store(STAGE, &digest).map_err(CliError::Config)?;
    Ok(StageOutcome::ran(STAGE))
}
