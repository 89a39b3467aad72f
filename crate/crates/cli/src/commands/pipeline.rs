use cmom_core::compose::PromptVariant;
use cmom_core::eval::SummaryRecord;
use log::info;

use super::compose::cmd_compose;
use super::evaluate::{cmd_evaluate, write_summaries, EvaluateArgs};
use super::select::cmd_select;
use super::vocab::cmd_vocab;
use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::layout::{Layout, RunOptions, StageOutcome};

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub stages: Vec<StageOutcome>,
    pub summaries: Vec<SummaryRecord>,
}

/// vocab, select, then compose and graph evaluation for each variant. The
/// summary table lists the variants in the order given.
pub fn cmd_pipeline(config: &PipelineConfig, variants: &[PromptVariant], opts: &RunOptions) -> CliResult<PipelineRun> {
    let mut stages = vec![cmd_vocab(config)?, cmd_select(config)?];
    let mut summaries = Vec::new();
    for &variant in variants {
        stages.push(cmd_compose(config, variant, opts)?);
        let (outcome, summary) = cmd_evaluate(config, &EvaluateArgs::graph(variant), opts)?;
        stages.push(outcome);
        summaries.push(summary);
    }
    write_summaries(&Layout::new(&config.output_dir), &summaries)?;
    for s in &stages {
        info!("{}: {}", s.stage, if s.cached { "cached" } else { "ran" });
    }
    Ok(PipelineRun { stages, summaries })
}
