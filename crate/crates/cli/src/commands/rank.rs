use std::cmp::Ordering;

use anyhow::anyhow;
use cmom_core::owl::Iri;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::select::{read_candidates, SourceCandidates};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::write_jsonl;
use crate::layout::Layout;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSource {
    pub rank: usize,
    pub source_iri: Iri,
    pub score: f64,
    /// Included only because it ties the k-th entry.
    #[serde(default)]
    pub tie: bool,
}

/// Sources by their best embedding confidence, descending (ties by IRI).
/// Everything tied with the k-th entry is kept as well.
pub fn rank_sources(rows: &[SourceCandidates], k: usize) -> Vec<RankedSource> {
    let mut scored: Vec<(&Iri, f64)> = rows
        .iter()
        .filter_map(|r| {
            let best = r.embedding.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
            best.is_finite().then_some((&r.source_iri, best))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0)));
    let mut out = Vec::new();
    for (i, (iri, score)) in scored.iter().enumerate() {
        if i < k {
            out.push(RankedSource {
                rank: i + 1,
                source_iri: (*iri).clone(),
                score: *score,
                tie: false,
            });
        } else if k > 0 && (scored[k - 1].1 - score).abs() <= TIE_TOLERANCE {
            out.push(RankedSource {
                rank: k,
                source_iri: (*iri).clone(),
                score: *score,
                tie: true,
            });
        } else {
            break;
        }
    }
    out
}

pub fn cmd_rank(config: &PipelineConfig, k: usize) -> CliResult<Vec<RankedSource>> {
    if k == 0 {
        return Err(CliError::Config(anyhow!("k must be positive")));
    }
    let layout = Layout::new(&config.output_dir);
    let rows = read_candidates(&layout)?;
    let without = rows.iter().filter(|r| r.embedding.is_empty()).count();
    if without == rows.len() && !rows.is_empty() {
        return Err(CliError::Config(anyhow!(
            "the candidate dump has no embedding scores (embedding provider disabled?)"
        )));
    }
    if without > 0 {
        warn!("rank: {without} sources without an embedding score left out");
    }
    let ranked = rank_sources(&rows, k);
    let ties = ranked.iter().filter(|r| r.tie).count();
    if ties > 0 {
        info!("rank: {ties} extra sources tie with rank {k}");
    }
    write_jsonl(&layout.ranked(k), &ranked).map_err(CliError::Config)?;
    Ok(ranked)
}
