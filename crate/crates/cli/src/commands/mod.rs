pub mod compose;
pub mod evaluate;
pub mod pipeline;
pub mod rank;
pub mod select;
pub mod vocab;

pub use compose::{cmd_compose, GenerationLogEntry};
pub use evaluate::{cmd_evaluate, read_mappings, EvalMode, EvaluateArgs};
pub use pipeline::{cmd_pipeline, PipelineRun};
pub use rank::{cmd_rank, rank_sources, RankedSource};
pub use select::{cmd_select, SourceCandidates};
pub use vocab::cmd_vocab;
