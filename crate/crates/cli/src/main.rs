use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmom_cli::commands::{cmd_compose, cmd_evaluate, cmd_pipeline, cmd_rank, cmd_select, cmd_vocab, EvalMode, EvaluateArgs};
use cmom_cli::{load_config, CliError, CliResult, RunOptions};
use cmom_core::compose::PromptVariant;

#[derive(Parser)]
#[command(name = "cmom", version, about = "Complex multi-ontology mapping generation and evaluation")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Answer prompts with the offline mock model.
    #[arg(long, global = true)]
    mock_model: bool,
    /// Worker threads per stage.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Evaluate a random sample of this many reference entries.
    #[arg(long, global = true)]
    sample: Option<usize>,
    /// Seed for the sample.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Allow the beam approximation for large mapping graphs.
    #[arg(long, global = true)]
    approx_ged: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract and dump the source and target vocabularies.
    Vocab,
    /// Select candidate class sets for each reference source.
    Select,
    /// Rank sources by embedding confidence and keep the top k.
    Rank {
        #[arg(long)]
        k: usize,
    },
    /// Generate one mapping per source.
    Compose {
        #[arg(long, default_value = "full", value_parser = parse_variant)]
        variant: PromptVariant,
    },
    /// Score mappings (or candidate sets) against the references.
    Evaluate {
        #[arg(long, default_value = "full", value_parser = parse_variant)]
        variant: PromptVariant,
        #[arg(long, value_enum, default_value = "graph")]
        mode: EvalMode,
        /// Directory of mapping files to score instead of the composed ones.
        #[arg(long)]
        mappings: Option<PathBuf>,
        /// Directory of reference files instead of the configured ones.
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// vocab, select, compose and evaluate in one go.
    Pipeline {
        /// Repeatable; "all" runs the four prompt variants.
        #[arg(long, default_value = "full")]
        variant: Vec<String>,
    },
}

fn parse_variant(s: &str) -> Result<PromptVariant, String> {
    s.parse::<PromptVariant>().map_err(|e| e.to_string())
}

fn variants(raw: &[String]) -> Result<Vec<PromptVariant>, String> {
    let mut out = Vec::new();
    for v in raw {
        if v == "all" {
            out.extend(PromptVariant::ALL);
        } else {
            out.push(parse_variant(v)?);
        }
    }
    out.dedup();
    Ok(out)
}

fn run(cli: Cli) -> CliResult<()> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config(anyhow::anyhow!("--config PATH is required")))?;
    let opts = RunOptions {
        mock_model: cli.mock_model,
        workers: cli.workers,
        sample: cli.sample,
        seed: cli.seed,
        approx_ged: cli.approx_ged,
    };
    let config = load_config(&path, &opts)?;
    match cli.command {
        Command::Vocab => {
            cmd_vocab(&config)?;
        }
        Command::Select => {
            cmd_select(&config)?;
        }
        Command::Rank { k } => {
            for r in cmd_rank(&config, k)? {
                let tie = if r.tie { "\ttie" } else { "" };
                println!("{}\t{}\t{:.6}{tie}", r.rank, r.source_iri, r.score);
            }
        }
        Command::Compose { variant } => {
            cmd_compose(&config, variant, &opts)?;
        }
        Command::Evaluate {
            variant,
            mode,
            mappings,
            references,
        } => {
            let args = EvaluateArgs {
                variant,
                mode,
                mappings,
                references,
            };
            let (_, summary) = cmd_evaluate(&config, &args, &opts)?;
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
        }
        Command::Pipeline { variant } => {
            let variants = variants(&variant).map_err(|e| CliError::Config(anyhow::anyhow!(e)))?;
            let run = cmd_pipeline(&config, &variants, &opts)?;
            for s in &run.summaries {
                println!("{}", serde_json::to_string(s).expect("summary serializes"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
