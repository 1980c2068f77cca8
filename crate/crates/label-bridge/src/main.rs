use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use label_bridge::config::{Overrides, PipelineConfig, CONFIG_ENV};
use label_bridge::pipeline;
use label_bridge::Error;

/// Cross-lingual entity label mapping pipeline.
#[derive(Parser)]
#[command(name = "label-bridge", version)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Directory holding stage artifacts.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Seed for the randomized baseline, pool preprocessing and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sidecar base URL for language identification.
    #[arg(long, global = true)]
    langid_url: Option<String>,
    /// Sidecar base URL for embeddings.
    #[arg(long, global = true)]
    embed_url: Option<String>,
    /// Keep every label without language verification.
    #[arg(long, global = true)]
    skip_langid: bool,
    /// Abort on the first malformed dump line.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Stream the dump and write entity records for the three root classes.
    Extract,
    /// Rank languages by label coverage and select the working set.
    RankLangs,
    /// Filter entities, verify label languages and write label pairs.
    BuildDataset,
    /// Score every pair with the configured scorers.
    Score,
    /// Select best matches per group for each scorer and the baselines.
    Match,
    /// Preprocess the comparison pool and draw the stratified sample.
    Sample,
    /// Compare matches against ground truth and print the accuracy grid.
    Evaluate,
    /// Write score histograms and per-language means.
    Report,
}

fn run(cli: &Cli) -> Result<(), Error> {
    let flags = Overrides {
        workdir: cli.workdir.clone(),
        seed: cli.seed,
        langid_url: cli.langid_url.clone(),
        embed_url: cli.embed_url.clone(),
        skip_langid: cli.skip_langid,
        strict: cli.strict,
    };
    let cfg = PipelineConfig::load(cli.config.as_deref(), &flags)?;
    match cli.command {
        Command::Extract => {
            let s = pipeline::extract(&cfg)?;
            eprintln!(
                "extract: {} entities read, {} records written, {} malformed lines",
                s.entities_seen, s.records, s.diagnostics
            );
        }
        Command::RankLangs => {
            let langs = pipeline::rank_languages(&cfg)?;
            eprintln!("rank-langs: selected {}", langs.join(" "));
        }
        Command::BuildDataset => {
            let s = pipeline::build_dataset(&cfg)?;
            eprintln!("build-dataset: {} entities kept, {} pairs", s.kept_entities, s.pairs);
        }
        Command::Score => {
            let n = pipeline::score(&cfg)?;
            eprintln!("score: {n} scored pairs");
        }
        Command::Match => {
            let n = pipeline::run_match(&cfg)?;
            eprintln!("match: {n} methods");
        }
        Command::Sample => {
            let s = pipeline::sample(&cfg)?;
            eprintln!("sample: {} of {} pool groups", s.sample_groups, s.pool_groups);
        }
        Command::Evaluate => {
            print!("{}", pipeline::evaluate(&cfg)?);
        }
        Command::Report => {
            pipeline::report(&cfg)?;
            eprintln!("report: histograms and language means written");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
