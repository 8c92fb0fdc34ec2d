use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use extsum::corpus::{read_corpus, write_corpus, Document};
use extsum::embed::{load_vectors, WordVectorStore};
use extsum::eval::{evaluate, render_json, render_table, Aggregate, EvalOptions, MatchMode};
use extsum::labeler::annotate_corpus;
use extsum::net::{load_params, save_params};
use extsum::pipeline::{run_pipeline, PipelineConfig};
use extsum::summarize::{read_results, summarize_corpus};
use extsum::train::{train, TrainConfig};

const FORMATS: &str = "\
File formats:
  corpus (JSONL)   one document per line:
                   {\"id\": \"a1\", \"sentences\": [\"First.\", \"Second.\"],
                    \"abstractive\": [\"Summary.\"], \"labels\": [1, 0]}
                   `abstractive` and `labels` are optional; labels are 0/1,
                   one per sentence, with at least one 1.
  vectors (text)   one word per line: `<word> <v1> ... <vd>`, no header.
  config (text)    `key = value` per line, `#` starts a comment. Keys:
                   epochs, learning_rate, batch_size, seed, input_dim,
                   hidden_dim, doc_dim, layers, gradient_clip, shuffle;
                   `pipeline` also accepts holdout_fraction and aggregate.
                   Unknown keys are rejected.
  results (JSONL)  {\"id\", \"selected\", \"probabilities\", \"summary\"} per line.
  checkpoint       binary, written by `train`, read by `summarize`.

Exit status: 0 success, 1 usage error, 2 data or validation error.
EXTSUM_LOG (env_logger filter syntax, e.g. `debug`) overrides --log-level.";

#[derive(Debug, Parser)]
#[command(name = "extsum", version, about = "Extractive summarization with a sentence-level GRU classifier")]
#[command(after_help = FORMATS, propagate_version = true, arg_required_else_help = true)]
struct Cli {
    /// Seed for initialization, shuffling and the held-out split [default: 13,
    /// or the config file's `seed`]
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    log_level: LogLevel,

    /// Configuration file (`key = value` lines)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(level: LogLevel) -> Self {
        match level {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Add ROUGE-1 derived extractive labels to documents with abstractive summaries
    #[command(after_help = FORMATS)]
    Label(LabelArgs),
    /// Train a classifier on a labeled corpus
    #[command(after_help = FORMATS)]
    Train(TrainArgs),
    /// Select summary sentences with a trained checkpoint
    #[command(after_help = FORMATS)]
    Summarize(SummarizeArgs),
    /// Score summaries against a labeled gold corpus
    #[command(after_help = FORMATS)]
    Evaluate(EvaluateArgs),
    /// Label, split, train, summarize the held-out part and evaluate
    #[command(after_help = FORMATS)]
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Corpus with abstractive summaries
    #[arg(long, value_name = "JSONL")]
    input: PathBuf,
    /// Labeled corpus to write; documents without a summary are left out
    #[arg(long, value_name = "JSONL")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labeled corpus
    #[arg(long, value_name = "JSONL")]
    corpus: PathBuf,
    /// Word vector file
    #[arg(long, value_name = "FILE")]
    vectors: PathBuf,
    /// Checkpoint to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Word vector file used for training
    #[arg(long, value_name = "FILE")]
    vectors: PathBuf,
    /// Corpus to summarize
    #[arg(long, value_name = "JSONL")]
    input: PathBuf,
    /// Results file to write
    #[arg(long, value_name = "JSONL")]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregateArg {
    /// Mean of per-document scores
    Macro,
    /// Scores of the pooled counts
    Micro,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatchArg {
    /// Compare sentence indices
    Index,
    /// Compare normalized sentence text
    Text,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Results written by `summarize`
    #[arg(long, value_name = "JSONL")]
    results: PathBuf,
    /// Gold corpus with labels
    #[arg(long, value_name = "JSONL")]
    gold: PathBuf,
    #[arg(long, value_enum, default_value_t = AggregateArg::Macro)]
    aggregate: AggregateArg,
    /// How selected sentences are matched to gold sentences
    #[arg(long = "match", value_enum, default_value_t = MatchArg::Index)]
    match_mode: MatchArg,
    /// Include per-document scores in the JSON report
    #[arg(long)]
    per_document: bool,
    /// Write the JSON report here as well as printing the table
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Corpus with abstractive summaries
    #[arg(long, value_name = "JSONL")]
    corpus: PathBuf,
    /// Word vector file
    #[arg(long, value_name = "FILE")]
    vectors: PathBuf,
    /// Directory for every intermediate artifact
    #[arg(long, value_name = "DIR")]
    run_dir: PathBuf,
}

fn init_logging(level: LogLevel) {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level.into()).format_timestamp(None);
    if let Ok(filters) = std::env::var("EXTSUM_LOG") {
        builder.parse_filters(&filters);
    }
    let _ = builder.try_init();
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn corpus(path: &Path) -> Result<Vec<Document>> {
    read_corpus(path).with_context(|| format!("corpus {}", path.display()))
}

fn vectors(path: &Path) -> Result<WordVectorStore> {
    let store = load_vectors(path).with_context(|| format!("vectors {}", path.display()))?;
    info!("loaded {} word vectors of dimension {}", store.len(), store.dim());
    Ok(store)
}

fn train_config(cli: &Cli) -> Result<TrainConfig> {
    let mut config = match &cli.config {
        Some(path) => TrainConfig::parse(&read_text(path)?).with_context(|| format!("config {}", path.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::parse(&read_text(path)?).with_context(|| format!("config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    Ok(config)
}

fn label(args: &LabelArgs) -> Result<()> {
    let docs = corpus(&args.input)?;
    let annotation = annotate_corpus(&docs);
    if !docs.is_empty() && annotation.labeled.is_empty() {
        bail!("no document in {} has an abstractive summary", args.input.display());
    }
    let labeled: Vec<Document> = annotation.labeled.into_iter().map(|l| l.document).collect();
    write_corpus(&labeled, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    info!("labeled {} documents, skipped {}", labeled.len(), annotation.skipped.len());
    Ok(())
}

fn train_cmd(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let config = train_config(cli)?;
    info!("effective config:\n{}", config.to_config_string());
    let docs = corpus(&args.corpus)?;
    let store = vectors(&args.vectors)?;
    let (params, report) = train(&docs, &store, &config).context("training failed")?;
    save_params(&params, config.seed, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    for (epoch, loss) in report.epoch_losses.iter().enumerate() {
        info!("epoch {}: mean loss {loss:.6}", epoch + 1);
    }
    if !report.skipped.is_empty() {
        warn!("skipped {} documents without usable labels", report.skipped.len());
    }
    info!("wrote {} after {:.1}s", args.out.display(), report.seconds);
    Ok(())
}

fn summarize_cmd(args: &SummarizeArgs) -> Result<()> {
    let (params, seed) = load_params(&args.model).with_context(|| format!("checkpoint {}", args.model.display()))?;
    info!("checkpoint trained with seed {seed}");
    let store = vectors(&args.vectors)?;
    if store.dim() != params.dims.input {
        bail!(
            "word vectors have dimension {} but the model expects {}",
            store.dim(),
            params.dims.input
        );
    }
    let docs = corpus(&args.input)?;
    let out = summarize_corpus(&params, &store, &docs, &args.output).context("summarization failed")?;
    for (id, error) in &out.failures {
        warn!("document {id}: {error}");
    }
    if out.results.is_empty() && !docs.is_empty() {
        bail!("no document could be summarized");
    }
    info!("summarized {} documents", out.results.len());
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let results = read_results(&args.results).with_context(|| format!("results {}", args.results.display()))?;
    let gold = corpus(&args.gold)?;
    let options = EvalOptions {
        aggregate: match args.aggregate {
            AggregateArg::Macro => Aggregate::Macro,
            AggregateArg::Micro => Aggregate::Micro,
        },
        match_mode: match args.match_mode {
            MatchArg::Index => MatchMode::Index,
            MatchArg::Text => MatchMode::Text,
        },
        per_document: args.per_document,
    };
    let report = evaluate(&results, &gold, options).context("evaluation failed")?;
    if let Some(path) = &args.report {
        fs::write(path, render_json(&report)).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", render_table(&report));
    Ok(())
}

fn pipeline_cmd(cli: &Cli, args: &PipelineArgs) -> Result<()> {
    let config = pipeline_config(cli)?;
    let docs = corpus(&args.corpus)?;
    let store = vectors(&args.vectors)?;
    let out = run_pipeline(&docs, &store, &config, &args.run_dir)?;
    if out.skipped_unlabelable > 0 {
        warn!("{} documents had no abstractive summary", out.skipped_unlabelable);
    }
    print!("{}", render_table(&out.report));
    info!("artifacts in {}", out.run_dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Label(args) => label(args),
        Command::Train(args) => train_cmd(cli, args),
        Command::Summarize(args) => summarize_cmd(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Pipeline(args) => pipeline_cmd(cli, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging(cli.log_level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
