//! `genie` — synthetic content-grounded dataset pipeline.
//!
//! Subcommands mirror the pipeline stages: `prepare` (HTML → passages),
//! `generate` (passages → raw completions), `filter` (completions →
//! dataset + rejects), plus `stats`, `eval`, `run` (all stages), and
//! `serve-mock` (local mock gateway for offline runs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use genie_core::config::{ConfigError, PipelineConfig};
use genie_core::gateway::MockServer;
use genie_core::metrics::{
    dataset_stats, eval_predictions, DiversityMode, EvalOptions, MetricReport, VocdConfig,
};
use genie_core::pipeline::{
    build_services, filter_records, generate_records, prepare_corpus, probe_endpoint, run_all,
    write_passages, GenerationRecord, PipelineError,
};
use genie_core::store::{read_jsonl, DatasetRecord, StoreError};

#[derive(Parser)]
#[command(name = "genie", version, about = "Generate and evaluate synthetic content-grounded datasets")]
struct Cli {
    /// Pipeline config file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override run.out_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Resume generation from the last checkpoint.
    #[arg(long, global = true)]
    resume: bool,

    /// Override run.max_in_flight.
    #[arg(long, global = true)]
    max_in_flight: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, convert, and segment a corpus into grounding passages.
    Prepare(PrepareArgs),
    /// Prompt the completion endpoint once per passage.
    Generate(GenerateArgs),
    /// Apply the format/faithfulness/quality gates.
    Filter(FilterArgs),
    /// Dataset statistics: sample count, response length, lexical diversity.
    Stats(StatsArgs),
    /// Score predictions against references and grounding contents.
    Eval(EvalArgs),
    /// All stages: prepare, generate, filter.
    Run(RunArgs),
    /// Serve the configured (mock) services over local HTTP.
    ServeMock,
}

#[derive(Args)]
struct PrepareArgs {
    /// HTML directory, document JSONL, or pre-chunked passage JSONL.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Passage JSONL; defaults to <out_dir>/passages.jsonl.
    #[arg(long)]
    passages: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Raw generation JSONL; defaults to <out_dir>/raw_generations.jsonl.
    #[arg(long)]
    raw: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Dataset JSONL; defaults to <out_dir>/dataset.jsonl.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Average per-response vocd-D instead of pooling responses.
    #[arg(long)]
    per_response: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL rows of {pred, gold, content}.
    #[arg(long)]
    input: PathBuf,
    /// Fill the entailment column via the NLI endpoint.
    #[arg(long)]
    use_nli: bool,
    /// Fill the reward column via the reward endpoint.
    #[arg(long)]
    use_reward: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Corpus input, as for `prepare`.
    #[arg(long)]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Exit codes: 0 ok, 2 config, 3 empty/invalid data, 4 endpoint.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(config) = err.downcast_ref::<ConfigError>() {
        let _ = config;
        return 2;
    }
    if let Some(pipeline) = err.downcast_ref::<PipelineError>() {
        return match pipeline {
            PipelineError::Config(_) => 2,
            PipelineError::Store(StoreError::ConfigMismatch { .. }) => 2,
            PipelineError::EmptyOutput(_) => 3,
            PipelineError::Content(_) | PipelineError::Metrics(_) | PipelineError::Store(_) => 3,
            PipelineError::Endpoint(_)
            | PipelineError::Generation { .. }
            | PipelineError::Gateway(_) => 4,
            PipelineError::Template(_) => 2,
        };
    }
    if err.downcast_ref::<StoreError>().is_some() {
        return 3;
    }
    if err.downcast_ref::<genie_core::metrics::MetricsError>().is_some() {
        return 3;
    }
    1
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(out_dir) = &cli.out_dir {
        config.run.out_dir = out_dir.clone();
    }
    if cli.resume {
        config.run.resume = true;
    }
    if let Some(max_in_flight) = cli.max_in_flight {
        config.run.max_in_flight = max_in_flight.max(1);
    }
    config.validate()?;
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Prepare(args) => cmd_prepare(&config, &args.input),
        Command::Generate(args) => cmd_generate(&config, args.passages.as_deref()),
        Command::Filter(args) => cmd_filter(&config, args.raw.as_deref()),
        Command::Stats(args) => cmd_stats(&config, args.dataset.as_deref(), args.per_response),
        Command::Eval(args) => cmd_eval(&config, args),
        Command::Run(args) => cmd_run(&config, &args.input),
        Command::ServeMock => cmd_serve_mock(&config),
    }
}

fn cmd_prepare(config: &PipelineConfig, input: &Path) -> Result<()> {
    let (passages, stats) = prepare_corpus(config, input)?;
    if passages.is_empty() {
        return Err(PipelineError::EmptyOutput("prepare produced no passages".into()).into());
    }
    let path = config.run.out_dir.join("passages.jsonl");
    write_passages(config, &passages, &path)?;
    println!("documents in:   {}", stats.docs_in);
    println!("rejected docs:  {}", stats.rejected_docs);
    println!("passages out:   {}", stats.passages_out);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_generate(config: &PipelineConfig, passages_path: Option<&Path>) -> Result<()> {
    let path = passages_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.run.out_dir.join("passages.jsonl"));
    let passages: Vec<genie_core::content_prep::Passage> =
        read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
    if passages.is_empty() {
        return Err(PipelineError::EmptyOutput(format!("{} has no passages", path.display())).into());
    }
    let services = build_services(config)?;
    if let Some(url) = config.endpoints.completion_url.as_deref() {
        probe_endpoint(url)?;
    }
    let outcome = generate_records(config, &passages, &services.completion)?;
    println!("passages:        {}", passages.len());
    println!("records:         {}", outcome.records.len());
    println!("resumed:         {}", outcome.resumed);
    println!("completion calls:{:>2}", outcome.new_calls);
    println!("wrote {}", outcome.raw_path.display());
    Ok(())
}

fn cmd_filter(config: &PipelineConfig, raw_path: Option<&Path>) -> Result<()> {
    let path = raw_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.run.out_dir.join("raw_generations.jsonl"));
    let records: Vec<GenerationRecord> =
        read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        return Err(PipelineError::EmptyOutput(format!("{} has no records", path.display())).into());
    }
    let services = build_services(config)?;
    let (dataset, funnel) =
        filter_records(config, records, services.nli.as_ref(), services.reward.as_ref())?;
    println!("{funnel}");
    println!();
    println!("dataset records: {}", dataset.len());
    println!("wrote {}", config.run.out_dir.join("dataset.jsonl").display());
    println!("wrote {}", config.run.out_dir.join("rejects.jsonl").display());
    Ok(())
}

fn cmd_stats(config: &PipelineConfig, dataset_path: Option<&Path>, per_response: bool) -> Result<()> {
    let path = dataset_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.run.out_dir.join("dataset.jsonl"));
    let records: Vec<DatasetRecord> =
        read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
    let mode = if per_response { DiversityMode::PerResponseMean } else { DiversityMode::Pooled };
    let vocd_cfg = VocdConfig { seed: config.run.seed, ..VocdConfig::default() };
    let stats = dataset_stats(&records, &vocd_cfg, mode)?;

    let json_path = config.run.out_dir.join("stats.json");
    std::fs::create_dir_all(&config.run.out_dir)?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&stats)?)?;

    println!("{:<22} {:>10}", "samples", stats.n_samples);
    println!("{:<22} {:>10.1}", "mean response words", stats.mean_response_words);
    match stats.lexical_diversity {
        Some(d) => println!("{:<22} {:>10.1}", "lexical diversity (D)", d),
        None => println!("{:<22} {:>10}", "lexical diversity (D)", "n/a (too short)"),
    }
    println!("wrote {}", json_path.display());
    Ok(())
}

fn cmd_eval(config: &PipelineConfig, args: &EvalArgs) -> Result<()> {
    #[derive(serde::Deserialize)]
    struct Row {
        pred: String,
        gold: String,
        content: String,
    }
    let rows: Vec<Row> =
        read_jsonl(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let preds: Vec<String> = rows.iter().map(|r| r.pred.clone()).collect();
    let golds: Vec<String> = rows.iter().map(|r| r.gold.clone()).collect();
    let contents: Vec<String> = rows.iter().map(|r| r.content.clone()).collect();

    let options = EvalOptions { use_reward: args.use_reward, use_nli: args.use_nli };
    let services = if args.use_nli || args.use_reward {
        Some(build_services_for_eval(config)?)
    } else {
        None
    };
    let (nli, reward) = match &services {
        Some(s) => (Some(s.nli.as_ref()), Some(s.reward.as_ref())),
        None => (None, None),
    };
    let report = eval_predictions(
        &preds,
        &golds,
        &contents,
        &options,
        nli,
        reward,
        config.run.max_in_flight,
    )?;

    std::fs::create_dir_all(&config.run.out_dir)?;
    let json_path = config.run.out_dir.join("eval.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    let csv_path = config.run.out_dir.join("eval.csv");
    write_eval_csv(&report, &csv_path)?;

    println!("{:<22} {:>10}", "examples", report.n);
    println!("{:<22} {:>10.4}", "rouge-l f1", report.aggregate.rouge_l.f1);
    println!("{:<22} {:>10.4}", "rouge-l precision", report.aggregate.rouge_l.precision);
    println!("{:<22} {:>10.4}", "rouge-l recall", report.aggregate.rouge_l.recall);
    println!("{:<22} {:>10.4}", "k-precision", report.aggregate.k_precision);
    if let Some(v) = report.aggregate.entailment {
        println!("{:<22} {:>10.4}", "entailment", v);
    }
    if let Some(v) = report.aggregate.reward {
        println!("{:<22} {:>10.4}", "reward", v);
    }
    println!("wrote {}", json_path.display());
    println!("wrote {}", csv_path.display());
    Ok(())
}

/// Eval only needs scorers; a completion endpoint is not required.
fn build_services_for_eval(config: &PipelineConfig) -> Result<genie_core::pipeline::Services> {
    let mut config = config.clone();
    if config.endpoints.completion_url.is_none() {
        config.endpoints.completion_url = Some("mock:scripted".into());
    }
    Ok(build_services(&config)?)
}

fn write_eval_csv(report: &MetricReport, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "index",
        "rouge_l_precision",
        "rouge_l_recall",
        "rouge_l_f1",
        "k_precision",
        "entailment",
        "reward",
    ])?;
    for (i, row) in report.per_example.iter().enumerate() {
        writer.write_record([
            i.to_string(),
            format!("{:.6}", row.rouge_l.precision),
            format!("{:.6}", row.rouge_l.recall),
            format!("{:.6}", row.rouge_l.f1),
            format!("{:.6}", row.k_precision),
            row.entailment.map(|v| format!("{v:.6}")).unwrap_or_default(),
            row.reward.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn cmd_run(config: &PipelineConfig, input: &Path) -> Result<()> {
    let summary = run_all(config, input)?;
    println!("documents in:   {}", summary.prepare.docs_in);
    println!("rejected docs:  {}", summary.prepare.rejected_docs);
    println!("passages:       {}", summary.prepare.passages_out);
    println!("generations:    {} ({} resumed, {} new calls)", summary.generated, summary.resumed, summary.new_calls);
    println!();
    println!("{}", summary.funnel);
    println!();
    println!("outputs in {}", summary.out_dir.display());
    Ok(())
}

fn cmd_serve_mock(config: &PipelineConfig) -> Result<()> {
    let mut config = config.clone();
    // default to fully in-process mocks when endpoints are unset
    config.endpoints.completion_url =
        Some(config.endpoints.completion_url.unwrap_or_else(|| "mock:scripted".into()));
    config.endpoints.nli_url = Some(
        config.endpoints.nli_url.unwrap_or_else(|| "mock:keyword:zzlowent:0.1:0.9".into()),
    );
    config.endpoints.reward_url = Some(
        config.endpoints.reward_url.unwrap_or_else(|| "mock:keyword:zzlowrew:0.2:0.9".into()),
    );
    let services = build_services(&config)?;
    let server = MockServer::spawn(services.completion, services.nli, services.reward)
        .map_err(PipelineError::Gateway)?;
    println!("mock gateway listening on {}", server.base_url());
    println!("endpoints: /v1/completions /score/nli /score/reward");
    println!("press ctrl-c to stop");
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}
