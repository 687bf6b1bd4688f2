mod analyze;
mod serve;
mod tokenizer;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cosynth_core::annotation::{build_predictor_corpus, CorpusOptions, DEFAULT_PREDICTOR_SAMPLES};
use cosynth_core::dataset::{audit_records, load_config, read_prompts, read_records, record_to_line, write_export};
use cosynth_core::orchestrator::STRATEGY_NAMES;
use cosynth_core::{run_batch, Engine, Origin, StrategySelector, SynthesisConfig, SynthesisError};

#[derive(Parser)]
#[command(name = "cosynth", version, about = "Teacher/student cooperative synthesis of reasoning data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one record per prompt with the chosen strategy.
    Synthesize {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(STRATEGY_NAMES))]
        strategy: String,
        /// JSON config; defaults to $TESSY_CONFIG, then built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
        parallelism: u32,
        #[arg(long)]
        seed: Option<u64>,
        /// Only the first N prompts.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        mix_ratio: Option<f64>,
        #[arg(long)]
        candidates: Option<usize>,
    },
    /// Sample think segments and have the annotator mark style spans.
    Annotate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PREDICTOR_SAMPLES)]
        samples: usize,
        #[arg(long, value_enum, default_value = "teacher")]
        source: SourceArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        min_chars: usize,
        #[arg(long, default_value_t = 2000)]
        max_chars: usize,
    },
    /// Distribution analytics across one or more record files.
    Analyze {
        /// Comma-separated record files; each file is one corpus.
        #[arg(long, value_delimiter = ',', required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// `default` or `external:<command>` (reads text on stdin, prints tokens).
        #[arg(long, default_value = "default")]
        tokenizer: String,
        /// Cap on documents per corpus in the PCA projection.
        #[arg(long, default_value_t = 2000)]
        pca_sample: usize,
        #[arg(long, default_value_t = 30)]
        top_words: usize,
    },
    /// Check every record against the structural invariants.
    Validate {
        #[arg(long)]
        records: PathBuf,
    },
    /// Convert records to prompt/response pairs.
    Export {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the completion and label protocols from the synthetic model.
    MockServe {
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SourceArg {
    Teacher,
    Student,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Synthesize {
            strategy,
            config,
            prompts,
            out,
            parallelism,
            seed,
            limit,
            mix_ratio,
            candidates,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = mix_ratio {
                cfg.mix_ratio = r;
            }
            if let Some(n) = candidates {
                cfg.reject_candidates = n;
            }
            if let Err(e) = cfg.validate() {
                return Ok(usage_error(&e.to_string()));
            }
            let selector = StrategySelector::from_name(&strategy, &cfg).expect("clap restricts names");
            synthesize(cfg, selector, &prompts, &out, parallelism as usize, limit)
        }
        Command::Annotate {
            config,
            records,
            out,
            samples,
            source,
            seed,
            min_chars,
            max_chars,
        } => {
            let cfg = load_config(config.as_deref())?;
            let options = CorpusOptions {
                sample_count: samples,
                min_chars,
                max_chars,
                source: match source {
                    SourceArg::Teacher => Origin::Teacher,
                    SourceArg::Student => Origin::Student,
                },
                seed: seed.unwrap_or(cfg.seed),
                ..CorpusOptions::default()
            };
            if samples == 0 {
                return Ok(usage_error("--samples must be positive"));
            }
            annotate(cfg, &records, &out, &options)
        }
        Command::Analyze {
            records,
            report,
            tokenizer,
            pca_sample,
            top_words,
        } => {
            let Some(tok) = tokenizer::from_arg(&tokenizer) else {
                return Ok(usage_error(&format!("unknown tokenizer {tokenizer:?}")));
            };
            analyze::run(&records, &report, &tok, pca_sample, top_words)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { records } => {
            let problems = audit_records(&records)?;
            if problems.is_empty() {
                println!("ok: {}", records.display());
                return Ok(ExitCode::SUCCESS);
            }
            for (line, msg) in &problems {
                println!("line {line}: {msg}");
            }
            println!("{} invalid record(s)", problems.len());
            Ok(ExitCode::from(1))
        }
        Command::Export { records, out } => {
            let recs = read_records(&records)?;
            write_export(&recs, &out, &SynthesisConfig::default().end_of_think_marker)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::MockServe { script, port, host } => {
            serve::run(script.as_deref(), &host, port)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn synthesize(
    cfg: SynthesisConfig,
    selector: StrategySelector,
    prompts: &Path,
    out: &Path,
    parallelism: usize,
    limit: Option<usize>,
) -> Result<ExitCode> {
    let mut entries = read_prompts(prompts)?;
    if let Some(n) = limit {
        entries.truncate(n);
    }
    let engine = Engine::from_config(cfg)?;
    let results = run_batch(&engine, &entries, selector, parallelism)?;

    let mut writer = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(record) => writeln!(writer, "{}", record_to_line(&record))?,
            Err(e) => failures.push(e),
        }
    }
    writer.flush()?;
    if failures.is_empty() {
        eprintln!("wrote {} record(s) to {}", entries.len(), out.display());
        return Ok(ExitCode::SUCCESS);
    }
    let err_path = out.with_extension("errors.jsonl");
    let mut err_writer = BufWriter::new(File::create(&err_path)?);
    for e in &failures {
        let (id, partial) = match e {
            SynthesisError::Trajectory { id, partial, .. } => (id.as_str(), partial.len()),
            SynthesisError::Judge { id, .. } => (id.as_str(), 0),
            SynthesisError::Config(_) => ("", 0),
        };
        let line = serde_json::json!({ "id": id, "error": e.to_string(), "partial_spans": partial });
        writeln!(err_writer, "{line}")?;
        eprintln!("failed: {e}");
    }
    err_writer.flush()?;
    bail!(
        "{} of {} prompt(s) failed; details in {}",
        failures.len(),
        entries.len(),
        err_path.display()
    )
}

fn annotate(cfg: SynthesisConfig, records: &Path, out: &Path, options: &CorpusOptions) -> Result<ExitCode> {
    let recs = read_records(records)?;
    let engine = Engine::from_config(cfg)?;
    let mut writer = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    let summary = build_predictor_corpus(&recs, options, engine.backend(), &engine.config().teacher, &mut writer)?;
    if summary.shortfall > 0 {
        log::warn!(
            "source text supports only {} of {} requested segments",
            summary.sampled,
            summary.requested
        );
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(ExitCode::SUCCESS)
}
