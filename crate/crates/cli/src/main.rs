use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use paperrec::eval::Aggregation;
use paperrec::synth::{generate_corpus, SynthConfig};
use paperrec::Corpus;
use paperrec_cli::{run_stage, write_atomic, PipelineConfig, Stage, WordSource};

/// Hybrid co-citation and content-based paper recommendation.
#[derive(Debug, Parser)]
#[command(name = "paperrec", version)]
struct Cli {
    /// key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts without an explicit path.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config override, repeatable: --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a JSON-lines corpus and store it as the corpus artifact.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Write the top co-cited papers of every paper.
    Cocite {
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Build TF-IDF weights and paper embeddings from trained or loaded word vectors.
    Embed(EmbedArgs),
    /// Cluster paper embeddings with spherical k-means.
    Cluster {
        /// Maximum number of seeded clusters.
        #[arg(long)]
        k: Option<usize>,
        /// Clusters above this size are not searched for content candidates.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Compute merged recommendation lists for every paper.
    Recommend {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Print the papers closest to a piece of text.
    Query {
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Score a graded survey CSV.
    Eval {
        #[arg(long)]
        survey: PathBuf,
        /// Column mapping, e.g. source_id=PaperId,method:CoCitation=ccb
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        aggregation: Option<Aggregation>,
        /// Rank cutoff for precision.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Print corpus statistics.
    Stats,
    /// Write a seeded synthetic corpus with planted topics.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        papers: usize,
        #[arg(long, default_value_t = 20)]
        topics: usize,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct EmbedArgs {
    /// Train skip-gram word vectors on the corpus.
    #[arg(long)]
    train: bool,
    /// Load word vectors from a text file.
    #[arg(long, value_name = "VECTORS")]
    load: Option<PathBuf>,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for pair in &cli.overrides {
        cfg.apply_override(pair)?;
    }
    if let Some(dir) = &cli.work_dir {
        cfg.work_dir = dir.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn stage(command: Command) -> Result<Stage> {
    Ok(match command {
        Command::Ingest { corpus } => Stage::Ingest { corpus },
        Command::Cocite { top_k } => Stage::Cocite { top_k },
        Command::Embed(args) => Stage::Embed {
            source: match (args.train, args.load) {
                (true, None) => WordSource::Train,
                (false, Some(path)) => WordSource::Load(path),
                _ => bail!("embed needs exactly one of --train or --load"),
            },
        },
        Command::Cluster { k, cap } => Stage::Cluster { k, cap },
        Command::Recommend { theta, tau, top_k } => Stage::Recommend { theta, tau, top_k },
        Command::Query { text, k } => Stage::Query { text, k },
        Command::Eval {
            survey,
            map,
            aggregation,
            k,
        } => Stage::Eval {
            survey,
            columns: map,
            aggregation,
            k,
        },
        Command::Stats => Stage::Stats,
        Command::Synth { .. } => unreachable!("handled before staging"),
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    if let Command::Synth { out, papers, topics } = &cli.command {
        let synth = SynthConfig {
            papers: *papers,
            topics: *topics,
            seed: cfg.training.seed,
            ..SynthConfig::default()
        };
        let corpus = Corpus::from_records(generate_corpus(&synth))?;
        write_atomic(out, |w| corpus.write_jsonl(w))?;
        log::info!("synth: papers={} -> {}", corpus.len(), out.display());
        return Ok(());
    }
    let stage = stage(cli.command)?;
    let mut out = BufWriter::new(io::stdout());
    run_stage(&stage, &cfg, &mut out)?;
    out.flush().context("writing to stdout")?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
