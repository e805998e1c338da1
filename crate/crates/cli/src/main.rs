//! `planminer` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use planminer::classifier::ModelKind;

use crate::config::{RunConfig, SEED_ENV};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "planminer",
    version,
    about = "Find treatment-plan sentences in clinical notes"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed [default: $PLANMINER_SEED, then 42].
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,

    /// Plan-heading lexicon, one heading per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Word vectors in word2vec text format for the pretrained CNN kinds.
    #[arg(long)]
    embeddings: Option<PathBuf>,

    /// Maximum Fisher p-value for selected SVM features.
    #[arg(long)]
    p_max: Option<f64>,

    /// Minimum document frequency for selected SVM features.
    #[arg(long)]
    df_min: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with sentence-level ground truth.
    GenCorpus {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_patients: Option<usize>,
        /// Fraction of assessment sections that carry a plan heading.
        #[arg(long)]
        heading_rate: Option<f64>,
    },
    /// Scope headed plan sections and write the noisy training set.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train one classifier on a noisy dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        model: Option<ModelKind>,
    },
    /// Score a trained model and the heading baseline against annotated notes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// `model.json` written by `train`.
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
    },
    /// Stratified k-fold cross-validation; repeat --model to compare kinds.
    Xval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        model: Vec<ModelKind>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Cross-validated F1 over 1%..100% of the training data.
    Curve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        model: Option<ModelKind>,
        #[arg(long)]
        k: Option<usize>,
        /// Annotated corpus for set-aside scoring at every point.
        #[arg(long, requires = "ground_truth")]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "corpus")]
        ground_truth: Option<PathBuf>,
    },
    /// Corpus statistics, plus baseline metrics when ground truth is given.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenCorpus { .. } => "gen-corpus",
            Command::Extract { .. } => "extract",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Xval { .. } => "xval",
            Command::Curve { .. } => "curve",
            Command::Report { .. } => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::GenCorpus { common, .. }
            | Command::Extract { common, .. }
            | Command::Train { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Xval { common, .. }
            | Command::Curve { common, .. }
            | Command::Report { common, .. } => common,
        }
    }
}

fn apply_model_args(cfg: &mut RunConfig, m: &ModelArgs) {
    if let Some(p) = &m.embeddings {
        cfg.embeddings = Some(p.clone());
    }
    if let Some(p) = m.p_max {
        cfg.classifier.selection.p_max = p;
    }
    if let Some(d) = m.df_min {
        cfg.classifier.selection.df_min = d;
    }
}

/// Merges flags over the config file; the seed falls back to the environment.
fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let env = std::env::var(SEED_ENV).ok();
    let seed = cfg.resolve_seed(env.as_deref())?;
    if let Some(l) = &cli.command.common().lexicon {
        cfg.lexicon = Some(l.clone());
    }
    match &cli.command {
        Command::GenCorpus {
            n_patients,
            heading_rate,
            ..
        } => {
            if let Some(n) = n_patients {
                cfg.synth.n_patients = *n;
            }
            if let Some(r) = heading_rate {
                cfg.synth.plan_heading_rate = *r;
            }
            cfg.synth.seed = seed;
        }
        Command::Train { model_args, model, .. } => {
            apply_model_args(&mut cfg, model_args);
            if let Some(m) = model {
                cfg.model = *m;
            }
        }
        Command::Xval { model_args, k, .. } => {
            apply_model_args(&mut cfg, model_args);
            if let Some(k) = k {
                cfg.k = *k;
            }
        }
        Command::Curve {
            model_args, model, k, ..
        } => {
            apply_model_args(&mut cfg, model_args);
            if let Some(m) = model {
                cfg.model = *m;
            }
            if let Some(k) = k {
                cfg.k = *k;
            }
        }
        Command::Extract { .. } | Command::Evaluate { .. } | Command::Report { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli)?;
    let name = cli.command.name();
    let out = match cli.command {
        Command::GenCorpus { common, .. } => commands::gen_corpus(commands::GenCorpus { out: common.out }, &cfg)?,
        Command::Extract { common, corpus } => commands::extract(
            commands::Extract {
                corpus,
                out: common.out,
            },
            &cfg,
        )?,
        Command::Train { common, dataset, .. } => commands::train(
            commands::Train {
                dataset,
                out: common.out,
            },
            &cfg,
        )?,
        Command::Evaluate {
            common,
            model_file,
            corpus,
            ground_truth,
        } => commands::evaluate(
            commands::Evaluate {
                model: model_file,
                corpus,
                ground_truth,
                out: common.out,
            },
            &cfg,
        )?,
        Command::Xval {
            common, dataset, model, ..
        } => commands::xval(
            commands::Xval {
                dataset,
                models: model,
                out: common.out,
            },
            &cfg,
        )?,
        Command::Curve {
            common,
            dataset,
            corpus,
            ground_truth,
            ..
        } => commands::curve(
            commands::Curve {
                dataset,
                corpus,
                ground_truth,
                out: common.out,
            },
            &cfg,
        )?,
        Command::Report {
            common,
            corpus,
            ground_truth,
        } => commands::report(
            commands::Report {
                corpus,
                ground_truth,
                out: common.out,
            },
            &cfg,
        )?,
    };
    for path in out.commit(name, &cfg)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("planminer {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
