use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kgfuse::pipeline::{Pipeline, RunConfig, Stage};

#[derive(Parser)]
#[command(version, about = "Rule-based answers fused with neural link prediction")]
struct Cli {
    /// TOML run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Intern entities and relations and write the vocabulary dumps.
    Ingest {
        /// Training triples (TSV: head, relation, tail).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Validation triples.
        #[arg(long)]
        valid: Option<PathBuf>,
        /// Test triples.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Drop constant rules and filter the rest by NLI scores.
    Filter {
        /// Mined rules in AnyBURL TSV format.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Precomputed NLI table (rule id, entailment, neutral, contradiction).
        #[arg(long)]
        nli: Option<PathBuf>,
        /// URL of an NLI scorer used when no NLI table is given.
        #[arg(long)]
        nli_endpoint: Option<String>,
        /// Weight of the contradiction-neutral product.
        #[arg(long)]
        gamma: Option<f64>,
        /// Rules at or below this final score get confidence 0.
        #[arg(long)]
        threshold: Option<f64>,
        /// Comma-separated relation names the filter applies to.
        #[arg(long, value_delimiter = ',')]
        relations: Option<Vec<String>>,
        #[command(flatten)]
        sentences: SentenceArgs,
    },
    /// Apply rules to the validation and test queries.
    Answer {
        /// Rule file to apply instead of the filter stage output.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Triple file to answer instead of the test split.
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Fuse neural and logical candidates.
    Fuse {
        /// Neural test candidates (JSONL).
        #[arg(long)]
        neural: Option<PathBuf>,
        /// Neural validation candidates, needed for tuning.
        #[arg(long)]
        neural_valid: Option<PathBuf>,
        /// Logical test candidates instead of the answer stage output.
        #[arg(long)]
        logical: Option<PathBuf>,
        /// Fusion flag file (relation id, 0 veto / 1 sum).
        #[arg(long, conflicts_with = "tune")]
        flags: Option<PathBuf>,
        /// Pick the fusion mode per relation on the validation split.
        #[arg(long)]
        tune: bool,
        /// Keep only the best N logical candidates per query.
        #[arg(long)]
        logical_top: Option<usize>,
    },
    /// Filtered metrics of a ranking file.
    Evaluate {
        /// Ranking file instead of the fuse stage output.
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// Neural scores to compare against per relation.
        #[arg(long)]
        neural: Option<PathBuf>,
    },
    /// Natural-language explanations of top answers.
    Explain {
        /// Ranking file instead of the fuse stage output.
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// Rule file instead of the filter stage output.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Answers explained per query.
        #[arg(long)]
        top_k: Option<usize>,
        #[command(flatten)]
        sentences: SentenceArgs,
    },
    /// Every stage in order.
    All,
}

#[derive(Args)]
struct SentenceArgs {
    /// Relation metadata JSON (types and templates).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Entity lexicon JSON (placeholder names and demonyms).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Readable entity labels (TSV: id, label).
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl SentenceArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.sentences.meta, self.meta);
        set(&mut c.sentences.lexicon, self.lexicon);
        set(&mut c.sentences.labels, self.labels);
    }
}

fn configure(cli: Cli) -> Result<(RunConfig, Stage), kgfuse::pipeline::PipelineError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut c.output.dir, cli.out);
    let stage = match cli.command {
        Command::Ingest { train, valid, test } => {
            set(&mut c.data.train, train);
            set(&mut c.data.valid, valid);
            set(&mut c.data.test, test);
            Stage::Ingest
        }
        Command::Filter {
            rules,
            nli,
            nli_endpoint,
            gamma,
            threshold,
            relations,
            sentences,
        } => {
            set(&mut c.rules.path, rules);
            set(&mut c.filter.nli, nli);
            set(&mut c.filter.nli_endpoint, nli_endpoint);
            if let Some(g) = gamma {
                c.filter.gamma = g;
            }
            if let Some(t) = threshold {
                c.filter.threshold = t;
            }
            if let Some(r) = relations {
                c.filter.relations = r;
            }
            sentences.apply(&mut c);
            Stage::Filter
        }
        Command::Answer { rules, queries } => {
            set(&mut c.rules.filtered, rules);
            set(&mut c.inputs.queries, queries);
            Stage::Answer
        }
        Command::Fuse {
            neural,
            neural_valid,
            logical,
            flags,
            tune,
            logical_top,
        } => {
            set(&mut c.neural.test, neural);
            set(&mut c.neural.valid, neural_valid);
            set(&mut c.inputs.logical, logical);
            if flags.is_some() {
                c.fusion.tune = false;
                c.fusion.flags = flags;
            }
            if tune {
                c.fusion.tune = true;
                c.fusion.flags = None;
            }
            set(&mut c.fusion.logical_top, logical_top);
            Stage::Fuse
        }
        Command::Evaluate { ranking, neural } => {
            set(&mut c.inputs.ranking, ranking);
            set(&mut c.neural.test, neural);
            Stage::Evaluate
        }
        Command::Explain {
            ranking,
            rules,
            top_k,
            sentences,
        } => {
            set(&mut c.inputs.ranking, ranking);
            set(&mut c.rules.filtered, rules);
            set(&mut c.output.explain_top_k, top_k);
            sentences.apply(&mut c);
            Stage::Explain
        }
        Command::All => Stage::All,
    };
    Ok((c, stage))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = configure(Cli::parse()).and_then(|(config, stage)| Pipeline::new(config)?.run(stage));
    match result {
        Ok(summaries) => {
            for s in summaries {
                for note in &s.notes {
                    log::info!("{}: {note}", s.stage);
                }
                for out in &s.outputs {
                    println!("{}", out.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
