//! Command-line driver: `ingest`, `stats`, `train`, `sweep`, `wug`,
//! `speakers` and `report`, all writing into a run directory with a
//! checksummed manifest.

mod commands;
pub mod manifest;
pub mod settings;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use settings::{parse_seeds, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation; exit code 2.
    Usage(String),
    /// Bad or missing input data, or a failed computation; exit code 1.
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<wuglab::Error> for CliError {
    fn from(e: wuglab::Error) -> Self {
        match e {
            wuglab::Error::Argument(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wuglab", version, about = "German plural encoder-decoder experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a UniMorph file and a gender list into a noun lexicon.
    Ingest(Opts),
    /// Plural class distribution of the corpus and its subsets.
    Stats(Opts),
    /// Train a single seed.
    Train(Opts),
    /// Train one model per seed on shared splits.
    Sweep(Opts),
    /// Wug productions and rank profile of the trained models.
    Wug(Opts),
    /// Production and rating statistics of speaker data.
    Speakers(Opts),
    /// Accuracy, suffix scores, wug results and correlations.
    Report(Opts),
}

/// Flags shared by every subcommand. Each may also come from the config
/// file or a `WUGLAB_<KEY>` environment variable.
#[derive(Debug, Args, Default)]
struct Opts {
    /// Flat `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// UniMorph-format inflection table.
    #[arg(long)]
    corpus: Option<String>,
    /// `lemma,gender` list.
    #[arg(long)]
    gender: Option<String>,
    /// Pre-merged `lemma<TAB>plural<TAB>gender` lexicon.
    #[arg(long)]
    lexicon: Option<String>,
    /// Stimulus list overriding the built-in 24 items.
    #[arg(long)]
    stimuli: Option<String>,
    /// Speaker response CSV.
    #[arg(long)]
    speakers: Option<String>,
    /// Write a synthetic speaker file matching the published survey
    /// aggregates to the `--speakers` path first.
    #[arg(long)]
    synthesize: bool,
    /// Run directory [default: run].
    #[arg(long)]
    run: Option<String>,
    /// Random subsample size of the lexicon.
    #[arg(long)]
    limit: Option<String>,
    #[arg(long)]
    limit_seed: Option<String>,
    /// Split sizes as `train,dev,test`.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    split_seed: Option<String>,
    /// `a..b`, a comma list, or `N` for seeds 1..N.
    #[arg(long)]
    seeds: Option<String>,
    /// Seed for `train`.
    #[arg(long)]
    seed: Option<String>,
    /// Seeds trained or evaluated concurrently.
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
    #[arg(long)]
    clip_norm: Option<String>,
    /// `sequences` or `tokens`.
    #[arg(long)]
    gradient_norm: Option<String>,
    #[arg(long)]
    adadelta_rho: Option<String>,
    #[arg(long)]
    adadelta_eps: Option<String>,
    /// Beam width for wug productions.
    #[arg(long)]
    beam: Option<String>,
    /// Beam width for per-epoch dev accuracy.
    #[arg(long)]
    dev_beam: Option<String>,
    /// Beam width for split accuracies in `report`.
    #[arg(long)]
    eval_beam: Option<String>,
    /// Ranks in the rank profile.
    #[arg(long)]
    rank_k: Option<String>,
    #[arg(long)]
    emb_dim: Option<String>,
    #[arg(long)]
    dec_emb_dim: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    /// `bilinear` or `additive`.
    #[arg(long)]
    attention: Option<String>,
    #[arg(long)]
    bidirectional: Option<String>,
    #[arg(long)]
    init_range: Option<String>,
    /// Tanh attentional layer fed back into the decoder input.
    #[arg(long)]
    input_feed: Option<String>,
}

impl Opts {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("corpus", &self.corpus),
            ("gender", &self.gender),
            ("lexicon", &self.lexicon),
            ("stimuli", &self.stimuli),
            ("speakers", &self.speakers),
            ("run", &self.run),
            ("limit", &self.limit),
            ("limit_seed", &self.limit_seed),
            ("split", &self.split),
            ("split_seed", &self.split_seed),
            ("seeds", &self.seeds),
            ("seed", &self.seed),
            ("jobs", &self.jobs),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("dropout", &self.dropout),
            ("clip_norm", &self.clip_norm),
            ("gradient_norm", &self.gradient_norm),
            ("adadelta_rho", &self.adadelta_rho),
            ("adadelta_eps", &self.adadelta_eps),
            ("beam", &self.beam),
            ("dev_beam", &self.dev_beam),
            ("eval_beam", &self.eval_beam),
            ("rank_k", &self.rank_k),
            ("emb_dim", &self.emb_dim),
            ("dec_emb_dim", &self.dec_emb_dim),
            ("hidden", &self.hidden),
            ("layers", &self.layers),
            ("attention", &self.attention),
            ("bidirectional", &self.bidirectional),
            ("init_range", &self.init_range),
            ("input_feed", &self.input_feed),
        ];
        pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }

    fn settings(&self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => settings::parse_config(
                &std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
            )?,
            None => BTreeMap::new(),
        };
        Ok(Settings::layered(file, std::env::vars(), self.flags()))
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Ingest(o) => o.settings().and_then(|s| commands::ingest(&s)),
        Command::Stats(o) => o.settings().and_then(|s| commands::stats(&s)),
        Command::Train(o) => o.settings().and_then(|s| commands::train(&s)),
        Command::Sweep(o) => o.settings().and_then(|s| commands::sweep(&s)),
        Command::Wug(o) => o.settings().and_then(|s| commands::wug(&s)),
        Command::Speakers(o) => o.settings().and_then(|s| commands::speakers(&s, o.synthesize)),
        Command::Report(o) => o.settings().and_then(|s| commands::report(&s)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
