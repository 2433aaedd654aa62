//! `avatarqa` subcommands.

use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use avatarqa_core::bundle::{build_bundle, calibrate_on, topic_examples, BuildConfig, Corpora, EngineConfig, Splits};
use avatarqa_core::chatfallback::evaluate_lm;
use avatarqa_core::corpus::{load_corpus, Corpus};
use avatarqa_core::dialog::new_session;
use avatarqa_core::fixtures;
use avatarqa_core::retrieve::{evaluate_retriever, RetrievalQuery, SentenceIndex};
use avatarqa_core::textmodel::TextClassifier;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::api::{router, AppState};
use crate::bundle_dir::{self, read_json, Branch};
use crate::chat::{run_chat, HELP};
use crate::config::FileConfig;
use crate::transcript::TranscriptLog;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_BUNDLE: &str = "bundle";

#[derive(Debug, Parser)]
#[command(name = "avatarqa", version, about = "Grounded well-being chat agent: build, evaluate and serve")]
pub struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train all models, calibrate, index and write a bundle directory.
    Train(TrainArgs),
    /// Refit the topic temperatures on the stored validation split.
    Calibrate(CalibrateArgs),
    /// Accuracy of a bundled classifier on its test split.
    EvalClassifier(EvalClassifierArgs),
    /// Retrieval metrics on a branch's test questions.
    EvalRetriever(EvalRetrieverArgs),
    /// Perplexity of a language model on a text file.
    EvalLm(EvalLmArgs),
    /// Rebuild the sentence indexes of a bundle.
    Index(IndexArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Chat with a bundle in the terminal.
    Chat(ChatArgs),
}

/// Corpus files; each defaults to the fixture shipped with the engine.
#[derive(Debug, Clone, Default, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub medical: Option<PathBuf>,
    #[arg(long)]
    pub social: Option<PathBuf>,
    #[arg(long)]
    pub news: Option<PathBuf>,
    /// Dialogue transcript, one `speaker: text` line per utterance.
    #[arg(long)]
    pub dialogue: Option<PathBuf>,
}

impl CorpusArgs {
    fn corpus(path: &Option<PathBuf>, builtin: fn() -> Corpus) -> Result<Corpus> {
        match path {
            Some(p) => load_corpus(p).with_context(|| format!("loading corpus {}", p.display())),
            None => Ok(builtin()),
        }
    }

    pub fn load(&self) -> Result<Corpora> {
        let dialogue = match &self.dialogue {
            Some(p) => fixtures::strip_speakers(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            ),
            None => fixtures::dialogue_lines(),
        };
        Ok(Corpora {
            medical: Self::corpus(&self.medical, fixtures::medical)?,
            social: Self::corpus(&self.social, fixtures::social)?,
            news: Self::corpus(&self.news, fixtures::news)?,
            dialogue,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct BundleArg {
    /// Bundle directory.
    #[arg(long, env = "AVATARQA_BUNDLE")]
    pub bundle: Option<PathBuf>,
}

impl BundleArg {
    fn resolve(&self, file: &FileConfig) -> PathBuf {
        self.bundle.clone().or_else(|| file.bundle.clone()).unwrap_or_else(|| DEFAULT_BUNDLE.into())
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Calibrated confidence above which a topic is answered without asking.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Sentences per answer.
    #[arg(long)]
    pub top_k: Option<usize>,
}

impl EngineArgs {
    fn apply(&self, file: &FileConfig, mut config: EngineConfig) -> EngineConfig {
        if let Some(t) = self.threshold.or(file.threshold) {
            config.threshold = t;
        }
        if let Some(k) = self.top_k.or(file.top_k) {
            config.top_k = k;
        }
        config
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Output bundle directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub smoothing_k: Option<f64>,
    #[command(flatten)]
    pub corpora: CorpusArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub bundle: BundleArg,
    /// Branch to calibrate; both when omitted.
    #[arg(long, value_enum)]
    pub branch: Option<Branch>,
    #[command(flatten)]
    pub corpora: CorpusArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    Mode,
    Medical,
    Social,
}

#[derive(Debug, Clone, Args)]
pub struct EvalClassifierArgs {
    #[command(flatten)]
    pub bundle: BundleArg,
    #[arg(long, value_enum)]
    pub model: ClassifierKind,
    #[command(flatten)]
    pub corpora: CorpusArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalRetrieverArgs {
    #[command(flatten)]
    pub bundle: BundleArg,
    #[arg(long, value_enum)]
    pub branch: Branch,
    /// Sentences retrieved per question; the bundle's top-k when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    /// Query every entry instead of the test split.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub corpora: CorpusArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalLmArgs {
    /// Model file (`lm.json` of a bundle).
    #[arg(long)]
    pub model: PathBuf,
    /// Text file, one utterance per line; `speaker:` prefixes are stripped.
    #[arg(long)]
    pub text: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub bundle: BundleArg,
    #[command(flatten)]
    pub corpora: CorpusArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub bundle: BundleArg,
    #[arg(long, env = "AVATARQA_BIND")]
    pub bind: Option<String>,
    /// Append an anonymous JSON-lines transcript here.
    #[arg(long, env = "AVATARQA_LOG")]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ChatArgs {
    #[command(flatten)]
    pub bundle: BundleArg,
    #[command(flatten)]
    pub engine: EngineArgs,
}

fn print_json(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Runs every subcommand except `serve`, writing results to `out`.
pub fn run(cli: &Cli, input: impl BufRead, out: &mut impl Write) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Train(args) => train(args, &file, out),
        Command::Calibrate(args) => calibrate(args, &file, out),
        Command::EvalClassifier(args) => eval_classifier(args, &file, out),
        Command::EvalRetriever(args) => eval_retriever(args, &file, out),
        Command::EvalLm(args) => {
            let text =
                std::fs::read_to_string(&args.text).with_context(|| format!("reading {}", args.text.display()))?;
            let model = avatarqa_core::chatfallback::NgramModel::from_json(
                &std::fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?,
            )?;
            print_json(out, &evaluate_lm(&model, &fixtures::strip_speakers(&text))?)
        }
        Command::Index(args) => index(args, &file, out),
        Command::Chat(args) => {
            let dir = args.bundle.resolve(&file);
            let manifest = bundle_dir::read_manifest(&dir)?;
            let bundle = bundle_dir::load_bundle(&dir, Some(args.engine.apply(&file, manifest.engine)))?;
            writeln!(out, "{HELP}")?;
            run_chat(&bundle, &mut new_session(), input, out)?;
            Ok(())
        }
        Command::Serve(_) => bail!("serve runs on the async runtime; call serve() instead"),
    }
}

pub fn build_config(args: &TrainArgs, file: &FileConfig) -> BuildConfig {
    let mut config = BuildConfig::default();
    if let Some(seed) = args.seed.or(file.seed) {
        config.seed = seed;
        config.train.seed = seed;
    }
    if let Some(k) = args.smoothing_k.or(file.smoothing_k) {
        config.lm.smoothing_k = k;
    }
    config.engine = args.engine.apply(file, config.engine);
    config
}

fn train(args: &TrainArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let dir = args.out.clone().or_else(|| file.bundle.clone()).unwrap_or_else(|| DEFAULT_BUNDLE.into());
    let corpora = args.corpora.load()?;
    let config = build_config(args, file);
    let (bundle, report) = build_bundle(&corpora, &config)?;
    let splits = Splits::new(&corpora, config.seed)?;
    bundle_dir::save_bundle(&dir, &bundle, &config, &report, &splits)?;
    print_json(out, &report)
}

fn branch_corpus(corpora: &Corpora, branch: Branch) -> &Corpus {
    match branch {
        Branch::Medical => &corpora.medical,
        Branch::Social => &corpora.social,
    }
}

fn calibrate(args: &CalibrateArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let dir = args.bundle.resolve(file);
    bundle_dir::read_manifest(&dir)?;
    let corpora = args.corpora.load()?;
    let branches = match args.branch {
        Some(b) => vec![b],
        None => vec![Branch::Medical, Branch::Social],
    };
    let mut reports = serde_json::Map::new();
    for branch in branches {
        let classifier: TextClassifier = read_json(&dir.join(branch.classifier_file()))?;
        let split = bundle_dir::read_split(&dir, branch.name())?.resolve(branch_corpus(&corpora, branch))?;
        let report = calibrate_on(&classifier, &topic_examples(&split.valid))?;
        bundle_dir::write_calibration(&dir, branch, &report)?;
        reports.insert(branch.name().into(), serde_json::to_value(report)?);
    }
    print_json(out, &reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub size: usize,
}

fn eval_classifier(args: &EvalClassifierArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let dir = args.bundle.resolve(file);
    bundle_dir::read_manifest(&dir)?;
    let corpora = args.corpora.load()?;
    let (model_file, items) = match args.model {
        ClassifierKind::Mode => {
            let test = |name: &str, corpus: &Corpus| -> Result<Corpus> {
                Ok(bundle_dir::read_split(&dir, name)?.resolve(corpus)?.test)
            };
            let medical = test("medical", &corpora.medical)?;
            let news = test("news", &corpora.news)?;
            let social = test("social", &corpora.social)?;
            (bundle_dir::MODE_CLASSIFIER.to_string(), avatarqa_core::bundle::mode_examples(&medical, &[&news, &social]))
        }
        ClassifierKind::Medical | ClassifierKind::Social => {
            let branch = if args.model == ClassifierKind::Medical { Branch::Medical } else { Branch::Social };
            let split = bundle_dir::read_split(&dir, branch.name())?.resolve(branch_corpus(&corpora, branch))?;
            (branch.classifier_file(), topic_examples(&split.test))
        }
    };
    let classifier: TextClassifier = read_json(&dir.join(model_file))?;
    print_json(out, &AccuracyReport { accuracy: classifier.accuracy(&items)?, size: items.len() })
}

fn eval_retriever(args: &EvalRetrieverArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let dir = args.bundle.resolve(file);
    let manifest = bundle_dir::read_manifest(&dir)?;
    let corpora = args.corpora.load()?;
    let corpus = branch_corpus(&corpora, args.branch);
    let index: SentenceIndex = read_json(&dir.join(args.branch.index_file()))?;
    let queries = if args.all {
        RetrievalQuery::from_corpus(corpus)
    } else {
        RetrievalQuery::from_corpus(&bundle_dir::read_split(&dir, args.branch.name())?.resolve(corpus)?.test)
    };
    let k = args.k.unwrap_or(manifest.engine.top_k);
    print_json(out, &evaluate_retriever(&index, &queries, k)?)
}

fn index(args: &IndexArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let dir = args.bundle.resolve(file);
    bundle_dir::read_manifest(&dir)?;
    let corpora = args.corpora.load()?;
    let mut sizes = serde_json::Map::new();
    for branch in [Branch::Medical, Branch::Social] {
        let index = SentenceIndex::from_corpus(branch_corpus(&corpora, branch))?;
        bundle_dir::write_index(&dir, branch, &index)?;
        sizes.insert(branch.name().into(), index.sentences.len().into());
    }
    print_json(out, &sizes)
}

/// Resolved `serve` settings.
#[derive(Debug, Clone)]
pub struct ServeSettings {
    pub bundle: PathBuf,
    pub bind: SocketAddr,
    pub log: Option<PathBuf>,
    pub engine: EngineArgs,
    pub file: FileConfig,
}

impl ServeSettings {
    pub fn resolve(args: &ServeArgs, config: Option<&Path>) -> Result<Self> {
        let file = FileConfig::load(config)?;
        let bind = args.bind.clone().or_else(|| file.bind.clone()).unwrap_or_else(|| DEFAULT_BIND.into());
        Ok(Self {
            bundle: args.bundle.resolve(&file),
            bind: bind.parse().with_context(|| format!("invalid bind address {bind:?}"))?,
            log: args.log.clone().or_else(|| file.log.clone()),
            engine: args.engine.clone(),
            file,
        })
    }

    pub fn state(&self) -> Result<AppState> {
        let manifest = bundle_dir::read_manifest(&self.bundle)?;
        let bundle = bundle_dir::load_bundle(&self.bundle, Some(self.engine.apply(&self.file, manifest.engine)))?;
        let log = match &self.log {
            Some(p) => Some(TranscriptLog::open(p).with_context(|| format!("opening log {}", p.display()))?),
            None => None,
        };
        Ok(AppState::new(bundle, log))
    }
}

/// Serves until ctrl-c or SIGTERM.
pub async fn serve(settings: ServeSettings) -> Result<()> {
    let state = Arc::new(settings.state()?);
    let listener =
        tokio::net::TcpListener::bind(settings.bind).await.with_context(|| format!("binding {}", settings.bind))?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown_signal()).await?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    tracing::info!("shutting down");
}

/// Stdin/stdout entry used by the binary.
pub fn run_stdio(cli: &Cli) -> Result<()> {
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    run(cli, stdin.lock(), &mut stdout)
}
