use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cdlr_core::analytics::{
    build_report, conformity_worksheet, ingest_conformity, replay, Checker, Embedder, NaiveChecker,
    ReportOptions, TermFrequencyEmbedder,
};
use cdlr_core::sim::{apply_action, random_script, run_agent, AgentPolicy};
use cdlr_core::study::build_plan_for;
use cdlr_core::{
    read_log, session_seed, CorpusEntry, LogHeader, ManualClock, MockClient, Session, SessionLog,
    SessionState,
};
use cdlr_server::adapters::{LanguageToolChecker, RemoteEmbedder};
use cdlr_server::corpus::plan_ids;
use cdlr_server::{load_corpus, AppState, Config};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "cdlr",
    version,
    about = "Sentence-level reply assistant: server and analysis tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderKind {
    Default,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckerKind {
    Naive,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    /// Scripted users that complete every task.
    Agent,
    /// Random action streams, including rejected actions.
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the HTTP API. Settings come from the environment; flags override.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Replays session logs and writes the aggregate report.
    Analyze {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "default")]
        embedder: EmbedderKind,
        #[arg(long, value_enum, default_value = "naive")]
        checker: CheckerKind,
        #[arg(long)]
        out: PathBuf,
        /// Workflow scatter data.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Blank conformity coding sheet for the sent replies.
        #[arg(long)]
        worksheet: Option<PathBuf>,
        /// A coded conformity sheet to fold into the report.
        #[arg(long)]
        coded: Option<PathBuf>,
        #[arg(
            long,
            env = "CHECKER_URL",
            default_value = "http://localhost:8081/v2/check"
        )]
        checker_url: String,
        #[arg(long, env = "EMBED_URL")]
        embed_url: Option<String>,
        #[arg(long, env = "EMBED_MODEL", default_value = "text-embedding-3-small")]
        embed_model: String,
        #[arg(long, default_value_t = 0)]
        gmm_seed: u64,
    },
    /// Prints a participant's counterbalanced task plan.
    Plan {
        #[arg(long)]
        participant: u64,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Writes simulated session logs with the mock model.
    Simulate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        participants: u64,
        #[arg(long, value_enum, default_value = "agent")]
        kind: SimKind,
    },
    /// Replays one log and prints the final state digest and metrics.
    Replay { log: PathBuf },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve {
            port,
            corpus,
            log_dir,
            static_dir,
        } => {
            let mut config = Config::from_env()?;
            config.port = port.unwrap_or(config.port);
            config.corpus_path = corpus.unwrap_or(config.corpus_path);
            config.log_dir = log_dir.unwrap_or(config.log_dir);
            config.static_dir = static_dir.or(config.static_dir);
            let app = AppState::from_config(config)?;
            tokio::runtime::Runtime::new()?.block_on(cdlr_server::serve(app))?;
        }
        Command::Analyze {
            logs,
            corpus,
            embedder,
            checker,
            out,
            csv,
            worksheet,
            coded,
            checker_url,
            embed_url,
            embed_model,
            gmm_seed,
        } => {
            let corpus = load_corpus(&corpus, false)?;
            let texts = read_logs(&logs)?;
            let llm = Config::from_env()?.llm;
            let checker: Box<dyn Checker> = match checker {
                CheckerKind::Naive => Box::new(NaiveChecker),
                CheckerKind::External => Box::new(LanguageToolChecker::new(
                    checker_url,
                    Duration::from_secs(30),
                )),
            };
            let embedder: Box<dyn Embedder> = match embedder {
                EmbedderKind::Default => Box::new(TermFrequencyEmbedder),
                EmbedderKind::Remote => {
                    let url = embed_url
                        .or_else(|| {
                            llm.endpoint
                                .as_deref()
                                .map(cdlr_server::remote::embeddings_url)
                        })
                        .context("remote embedder needs EMBED_URL or LLM_ENDPOINT")?;
                    Box::new(RemoteEmbedder::new(
                        url,
                        embed_model,
                        llm.api_key,
                        llm.timeout,
                    ))
                }
            };
            let options = ReportOptions {
                embedder: embedder.as_ref(),
                checker: checker.as_ref(),
                gmm_seed,
                ..ReportOptions::default()
            };
            let mut report = build_report(&texts, &options)?;
            if let Some(coded) = coded {
                ingest_conformity(&mut report, &std::fs::read_to_string(coded)?)?;
            }
            std::fs::write(&out, report.to_json())?;
            if let Some(csv) = csv {
                std::fs::write(csv, report.workflow_csv())?;
            }
            if let Some(ws) = worksheet {
                std::fs::write(ws, conformity_worksheet(&report, &corpus))?;
            }
            eprintln!(
                "{} sessions analyzed, {} skipped",
                report.sessions.len(),
                report.skipped.len()
            );
        }
        Command::Plan {
            participant,
            corpus,
        } => {
            let plan = match corpus {
                Some(path) => build_plan_for(participant, &corpus_ids(&load_corpus(&path, true)?)?),
                None => cdlr_core::build_plan(participant),
            };
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
        Command::Simulate {
            corpus,
            out,
            participants,
            kind,
        } => {
            let corpus = load_corpus(&corpus, true)?;
            let written = simulate(&corpus, &out, participants, kind)?;
            eprintln!("wrote {written} logs to {}", out.display());
        }
        Command::Replay { log } => {
            let text = std::fs::read_to_string(&log)?;
            let parsed = read_log(&text)?;
            let state = SessionState::replay(&parsed.events)?;
            println!("digest {}", state.digest());
            println!("events {}", parsed.events.len());
            if state.sent {
                let metrics = replay(&text)?.metrics;
                println!("{}", serde_json::to_string_pretty(&metrics)?);
            }
        }
    }
    Ok(())
}

fn corpus_ids(corpus: &[CorpusEntry]) -> Result<[String; 9]> {
    plan_ids(corpus).context("study plans need exactly nine emails")
}

/// All `*.jsonl` files in `dir`, named by file name.
fn read_logs(dir: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, std::fs::read_to_string(&path)?));
        }
    }
    if out.is_empty() {
        bail!("no .jsonl logs in {}", dir.display());
    }
    Ok(out)
}

fn simulate(corpus: &[CorpusEntry], out: &Path, participants: u64, kind: SimKind) -> Result<usize> {
    std::fs::create_dir_all(out)?;
    let ids = corpus_ids(corpus)?;
    let client = MockClient::new();
    let mut written = 0;
    for p in 0..participants {
        let plan = build_plan_for(p, &ids);
        for task in &plan.tasks {
            let entry = &corpus[task.email_index];
            let seed = session_seed(p, task.serial_position);
            let session = match kind {
                SimKind::Agent => {
                    run_agent(AgentPolicy::for_mode(task.mode), entry, &client, seed)?
                }
                SimKind::Random => random_session(entry, task.mode, seed, &client),
            };
            let log = SessionLog {
                header: Some(LogHeader {
                    participant: p,
                    task_index: task.serial_position,
                    mode: task.mode,
                    email_id: entry.id.clone(),
                }),
                events: session.events().to_vec(),
            };
            let name = format!("p{p}_t{}_{}.jsonl", task.serial_position, task.mode);
            std::fs::write(out.join(name), log.to_jsonl())?;
            written += 1;
        }
    }
    Ok(written)
}

fn random_session(
    entry: &CorpusEntry,
    mode: cdlr_core::UiMode,
    seed: u64,
    client: &MockClient,
) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = ManualClock::new();
    let email = entry.email();
    let mut session = Session::start(
        &email,
        mode,
        entry.briefing_id(),
        seed,
        Box::new(clock.clone()),
    );
    for action in random_script(&mut rng, mode, email.sentences.len(), 40) {
        clock.advance(rng.random_range(200..4000));
        let _ = apply_action(&mut session, &action, client);
    }
    session
}
