//! Command-line front end. Exit codes: 0 success, 1 failure (including a
//! benchmark run with failing cases), 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use belief_store::bench::{build_seed_corpus, load_suite, provider_by_name, run_suite, SuiteReport, PROVIDER_NAMES};
use belief_store::{
    compact, merge, Belief, BeliefId, HardFilters, MergeAction, Resolution, RetrievalConfig, RetrievalContext,
    ScopeLabel, Store, StoreError, StoreOptions, DEFAULT_MAX_BELIEFS,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::api::{router, AppState};

pub const ENV_STORE: &str = "BELIEF_STORE_PATH";
pub const ENV_LISTEN: &str = "BELIEF_STORE_LISTEN";
pub const ENV_LOG: &str = "BELIEF_STORE_LOG";
pub const ENV_RETRIEVAL: &str = "BELIEF_STORE_RETRIEVAL_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "belief-store", version, about = "Local-first structured belief store")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = ENV_STORE, default_value = "belief-store-data")]
    pub store: PathBuf,
    /// JSON file overriding BM25, boost and fuzzy parameters.
    #[arg(long, global = true, env = ENV_RETRIEVAL)]
    pub retrieval_config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = ENV_LISTEN, default_value = "127.0.0.1:7878")]
        listen: SocketAddr,
        /// Budget used when a retrieve request omits max_beliefs.
        #[arg(long, default_value_t = DEFAULT_MAX_BELIEFS)]
        max_beliefs: usize,
    },
    /// Load beliefs from a JSON array or NDJSON file.
    Ingest {
        file: PathBuf,
        /// Run each belief through merge instead of importing verbatim.
        #[arg(long)]
        merge: bool,
    },
    /// Retrieve tiered context for a query.
    Query {
        text: String,
        #[arg(long, default_value = "user:universal")]
        scope: ScopeLabel,
        #[arg(long, default_value = "u-primary")]
        user: String,
        #[arg(long, default_value_t = DEFAULT_MAX_BELIEFS)]
        budget: usize,
    },
    /// Mark OLD as replaced by NEW.
    Supersede { old: String, new: String },
    /// Inspect or settle queued conflicts.
    Conflicts {
        #[command(subcommand)]
        action: ConflictsCmd,
    },
    /// Merge near-duplicate beliefs of one user.
    Compact {
        #[arg(long)]
        user: String,
    },
    /// Change history of one belief.
    Audit { id: String },
    /// Persona prelude for a user.
    Prelude {
        #[arg(long)]
        user: String,
    },
    /// Retrieval benchmark.
    Bench {
        #[command(subcommand)]
        action: BenchCmd,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConflictsCmd {
    List {
        #[arg(long)]
        user: Option<String>,
    },
    Resolve {
        id: String,
        #[arg(value_enum)]
        resolution: ResolutionArg,
        /// Replacement belief for `manual`.
        #[arg(long, required_if_eq("resolution", "manual"))]
        belief: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResolutionArg {
    Keep,
    Accept,
    Manual,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// Run a suite directory; exits 0 iff every case passes.
    Run(BenchRun),
    /// Print a saved results file.
    Report { results: PathBuf },
}

#[derive(Debug, Args)]
pub struct BenchRun {
    suite: PathBuf,
    #[arg(long, default_value = "builtin", value_parser = clap::builder::PossibleValuesParser::new(PROVIDER_NAMES))]
    provider: String,
    /// Seed corpus file; defaults to the bundled corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses argv and runs; returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = std::env::var(ENV_LOG).unwrap_or_else(|_| "warn".into());
    let _ = env_logger::Builder::new().parse_filters(&level).try_init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn load_options(retrieval_config: Option<&Path>) -> Result<StoreOptions> {
    let mut options = StoreOptions::default();
    if let Some(path) = retrieval_config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RetrievalConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.search.validate()?;
        options.retrieval = config;
    }
    Ok(options)
}

fn open_store(cli: &Cli) -> Result<Store> {
    let options = load_options(cli.retrieval_config.as_deref())?;
    Store::open_with(&cli.store, options).map_err(|e| match e {
        StoreError::Corrupt { path, line, message } => anyhow::anyhow!(
            "store is corrupt: {} line {line}: {message}\n\
             recovery: move the file aside, or truncate the log before line {line} \
             (earlier generations are intact), then restart",
            path.display()
        ),
        other => other.into(),
    })
}

/// Beliefs from a JSON array or one belief per line.
pub fn read_beliefs(path: &Path) -> Result<Vec<Belief>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    use std::io::Write;
    let out = if json { serde_json::to_string_pretty(value)? + "\n" } else { text() };
    match std::io::stdout().lock().write_all(out.as_bytes()) {
        // A closed pipe (e.g. `| head`) is the reader's choice, not a failure.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

pub fn render_context(ctx: &RetrievalContext) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    if !ctx.persona_prelude.is_empty() {
        let _ = writeln!(s, "{}", ctx.persona_prelude);
    }
    let tiers = [("pinned", &ctx.pinned_facts), ("relevant", &ctx.relevant_beliefs), ("questions", &ctx.open_questions)];
    for (name, beliefs) in tiers {
        let _ = writeln!(s, "{name} ({})", beliefs.len());
        for b in beliefs.iter() {
            let score = ctx
                .relevant_hits
                .iter()
                .find(|h| h.belief_id == b.id)
                .map(|h| format!(" [{:.3}]", h.score))
                .unwrap_or_default();
            let _ = writeln!(s, "  {}{score}: {}", b.id, b.content);
        }
    }
    s
}

#[derive(Serialize)]
struct IngestSummary {
    read: usize,
    inserted: usize,
    reinforced: usize,
    conflicts: usize,
    skipped: usize,
    generation: u64,
}

fn run(cli: Cli) -> Result<i32> {
    let json = cli.json;
    match &cli.command {
        Command::Serve { listen, max_beliefs } => {
            let store = Arc::new(open_store(&cli)?);
            let state = AppState::new(store, *max_beliefs);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(listen)
                    .await
                    .with_context(|| format!("binding {listen}"))?;
                log::info!("listening on {listen}, store {}", cli.store.display());
                eprintln!("listening on {}", listener.local_addr()?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
            Ok(0)
        }
        Command::Ingest { file, merge: via_merge } => {
            let beliefs = read_beliefs(file)?;
            let store = open_store(&cli)?;
            let mut summary = IngestSummary {
                read: beliefs.len(),
                inserted: 0,
                reinforced: 0,
                conflicts: 0,
                skipped: 0,
                generation: 0,
            };
            if *via_merge {
                for b in beliefs {
                    match merge(&store, b)?.action {
                        MergeAction::InsertNew => summary.inserted += 1,
                        MergeAction::ReinforceExisting => summary.reinforced += 1,
                        MergeAction::QueueConflict => summary.conflicts += 1,
                        MergeAction::SkipLowConfidence => summary.skipped += 1,
                    }
                }
            } else {
                // One transaction: supersession pointers may reference later entries.
                summary.inserted = store.write(|tx| {
                    let mut n = 0;
                    for b in beliefs {
                        match tx.get(&b.id) {
                            Some(existing) if *existing == b => {}
                            Some(_) => return Err(StoreError::DuplicateMismatch(b.id.clone())),
                            None => {
                                tx.insert(b)?;
                                n += 1;
                            }
                        }
                    }
                    Ok(n)
                })?;
                summary.skipped = summary.read - summary.inserted;
            }
            summary.generation = store.generation();
            emit(json, &summary, || {
                format!(
                    "read {}, inserted {}, reinforced {}, conflicts {}, skipped {}; generation {}\n",
                    summary.read, summary.inserted, summary.reinforced, summary.conflicts, summary.skipped, summary.generation
                )
            })?;
            Ok(0)
        }
        Command::Query { text, scope, user, budget } => {
            let store = open_store(&cli)?;
            let ctx = store.retrieve(text, &HardFilters::new(user.clone(), scope.clone()), *budget);
            emit(json, &ctx, || render_context(&ctx))?;
            Ok(0)
        }
        Command::Supersede { old, new } => {
            let store = open_store(&cli)?;
            let generation = store.supersede(&BeliefId::new(old.as_str()), &BeliefId::new(new.as_str()))?;
            emit(json, &serde_json::json!({ "generation": generation }), || {
                format!("{old} superseded by {new} (generation {generation})\n")
            })?;
            Ok(0)
        }
        Command::Conflicts { action } => {
            let store = open_store(&cli)?;
            match action {
                ConflictsCmd::List { user } => {
                    let pending = store.pending_conflicts(user.as_deref());
                    emit(json, &pending, || {
                        pending
                            .iter()
                            .map(|c| {
                                let existing = store.get(&c.existing_id).map(|b| b.content).unwrap_or_default();
                                format!("{} {} stored {:?} incoming {:?}\n", c.id, c.existing_id, existing, c.incoming.content)
                            })
                            .collect()
                    })?;
                }
                ConflictsCmd::Resolve { id, resolution, belief } => {
                    let resolution = match resolution {
                        ResolutionArg::Keep => Resolution::KeepExisting,
                        ResolutionArg::Accept => Resolution::AcceptIncoming,
                        ResolutionArg::Manual => {
                            let path = belief.as_ref().expect("clap requires --belief for manual");
                            let text = fs::read_to_string(path)?;
                            Resolution::Manual {
                                belief: serde_json::from_str(&text)?,
                            }
                        }
                    };
                    let record = store.resolve_conflict(id, resolution)?;
                    emit(json, &record, || format!("{} {:?}\n", record.id, record.status))?;
                }
            }
            Ok(0)
        }
        Command::Compact { user } => {
            let store = open_store(&cli)?;
            let report = compact(&store, user)?;
            emit(json, &report, || {
                let mut s = format!("merged {} pairs, {} aliases unioned\n", report.merged.len(), report.aliases_unioned);
                for m in &report.merged {
                    s += &format!("  {} <- {} (+{})\n", m.survivor, m.absorbed, m.aliases_added.join(", "));
                }
                s
            })?;
            Ok(0)
        }
        Command::Audit { id } => {
            let store = open_store(&cli)?;
            let events = store.list_audit(&BeliefId::new(id.as_str()))?;
            emit(json, &events, || {
                events.iter().map(|e| format!("{} {:?} {}\n", e.at, e.kind, e.detail)).collect()
            })?;
            Ok(0)
        }
        Command::Prelude { user } => {
            let store = open_store(&cli)?;
            let prelude = store.prelude(user);
            emit(json, &serde_json::json!({ "user_id": user, "prelude": prelude }), || prelude.clone())?;
            Ok(0)
        }
        Command::Bench { action } => match action {
            BenchCmd::Run(args) => bench_run(args, json),
            BenchCmd::Report { results } => {
                let text = fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
                let report: SuiteReport = serde_json::from_str(&text)?;
                emit(json, &report, || report.to_text())?;
                Ok(if report.all_passed() { 0 } else { 1 })
            }
        },
    }
}

fn bench_run(args: &BenchRun, json: bool) -> Result<i32> {
    let cases = load_suite(&args.suite).with_context(|| format!("loading suite {}", args.suite.display()))?;
    if cases.is_empty() {
        bail!("suite {} has no cases", args.suite.display());
    }
    let corpus = match &args.corpus {
        Some(p) => read_beliefs(p)?,
        None => build_seed_corpus(),
    };
    let mut provider = provider_by_name(&args.provider).expect("clap restricts provider names");
    let report = run_suite(&cases, &corpus, provider.as_mut())?;
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    emit(json, &report, || {
        let mut s = String::new();
        for r in &report.results {
            s += &format!("{} {:<16} {:?}\n", if r.pass { "PASS" } else { "FAIL" }, r.case_id, r.pass_type);
        }
        s + "\n" + &report.to_text()
    })?;
    Ok(if report.all_passed() { 0 } else { 1 })
}
