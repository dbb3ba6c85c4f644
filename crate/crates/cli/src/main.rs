use std::collections::BTreeMap;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use procsearch_core::engine::{
    aggregate_answers, brute_force_search, sample_for_review, search, SearchOptions, SearchRequest, SearchResponse,
};
use procsearch_core::ingest::{generate_fixtures, read_corpus, write_corpus, CorpusReader, FixtureSpec};
use procsearch_core::query::QueryError;
use procsearch_core::regression::{run_regression, RegressionReport};
use procsearch_core::wire::{compile_request, WireAnswerTable, WireMatch};
use procsearch_core::{build_index, IndexHandle, Schema};
use procsearch_server::{router, serve, ServerConfig};

#[derive(Parser)]
#[command(name = "procsearch", version, about = "Graph and slot search over annotated chemical procedures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic annotated corpus.
    GenFixtures {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every record of a corpus against its schema manifest.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Build and persist an index from a corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing index directory.
        #[arg(long)]
        force: bool,
    },
    /// Run a graph and/or slot query, printing one JSON record per match.
    Query {
        #[arg(long, required_unless_present = "oracle")]
        index: Option<PathBuf>,
        #[arg(long)]
        graph: Option<String>,
        /// JSON object mapping slot names to keywords, `?` for any value.
        #[arg(long)]
        slots: Option<String>,
        /// Print the answer table for this capture or slot instead of matches.
        #[arg(long)]
        agg: Option<String>,
        #[arg(long, requires = "agg", value_parser = clap::value_parser!(u64).range(1..))]
        sample: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate with the brute-force matcher over the corpus file.
        #[arg(long, requires = "corpus")]
        oracle: bool,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        offset: Option<usize>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        pretty: bool,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Compare indexed search with the brute-force matcher on the bundled
    /// benchmark queries plus generated ones.
    Regression {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 50)]
        random: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        pretty: bool,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenFixtures { seed, count, out } => gen_fixtures(seed, count, &out),
        Command::Validate { corpus } => validate(&corpus),
        Command::Index { corpus, out, force } => index(&corpus, &out, force),
        Command::Query {
            index,
            graph,
            slots,
            agg,
            sample,
            seed,
            oracle,
            corpus,
            offset,
            limit,
            pretty,
        } => query(QueryArgs {
            index,
            graph,
            slots,
            agg,
            sample,
            seed,
            corpus: if oracle { corpus } else { None },
            offset,
            limit,
            pretty,
        }),
        Command::Serve {
            index,
            bind,
            cors_origin,
        } => serve_cmd(&index, &bind, cors_origin),
        Command::Regression {
            index,
            corpus,
            random,
            seed,
            pretty,
        } => regression(&index, &corpus, random, seed, pretty),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn gen_fixtures(seed: u64, count: usize, out: &Path) -> CmdResult {
    let docs = generate_fixtures(&FixtureSpec::standard(seed, count)).context("generating fixtures")?;
    write_corpus(&docs, &Schema::default(), out)?;
    let sentences: usize = docs.iter().map(|d| d.sentences.len()).sum();
    println!("wrote {} procedures, {} sentences to {}", docs.len(), sentences, out.display());
    Ok(ExitCode::SUCCESS)
}

fn validate(corpus: &Path) -> CmdResult {
    let mut docs = 0usize;
    let mut sentences = 0usize;
    for doc in CorpusReader::open(corpus)? {
        let doc = doc?;
        docs += 1;
        sentences += doc.sentences.len();
    }
    println!("{}: {docs} procedures, {sentences} sentences, valid", corpus.display());
    Ok(ExitCode::SUCCESS)
}

fn index(corpus: &Path, out: &Path, force: bool) -> CmdResult {
    if out.exists() && !force {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} already exists (use --force to replace it)",
            out.display()
        )));
    }
    let (schema, docs) = read_corpus(corpus)?;
    let handle = build_index(docs, &schema)?;
    handle.persist(out, force)?;
    let stats = handle.stats();
    println!(
        "indexed {} procedures, {} sentences, {} tokens, {} terms, {} postings into {}",
        stats.procedures,
        stats.sentences,
        stats.tokens,
        stats.terms,
        stats.postings,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

struct QueryArgs {
    index: Option<PathBuf>,
    graph: Option<String>,
    slots: Option<String>,
    agg: Option<String>,
    sample: Option<u64>,
    seed: u64,
    /// Set when the oracle should answer.
    corpus: Option<PathBuf>,
    offset: Option<usize>,
    limit: Option<usize>,
    pretty: bool,
}

fn usage_for_query(e: QueryError, text: Option<&str>) -> Failure {
    let mut msg = e.to_string();
    if let (Some(p), Some(text)) = (e.position, text) {
        let col = text.get(..p).map_or(0, |head| head.chars().count());
        msg.push_str(&format!("\n  {text}\n  {}^", " ".repeat(col)));
    }
    Failure::Usage(msg)
}

fn parse_slots(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("--slots must be a JSON object of strings: {e}")))
}

fn emit<T: Serialize>(out: &mut impl Write, value: &T, pretty: bool) -> io::Result<()> {
    if pretty {
        serde_json::to_writer_pretty(&mut *out, value)?;
    } else {
        serde_json::to_writer(&mut *out, value)?;
    }
    out.write_all(b"\n")
}

fn query(args: QueryArgs) -> CmdResult {
    if args.graph.is_none() && args.slots.is_none() {
        return Err(Failure::Usage("give --graph, --slots, or both".into()));
    }
    let slots = args.slots.as_deref().map(parse_slots).transpose()?;
    let opts = SearchOptions::default();

    // The oracle reads the corpus directly and never needs the index.
    let (schema, run): (Schema, Box<dyn Fn(&SearchRequest) -> anyhow::Result<SearchResponse>>) = match &args.corpus {
        Some(corpus) => {
            let (schema, docs) = read_corpus(corpus)?;
            (schema, Box::new(move |req| Ok(brute_force_search(&docs, req, &opts)?)))
        }
        None => {
            let dir = args.index.as_ref().expect("clap requires --index without --oracle");
            let handle = IndexHandle::open(dir).with_context(|| format!("opening index {}", dir.display()))?;
            (handle.schema().clone(), Box::new(move |req| Ok(search(&handle, req, &opts)?)))
        }
    };

    let mut req = compile_request(args.graph.as_deref(), slots.as_ref(), &schema)
        .map_err(|e| usage_for_query(e, args.graph.as_deref()))?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match &args.agg {
        Some(capture) => {
            let resp = run(&req)?;
            let table = aggregate_answers(&resp, capture).map_err(|e| Failure::Usage(e.to_string()))?;
            let sample = args.sample.map(|k| sample_for_review(&table, k as usize, args.seed));
            emit(&mut out, &WireAnswerTable::new(&table, sample), args.pretty).context("writing output")?;
        }
        None => {
            req.page.offset = args.offset.unwrap_or(0);
            req.page.limit = args.limit;
            let resp = run(&req)?;
            for m in &resp.matches {
                emit(&mut out, &WireMatch::from(m), args.pretty).context("writing output")?;
            }
            log::info!("{} matches in total", resp.total);
        }
    }
    out.flush().context("writing output")?;
    Ok(ExitCode::SUCCESS)
}

fn serve_cmd(index: &Path, bind: &str, cors_origin: Option<String>) -> CmdResult {
    let handle = IndexHandle::open(index).with_context(|| format!("opening index {}", index.display()))?;
    let config = ServerConfig {
        cors_origin,
        ..Default::default()
    };
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        let addr = listener.local_addr().context("reading bound address")?;
        println!("listening on http://{addr}");
        io::stdout().flush().ok();
        serve(listener, router(Arc::new(handle), config), shutdown_signal())
            .await
            .context("serving")?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

fn print_report(report: &RegressionReport, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{:<4} {:>8} {:>8} {:>8}  query", "id", "# Proc.", "# Ans.", "matches")?;
    for row in &report.rows {
        writeln!(
            out,
            "{:<4} {:>8} {:>8} {:>8}  {}",
            row.id, row.procedures, row.answers, row.matches, row.query
        )?;
    }
    writeln!(
        out,
        "random queries checked: {}, divergences: {}",
        report.random_checked,
        report.divergences.len()
    )
}

fn regression(index: &Path, corpus: &Path, random: usize, seed: u64, json: bool) -> CmdResult {
    let handle = IndexHandle::open(index).with_context(|| format!("opening index {}", index.display()))?;
    let (_, docs) = read_corpus(corpus)?;
    let report = run_regression(&handle, &docs, random, seed, &SearchOptions::default())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if json {
        emit(&mut out, &report, true).context("writing output")?;
    } else {
        print_report(&report, &mut out).context("writing output")?;
    }
    match report.divergences.first() {
        None => Ok(ExitCode::SUCCESS),
        Some(d) => {
            eprintln!("divergence on {} ({})", d.id, d.query);
            eprintln!("  indexed: {}", d.indexed);
            eprintln!("  oracle:  {}", d.oracle);
            Ok(ExitCode::from(1))
        }
    }
}
