use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{NaiveDate, Utc};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use quickstep::classifier::ExampleSource;
use quickstep::evalkit::{self, SimConfig};
use quickstep::ids::{Group, TopicId, UserId};
use quickstep::profiler::FeedbackEvent;
use quickstep::service::{parse_browse_log, ExampleDoc};
use quickstep::store::{DataRoot, Durability, Phase, EVENTS};
use quickstep_server::{router, setup, AppState};

#[derive(Parser)]
#[command(name = "quickstep", version, about = "Topic-profile paper recommender")]
struct Cli {
    /// Data directory.
    #[arg(long, global = true, default_value = "quickstep-data")]
    data: PathBuf,
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty data directory.
    Init {
        /// Hierarchy file for the ontology group; the built-in sample otherwise.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    AddUser {
        #[arg(long)]
        user: UserId,
        #[arg(long)]
        group: Group,
    },
    /// Add a topic. The ontology group refuses unless --admin-override is given.
    AddTopic {
        #[arg(long)]
        group: Group,
        #[arg(long)]
        label: String,
        #[arg(long)]
        parent: Option<TopicId>,
        #[arg(long)]
        admin_override: bool,
    },
    /// Add a bootstrap training example to one group.
    AddExample {
        #[arg(long)]
        group: Group,
        #[arg(long)]
        url: String,
        #[arg(long)]
        topic: TopicId,
        /// Plain-text file with the document's text; the fetch adapter otherwise.
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Ingest a browse log of `<timestamp>\t<user>\t<url>` lines.
    Ingest { log: PathBuf },
    RunCycle {
        #[arg(long)]
        phase: Phase,
        #[arg(long)]
        as_of: NaiveDate,
    },
    /// Print the metric series computed from the event log.
    Evaluate {
        #[arg(long)]
        until: NaiveDate,
    },
    /// Run the synthetic two-group trial into a fresh directory.
    Simulate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 45)]
        days: usize,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = setup::load_config(cli.config.as_deref())?;
    let data = cli.data.as_path();
    match cli.command {
        Command::Init { taxonomy } => {
            setup::init(data, config, taxonomy.as_deref())?;
            println!("initialised {}", data.display());
        }
        Command::AddUser { user, group } => {
            setup::open(data, config)?.add_user(user, group, Utc::now())?;
        }
        Command::AddTopic { group, label, parent, admin_override } => {
            let id = setup::open(data, config)?.add_topic(group, &label, parent.as_ref(), admin_override, Utc::now())?;
            println!("{id}");
        }
        Command::AddExample { group, url, topic, text } => {
            let text = text
                .map(|p| std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display())))
                .transpose()?;
            let doc = ExampleDoc::Url { url, text };
            let id = setup::open(data, config)?.add_example(group, doc, &topic, ExampleSource::Bootstrap, Utc::now())?;
            println!("{id}");
        }
        Command::Ingest { log } => {
            let text = std::fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let entries = parse_browse_log(&text).with_context(|| log.display().to_string())?;
            let report = setup::open(data, config)?.ingest_browse_log(&entries)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::RunCycle { phase, as_of } => {
            let report = setup::open(data, config)?.run_cycle(phase, as_of, Utc::now())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Evaluate { until } => print!("{}", evaluate(data, until)?),
        Command::Simulate { seed, days, pairs, out } => {
            let cfg = SimConfig {
                seed,
                days,
                pairs,
                service: config,
                durability: Durability::Buffered,
                ..SimConfig::default()
            };
            let outcome = evalkit::simulate(&cfg, &out)?;
            for series in &outcome.report.series {
                if let Some(value) = series.last() {
                    println!("{}\t{}\t{value:.4}", series.group, series.metric.as_str());
                }
            }
            println!("{} events; series in {}", outcome.events, outcome.report_path.display());
        }
        Command::Serve { addr } => serve(setup::open(data, config)?, addr)?,
    }
    Ok(())
}

fn evaluate(data: &Path, until: NaiveDate) -> Result<String> {
    if !data.join(EVENTS).exists() {
        bail!("{} has no {EVENTS}", data.display());
    }
    let root = DataRoot::open(data, Durability::Sync)?;
    let log = root.log::<FeedbackEvent>(EVENTS)?;
    Ok(evalkit::evaluate(log.records(), until).to_tsv())
}

#[tokio::main]
async fn serve(service: quickstep::service::Service, addr: SocketAddr) -> Result<()> {
    let app = router(AppState::new(service, AppState::system_clock()));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
