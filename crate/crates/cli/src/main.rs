use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use forage_core::analysis::DEFAULT_WINDOW_SECONDS;
use forage_core::batch::{analyze_paths, run_batch, AnalysisReport, BatchSpec};
use forage_core::{Condition, HeadlessGame, SimConfig, StrategyParams};
use forage_server::ServerConfig;

#[derive(Parser)]
#[command(name = "forage", version, about = "Two-pool group foraging: headless runs, analysis and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one headless game with agent foragers and write its log.
    Sim(SimArgs),
    /// Run a batch described by a JSON spec, then analyse it.
    Batch {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Analyse log files or directories of logs into CSVs.
    Analyze {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW_SECONDS)]
        window: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Host live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, env = "FORAGE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "FORAGE_SEED", default_value_t = 0)]
        seed: u64,
        /// JSON list of {"condition", "switch_time"} used for every session.
        #[arg(long, env = "FORAGE_SCHEDULE")]
        schedule: Option<PathBuf>,
        #[arg(long, env = "FORAGE_LOG_DIR")]
        log_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long, default_value_t = 10)]
    players: u32,
    /// Preset name with optional overrides, e.g. `social:w_soc=0.8`.
    /// Repeat to mix strategies; they are dealt out round-robin.
    #[arg(long, default_value = "food_greedy")]
    strategy: Vec<String>,
    #[arg(long, default_value_t = Condition::default())]
    condition: Condition,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fix the switch time in seconds instead of drawing it.
    #[arg(long)]
    switch_at: Option<f64>,
    #[arg(long)]
    game_seconds: Option<f64>,
    /// Log destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Ok(false) when some unit of work failed but the rest completed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sim(args) => sim(args).map(|()| true),
        Command::Batch { spec, out_dir } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut spec: BatchSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            if let Some(dir) = out_dir {
                spec.output_dir = dir;
            }
            let report = run_batch(&spec)?;
            for (index, e) in &report.run_failures {
                eprintln!("cell {index} failed: {e}");
            }
            print_failures(&report.analysis);
            eprintln!(
                "{} logs, {} analysed, written to {}",
                report.log_paths.len(),
                report.analysis.runs.len(),
                spec.output_dir.display()
            );
            Ok(!report.failed())
        }
        Command::Analyze { paths, window, out_dir } => {
            let report = analyze_paths(&paths, window);
            print_failures(&report);
            if report.runs.is_empty() {
                bail!("no log could be analysed");
            }
            report.write_csvs(&out_dir)?;
            eprintln!("{} runs analysed, written to {}", report.runs.len(), out_dir.display());
            Ok(report.failures.is_empty())
        }
        Command::Serve {
            port,
            seed,
            schedule,
            log_dir,
        } => {
            let mut config = ServerConfig {
                port,
                seed,
                log_dir,
                ..ServerConfig::default()
            };
            if let Some(path) = schedule {
                config.load_schedule(&path).map_err(anyhow::Error::msg)?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(forage_server::serve(config))?;
            Ok(true)
        }
    }
}

fn print_failures(report: &AnalysisReport) {
    for (path, e) in &report.failures {
        eprintln!("{}: {e}", path.display());
    }
}

fn sim(args: SimArgs) -> Result<()> {
    if args.players == 0 {
        bail!("--players must be at least 1");
    }
    let parsed: Vec<StrategyParams> = args
        .strategy
        .iter()
        .map(|s| s.parse().with_context(|| format!("strategy {s:?}")))
        .collect::<Result<_>>()?;
    let strategies = if parsed.len() == 1 {
        parsed
    } else {
        (0..args.players as usize).map(|i| parsed[i % parsed.len()].clone()).collect()
    };
    let mut config = SimConfig {
        n_foragers: args.players,
        condition: args.condition,
        seed: args.seed,
        ..SimConfig::default()
    };
    if let Some(t) = args.switch_at {
        config.switch_time_choices = vec![t];
    }
    if let Some(t) = args.game_seconds {
        config.game_seconds = t;
    }
    let mut labels = BTreeMap::new();
    labels.insert("condition".to_string(), args.condition.label());
    labels.insert("strategy".to_string(), args.strategy.join(";"));
    let game = HeadlessGame {
        config,
        strategies,
        run_id: format!("sim_{}_seed{}", args.condition.label(), args.seed),
        labels,
    };
    let outcome = match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            game.run(BufWriter::new(file))?
        }
        None => game.run(io::stdout().lock())?,
    };
    io::stdout().flush()?;
    eprintln!(
        "switch at {} s, spawned {}, collected {}, remaining {}",
        outcome.switch_time, outcome.spawned, outcome.collected, outcome.remaining
    );
    Ok(())
}
