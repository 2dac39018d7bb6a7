//! `falqon-lab`: runs feedback-based optimization experiments on MaxCut
//! ensembles and writes CSV/JSON artifacts.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::json;

use settings::*;

#[derive(Parser, Debug)]
#[command(name = "falqon-lab", version, about = "Feedback-based quantum optimization experiments for MaxCut")]
struct Cli {
    /// JSON file with settings for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "FALQON_OUT_DIR", default_value = "falqon-out")]
    out: PathBuf,
    /// Worker threads for ensemble runs (default: available parallelism).
    #[arg(long, global = true, env = "FALQON_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write regular graphs as edge-list files.
    GenGraphs(GenGraphs),
    /// Feedback runs, optionally with sampled estimates and realizations.
    Falqon(Falqon),
    /// Repeated feedback passes, each perturbed by the previous schedule.
    FalqonIter(FalqonIter),
    /// Feedback-seeded QAOA refined with BFGS.
    FalqonPlus(FalqonPlus),
    /// QAOA from random starts, with max/median/min statistics.
    QaoaMultistart(Multistart),
    /// Digitized linear annealing.
    Anneal(Anneal),
    /// Feedback run to a threshold, then a baseline with the same total time.
    Compare(Compare),
    /// Largest time step that keeps every instance monotone.
    DtScan(DtScan),
    /// Convergence-criteria report and operator norms per instance.
    Diagnose(Diagnose),
}

/// Exit status for each error category.
fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    if let Some(e) = err.downcast_ref::<falqon_core::Error>() {
        let code = match e {
            falqon_core::Error::Capacity { .. } => 3,
            falqon_core::Error::Numerical(_) => 4,
            _ => 2,
        };
        return (code, e.category());
    }
    if err.downcast_ref::<clap::Error>().is_some() {
        return (2, "usage");
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return (2, "io");
    }
    (1, "internal")
}

fn run() -> anyhow::Result<()> {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => return Err(e.into()),
    };
    let cli = Cli::from_arg_matches(&matches)?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(falqon_core::Error::Parameter("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    let file = cli.config.as_deref().map(load_config).transpose()?;
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let file = file.as_ref();
    let out = &cli.out;
    match &cli.command {
        Command::GenGraphs(a) => commands::gen_graphs(&merge(a, sub, file)?, out),
        Command::Falqon(a) => commands::falqon(&merge(a, sub, file)?, out),
        Command::FalqonIter(a) => commands::falqon_iter(&merge(a, sub, file)?, out),
        Command::FalqonPlus(a) => commands::falqon_plus(&merge(a, sub, file)?, out),
        Command::QaoaMultistart(a) => commands::multistart(&merge(a, sub, file)?, out),
        Command::Anneal(a) => commands::anneal(&merge(a, sub, file)?, out),
        Command::Compare(a) => commands::compare(&merge(a, sub, file)?, out),
        Command::DtScan(a) => commands::dt_scan(&merge(a, sub, file)?, out),
        Command::Diagnose(a) => commands::diagnose(&merge(a, sub, file)?, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, category) = exit_code(&err);
            let message = match err.downcast_ref::<clap::Error>() {
                Some(e) => e.render().to_string().trim_end().to_string(),
                None => format!("{err:#}"),
            };
            eprintln!("{}", json!({ "error": { "category": category, "message": message, "exit_code": code } }));
            ExitCode::from(code)
        }
    }
}
