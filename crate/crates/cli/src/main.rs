//! `prmbound` command-line tool.
//!
//! Exit codes: 0 on success, 2 on invalid input (including usage errors),
//! 3 on runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "prmbound",
    version,
    about = "Sample bounds and experiments for probabilistic roadmaps"
)]
struct Cli {
    /// Master seed; overrides any seed in a spec file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Samples sufficient for an α-net, from a ball measure or a clearance.
    Bound(commands::BoundArgs),
    /// Connection radius of a K-nearest-neighbor roadmap.
    KnnRadius(commands::KnnRadiusArgs),
    /// Connection radius over net radius across sample counts.
    Ratio(commands::RatioArgs),
    /// Monte Carlo success rate of a roadmap on a query.
    Mc(commands::McArgs),
    /// Certify that a sample set is an α-net.
    NetCheck(commands::NetCheckArgs),
    /// Batch grid of hallway experiments from a JSON spec.
    Table(commands::SpecArgs),
    /// Compare sampling strategies on a seeded task family.
    Schedule(commands::SpecArgs),
    /// Emit a hallway environment as JSON.
    Hallway(commands::HallwayArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = commands::Context {
        seed: cli.seed,
        format: cli.format,
    };
    let text = match cli.command {
        Command::Bound(a) => commands::bound(&ctx, a)?,
        Command::KnnRadius(a) => commands::knn_radius(&ctx, a)?,
        Command::Ratio(a) => commands::ratio(&ctx, a)?,
        Command::Mc(a) => commands::mc(&ctx, a)?,
        Command::NetCheck(a) => commands::net_check(&ctx, a)?,
        Command::Table(a) => commands::table(&ctx, a)?,
        Command::Schedule(a) => commands::schedule(&ctx, a)?,
        Command::Hallway(a) => commands::hallway(&ctx, a)?,
    };
    match cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let invalid = err.chain().any(|cause| {
        cause
            .downcast_ref::<prmbound::Error>()
            .is_some_and(prmbound::Error::is_validation)
            || cause.downcast_ref::<commands::UsageError>().is_some()
    });
    if invalid {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
