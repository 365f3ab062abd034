use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xva_cli::commands::{self, Overrides};
use xva_cli::config::RunConfig;
use xva_cli::engine::EngineKind;
use xva_cli::presets::{FigureId, TableId};
use xva_cli::CliError;

/// Buyer's and seller's XVA under asymmetric funding, repo and collateral
/// rates with bilateral default risk.
#[derive(Parser, Debug)]
#[command(name = "xva", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    engine: Option<EngineKind>,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Proceed when the necessary rate relations fail.
    #[arg(long, global = true)]
    allow_violations: bool,
    /// PDE space nodes (default 400).
    #[arg(long, global = true)]
    nx: Option<usize>,
    /// PDE time steps (default 400).
    #[arg(long, global = true)]
    nt: Option<usize>,
    /// Lattice steps (default 2000).
    #[arg(long, global = true)]
    steps: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Value one claim at t = 0 with one or all engines.
    Value,
    /// Buyer/seller band over the collateralization level.
    Band {
        /// Add XVA / v̂ columns.
        #[arg(long)]
        relative: bool,
    },
    /// Funding-account positions of the study's tables.
    Table {
        #[arg(value_enum)]
        id: TableId,
    },
    /// Data behind one of the study's figures.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
    },
    /// Report every rate relation.
    Validate,
    /// PDE error against the closed form on doubling grids.
    Convergence {
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --config <path>".into()))?;
    RunConfig::load(path)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let c = &cli.common;
    let o = Overrides {
        engine: c.engine,
        out: c.out.clone(),
        allow_violations: c.allow_violations,
        nx: c.nx,
        nt: c.nt,
        steps: c.steps,
    };
    match cli.cmd {
        Cmd::Value => {
            let cfg = load(c)?;
            let r = commands::value(&cfg, &o)?;
            print!("{}", r.text);
            if let Some(p) = o.out(Some(&cfg)) {
                r.table.emit(Some(&p))?;
            }
        }
        Cmd::Band { relative } => {
            let cfg = load(c)?;
            commands::band(&cfg, &o, relative)?.emit(o.out(Some(&cfg)).as_deref())?;
        }
        Cmd::Table { id } => commands::table(id, &o)?.emit(o.out(None).as_deref())?,
        Cmd::Figure { id } => commands::figure(id, &o)?.emit(o.out(None).as_deref())?,
        Cmd::Validate => {
            let (text, ok) = commands::validate(&load(c)?)?;
            print!("{text}");
            if !ok && !o.allow_violations {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Convergence { levels } => {
            let cfg = load(c)?;
            commands::convergence(&cfg, &o, levels)?.emit(o.out(Some(&cfg)).as_deref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
