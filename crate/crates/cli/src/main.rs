//! `bdgz`: ground state, Bogoliubov spectrum, zero mode and vacuum of a
//! trapped condensate from a TOML configuration.
//!
//! Exit status: 0 success, 2 configuration, 3 convergence, 4 structural
//! anomaly (missing zero mode, instability), 5 numerical, 6 truncation
//! warning with output still written.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bdgz_core::Error;
use clap::{Args, Parser, Subcommand};

use commands::{Io, Status};
use config::{Format, RunConfig};

#[derive(Parser)]
#[command(name = "bdgz", version, about = "Bogoliubov excitations of a trapped condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct WithState {
    #[command(flatten)]
    common: Common,
    /// Condensate snapshot; defaults to `output.state`.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the GP ground state and write a snapshot to `output.state`.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Excitation frequencies and the zero-mode block.
    Spectrum {
        #[command(flatten)]
        args: WithState,
        /// Read a quadratic form (JSON) instead of building one from a state.
        #[arg(long)]
        quadform: Option<PathBuf>,
    },
    /// Lowest frequencies against the direct grid solve for several `f`.
    Converge {
        #[command(flatten)]
        args: WithState,
        #[arg(long, value_delimiter = ',', required = true)]
        f_list: Vec<usize>,
    },
    /// Paired-mode and zero-mode vacuum report.
    Vacuum {
        #[command(flatten)]
        args: WithState,
    },
    /// Compare the spectrum with the analytic or direct reference.
    OracleCheck {
        #[command(flatten)]
        args: WithState,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnsupportedParameter(_) | Error::Dimension { .. } | Error::Format(_) | Error::Io(_) => 2,
        Error::Convergence { .. } => 3,
        Error::UnsupportedStructure(_) | Error::ZeroModeMissing { .. } => 4,
        Error::Numerical(_) | Error::Domain(_) => 5,
    }
}

/// Dense factorizations run sequentially so that results do not depend on
/// the thread count; `BDGZ_THREADS` caps the rayon pool used for assembly
/// and the reference solves.
fn configure_threads() -> Result<(), Error> {
    faer::set_global_parallelism(faer::Par::Seq);
    if let Ok(v) = std::env::var("BDGZ_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::Config(format!("BDGZ_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Config("BDGZ_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Status, Error> {
    configure_threads()?;
    let setup = |c: &Common| -> Result<(RunConfig, Io), Error> {
        let cfg = RunConfig::load(&c.config)?;
        let io = Io { out: c.out.clone(), format: c.format.unwrap_or(cfg.output.format) };
        Ok((cfg, io))
    };
    match &cli.command {
        Command::Solve { common } => {
            let (cfg, io) = setup(common)?;
            commands::solve(&cfg, &io)
        }
        Command::Spectrum { args, quadform } => {
            let (cfg, io) = setup(&args.common)?;
            commands::spectrum(&cfg, args.state.as_deref(), quadform.as_deref(), &io)
        }
        Command::Converge { args, f_list } => {
            let (cfg, io) = setup(&args.common)?;
            commands::converge(&cfg, args.state.as_deref(), f_list, &io)
        }
        Command::Vacuum { args } => {
            let (cfg, io) = setup(&args.common)?;
            commands::vacuum(&cfg, args.state.as_deref(), &io)
        }
        Command::OracleCheck { args } => {
            let (cfg, io) = setup(&args.common)?;
            commands::oracle_check(&cfg, args.state.as_deref(), &io)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Structural) => ExitCode::from(4),
        Ok(Status::Truncation) => ExitCode::from(6),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
