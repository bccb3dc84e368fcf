mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::{CliError, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use report::{Run, Verdict};

#[derive(Parser, Debug)]
#[command(name = "shellspec", version, about = "Boundary integral studies of Dirac operators with shell couplings")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    mass: Option<f64>,

    /// Refinement level of the geometry.
    #[arg(long, global = true)]
    resolution: Option<u32>,

    /// Grid size per edge, overrides the refinement level.
    #[arg(long, global = true)]
    nodes_per_edge: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Operator identity suite at the configured grid and one refinement.
    Identities,
    /// Eigenvalues in the gap.
    Spectrum,
    /// Resolvent applied to a point source.
    Resolvent,
    /// Singular value profiles and coupling diagnostics.
    Diagnostics,
    /// Identity defects or areas at several grid sizes, with observed orders.
    Converge,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Identities => "identities",
            Command::Spectrum => "spectrum",
            Command::Resolvent => "resolvent",
            Command::Diagnostics => "diagnostics",
            Command::Converge => "converge",
        }
    }
}

fn execute(command: Command, cfg: &RunConfig) -> Result<i32, CliError> {
    let mut run = Run::new(command.name(), cfg.out.clone())?;
    let result: Result<Verdict, CliError> = match command {
        Command::Identities => commands::identities(cfg, &mut run),
        Command::Spectrum => commands::spectrum(cfg, &mut run),
        Command::Resolvent => commands::resolvent(cfg, &mut run),
        Command::Diagnostics => commands::diagnostics(cfg, &mut run),
        Command::Converge => commands::converge(cfg, &mut run),
    };
    let (code, failures, error) = match result {
        Ok(v) if v.passed() => (EXIT_PASS, v.failures, None),
        Ok(v) => (EXIT_FAIL, v.failures, None),
        Err(e) => (e.exit_code(), Vec::new(), Some(e.to_string())),
    };
    for f in &failures {
        eprintln!("FAIL {f}");
    }
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    run.finish(cfg, code, &failures, error)?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let overrides = Overrides {
        threads: cli.threads,
        out: cli.out.clone(),
        seed: cli.seed,
        mass: cli.mass,
        resolution: cli.resolution,
        nodes_per_edge: cli.nodes_per_edge,
    };
    let cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    match execute(cli.command, &cfg) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
