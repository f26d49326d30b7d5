use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcs3d_cli::commands::{cmd_forcing_gen, cmd_grid, cmd_lines, cmd_surfaces};
use lcs3d_cli::config::{self, RunConfig};
use lcs3d_cli::verify::{cmd_verify, Experiment};
use lcs3d_cli::{CliError, Kind, Outcome};

/// Extract hyperbolic and elliptic barriers from three-dimensional flows.
///
/// Exit codes: 0 success, 1 configuration error, 2 compute error,
/// 3 partial success (some planes or checks failed).
#[derive(Parser, Debug)]
#[command(name = "lcs3d", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration layered on the preset; a run manifest works too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// steady-abc, periodic-abc or chaotic-abc.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the flow map and strain fields on each plane.
    Grid {
        #[arg(long, value_enum, default_value = "shear")]
        kind: Kind,
    },
    /// Extract reduced lines from the grids.
    Lines {
        #[arg(long, value_enum, default_value = "shear")]
        kind: Kind,
    },
    /// Assemble barrier surfaces from the lines.
    Surfaces {
        #[arg(long, value_enum, default_value = "shear")]
        kind: Kind,
    },
    /// Run a verification experiment and write a JSON report.
    Verify {
        #[arg(value_enum)]
        experiment: Experiment,
    },
    /// Generate the chaotic forcing signal as CSV.
    ForcingGen,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = config::load(common.config.as_deref(), common.preset.as_deref())?;
    if let Some(w) = common.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve(&cli.common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {:?} workers: {e}", cfg.workers)))?;
    pool.install(|| match &cli.command {
        Command::Grid { kind } => cmd_grid(&cfg, *kind),
        Command::Lines { kind } => cmd_lines(&cfg, *kind),
        Command::Surfaces { kind } => cmd_surfaces(&cfg, *kind),
        Command::Verify { experiment } => cmd_verify(&cfg, *experiment),
        Command::ForcingGen => cmd_forcing_gen(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors; help and version are not errors.
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("lcs3d: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
