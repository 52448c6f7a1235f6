use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cheeger_lab::CheegerMethod;
use cheeger_lab_cli::config::parse_stencil;
use cheeger_lab_cli::{
    cmd_cheeger, cmd_eigen, cmd_sweep, cmd_verify, parse_config, Scale, Status, VerifyOptions,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cheeger-lab",
    version,
    about = "Weighted p-Laplacian eigenpairs and discrete Cheeger constants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Dinkelbach,
    Brute,
}

#[derive(Subcommand)]
enum Command {
    /// First eigenpair of the weighted p-Laplacian.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact discrete Cheeger constant and an optimal set.
    Cheeger {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "dinkelbach")]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// p → 1 continuation with sandwich and monotonicity checks.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in property and benchmark suites.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stencil under test (l1, crofton, custom(axis[, diagonal])).
        #[arg(long, default_value = "l1")]
        stencil: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("CHEEGER_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n >= 1).with_context(|| {
            format!("CHEEGER_LAB_THREADS must be a positive integer, got `{v}`")
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Eigen { config, p, out } => cmd_eigen(&parse_config(&config)?, p, out.as_deref()),
        Command::Cheeger {
            config,
            method,
            out,
        } => {
            let method = match method {
                Method::Dinkelbach => CheegerMethod::Dinkelbach,
                Method::Brute => CheegerMethod::Brute,
            };
            cmd_cheeger(&parse_config(&config)?, method, out.as_deref())
        }
        Command::Sweep { config, out } => cmd_sweep(&parse_config(&config)?, out.as_deref()),
        Command::Verify {
            scale,
            seed,
            stencil,
            out,
        } => {
            let stencil = parse_stencil(&stencil).map_err(anyhow::Error::msg)?;
            cmd_verify(scale, &VerifyOptions { seed, stencil }, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: validation: {e:#}");
        return ExitCode::from(Status::Validation.code() as u8);
    }
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: validation: {e:#}");
            ExitCode::from(Status::Validation.code() as u8)
        }
    }
}
