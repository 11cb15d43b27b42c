use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bp2_cli::commands;
use bp2_cli::config::{Config, Overrides};
use bp2_cli::CliError;

/// Persuasion-driven comment cascades: simulate, solve and verify.
#[derive(Debug, Parser)]
#[command(name = "bp2", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (CSV; sibling files share its stem).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Base seed; replication r uses stream r of this seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long, global = true, value_name = "N")]
    replications: Option<usize>,
    /// 100 replications and widened tolerances.
    #[arg(long, global = true)]
    fast: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "BP2_THREADS", value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a tagging-policy scenario ensemble.
    Simulate,
    /// Run a fixed-probability cascade ensemble with its mean-field trace.
    Ensemble,
    /// Solve for the sender-optimal equilibrium and certify it.
    Equilibrium {
        /// Quadratic cost parameter (overrides the config).
        #[arg(long)]
        k: Option<f64>,
    },
    /// Run the built-in consistency checks.
    Verify,
    /// Simulated versus predicted trend across efforts.
    Sweep {
        /// Quadratic cost parameter (overrides the config).
        #[arg(long)]
        k: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::Equilibrium { .. } => "equilibrium",
            Command::Verify => "verify",
            Command::Sweep { .. } => "sweep",
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let k = match cli.command {
        Command::Equilibrium { k } | Command::Sweep { k } => k,
        _ => None,
    };
    let mut config = Config::load(c.config.as_deref())?;
    config.apply(Overrides {
        seed: c.seed,
        replications: c.replications,
        fast: c.fast,
        k,
    });
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cli.command.name())));
    match cli.command {
        Command::Simulate => commands::simulate(&config, &out),
        Command::Ensemble => commands::ensemble(&config, &out),
        Command::Equilibrium { .. } => commands::equilibrium(&config, &out),
        Command::Verify => commands::verify(&config, c.fast, c.out.as_deref()),
        Command::Sweep { .. } => commands::sweep(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(1)
        }
    }
}
