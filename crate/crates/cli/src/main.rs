use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rspde_cli::commands::{run, Command};
use rspde_cli::{CliError, ExperimentConfig, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "rspde", version, about = "Pathwise experiments for retarded stochastic evolution equations")]
struct Cli {
    /// TOML experiment configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Proceed on horizons whose contraction bound exceeds the target.
    #[arg(long, global = true)]
    allow_noncontractive: bool,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve once and write the trajectory and stopping schedule.
    Simulate,
    /// Cocycle defects over a (t, tau) grid and continuity moduli.
    CocycleTest,
    /// Pathwise form against the Itô sum across grid refinements.
    OracleCompare,
    /// Pullback absorption, attraction and compactness diagnostics.
    Pullback,
    /// Print the reference configuration with every default spelled out.
    InitConfig,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.display().to_string();
    }
    if cli.allow_noncontractive {
        cfg.solver.allow_noncontractive = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("RSPDE_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("RSPDE_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::CocycleTest => Command::CocycleTest,
        Cmd::OracleCompare => Command::OracleCompare,
        Cmd::Pullback => Command::Pullback,
        Cmd::InitConfig => {
            print!("{}", ExperimentConfig::default().to_toml());
            return ExitCode::SUCCESS;
        }
    };
    let result = threads().and_then(|_| load(&cli)).and_then(|cfg| {
        let out = PathBuf::from(&cfg.output.dir);
        run(command, &cfg, &out)
    });
    match result {
        Ok(report) => {
            if !cli.quiet {
                for c in &report.checks {
                    println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("rspde: {e}");
            ExitCode::from(e.exit_code().clamp(1, EXIT_CONFIG.max(3)) as u8)
        }
    }
}
