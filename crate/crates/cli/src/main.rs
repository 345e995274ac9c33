#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Ctx;
use config::{resolve_seed, ConfigError, FileConfig};

/// Simulations of the density-dependent contact process.
#[derive(Parser, Debug)]
#[command(name = "dcp", version)]
struct Cli {
    /// Master seed; printed on every run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "DCP_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for replicates; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// TOML file with a table per subcommand and an optional top-level seed.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One run of the process, with trajectory log and snapshots.
    Simulate(commands::SimulateArgs),
    /// Survival probability over a grid of parameters.
    Survival(commands::SurvivalArgs),
    /// Survival over a (lambda, a) grid with common random numbers.
    Phase(commands::SurvivalArgs),
    /// Bracket the critical birth rate by bisection.
    LambdaC(commands::LambdaCArgs),
    /// Fixed points, critical payoff curve or trajectories of the mean-field ODE.
    Meanfield(commands::MeanfieldArgs),
    /// Coupled runs checking containment.
    Couple(commands::CoupleArgs),
    /// Generation, time and space statistics at a = -inf.
    Hardcore(commands::HardcoreArgs),
    /// Closed-form block bounds, doubling and empty-block probabilities.
    Blocks(commands::BlocksArgs),
    /// Regenerate an artifact from its embedded configuration and compare.
    Replay { artifact: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Replay { artifact } = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| {
            artifact
                .parent()
                .map(|p| p.join("replay"))
                .unwrap_or_else(|| PathBuf::from("replay"))
        });
        let same = commands::replay(artifact, out.clone())?;
        println!("{}: {}", artifact.display(), if same { "identical" } else { "differs" });
        if !same {
            anyhow::bail!("regenerated artifact in {} differs", out.display());
        }
        return Ok(());
    }
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = resolve_seed(cli.seed, &file)?;
    println!("seed = {seed}");
    let ctx = Ctx {
        seed,
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        file,
    };
    let written = match &cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Survival(a) => commands::survival(&ctx, a),
        Command::Phase(a) => commands::phase(&ctx, a),
        Command::LambdaC(a) => commands::lambda_c(&ctx, a),
        Command::Meanfield(a) => commands::meanfield(&ctx, a),
        Command::Couple(a) => commands::couple(&ctx, a),
        Command::Hardcore(a) => commands::hardcore(&ctx, a),
        Command::Blocks(a) => commands::blocks(&ctx, a),
        Command::Replay { .. } => unreachable!(),
    }?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = format!("{:?}", cli.command)
        .split([' ', '(', '{'])
        .next()
        .unwrap_or("")
        .to_lowercase();
    let result = match cli.workers {
        Some(0) => Err(config::config_err("workers: must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(e.into()),
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{name}: {e:#}");
            ExitCode::from(3)
        }
    }
}
