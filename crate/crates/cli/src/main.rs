//! `wavemap`: config-driven front end for the equivariant wave map solvers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::exit;

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::Ctx;

#[derive(Parser)]
#[command(name = "wavemap", version, about = "Equivariant wave maps on surfaces of revolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply to every missing field.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config field by dot path, e.g. `--set grid.N=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Perturbation and sampling seed (overrides `stability.seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the configuration and the surface profile.
    Validate,
    /// Minimize the reduced action and write the profile.
    Stationary,
    /// Evolve the rotating stationary solution and record diagnostics.
    Evolve,
    /// Perturb the rotating solution and track its distance to the orbit.
    Stability,
    /// Geodesic, triangle-comparison and profile checks.
    GeometryCheck,
    /// Intertwining, w-transform and chart checks.
    RegularityCheck,
}

fn overrides(cli: &Cli) -> anyhow::Result<Vec<(String, Value)>> {
    let mut out = cli.set.iter().map(|s| config::parse_override(s)).collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(dir) = &cli.out {
        out.push(("output.directory".into(), Value::String(dir.display().to_string())));
    }
    if let Some(seed) = cli.seed {
        out.push(("stability.seed".into(), Value::from(seed)));
    }
    Ok(out)
}

fn main() {
    let cli = Cli::parse();
    let config = match overrides(&cli).and_then(|ov| config::load_config(cli.config.as_deref(), &ov)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit(commands::EXIT_REFUSED);
        }
    };
    let ctx = Ctx::new(config);
    let result = match cli.command {
        Command::Validate => commands::validate(&ctx),
        Command::Stationary => commands::stationary(&ctx),
        Command::Evolve => commands::evolve(&ctx),
        Command::Stability => commands::stability(&ctx),
        Command::GeometryCheck => commands::geometry_check(&ctx),
        Command::RegularityCheck => commands::regularity_check(&ctx),
    };
    match result {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            exit(commands::exit_code_for(&e));
        }
    }
}
