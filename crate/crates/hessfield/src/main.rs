use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hessfield::config::parse_spacing;
use hessfield::{load, Action, Overrides, Runner};

#[derive(Parser)]
#[command(name = "hessfield", version, about = "Fully nonlinear Hessian-type Dirichlet solver and certificate checks")]
struct Cli {
    /// Seed for every sampling check (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the actions listed in the config
    Run { config: PathBuf },
    /// Refinement study over the given spacings, e.g. --h 1/32,1/64,1/128
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        h: Vec<String>,
    },
    /// Structure-condition certificates, e.g. --conditions F1,F2,F3,F7,regular,growth
    Check {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        conditions: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<u8> {
    let ov = Overrides { seed: cli.seed, out: cli.out };
    let outcome = match cli.cmd {
        Cmd::Run { config } => {
            let (cfg, out) = load(&config, &ov)?;
            let actions = cfg.actions.clone();
            Runner::new(&cfg, out).run(&actions)?
        }
        Cmd::Sweep { config, h } => {
            let (cfg, out) = load(&config, &ov)?;
            let hs = if h.is_empty() {
                cfg.sweep_spacings()
            } else {
                h.iter().map(|s| parse_spacing(s)).collect::<Result<Vec<_>>>().context("--h")?
            };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut r = Runner::new(&cfg, out);
            let rows = r.sweep(&hs)?;
            for row in rows {
                let order = match row.order {
                    None => "-".to_string(),
                    Some(None) => "exact".to_string(),
                    Some(Some(o)) => format!("{o:.3}"),
                };
                println!("h = {:<10.6} err_max = {:<12.4e} order = {order}", row.h, row.err_max);
            }
            return Ok(0);
        }
        Cmd::Check { config, conditions } => {
            let (mut cfg, out) = load(&config, &ov)?;
            if !conditions.is_empty() {
                cfg.checks.conditions = conditions;
            }
            Runner::new(&cfg, out).run(&[Action::CheckConditions])?
        }
    };
    for f in &outcome.failures {
        eprintln!("certificate failed: {f}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
