use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use relay_aoi_cli::commands::{
    cmd_inspect, cmd_simulate, cmd_solve, cmd_sweep, PolicySource,
};
use relay_aoi_cli::ExperimentConfig;

/// Age-of-information scheduling experiments for a two-source relay link.
#[derive(Debug, Parser)]
#[command(name = "relay-aoi", version)]
struct Cli {
    /// Config file of dotted `key = value` lines.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set solver.n=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the multiplier bisection; write both policies and a summary.
    Solve,
    /// Monte Carlo metrics for a policy file or a builtin executor.
    Simulate {
        /// Policy file path, `greedy`, or `lower-bound`.
        #[arg(long)]
        policy: String,
    },
    /// Evaluate every method over the configured gamma_max values.
    Sweep,
    /// Dump a two-axis slice of a policy and check its switching structure.
    Inspect {
        #[arg(long)]
        policy: PathBuf,
        /// e.g. `component=beta,theta1=1,theta2=1,x1=0,x2=0,free=y1:y2`
        #[arg(long)]
        slice: String,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for assignment in &cli.overrides {
        cfg.apply_assignment(assignment)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Solve => {
            let out = cmd_solve(&cfg)?;
            let s = &out.solution;
            if s.constraint_slack {
                println!("constraint slack at lambda={}", s.lambda_minus);
            }
            println!(
                "lambda=[{}, {}] J+={:.4} D+={:.4} J-={:.4} D-={:.4} eta={:.4} J_mix={:.4} ({:.1}s)",
                s.lambda_minus,
                s.lambda_plus,
                s.eval_plus.avg_aoi,
                s.eval_plus.avg_transmissions,
                s.eval_minus.avg_aoi,
                s.eval_minus.avg_transmissions,
                s.eta,
                s.j_mix,
                out.wall_time_s
            );
            println!("wrote {}", out.summary.display());
        }
        Command::Simulate { policy } => {
            let out = cmd_simulate(&cfg, &PolicySource::parse(&policy))?;
            let a = &out.aggregate;
            println!(
                "mean AAoI {:.4} (se {:.4}), mean transmissions {:.4} over {} seeds",
                a.mean_aoi,
                a.stderr_aoi,
                a.mean_transmissions,
                out.runs.len()
            );
            for row in &out.exact {
                println!("{} J={:.4} D={:.4} at N={}", row.label, row.avg_aoi, row.avg_transmissions, row.truncation);
            }
            println!("wrote {}", out.csv.display());
        }
        Command::Sweep => {
            let out = cmd_sweep(&cfg)?;
            let failed = out.rows.iter().filter(|r| !r.ok).count();
            println!("{} rows ({failed} failed), wrote {}", out.rows.len(), out.csv.display());
        }
        Command::Inspect { policy, slice } => {
            let out = cmd_inspect(&cfg, &policy, &slice)?;
            print!("{}", out.slice.to_csv());
            for r in &out.reports {
                println!(
                    "switching on {}: {} pairs checked, {} violations",
                    r.axis,
                    r.checked,
                    r.violations.len()
                );
            }
            println!("wrote {}", out.csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
