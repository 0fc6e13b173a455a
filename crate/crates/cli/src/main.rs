//! `hjblab`: residuals, certification, viscosity checks, DP estimates and
//! scripted reproductions from the command line.
//!
//! Exit codes: 0 success or ACCEPT, 2 usage or configuration error,
//! 3 verification failure.

mod commands;
mod report;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::report::OutDir;

#[derive(Parser, Debug)]
#[command(name = "hjblab", version, about = "Verification lab for the HJB equation of one-dimensional growth models")]
struct Cli {
    /// Output directory [default: $HJBLAB_OUT, else ./hjblab-out]
    #[arg(long, global = true, env = "HJBLAB_OUT")]
    out: Option<PathBuf>,
    /// Seed recorded in reports and used by any randomized step
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArg {
    /// Model JSON file, or a preset name (prop1, prop2, theorem2)
    #[arg(long)]
    pub model: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// HJB residual profile of a candidate on a grid
    Residual {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        candidate: String,
        /// MIN:MAX:N[:log]
        #[arg(long, default_value = "0.1:10:200:log")]
        grid: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Roll out the candidate's policy and accept or reject it
    Certify {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        candidate: String,
        #[arg(long)]
        k0: f64,
        /// Default 30/rho
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = hjblab::rollout::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_r: f64,
        /// Default 1e-4·max(1, |V(k0)|)
        #[arg(long)]
        tol_g: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tol_t: f64,
    },
    /// Viscosity sub/supersolution tests on a grid (candidate kinks are added)
    Viscosity {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        candidate: String,
        #[arg(long, default_value = "0.1:10:100")]
        grid: String,
        #[arg(long, default_value_t = hjblab::viscosity::DEFAULT_TOL)]
        tol: f64,
    },
    /// Backward-induction estimate of the value function
    Dp {
        #[command(flatten)]
        model: ModelArg,
        /// State grid MIN:MAX:N[:log]
        #[arg(long, default_value = "0.01:4:400")]
        k_grid: String,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[arg(long, default_value_t = 8.0)]
        c_max: f64,
        #[arg(long, default_value_t = 401)]
        c_grid: usize,
        #[arg(long)]
        c_floor: Option<f64>,
        #[arg(long, value_enum, default_value_t = TerminalArg::Zero)]
        terminal: TerminalArg,
        /// Points at which to report the estimate (repeatable)
        #[arg(long = "probe", default_values_t = [1.0])]
        probes: Vec<f64>,
    },
    /// Check the standing assumptions and the sufficient conditions
    Audit {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Scripted reproduction with every expectation checked
    Reproduce {
        #[arg(value_enum)]
        name: Reproduction,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum TerminalArg {
    Zero,
    Bound,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Reproduction {
    Prop1,
    Prop2,
    #[value(name = "theorem2-demo")]
    Theorem2Demo,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let out = OutDir::create(cli.out.unwrap_or_else(|| PathBuf::from("hjblab-out")))?;
    let seed = cli.seed;
    match cli.command {
        Command::Residual { model, candidate, grid, tol } => {
            commands::residual(&out, seed, &model, &candidate, &grid, tol)
        }
        Command::Certify { model, candidate, k0, horizon, dt, tol_r, tol_g, tol_t } => {
            let tols = hjblab::rollout::Tolerances { tol_r, tol_g, tol_t };
            commands::certify(&out, seed, &model, &candidate, k0, horizon, dt, &tols)
        }
        Command::Viscosity { model, candidate, grid, tol } => {
            commands::viscosity(&out, seed, &model, &candidate, &grid, tol)
        }
        Command::Dp { model, k_grid, dt, horizon, c_max, c_grid, c_floor, terminal, probes } => {
            let terminal = match terminal {
                TerminalArg::Zero => hjblab::dp_oracle::Terminal::Zero,
                TerminalArg::Bound => hjblab::dp_oracle::Terminal::Bound,
            };
            let cfg = hjblab::dp_oracle::DPConfig {
                dt,
                horizon,
                k_grid: commands::parse_grid(&k_grid)?,
                c_max,
                c_grid_size: c_grid,
                terminal,
                c_floor,
            };
            commands::dp(&out, seed, &model, cfg, &probes)
        }
        Command::Audit { model } => commands::audit(&out, seed, &model),
        Command::Reproduce { name } => reproduce::run(&out, seed, name),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
