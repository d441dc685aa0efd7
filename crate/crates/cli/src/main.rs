mod commands;
mod instance;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdhg_lp::SolverConfig;

#[derive(Parser)]
#[command(name = "pdhg", version, about = "PDHG for linear programs, with identification and sharpness diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Target KKT residual [default: 1e-8, two-stage 1e-10]
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 300_000)]
    max_iters: usize,
    /// Step size as a fraction of 1/‖A‖₂, in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    step_scale: f64,
    /// Iterate on the original problem instead of the Ruiz + Pock–Chambolle scaled one
    #[arg(long)]
    no_precondition: bool,
    /// Write the iterate log as CSV
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    pub fn config(&self, default_tol: f64) -> anyhow::Result<SolverConfig> {
        let log_every = match std::env::var("PDHG_LOG_EVERY") {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map_err(|_| anyhow::anyhow!("PDHG_LOG_EVERY must be a positive integer, got '{v}'"))?,
            Err(_) => 1,
        };
        Ok(SolverConfig {
            kkt_tol: self.tol.unwrap_or(default_tol),
            max_iters: self.max_iters,
            step_scale: self.step_scale,
            precondition: !self.no_precondition,
            seed: self.seed,
            log_every,
            ..Default::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print status, iterations, KKT residual and objective
    Solve {
        instance: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve to high accuracy and report partition, δ, identification moment and sharpness
    TwoStage {
        instance: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// KKT curves of the house instance over grids of κ and δ
    HouseSweep {
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.5])]
        kappas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01, 0.001, 0.0])]
        deltas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Compare convergence on an instance and a randomly perturbed copy
    PerturbCompare {
        instance: String,
        #[arg(long, default_value_t = 1e-6)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Sharpness estimates: empirical, brute force and homogeneous bounds
    Sharpness {
        instance: String,
        #[arg(long, default_value_t = pdhg_lp::sharpness::DEFAULT_BRUTE_FORCE_LIMIT)]
        brute_force_limit: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve { instance, solver } => commands::solve(&instance, &solver),
        Command::TwoStage {
            instance,
            solver,
            report,
            plot,
            no_timestamp,
        } => commands::two_stage(&instance, &solver, report.as_deref(), plot.as_deref(), no_timestamp),
        Command::HouseSweep {
            kappas,
            deltas,
            out,
            solver,
            no_timestamp,
        } => commands::house_sweep(&kappas, &deltas, &out, &solver, no_timestamp),
        Command::PerturbCompare {
            instance,
            sigma,
            out,
            solver,
            no_timestamp,
        } => commands::perturb_compare(&instance, sigma, &out, &solver, no_timestamp),
        Command::Sharpness {
            instance,
            brute_force_limit,
            solver,
        } => commands::sharpness(&instance, brute_force_limit, &solver),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
