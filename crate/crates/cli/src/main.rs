//! `imex-tvd`: experiment harness for the convex IMEX schemes.

mod commands;
mod config;
mod output;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use imex_tvd::stepper::CflMode;
use imex_tvd::tab_opt::OptProblem;

use config::{parse_reconstruction, ExperimentConfig};

#[derive(Parser)]
#[command(name = "imex-tvd", version, about = "Convex TVD IMEX schemes, MOOD and test problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the run commands; they override the config file.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML (or JSON) experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Test problem (Euler case or `advect`/`vortex` for convergence).
    #[arg(long)]
    problem: Option<String>,
    /// Scheme name, or a comma-separated list.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Cells per direction.
    #[arg(long = "N", alias = "n")]
    n: Option<usize>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, alias = "M")]
    mach: Option<f64>,
    #[arg(long, value_parser = parse_cfl)]
    cfl_mode: Option<CflMode>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    /// Scalar initial data: discontinuous or smooth.
    #[arg(long)]
    ic: Option<String>,
    /// First-order upwind in space on every level.
    #[arg(long)]
    upwind_only: bool,
    /// Explicit reconstruction of the certified levels.
    #[arg(long)]
    parachute_recon: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_cfl(s: &str) -> Result<CflMode, String> {
    s.parse().map_err(|e: imex_tvd::Error| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = ExperimentConfig {
            problem: self.problem.clone(),
            scheme: self.scheme.clone(),
            schemes: self.schemes.clone(),
            n: self.n,
            dx: self.dx,
            eps: self.eps,
            mach: self.mach,
            cfl_mode: self.cfl_mode,
            nu: self.nu,
            t_final: self.tfinal,
            initial: self.ic.clone(),
            upwind_only: self.upwind_only.then_some(true),
            parachute_reconstruction: self.parachute_recon.as_deref().map(parse_reconstruction).transpose()?,
            gamma: self.gamma,
            alpha: self.alpha,
            theta: self.theta.clone(),
            seed: self.seed,
            out: self.out.clone(),
        };
        let cfg = base.merged(flags);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Scalar two-speed advection run.
    Advect(RunArgs),
    /// Isentropic Euler run.
    Euler(RunArgs),
    /// Stability certificate of a convex scheme.
    Certify {
        /// JSON tableau with `A_ex`, `A_im`, `b` (or `b_ex`/`b_im`) and `theta`.
        #[arg(long)]
        tableau: Option<PathBuf>,
        /// Built-in certified scheme instead of a file.
        #[arg(long, conflicts_with = "tableau")]
        scheme: Option<String>,
        /// λ to check; defaults to the certified maximum.
        #[arg(long)]
        lambda: Option<f64>,
        /// Also write the scheme as a tableau file.
        #[arg(long)]
        write_tableau: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multistart search for certifiable tableaux.
    Optimize {
        #[arg(long, default_value_t = 4)]
        stages: usize,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        lambda_floor: f64,
        #[arg(long, default_value_t = 4000)]
        max_evals: usize,
        /// Start from the built-in scheme of this stage count.
        #[arg(long)]
        warm_start: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// EOC tables over grid refinements.
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        /// Scalar refinement levels.
        #[arg(long, default_value_t = 5)]
        levels: usize,
        /// Vortex grid sizes per direction.
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        sizes: Vec<usize>,
    },
    /// Named experiment.
    Preset {
        /// Preset name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Advect(a) => commands::advect(&a.resolve()?),
        Command::Euler(a) => commands::euler(&a.resolve()?),
        Command::Certify { tableau, scheme, lambda, write_tableau, out } => {
            commands::certify(tableau.as_deref(), scheme.as_deref(), lambda, write_tableau.as_deref(), out.as_deref())
        }
        Command::Optimize { stages, restarts, seed, lambda_floor, max_evals, warm_start, out } => {
            let problem = OptProblem { max_evals, ..OptProblem::new(stages, lambda_floor, restarts, seed) };
            commands::optimize_cmd(&problem, warm_start, &out)
        }
        Command::Convergence { run, levels, sizes } => commands::convergence(&run.resolve()?, levels, &sizes),
        Command::Preset { name, list, run } => {
            if list || name.is_none() {
                for (n, d) in presets::PRESETS {
                    println!("{n:20} {d}");
                }
                return Ok(());
            }
            presets::run_preset(name.as_deref().unwrap_or_default(), &run.resolve()?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
