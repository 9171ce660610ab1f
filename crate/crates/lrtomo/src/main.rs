use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrtomo::config::{load_config, Overrides, SolverKind};
use lrtomo::experiment::{
    cmd_noise_study, cmd_phantom, cmd_project, cmd_rank_report, cmd_reconstruct, cmd_sweep_angles, Command,
    ExperimentConfig, RunError,
};

#[derive(Parser)]
#[command(name = "lrtomo", version, about = "Low-rank tensor regression for parallel-beam tomography")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the ground-truth phantom as an 8-bit PGM.
    Phantom(Flags),
    /// Write the system tensor and the sinogram of the phantom.
    Project(Flags),
    /// Run one solver and write the image, log and metrics.
    Reconstruct(Flags),
    /// LSQR and TR over a grid of angle counts and ranks.
    SweepAngles(Flags),
    /// TR and LSQR on shared noisy data at several noise levels.
    NoiseStudy(Flags),
    /// Truncated-SVD error of the phantom for a list of ranks.
    RankReport(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat `key = value` file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `circle-triangle`, `brain`, or a path to a .pgm image.
    #[arg(long)]
    phantom: Option<String>,
    #[arg(long = "K")]
    size: Option<usize>,
    /// Angle count(s), comma-separated.
    #[arg(long, value_delimiter = ',')]
    angles: Option<Vec<usize>>,
    /// Detector beamlets per angle [default: 91].
    #[arg(long)]
    beamlets: Option<usize>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverKind>,
    /// CP rank(s), comma-separated.
    #[arg(long, value_delimiter = ',')]
    rank: Option<Vec<usize>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// TR stopping tolerance on the objective change [default: 1e-4].
    #[arg(long)]
    eps: Option<f64>,
    /// TR iteration cap [default: 100].
    #[arg(long)]
    max_iters: Option<usize>,
    /// LSQR iteration cap [default: 200].
    #[arg(long)]
    lsqr_iters: Option<usize>,
    /// LSQR tolerance [default: 1e-8].
    #[arg(long)]
    atol: Option<f64>,
    /// Noise fraction(s) of the sinogram maximum, comma-separated.
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record elapsed seconds in the iteration logs (output no longer reproducible).
    #[arg(long)]
    wall_clock: bool,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse()
}

impl Flags {
    fn into_config(self, cmd: Command) -> Result<ExperimentConfig, RunError> {
        let file = match &self.config {
            Some(p) => load_config(p).map_err(RunError::Config)?,
            None => Overrides::default(),
        };
        let flags = Overrides {
            phantom: self.phantom,
            size: self.size,
            angles: self.angles,
            beamlets: self.beamlets,
            solver: self.solver,
            ranks: self.rank,
            lambda: self.lambda,
            rho: self.rho,
            eps: self.eps,
            max_iters: self.max_iters,
            lsqr_iters: self.lsqr_iters,
            atol: self.atol,
            noise: self.noise,
            seed: self.seed,
            out: self.out,
        };
        ExperimentConfig::resolve(cmd, flags.over(file), self.wall_clock)
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let (cmd, flags) = match cli.command {
        Cmd::Phantom(f) => (Command::Phantom, f),
        Cmd::Project(f) => (Command::Project, f),
        Cmd::Reconstruct(f) => (Command::Reconstruct, f),
        Cmd::SweepAngles(f) => (Command::SweepAngles, f),
        Cmd::NoiseStudy(f) => (Command::NoiseStudy, f),
        Cmd::RankReport(f) => (Command::RankReport, f),
    };
    let cfg = flags.into_config(cmd)?;
    match cmd {
        Command::Phantom => {
            let p = cmd_phantom(&cfg)?;
            println!("phantom={} K={} measured_rank={}", p.name, p.image.size(), p.measured_rank);
        }
        Command::Project => {
            let (nnz, rays) = cmd_project(&cfg)?;
            println!("nnz={nnz} rays={rays}");
        }
        Command::Reconstruct => println!("{}", cmd_reconstruct(&cfg)?),
        Command::SweepAngles => {
            let rows = cmd_sweep_angles(&cfg)?;
            for r in rows {
                let rank = r.rank.map_or_else(|| "-".to_owned(), |v| v.to_string());
                let rmse = r.rmse.map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
                println!("angles={} solver={} rank={rank} rmse={rmse} status={}", r.angles, r.solver, r.status);
            }
        }
        Command::NoiseStudy => {
            for r in cmd_noise_study(&cfg)? {
                let rank = r.rank.map_or_else(|| "-".to_owned(), |v| v.to_string());
                println!(
                    "noise={} solver={} rank={rank} rmse={} iters={} converged={}",
                    r.noise, r.solver, r.rmse, r.iters, r.converged
                );
            }
        }
        Command::RankReport => {
            let (measured, rows) = cmd_rank_report(&cfg)?;
            println!("measured_rank={measured}");
            for r in rows {
                println!("rank={} parameters={} truncation_rmse={:.6}", r.rank, r.parameters, r.truncation_rmse);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
