//! Experiment orchestration behind the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrtomo_core::{
    add_gaussian_noise, lsqr_solve_with, rmse, tr_reconstruct_with_clock, Clock, CpFactors,
    ElasticNet, Image, LsqrConfig, LsqrRun, NoiseSpec, NullClock, Phantom, ReconRecord, ScanGeometry,
    Sinogram, SparseSystemTensor, TrConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Overrides, SolverKind};
use crate::formats::{write_factors, write_records, write_sinogram_csv, write_system_tensor, FormatError};
use crate::pgm::{save_image_pgm, save_image_pgm_window, PgmError, PgmFormat};
use crate::phantoms::load_phantom;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(lrtomo_core::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<lrtomo_core::Error> for RunError {
    fn from(e: lrtomo_core::Error) -> Self {
        match e {
            lrtomo_core::Error::NonFinite(_) | lrtomo_core::Error::LsqrBreakdown(_) => RunError::Numerical(e),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Phantom,
    Project,
    Reconstruct,
    SweepAngles,
    NoiseStudy,
    RankReport,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub phantom: String,
    pub size: usize,
    pub angles: Vec<usize>,
    pub beamlets: usize,
    pub solver: SolverKind,
    pub ranks: Vec<usize>,
    pub lambda: f64,
    pub rho: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub lsqr_iters: usize,
    pub atol: f64,
    pub noise: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    /// Log real elapsed seconds instead of zeros. Breaks bit-reproducibility.
    pub wall_clock: bool,
}

impl ExperimentConfig {
    /// Fills unset fields with the defaults for `cmd`. The brain image uses
    /// rank 15 and lambda 2; everything else rank 5 and lambda 1.5.
    pub fn resolve(cmd: Command, o: Overrides, wall_clock: bool) -> Result<Self, RunError> {
        let phantom = o.phantom.unwrap_or_else(|| "circle-triangle".to_owned());
        let brain = phantom == "brain";
        let sweep = cmd == Command::SweepAngles;
        let cfg = ExperimentConfig {
            size: o.size.unwrap_or(64),
            angles: o.angles.unwrap_or_else(|| if sweep { (1..=10).map(|a| a * 10).collect() } else { vec![30] }),
            beamlets: o.beamlets.unwrap_or(91),
            solver: o.solver.unwrap_or(SolverKind::Tr),
            ranks: o.ranks.unwrap_or_else(|| match cmd {
                Command::SweepAngles | Command::RankReport => (1..=12).collect(),
                _ if brain => vec![15],
                _ => vec![5],
            }),
            lambda: o.lambda.unwrap_or(if brain { 2.0 } else { 1.5 }),
            rho: o.rho.unwrap_or(if sweep { 0.0 } else { 1e-5 }),
            eps: o.eps.unwrap_or(1e-4),
            max_iters: o.max_iters.unwrap_or(100),
            lsqr_iters: o.lsqr_iters.unwrap_or(200),
            atol: o.atol.unwrap_or(1e-8),
            noise: o.noise.unwrap_or_else(|| {
                if cmd == Command::NoiseStudy { vec![0.0, 0.01, 0.02] } else { vec![0.0] }
            }),
            seed: o.seed.unwrap_or(0),
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            wall_clock,
            phantom,
        };
        cfg.validate(cmd)?;
        Ok(cfg)
    }

    fn validate(&self, cmd: Command) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Config(m.to_owned()));
        if self.angles.is_empty() || self.ranks.is_empty() || self.noise.is_empty() {
            return bad("angle, rank and noise lists must be non-empty");
        }
        if self.angles.contains(&0) {
            return bad("angle counts must be positive");
        }
        if self.noise.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("noise levels must be finite and non-negative");
        }
        if let Some(r) = self.ranks.iter().find(|&&r| r == 0 || r > self.size) {
            return Err(RunError::Config(format!("rank {r} outside 1..={}", self.size)));
        }
        ElasticNet::new(self.rho, self.lambda)?;
        if !(self.eps.is_finite() && self.eps > 0.0) || self.max_iters == 0 || self.lsqr_iters == 0 {
            return bad("eps, max-iters and lsqr-iters must be positive");
        }
        let single = matches!(cmd, Command::Reconstruct | Command::Project);
        if single && (self.angles.len() > 1 || self.noise.len() > 1) {
            return bad("this command takes a single angle count and noise level");
        }
        if cmd == Command::Reconstruct && self.ranks.len() > 1 {
            return bad("reconstruct takes a single rank");
        }
        if cmd == Command::NoiseStudy && self.angles.len() > 1 {
            return bad("noise-study takes a single angle count");
        }
        Ok(())
    }

    pub fn solver_spec(&self, kind: SolverKind, rank: usize) -> SolverSpec {
        match kind {
            SolverKind::Tr => SolverSpec::Tr {
                rank,
                lambda: self.lambda,
                rho: self.rho,
                eps: self.eps,
                max_iters: self.max_iters,
            },
            SolverKind::Lsqr => SolverSpec::Lsqr { iters: self.lsqr_iters, atol: self.atol },
        }
    }

    fn clock(&self) -> Box<dyn Clock + Send> {
        if self.wall_clock {
            let start = Instant::now();
            Box::new(move || start.elapsed().as_secs_f64())
        } else {
            Box::new(NullClock)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverSpec {
    Tr { rank: usize, lambda: f64, rho: f64, eps: f64, max_iters: usize },
    Lsqr { iters: usize, atol: f64 },
}

impl SolverSpec {
    pub fn label(&self) -> String {
        match self {
            SolverSpec::Tr { rank, .. } => format!("tr-r{rank}"),
            SolverSpec::Lsqr { .. } => "lsqr".to_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub image: Image,
    pub records: Vec<ReconRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub factors: Option<CpFactors>,
    pub rmse: f64,
}

/// TR starts from the truncated SVD of the backprojection; LSQR is
/// warm-started at the backprojection itself.
pub fn run_solver(
    l: &SparseSystemTensor,
    s: &Sinogram,
    truth: &Image,
    spec: &SolverSpec,
    clock: &mut dyn Clock,
) -> Result<SolverRun, lrtomo_core::Error> {
    match *spec {
        SolverSpec::Tr { rank, lambda, rho, eps, max_iters } => {
            let mut cfg = TrConfig::new(rank, ElasticNet::new(rho, lambda)?);
            cfg.tol = eps;
            cfg.max_iters = max_iters;
            let out = tr_reconstruct_with_clock(l, s, &cfg, Some(truth), clock)?;
            let iterations = out.iterations();
            Ok(SolverRun {
                rmse: rmse(&out.image, truth)?,
                image: out.image,
                records: out.records,
                iterations,
                converged: out.converged,
                factors: Some(out.factors),
            })
        }
        SolverSpec::Lsqr { iters, atol } => {
            let k = l.grid_size();
            let op = l.unfold_mode1();
            let x0 = l.back_project(s)?.vec_column_major();
            let t = truth.vec_column_major();
            let cfg = LsqrConfig { max_iters: iters, atol, btol: atol };
            let out = lsqr_solve_with(&op, s.values(), &cfg, LsqrRun { x0: Some(&x0), truth: Some(&t), clock })?;
            let image = Image::from_vec_column_major(k, &out.x)?;
            Ok(SolverRun {
                rmse: rmse(&image, truth)?,
                image,
                records: out.records,
                iterations: out.iterations,
                converged: out.stop != lrtomo_core::lsqr::LsqrStop::IterationLimit,
                factors: None,
            })
        }
    }
}

/// Everything one reconstruction needs: truth, operator, noisy data.
pub struct Scene {
    pub phantom: Phantom,
    pub system: SparseSystemTensor,
    pub clean: Sinogram,
    pub data: Sinogram,
}

impl Scene {
    pub fn build(phantom: Phantom, angles: usize, beamlets: usize, noise: f64, seed: u64) -> Result<Self, RunError> {
        let geometry = ScanGeometry::full_coverage(phantom.image.size(), angles, beamlets)?;
        let system = SparseSystemTensor::build(&geometry);
        Self::with_system(phantom, system, noise, seed)
    }

    pub fn with_system(phantom: Phantom, system: SparseSystemTensor, noise: f64, seed: u64) -> Result<Self, RunError> {
        let clean = system.forward_project(&phantom.image)?;
        let data = add_gaussian_noise(&clean, &NoiseSpec::new(noise, seed)?)?;
        Ok(Scene { phantom, system, clean, data })
    }
}

/// Window for 16-bit output: `[0, 1.5 max(truth)]`, widened to cover the
/// reconstruction so no pixel is clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmWindow {
    pub lo: f64,
    pub hi: f64,
    pub maxval: u16,
}

impl PgmWindow {
    pub fn for_reconstruction(recon: &Image, truth: &Image) -> Self {
        let px = recon.as_row_major();
        let lo = px.iter().copied().fold(0.0_f64, f64::min);
        let hi = px.iter().copied().fold(1.5 * truth.max_value(), f64::max);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        PgmWindow { lo, hi, maxval: 65535 }
    }

    /// Maps a stored sample back to intensity.
    pub fn decode(&self, normalized: f64) -> f64 {
        self.lo + normalized * (self.hi - self.lo)
    }

    /// Largest possible per-pixel decode error.
    pub fn quantization(&self) -> f64 {
        0.5 * (self.hi - self.lo) / f64::from(self.maxval)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ReconSidecar {
    phantom: String,
    solver: String,
    angles: usize,
    noise: f64,
    seed: u64,
    rmse: f64,
    iters: usize,
    converged: bool,
    window: PgmWindow,
}

fn noise_tag(p: f64) -> String {
    format!("{p}")
}

fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Config(format!("{}: {e}", dir.display())))
}

/// Writes `<stem>.pgm`, `<stem>.json`, `<stem>_records.csv` and, for TR,
/// `<stem>_w1.csv`/`<stem>_w2.csv`/`<stem>_meta.json`.
fn write_run(dir: &Path, stem: &str, run: &SolverRun, meta: ReconSidecar) -> Result<(), RunError> {
    let window = meta.window;
    save_image_pgm_window(&run.image, dir.join(format!("{stem}.pgm")), PgmFormat::BINARY_16, window.lo, window.hi)?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
    write_records(&run.records, dir.join(format!("{stem}_records.csv")))?;
    if let Some(f) = &run.factors {
        write_factors(f, run.iterations, dir, stem)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconSummary {
    pub rmse: f64,
    pub iters: usize,
    pub converged: bool,
}

impl std::fmt::Display for ReconSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rmse={} iters={} converged={}", self.rmse, self.iters, self.converged)
    }
}

fn reconstruct_into(
    cfg: &ExperimentConfig,
    scene: &Scene,
    spec: &SolverSpec,
    angles: usize,
    noise: f64,
    stem: &str,
) -> Result<ReconSummary, RunError> {
    let truth = &scene.phantom.image;
    let run = run_solver(&scene.system, &scene.data, truth, spec, cfg.clock().as_mut())?;
    let meta = ReconSidecar {
        phantom: scene.phantom.name.clone(),
        solver: spec.label(),
        angles,
        noise,
        seed: cfg.seed,
        rmse: run.rmse,
        iters: run.iterations,
        converged: run.converged,
        window: PgmWindow::for_reconstruction(&run.image, truth),
    };
    write_run(&cfg.out, stem, &run, meta)?;
    Ok(ReconSummary { rmse: run.rmse, iters: run.iterations, converged: run.converged })
}

pub fn recon_stem(spec: &SolverSpec, angles: usize, noise: f64) -> String {
    format!("{}_a{angles}_n{}", spec.label(), noise_tag(noise))
}

pub fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<ReconSummary, RunError> {
    ensure_dir(&cfg.out)?;
    let phantom = load_phantom(&cfg.phantom, cfg.size).map_err(RunError::Config)?;
    let (angles, noise) = (cfg.angles[0], cfg.noise[0]);
    let scene = Scene::build(phantom, angles, cfg.beamlets, noise, cfg.seed)?;
    let spec = cfg.solver_spec(cfg.solver, cfg.ranks[0]);
    reconstruct_into(cfg, &scene, &spec, angles, noise, &recon_stem(&spec, angles, noise))
}

pub fn cmd_phantom(cfg: &ExperimentConfig) -> Result<Phantom, RunError> {
    ensure_dir(&cfg.out)?;
    let phantom = load_phantom(&cfg.phantom, cfg.size).map_err(RunError::Config)?;
    let stem = phantom.name.clone();
    save_image_pgm(&phantom.image, cfg.out.join(format!("{stem}.pgm")))?;
    Ok(phantom)
}

/// Writes the system tensor triplets and the (possibly noisy) sinogram.
pub fn cmd_project(cfg: &ExperimentConfig) -> Result<(usize, usize), RunError> {
    ensure_dir(&cfg.out)?;
    let phantom = load_phantom(&cfg.phantom, cfg.size).map_err(RunError::Config)?;
    let scene = Scene::build(phantom, cfg.angles[0], cfg.beamlets, cfg.noise[0], cfg.seed)?;
    write_system_tensor(&scene.system, cfg.out.join("system_tensor.txt"))?;
    write_sinogram_csv(&scene.data, cfg.out.join("sinogram.csv"))?;
    Ok((scene.system.nnz(), scene.data.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub angles: usize,
    pub solver: String,
    pub rank: Option<usize>,
    pub rmse: Option<f64>,
    pub iters: Option<usize>,
    pub status: String,
}

/// One LSQR cell plus one TR cell per rank, for every angle count. Cells
/// run in parallel; rows come back in grid order.
pub fn cmd_sweep_angles(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, RunError> {
    ensure_dir(&cfg.out)?;
    let phantom = load_phantom(&cfg.phantom, cfg.size).map_err(RunError::Config)?;
    let noise = cfg.noise[0];
    let mut scenes = Vec::with_capacity(cfg.angles.len());
    for &a in &cfg.angles {
        scenes.push(Scene::build(phantom.clone(), a, cfg.beamlets, noise, cfg.seed)?);
    }
    let mut cells = Vec::new();
    for (si, &a) in cfg.angles.iter().enumerate() {
        cells.push((si, a, cfg.solver_spec(SolverKind::Lsqr, 0), None));
        for &r in &cfg.ranks {
            cells.push((si, a, cfg.solver_spec(SolverKind::Tr, r), Some(r)));
        }
    }
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|(si, angles, spec, rank)| {
            let scene = &scenes[*si];
            let result = run_solver(&scene.system, &scene.data, &scene.phantom.image, spec, cfg.clock().as_mut());
            let solver = match spec {
                SolverSpec::Tr { .. } => "tr",
                SolverSpec::Lsqr { .. } => "lsqr",
            };
            match result {
                Ok(run) => SweepRow {
                    angles: *angles,
                    solver: solver.to_owned(),
                    rank: *rank,
                    rmse: Some(run.rmse),
                    iters: Some(run.iterations),
                    status: if run.converged { "converged" } else { "max-iters" }.to_owned(),
                },
                Err(e) => SweepRow {
                    angles: *angles,
                    solver: solver.to_owned(),
                    rank: *rank,
                    rmse: None,
                    iters: None,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect();

    let mut w = csv::Writer::from_path(cfg.out.join("sweep_angles.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    if rows.iter().all(|r| r.rmse.is_none()) {
        return Err(RunError::Config("every sweep cell failed".to_owned()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub noise: f64,
    pub solver: String,
    pub rank: Option<usize>,
    pub rmse: f64,
    pub iters: usize,
    pub converged: bool,
}

/// TR and LSQR on one shared noisy sinogram per level.
pub fn cmd_noise_study(cfg: &ExperimentConfig) -> Result<Vec<NoiseRow>, RunError> {
    ensure_dir(&cfg.out)?;
    let phantom = load_phantom(&cfg.phantom, cfg.size).map_err(RunError::Config)?;
    let angles = cfg.angles[0];
    let geometry = ScanGeometry::full_coverage(cfg.size, angles, cfg.beamlets)?;
    let system = SparseSystemTensor::build(&geometry);
    let mut rows = Vec::new();
    for &noise in &cfg.noise {
        let scene = Scene::with_system(phantom.clone(), system.clone(), noise, cfg.seed)?;
        let mut specs = vec![cfg.solver_spec(SolverKind::Lsqr, 0)];
        specs.extend(cfg.ranks.iter().map(|&r| cfg.solver_spec(SolverKind::Tr, r)));
        for spec in specs {
            let summary = reconstruct_into(cfg, &scene, &spec, angles, noise, &recon_stem(&spec, angles, noise))?;
            let (solver, rank) = match spec {
                SolverSpec::Tr { rank, .. } => ("tr", Some(rank)),
                SolverSpec::Lsqr { .. } => ("lsqr", None),
            };
            rows.push(NoiseRow {
                noise,
                solver: solver.to_owned(),
                rank,
                rmse: summary.rmse,
                iters: summary.iters,
                converged: summary.converged,
            });
        }
    }
    let mut w = csv::Writer::from_path(cfg.out.join("noise_study.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub parameters: usize,
    pub truncation_rmse: f64,
}

/// Best rank-`R` approximation error of the phantom for each requested rank.
pub fn cmd_rank_report(cfg: &ExperimentConfig) -> Result<(usize, Vec<RankRow>), RunError> {
    ensure_dir(&cfg.out)?;
    let phantom = load_phantom(&cfg.phantom, cfg.size).map_err(RunError::Config)?;
    let rows = cfg
        .ranks
        .iter()
        .map(|&r| {
            let approx = CpFactors::from_truncated_svd(&phantom.image, r)?.compose();
            Ok(RankRow {
                rank: r,
                parameters: lrtomo_core::parameter_count(cfg.size, r),
                truncation_rmse: rmse(&approx, &phantom.image)?,
            })
        })
        .collect::<Result<Vec<_>, lrtomo_core::Error>>()?;
    let mut w = csv::Writer::from_path(cfg.out.join("rank_report.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok((phantom.measured_rank, rows))
}
