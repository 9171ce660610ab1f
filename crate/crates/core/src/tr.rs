//! Low-rank tensor regression: alternating least squares over the two CP
//! factors of the image, each half-step an elastic-net least-squares
//! problem in the linearized forward model.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::cp::{assemble_design, CpFactors, FactorMatrix, Mode};
use crate::enet::{solve_gram, CdSettings, ElasticNet};
use crate::error::{check_len, Error, Result};
use crate::image::{Image, Sinogram};
use crate::metrics::rmse;
use crate::noise::standard_normals;
use crate::record::{Clock, NullClock, ReconRecord};
use crate::system::SparseSystemTensor;

/// Relative objective increase between sweeps that marks a run as suspect.
pub const DIVERGENCE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Rank-`R` truncated SVD of the backprojected sinogram.
    Backprojection,
    Factors(CpFactors),
    /// Independent standard normal entries from a seeded ChaCha8 stream.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrConfig {
    pub rank: usize,
    pub penalty: ElasticNet,
    pub max_iters: usize,
    pub tol: f64,
    pub init: Init,
    pub subsolver: CdSettings,
}

impl TrConfig {
    pub fn new(rank: usize, penalty: ElasticNet) -> Self {
        TrConfig {
            rank,
            penalty,
            max_iters: 100,
            tol: 1e-4,
            init: Init::Backprojection,
            subsolver: CdSettings::default(),
        }
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        if self.rank == 0 || self.rank > size {
            return Err(Error::InvalidConfig("rank must lie in 1..=K"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive"));
        }
        if let Init::Factors(f) = &self.init {
            check_len("initial factor rows", size, f.size())?;
            check_len("initial factor rank", self.rank, f.rank())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub datafit: f64,
    pub penalty: f64,
}

/// `datafit = ||<L, W1 W2^T> - s||^2`, `penalty = sum over all 2R factor
/// columns of P(w)`, `total = datafit + penalty`.
pub fn objective(l: &SparseSystemTensor, s: &Sinogram, f: &CpFactors, cfg: &ElasticNet) -> Result<Objective> {
    check_len("factor rows", l.grid_size(), f.size())?;
    let pred = l.forward_project(&f.compose())?;
    check_len("sinogram length", pred.len(), s.len())?;
    let datafit = pred
        .values()
        .iter()
        .zip(s.values())
        .map(|(p, v)| (p - v) * (p - v))
        .sum();
    let penalty = f.w1().columns().chain(f.w2().columns()).map(|c| cfg.penalty(c)).sum();
    Ok(Objective {
        total: datafit + penalty,
        datafit,
        penalty,
    })
}

#[derive(Debug, Clone)]
pub struct TrOutcome {
    pub factors: CpFactors,
    pub image: Image,
    pub records: Vec<ReconRecord>,
    /// Stopped on the objective-change criterion rather than `max_iters`.
    pub converged: bool,
    /// Some sweep raised the objective by more than [`DIVERGENCE_SLACK`].
    pub objective_increased: bool,
}

impl TrOutcome {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }
}

pub fn tr_reconstruct(
    l: &SparseSystemTensor,
    s: &Sinogram,
    cfg: &TrConfig,
    ground_truth: Option<&Image>,
) -> Result<TrOutcome> {
    tr_reconstruct_with_clock(l, s, cfg, ground_truth, &mut NullClock)
}

pub fn tr_reconstruct_with_clock(
    l: &SparseSystemTensor,
    s: &Sinogram,
    cfg: &TrConfig,
    ground_truth: Option<&Image>,
    clock: &mut dyn Clock,
) -> Result<TrOutcome> {
    let k = l.grid_size();
    cfg.validate(k)?;
    check_len("sinogram length", l.num_rays(), s.len())?;
    if let Some(t) = ground_truth {
        check_len("ground truth size", k, t.size())?;
    }

    let mut factors = match &cfg.init {
        Init::Backprojection => CpFactors::from_truncated_svd(&l.back_project(s)?, cfg.rank)?,
        Init::Factors(f) => f.clone(),
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let n = k * cfg.rank;
            let w1 = FactorMatrix::from_vec(k, cfg.rank, standard_normals(&mut rng, n))?;
            let w2 = FactorMatrix::from_vec(k, cfg.rank, standard_normals(&mut rng, n))?;
            CpFactors::new(w1, w2)?
        }
    };

    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    let log = |iter: usize, f: &CpFactors, clock: &mut dyn Clock| -> Result<(ReconRecord, Image)> {
        let obj = objective(l, s, f, &cfg.penalty)?;
        if !obj.total.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        let image = f.compose();
        let err = match ground_truth {
            Some(t) => Some(rmse(&image, t)?),
            None => None,
        };
        let rec = ReconRecord {
            iter,
            objective: obj.total,
            datafit: obj.datafit,
            penalty: obj.penalty,
            rmse: err,
            seconds: clock.elapsed_seconds(),
        };
        Ok((rec, image))
    };

    let (first, mut image) = log(0, &factors, clock)?;
    let mut prev = first.objective;
    records.push(first);
    let mut converged = false;
    let mut objective_increased = false;

    for iter in 1..=cfg.max_iters {
        for mode in [Mode::First, Mode::Second] {
            let a = assemble_design(l, factors.other(mode), mode)?;
            let h = a.gram();
            let q = a.matvec_transpose(s.values());
            let w0 = factors.factor(mode).as_vec().to_vec();
            let (w, _) = solve_gram(&h, &q, &cfg.penalty, w0, &cfg.subsolver)?;
            factors.set_factor(mode, w)?;
        }
        let (rec, img) = log(iter, &factors, clock)?;
        image = img;
        let current = rec.objective;
        records.push(rec);
        if current > prev + DIVERGENCE_SLACK * libm::fabs(prev) {
            objective_increased = true;
        }
        if libm::fabs(current - prev) < cfg.tol {
            converged = true;
            break;
        }
        prev = current;
    }

    Ok(TrOutcome {
        factors,
        image,
        records,
        converged,
        objective_increased,
    })
}
