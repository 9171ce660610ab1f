//! LSQR (Golub-Kahan bidiagonalization) for `min ||A x - s||_2`.
//!
//! A warm start `x0` is handled by solving `A d = s - A x0` from zero and
//! returning `x0 + d`, which leaves the textbook recurrence untouched.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm2, scale, LinearOperator};
use crate::metrics::rmse_slices;
use crate::record::{Clock, NullClock, ReconRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqrConfig {
    pub max_iters: usize,
    /// Relative tolerance on `||A^T r|| / (||A|| ||r||)` and on the residual
    /// relative to `||A|| ||x||`.
    pub atol: f64,
    /// Relative tolerance on `||r|| / ||b||`.
    pub btol: f64,
}

impl Default for LsqrConfig {
    fn default() -> Self {
        LsqrConfig {
            max_iters: 200,
            atol: 1e-8,
            btol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsqrStop {
    /// `x0` already solves the system (zero residual or zero `A^T r`).
    Trivial,
    /// The residual is small relative to `||A|| ||x|| + ||b||`.
    Residual,
    /// `A^T r` is small: a least-squares solution.
    LeastSquares,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LsqrOutcome {
    pub x: Vec<f64>,
    pub records: Vec<ReconRecord>,
    pub iterations: usize,
    pub stop: LsqrStop,
}

/// Optional inputs for [`lsqr_solve_with`].
pub struct LsqrRun<'a> {
    pub x0: Option<&'a [f64]>,
    /// Reference solution in the same ordering as `x`; enables RMSE logging.
    pub truth: Option<&'a [f64]>,
    pub clock: &'a mut dyn Clock,
}

pub fn lsqr_solve<A: LinearOperator + ?Sized>(op: &A, s: &[f64], cfg: &LsqrConfig) -> Result<LsqrOutcome> {
    let mut clock = NullClock;
    lsqr_solve_with(
        op,
        s,
        cfg,
        LsqrRun {
            x0: None,
            truth: None,
            clock: &mut clock,
        },
    )
}

pub fn lsqr_solve_with<A: LinearOperator + ?Sized>(
    op: &A,
    s: &[f64],
    cfg: &LsqrConfig,
    run: LsqrRun<'_>,
) -> Result<LsqrOutcome> {
    let (m, n) = (op.nrows(), op.ncols());
    check_len("right-hand side", m, s.len())?;
    if let Some(x0) = run.x0 {
        check_len("initial guess", n, x0.len())?;
    }
    if let Some(t) = run.truth {
        check_len("reference solution", n, t.len())?;
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lsqr right-hand side"));
    }
    let clock = run.clock;
    let base: Vec<f64> = run.x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);

    let mut ax = vec![0.0; m];
    let mut residual_sq = |x: &[f64]| -> f64 {
        op.apply(x, &mut ax);
        ax.iter().zip(s).map(|(p, v)| (p - v) * (p - v)).sum()
    };
    let record = |iter: usize, x: &[f64], res: f64, clock: &mut dyn Clock| -> Result<ReconRecord> {
        let err = match run.truth {
            Some(t) => Some(rmse_slices(x, t)?),
            None => None,
        };
        Ok(ReconRecord {
            iter,
            objective: res,
            datafit: res,
            penalty: 0.0,
            rmse: err,
            seconds: clock.elapsed_seconds(),
        })
    };

    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    let r0 = residual_sq(&base);
    records.push(record(0, &base, r0, clock)?);

    // u = s - A x0
    let mut u = vec![0.0; m];
    op.apply(&base, &mut u);
    u.iter_mut().zip(s).for_each(|(ui, si)| *ui = si - *ui);
    let mut beta = norm2(&u);
    let mut v = vec![0.0; n];
    let mut alpha = 0.0;
    if beta > 0.0 {
        scale(1.0 / beta, &mut u);
        op.apply_adjoint(&u, &mut v);
        alpha = norm2(&v);
    }
    if alpha == 0.0 || beta == 0.0 {
        return Ok(LsqrOutcome {
            x: base,
            records,
            iterations: 0,
            stop: LsqrStop::Trivial,
        });
    }
    scale(1.0 / alpha, &mut v);

    let bnorm = beta;
    let mut w = v.clone();
    let mut d = vec![0.0; n];
    let mut x = base.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = 0.0;
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];
    let mut stop = LsqrStop::IterationLimit;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        // u = A v - alpha u
        op.apply(&v, &mut tmp_m);
        u.iter_mut().zip(&tmp_m).for_each(|(ui, ai)| *ui = ai - alpha * *ui);
        beta = norm2(&u);
        anorm_sq += alpha * alpha + beta * beta;
        if beta > 0.0 {
            scale(1.0 / beta, &mut u);
            // v = A^T u - beta v
            op.apply_adjoint(&u, &mut tmp_n);
            v.iter_mut().zip(&tmp_n).for_each(|(vi, ai)| *vi = ai - beta * *vi);
            alpha = norm2(&v);
            if alpha > 0.0 {
                scale(1.0 / alpha, &mut v);
            }
        }

        let rho = libm::hypot(rhobar, beta);
        let c = rhobar / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= sn;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for ((di, wi), vi) in d.iter_mut().zip(w.iter_mut()).zip(&v) {
            *di += t1 * *wi;
            *wi = vi + t2 * *wi;
        }
        if !(t1.is_finite() && t2.is_finite() && phibar.is_finite()) {
            return Err(Error::LsqrBreakdown(iter));
        }
        x.iter_mut().zip(base.iter().zip(&d)).for_each(|(xi, (bi, di))| *xi = bi + di);

        let res = residual_sq(&x);
        records.push(record(iter, &x, res, clock)?);

        let anorm = libm::sqrt(anorm_sq);
        let rnorm = phibar;
        let arnorm = phibar * alpha * libm::fabs(c);
        let dnorm = libm::sqrt(dot(&d, &d));
        if rnorm <= cfg.btol * bnorm + cfg.atol * anorm * dnorm {
            stop = LsqrStop::Residual;
            break;
        }
        if arnorm <= cfg.atol * anorm * rnorm {
            stop = LsqrStop::LeastSquares;
            break;
        }
    }

    Ok(LsqrOutcome {
        x,
        records,
        iterations,
        stop,
    })
}
