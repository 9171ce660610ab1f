//! Elastic-net penalized least squares,
//!
//! ```text
//! minimize  ||A w - s||^2 + rho * ((lambda - 1)/2 ||w||_2^2 + (2 - lambda) ||w||_1)
//! ```
//!
//! solved by cyclic coordinate descent on the Gram form `H = A^T A`,
//! `q = A^T s`. Each coordinate update is the exact one-dimensional
//! minimizer, a soft-threshold:
//!
//! ```text
//! w_k = soft(q_k - sum_{l != k} H_kl w_l, c/2) / (H_kk + a)
//! ```
//!
//! with `a = rho (lambda - 1) / 2` and `c = rho (2 - lambda)`. Values landing
//! exactly on the threshold map to zero.
//!
//! Plain coordinate descent crawls on the ill-conditioned tomography
//! subproblems, so sweeps are interleaved with an active-set step: fix the
//! current support and signs, solve the reduced smooth system by Cholesky,
//! and accept the result outright when it satisfies the optimality
//! conditions, or as a new iterate when it merely lowers the objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNet {
    rho: f64,
    lambda: f64,
}

impl ElasticNet {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidRho(rho));
        }
        if !(1.0..=2.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(ElasticNet { rho, lambda })
    }

    /// No penalty at all.
    pub fn none() -> Self {
        ElasticNet { rho: 0.0, lambda: 2.0 }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Coefficient `a` of `||w||_2^2` in the penalty.
    pub fn l2_weight(&self) -> f64 {
        self.rho * (self.lambda - 1.0) / 2.0
    }

    /// Coefficient `c` of `||w||_1` in the penalty.
    pub fn l1_weight(&self) -> f64 {
        self.rho * (2.0 - self.lambda)
    }

    /// `P(w) = rho ((lambda - 1)/2 ||w||_2^2 + (2 - lambda) ||w||_1)`.
    pub fn penalty(&self, w: &[f64]) -> f64 {
        let sq: f64 = w.iter().map(|v| v * v).sum();
        let abs: f64 = w.iter().map(|v| libm::fabs(*v)).sum();
        self.rho * ((self.lambda - 1.0) / 2.0 * sq + (2.0 - self.lambda) * abs)
    }
}

/// Stand-alone penalty evaluation with validation of the mix parameter.
pub fn elastic_net_penalty(w: &[f64], rho: f64, lambda: f64) -> Result<f64> {
    Ok(ElasticNet::new(rho, lambda)?.penalty(w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdSettings {
    /// Stop once a full sweep moves no coordinate by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Try the active-set step after each of the first `polish_warmup`
    /// sweeps, then every `polish_every` sweeps. Zero disables it.
    pub polish_every: usize,
    pub polish_warmup: usize,
}

impl Default for CdSettings {
    fn default() -> Self {
        CdSettings {
            tol: 1e-10,
            max_sweeps: 10_000,
            polish_every: 10,
            polish_warmup: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdStop {
    /// Largest coordinate change in a sweep fell below the tolerance.
    Converged,
    /// An active-set solution passed the optimality check.
    Certified,
    SweepLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdReport {
    pub sweeps: usize,
    pub stop: CdStop,
}

/// Solves the penalized problem for the design `a` and data `s`, starting
/// from `w_init`.
pub fn solve_elastic_net_ls(a: &DenseMatrix, s: &[f64], cfg: &ElasticNet, w_init: &[f64]) -> Result<Vec<f64>> {
    solve_elastic_net_ls_with(a, s, cfg, w_init, &CdSettings::default()).map(|(w, _)| w)
}

pub fn solve_elastic_net_ls_with(
    a: &DenseMatrix,
    s: &[f64],
    cfg: &ElasticNet,
    w_init: &[f64],
    settings: &CdSettings,
) -> Result<(Vec<f64>, CdReport)> {
    check_len("design rows", a.rows(), s.len())?;
    check_len("initial coefficients", a.cols(), w_init.len())?;
    if a.as_slice().iter().chain(s).chain(w_init).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic-net inputs"));
    }
    let h = a.gram();
    let q = a.matvec_transpose(s);
    solve_gram(&h, &q, cfg, w_init.to_vec(), settings)
}

/// Coordinate descent on `w^T H w - 2 q^T w + a ||w||^2 + c ||w||_1`.
pub fn solve_gram(
    h: &DenseMatrix,
    q: &[f64],
    cfg: &ElasticNet,
    mut w: Vec<f64>,
    settings: &CdSettings,
) -> Result<(Vec<f64>, CdReport)> {
    let n = q.len();
    check_len("gram size", n, h.rows())?;
    check_len("coefficients", n, w.len())?;
    let l2 = cfg.l2_weight();
    let half_l1 = cfg.l1_weight() / 2.0;

    // g = H w - q
    let mut g = h.matvec(&w);
    g.iter_mut().zip(q).for_each(|(gi, qi)| *gi -= qi);

    let mut polish_enabled = settings.polish_every > 0;
    for sweep in 1..=settings.max_sweeps {
        let mut max_change = 0.0f64;
        for k in 0..n {
            let hkk = h.get(k, k);
            let denom = hkk + l2;
            let old = w[k];
            let new = if denom > 0.0 {
                soft_threshold(hkk * old - g[k], half_l1) / denom
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                w[k] = new;
                for (gi, hk) in g.iter_mut().zip(h.row(k)) {
                    *gi += delta * hk;
                }
                max_change = max_change.max(libm::fabs(delta));
            }
        }
        if !max_change.is_finite() {
            return Err(Error::NonFinite("coordinate descent iterate"));
        }
        if max_change < settings.tol {
            return Ok((w, CdReport { sweeps: sweep, stop: CdStop::Converged }));
        }
        let due = sweep <= settings.polish_warmup
            || (settings.polish_every > 0 && sweep % settings.polish_every == 0);
        if polish_enabled && due {
            match polish(h, q, l2, half_l1, &w) {
                Polish::Optimal(x) => {
                    return Ok((x, CdReport { sweeps: sweep, stop: CdStop::Certified }));
                }
                Polish::Improved(x) => {
                    w = x;
                    g = h.matvec(&w);
                    g.iter_mut().zip(q).for_each(|(gi, qi)| *gi -= qi);
                }
                Polish::NoGain => {}
                Polish::Singular => polish_enabled = false,
            }
        }
    }
    Ok((
        w,
        CdReport {
            sweeps: settings.max_sweeps,
            stop: CdStop::SweepLimit,
        },
    ))
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

enum Polish {
    Optimal(Vec<f64>),
    Improved(Vec<f64>),
    NoGain,
    Singular,
}

/// Smooth part of the objective (constant `s^T s` dropped) plus penalty.
fn gram_objective(h: &DenseMatrix, q: &[f64], l2: f64, half_l1: f64, w: &[f64]) -> f64 {
    let hw = h.matvec(w);
    let abs: f64 = w.iter().map(|v| libm::fabs(*v)).sum();
    dot(w, &hw) - 2.0 * dot(q, w) + l2 * dot(w, w) + 2.0 * half_l1 * abs
}

fn polish(h: &DenseMatrix, q: &[f64], l2: f64, half_l1: f64, w: &[f64]) -> Polish {
    let n = q.len();
    let lasso = half_l1 > 0.0;
    let support: Vec<usize> = if lasso {
        (0..n).filter(|&k| w[k] != 0.0).collect()
    } else {
        (0..n).collect()
    };
    let m = support.len();
    let mut x = vec![0.0; n];
    if m > 0 {
        let mut hs = DenseMatrix::zeros(m, m);
        for (p, &kp) in support.iter().enumerate() {
            let row = h.row(kp);
            for (r, &kr) in support.iter().enumerate() {
                *hs.get_mut(p, r) = row[kr];
            }
            *hs.get_mut(p, p) += l2;
        }
        let Some(chol) = cholesky(&hs) else {
            return Polish::Singular;
        };
        let rhs: Vec<f64> = support
            .iter()
            .map(|&k| q[k] - half_l1 * w[k].signum())
            .collect();
        let xs = cholesky_solve(&chol, &rhs);
        if xs.iter().any(|v| !v.is_finite()) {
            return Polish::Singular;
        }
        for (&k, v) in support.iter().zip(xs) {
            x[k] = v;
        }
    }

    // Optimality: active coordinates keep their signs, inactive ones have
    // |(H x - q)_k| <= c/2.
    let signs_hold = !lasso || support.iter().all(|&k| x[k] != 0.0 && x[k].signum() == w[k].signum());
    if signs_hold {
        let grad = h.matvec(&x);
        let scale = q.iter().fold(0.0f64, |acc, v| acc.max(libm::fabs(*v))).max(1.0);
        let slack = half_l1 * 1e-9 + 1e-13 * scale;
        let inactive_ok = (0..n)
            .filter(|&k| x[k] == 0.0)
            .all(|k| libm::fabs(grad[k] - q[k]) <= half_l1 + slack);
        if inactive_ok {
            return Polish::Optimal(x);
        }
    }
    if gram_objective(h, q, l2, half_l1, &x) < gram_objective(h, q, l2, half_l1, w) {
        Polish::Improved(x)
    } else {
        Polish::NoGain
    }
}
