//! Low-rank tensor regression for parallel-beam tomography.
//!
//! The unknown `K x K` image is modelled as a rank-`R` CP product
//! `W = W1 W2^T` and fitted to a sinogram through the discrete Radon
//! operator by alternating elastic-net least squares. An LSQR solver over
//! the full pixel basis is provided as the reference method.
//!
//! The crate is `no_std` and needs only `alloc`; file formats, the
//! experiment runner and the command line live in the `lrtomo` crate.

#![no_std]

extern crate alloc;

pub mod cp;
pub mod enet;
pub mod error;
pub mod geometry;
pub mod image;
pub mod linalg;
pub mod lsqr;
pub mod metrics;
pub mod noise;
pub mod phantom;
pub mod record;
pub mod system;
pub mod tr;

pub use cp::{assemble_design, matrix_rank, parameter_count, CpFactors, FactorMatrix, Mode};
pub use enet::{elastic_net_penalty, solve_elastic_net_ls, ElasticNet};
pub use error::{Error, Result};
pub use geometry::{default_angles, ScanGeometry};
pub use image::{Image, Sinogram};
pub use lsqr::{lsqr_solve, lsqr_solve_with, LsqrConfig, LsqrOutcome, LsqrRun};
pub use metrics::rmse;
pub use noise::{add_gaussian_noise, NoiseSpec};
pub use phantom::{circle_triangle, Phantom};
pub use record::{Clock, NullClock, ReconRecord};
pub use system::SparseSystemTensor;
pub use tr::{objective, tr_reconstruct, tr_reconstruct_with_clock, Init, Objective, TrConfig, TrOutcome};
