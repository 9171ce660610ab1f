//! Rank-`R` CP representation of a `K x K` image, `W = W1 W2^T`, and the
//! kernels that linearize the forward model in one factor.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::linalg::{svd, DenseMatrix};
use crate::system::SparseSystemTensor;

/// A `K x R` factor matrix stored column-first by rank block: entry
/// `(i, r)` lives at `r*K + i`, so the storage is exactly `vec(W_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    size: usize,
    rank: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(size: usize, rank: usize) -> Self {
        FactorMatrix {
            size,
            rank,
            data: vec![0.0; size * rank],
        }
    }

    pub fn from_vec(size: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        check_len("factor entries", size * rank, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("factor matrix"));
        }
        Ok(FactorMatrix { size, rank, data })
    }

    pub fn from_fn(size: usize, rank: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * rank);
        for r in 0..rank {
            for i in 0..size {
                data.push(f(i, r));
            }
        }
        FactorMatrix { size, rank, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.data[r * self.size + i]
    }

    pub fn column(&self, r: usize) -> &[f64] {
        &self.data[r * self.size..(r + 1) * self.size]
    }

    pub fn column_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.size..(r + 1) * self.size]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.size.max(1)).take(self.rank)
    }

    /// `vec(W_d)`.
    pub fn as_vec(&self) -> &[f64] {
        &self.data
    }
}

/// Selects which factor a design matrix is linear in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Solve for `W1` (rows of the image) with `W2` held fixed.
    First,
    /// Solve for `W2` (columns of the image) with `W1` held fixed.
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    w1: FactorMatrix,
    w2: FactorMatrix,
}

impl CpFactors {
    pub fn new(w1: FactorMatrix, w2: FactorMatrix) -> Result<Self> {
        check_len("factor rows", w1.size, w2.size)?;
        check_len("factor rank", w1.rank, w2.rank)?;
        if w1.rank == 0 {
            return Err(Error::InvalidConfig("CP rank must be at least 1"));
        }
        if w1.rank > w1.size {
            return Err(Error::InvalidConfig("CP rank must not exceed the grid size"));
        }
        Ok(CpFactors { w1, w2 })
    }

    pub fn zeros(size: usize, rank: usize) -> Result<Self> {
        Self::new(FactorMatrix::zeros(size, rank), FactorMatrix::zeros(size, rank))
    }

    /// Best rank-`rank` factorization of `image` from its truncated SVD,
    /// splitting each singular value evenly: `W1 = U sqrt(S)`, `W2 = V sqrt(S)`.
    pub fn from_truncated_svd(image: &Image, rank: usize) -> Result<Self> {
        let k = image.size();
        if rank == 0 || rank > k {
            return Err(Error::InvalidConfig("CP rank must lie in 1..=K"));
        }
        let a = DenseMatrix::from_row_major(k, k, image.as_row_major().to_vec());
        let dec = svd(&a);
        let w1 = FactorMatrix::from_fn(k, rank, |i, r| dec.u.get(i, r) * libm::sqrt(dec.sigma[r]));
        let w2 = FactorMatrix::from_fn(k, rank, |j, r| dec.v.get(j, r) * libm::sqrt(dec.sigma[r]));
        Self::new(w1, w2)
    }

    pub fn size(&self) -> usize {
        self.w1.size
    }

    pub fn rank(&self) -> usize {
        self.w1.rank
    }

    pub fn w1(&self) -> &FactorMatrix {
        &self.w1
    }

    pub fn w2(&self) -> &FactorMatrix {
        &self.w2
    }

    pub fn factor(&self, mode: Mode) -> &FactorMatrix {
        match mode {
            Mode::First => &self.w1,
            Mode::Second => &self.w2,
        }
    }

    /// The factor held fixed while solving for `mode`.
    pub fn other(&self, mode: Mode) -> &FactorMatrix {
        match mode {
            Mode::First => &self.w2,
            Mode::Second => &self.w1,
        }
    }

    pub fn set_factor(&mut self, mode: Mode, values: Vec<f64>) -> Result<()> {
        let f = FactorMatrix::from_vec(self.size(), self.rank(), values)?;
        match mode {
            Mode::First => self.w1 = f,
            Mode::Second => self.w2 = f,
        }
        Ok(())
    }

    /// `W[i,j] = sum_r W1[i,r] W2[j,r]`.
    pub fn compose(&self) -> Image {
        let (k, rank) = (self.size(), self.rank());
        let mut img = Image::zeros(k);
        let out = img.as_row_major_mut();
        for r in 0..rank {
            let (a, b) = (self.w1.column(r), self.w2.column(r));
            for i in 0..k {
                let ai = a[i];
                if ai == 0.0 {
                    continue;
                }
                for (o, bj) in out[i * k..(i + 1) * k].iter_mut().zip(b) {
                    *o += ai * bj;
                }
            }
        }
        img
    }
}

/// Dense design matrix `A` (`|rays| x K R`) with `A vec(W_d) = <L, W1 W2^T>`
/// when the other factor is `other`.
///
/// Mode one: `A[b, r K + i] = sum_j L[b,i,j] W2[j,r]`.
/// Mode two: `A[b, r K + j] = sum_i L[b,i,j] W1[i,r]`.
pub fn assemble_design(l: &SparseSystemTensor, other: &FactorMatrix, mode: Mode) -> Result<DenseMatrix> {
    let k = l.grid_size();
    check_len("fixed factor rows", k, other.size)?;
    let rank = other.rank;
    let n = k * rank;
    let mut a = DenseMatrix::zeros(l.num_rays(), n);
    for b in 0..l.num_rays() {
        let row = a.row_mut(b);
        for (i, j, len) in l.ray(b) {
            let (target, contracted) = match mode {
                Mode::First => (i, j),
                Mode::Second => (j, i),
            };
            for r in 0..rank {
                row[r * k + target] += len * other.data[r * k + contracted];
            }
        }
    }
    Ok(a)
}

/// Relative singular-value threshold used when none is supplied:
/// `1e-10 * K`, applied as `sigma > tol * sigma_max`.
pub fn default_rank_tol(size: usize) -> f64 {
    1e-10 * size as f64
}

/// Number of singular values above `tol * sigma_max`.
pub fn matrix_rank(image: &Image, tol: f64) -> usize {
    let k = image.size();
    if k == 0 {
        return 0;
    }
    let a = DenseMatrix::from_row_major(k, k, image.as_row_major().to_vec());
    let sigma = svd(&a).sigma;
    let smax = sigma[0];
    if !(smax > 0.0) {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * smax).count()
}

/// Unknowns in a rank-`rank` factorization of a `size x size` image.
pub const fn parameter_count(size: usize, rank: usize) -> usize {
    2 * size * rank
}
