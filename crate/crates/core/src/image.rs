//! Square images and sinogram vectors.
//!
//! An [`Image`] stores a `K x K` grid in row-major order: `(i, j)` is row `i`
//! (increasing downward) and column `j`. The vectorization used by the
//! system-matrix unfolding is column-first, so `vec(W)[i + j*K] = W[i, j]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(size: usize) -> Self {
        Image {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Builds an image from row-major values.
    pub fn from_row_major(size: usize, data: Vec<f64>) -> Result<Self> {
        check_len("image values", size * size, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(Image { size, data })
    }

    /// Builds an image from its column-first vectorization.
    pub fn from_vec_column_major(size: usize, v: &[f64]) -> Result<Self> {
        check_len("vectorized image", size * size, v.len())?;
        let mut img = Image::zeros(size);
        for j in 0..size {
            for i in 0..size {
                img.data[i * size + j] = v[i + j * size];
            }
        }
        if img.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(img)
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                data.push(f(i, j));
            }
        }
        Image { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] = v;
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn as_row_major_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_row_major(self) -> Vec<f64> {
        self.data
    }

    /// Column-first vectorization, `vec(W)[i + j*K] = W[i, j]`.
    pub fn vec_column_major(&self) -> Vec<f64> {
        let k = self.size;
        let mut v = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                v[i + j * k] = self.data[i * k + j];
            }
        }
        v
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }
}

/// Measurement vector `s = vec(S)` with `S` of shape `|angles| x |beamlets|`.
///
/// Ray index `b = angle_index * num_beamlets + beamlet_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    num_angles: usize,
    num_beamlets: usize,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(num_angles: usize, num_beamlets: usize) -> Self {
        Sinogram {
            num_angles,
            num_beamlets,
            values: vec![0.0; num_angles * num_beamlets],
        }
    }

    pub fn new(num_angles: usize, num_beamlets: usize, values: Vec<f64>) -> Result<Self> {
        check_len("sinogram values", num_angles * num_beamlets, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sinogram"));
        }
        Ok(Sinogram {
            num_angles,
            num_beamlets,
            values,
        })
    }

    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    pub fn num_beamlets(&self) -> usize {
        self.num_beamlets
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn ray_index(&self, angle: usize, beamlet: usize) -> usize {
        angle * self.num_beamlets + beamlet
    }

    #[inline]
    pub fn get(&self, angle: usize, beamlet: usize) -> f64 {
        self.values[self.ray_index(angle, beamlet)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
