//! The discrete Radon operator as a sparse `(ray, row, col, length)` store.
//!
//! Entries are the exact intersection lengths of each ray with each pixel,
//! found by walking the ray through the grid lines it crosses (Siddon's
//! parametric traversal). Storage is ray-major (CSR over rays), with the
//! pixels of each ray sorted by `(row, col)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::geometry::ScanGeometry;
use crate::image::{Image, Sinogram};
use crate::linalg::{LinearOperator, SparseMatrix};

/// Lengths at or below this are treated as grazing contacts and dropped.
pub const MIN_LENGTH: f64 = 1e-12;

/// Direction components this close to zero are snapped to an exact axis.
const AXIS_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub ray: usize,
    pub row: usize,
    pub col: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystemTensor {
    geometry: ScanGeometry,
    ray_ptr: Vec<usize>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    lengths: Vec<f64>,
}

impl SparseSystemTensor {
    /// Traces every ray of `geometry` through the pixel grid.
    pub fn build(geometry: &ScanGeometry) -> Self {
        let k = geometry.grid_size();
        let mut ray_ptr = Vec::with_capacity(geometry.num_rays() + 1);
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut lengths = Vec::new();
        let mut hits = Vec::with_capacity(4 * k + 4);
        let mut scratch = Vec::with_capacity(2 * k + 2);
        ray_ptr.push(0);
        for &theta in geometry.angles() {
            for tau in 0..geometry.num_beamlets() {
                hits.clear();
                trace_ray(k, theta, geometry.beamlet_offset(tau), &mut scratch, &mut hits);
                hits.sort_by_key(|h| (h.0, h.1));
                let mut last: Option<(usize, usize)> = None;
                for &(i, j, len) in hits.iter() {
                    if last == Some((i, j)) {
                        *lengths.last_mut().unwrap() += len;
                    } else {
                        rows.push(i);
                        cols.push(j);
                        lengths.push(len);
                        last = Some((i, j));
                    }
                }
                ray_ptr.push(lengths.len());
            }
        }
        SparseSystemTensor {
            geometry: geometry.clone(),
            ray_ptr,
            rows,
            cols,
            lengths,
        }
    }

    /// Reassembles a tensor from triplets, e.g. after reading it from disk.
    ///
    /// Entries must be in ascending ray order with unique `(ray, row, col)`
    /// keys and strictly positive lengths.
    pub fn from_entries(geometry: &ScanGeometry, entries: &[Entry]) -> Result<Self> {
        let k = geometry.grid_size();
        let num_rays = geometry.num_rays();
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|e| (e.ray, e.row, e.col));
        let mut ray_ptr = vec![0usize; num_rays + 1];
        for w in sorted.windows(2) {
            if (w[0].ray, w[0].row, w[0].col) == (w[1].ray, w[1].row, w[1].col) {
                return Err(Error::InvalidConfig("duplicate system tensor entry"));
            }
        }
        for e in &sorted {
            if e.ray >= num_rays || e.row >= k || e.col >= k {
                return Err(Error::InvalidConfig("system tensor entry out of range"));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::InvalidConfig("system tensor lengths must be positive"));
            }
            ray_ptr[e.ray + 1] += 1;
        }
        for b in 0..num_rays {
            ray_ptr[b + 1] += ray_ptr[b];
        }
        Ok(SparseSystemTensor {
            geometry: geometry.clone(),
            ray_ptr,
            rows: sorted.iter().map(|e| e.row).collect(),
            cols: sorted.iter().map(|e| e.col).collect(),
            lengths: sorted.iter().map(|e| e.length).collect(),
        })
    }

    pub fn geometry(&self) -> &ScanGeometry {
        &self.geometry
    }

    pub fn grid_size(&self) -> usize {
        self.geometry.grid_size()
    }

    pub fn num_rays(&self) -> usize {
        self.ray_ptr.len() - 1
    }

    /// `(|angles| * |beamlets|, K, K)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        let k = self.grid_size();
        (self.num_rays(), k, k)
    }

    pub fn nnz(&self) -> usize {
        self.lengths.len()
    }

    /// `(row, col, length)` of every pixel crossed by ray `b`.
    pub fn ray(&self, b: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let range = self.ray_ptr[b]..self.ray_ptr[b + 1];
        range.map(move |e| (self.rows[e], self.cols[e], self.lengths[e]))
    }

    /// All entries in ascending ray-major order.
    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        (0..self.num_rays()).flat_map(move |b| {
            self.ray(b).map(move |(row, col, length)| Entry {
                ray: b,
                row,
                col,
                length,
            })
        })
    }

    /// `s[b] = sum_{i,j} L[b,i,j] W[i,j]`.
    pub fn forward_project(&self, image: &Image) -> Result<Sinogram> {
        check_len("image size", self.grid_size(), image.size())?;
        let k = self.grid_size();
        let w = image.as_row_major();
        let values = (0..self.num_rays())
            .map(|b| self.ray(b).map(|(i, j, len)| len * w[i * k + j]).sum())
            .collect();
        Sinogram::new(self.geometry.num_angles(), self.geometry.num_beamlets(), values)
    }

    /// `W[i,j] = sum_b L[b,i,j] s[b]`, the exact adjoint of
    /// [`forward_project`](Self::forward_project).
    pub fn back_project(&self, sinogram: &Sinogram) -> Result<Image> {
        check_len("sinogram length", self.num_rays(), sinogram.len())?;
        let k = self.grid_size();
        let mut img = Image::zeros(k);
        let w = img.as_row_major_mut();
        for (b, &sb) in sinogram.values().iter().enumerate() {
            for (i, j, len) in self.ray(b) {
                w[i * k + j] += len * sb;
            }
        }
        Ok(img)
    }

    /// Mode-1 unfolding: a `|rays| x K^2` matrix whose column `i + j*K`
    /// matches the column-first vectorization of the image.
    pub fn unfold_mode1(&self) -> SparseMatrix {
        let k = self.grid_size();
        let mut row_ptr = Vec::with_capacity(self.num_rays() + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut buf: Vec<(usize, f64)> = Vec::new();
        row_ptr.push(0);
        for b in 0..self.num_rays() {
            buf.clear();
            buf.extend(self.ray(b).map(|(i, j, len)| (i + j * k, len)));
            buf.sort_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix::from_csr(self.num_rays(), k * k, row_ptr, col_idx, values)
    }
}

/// Operates on column-first vectorized images.
impl LinearOperator for SparseSystemTensor {
    fn nrows(&self) -> usize {
        self.num_rays()
    }

    fn ncols(&self) -> usize {
        let k = self.grid_size();
        k * k
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let k = self.grid_size();
        for (b, yb) in y.iter_mut().enumerate() {
            *yb = self.ray(b).map(|(i, j, len)| len * x[i + j * k]).sum();
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let k = self.grid_size();
        x.iter_mut().for_each(|v| *v = 0.0);
        for (b, &yb) in y.iter().enumerate() {
            for (i, j, len) in self.ray(b) {
                x[i + j * k] += len * yb;
            }
        }
    }
}

/// Appends `(row, col, length)` for each pixel crossed by the ray
/// `x cos(theta) + y sin(theta) = offset` on a `k x k` unit grid centred at
/// the origin. Rows index downward from `y = k/2`.
fn trace_ray(
    k: usize,
    theta: f64,
    offset: f64,
    alphas: &mut Vec<f64>,
    hits: &mut Vec<(usize, usize, f64)>,
) {
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let (mut dx, mut dy) = (-sin, cos);
    if libm::fabs(dx) < AXIS_SNAP {
        dx = 0.0;
        dy = dy.signum();
    } else if libm::fabs(dy) < AXIS_SNAP {
        dy = 0.0;
        dx = dx.signum();
    }
    let (px, py) = (offset * cos, offset * sin);
    let half = k as f64 / 2.0;

    // Clip the line against the grid's bounding box.
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, d) in [(px, dx), (py, dy)] {
        if d == 0.0 {
            if p < -half || p >= half {
                return;
            }
        } else {
            let a = (-half - p) / d;
            let b = (half - p) / d;
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    if hi - lo <= MIN_LENGTH {
        return;
    }

    alphas.clear();
    alphas.push(lo);
    alphas.push(hi);
    for (p, d) in [(px, dx), (py, dy)] {
        if d != 0.0 {
            for m in 1..k {
                let a = (m as f64 - half - p) / d;
                if a > lo && a < hi {
                    alphas.push(a);
                }
            }
        }
    }
    alphas.sort_by(f64::total_cmp);

    for w in alphas.windows(2) {
        let len = w[1] - w[0];
        if len <= MIN_LENGTH {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let x = px + mid * dx;
        let y = py + mid * dy;
        let col = libm::floor(x + half);
        let row = libm::floor(half - y);
        if col < 0.0 || row < 0.0 || col >= k as f64 || row >= k as f64 {
            continue;
        }
        let (i, j) = (row as usize, col as usize);
        match hits.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += len,
            _ => hits.push((i, j, len)),
        }
    }
}
