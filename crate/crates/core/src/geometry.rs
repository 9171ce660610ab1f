//! Parallel-beam scan geometry.
//!
//! The object grid is `K x K` unit pixels centred at the origin. A ray is the
//! line `x cos(theta) + y sin(theta) = t` where `t` is the signed detector
//! offset of its beamlet. Beamlets sit at the centres of `|T|` equal bins
//! spanning `[-h, h]`, `h` being the detector half-width.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanGeometry {
    grid_size: usize,
    angles: Vec<f64>,
    num_beamlets: usize,
    detector_halfwidth: f64,
}

impl ScanGeometry {
    pub fn new(
        grid_size: usize,
        angles: Vec<f64>,
        num_beamlets: usize,
        detector_halfwidth: f64,
    ) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::EmptyGrid);
        }
        if angles.is_empty() {
            return Err(Error::NoAngles);
        }
        if num_beamlets == 0 {
            return Err(Error::NoBeamlets);
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("scan angles"));
        }
        if !(detector_halfwidth.is_finite() && detector_halfwidth > 0.0) {
            return Err(Error::InvalidConfig("detector half-width must be positive"));
        }
        Ok(ScanGeometry {
            grid_size,
            angles,
            num_beamlets,
            detector_halfwidth,
        })
    }

    /// Unit-spaced detector: half-width `|T| / 2`.
    pub fn with_unit_detector(grid_size: usize, angles: Vec<f64>, num_beamlets: usize) -> Result<Self> {
        Self::new(grid_size, angles, num_beamlets, num_beamlets as f64 / 2.0)
    }

    /// The experimental layout: `num_angles` angles from [`default_angles`],
    /// a unit-spaced detector, and a beamlet count large enough that every
    /// angle covers the whole grid (`|T| > sqrt(2) K`).
    pub fn full_coverage(grid_size: usize, num_angles: usize, num_beamlets: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::EmptyGrid);
        }
        if (num_beamlets as f64) <= SQRT_2 * grid_size as f64 {
            return Err(Error::InvalidConfig(
                "full coverage needs more than sqrt(2)*K beamlets",
            ));
        }
        Self::with_unit_detector(grid_size, default_angles(num_angles), num_beamlets)
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn num_beamlets(&self) -> usize {
        self.num_beamlets
    }

    pub fn num_rays(&self) -> usize {
        self.angles.len() * self.num_beamlets
    }

    pub fn detector_halfwidth(&self) -> f64 {
        self.detector_halfwidth
    }

    /// True when the detector spans the grid's circumscribed circle.
    pub fn covers_grid(&self) -> bool {
        self.detector_halfwidth >= SQRT_2 * self.grid_size as f64 / 2.0
    }

    /// Signed offset of beamlet `tau` (bin centre).
    pub fn beamlet_offset(&self, tau: usize) -> f64 {
        let h = self.detector_halfwidth;
        -h + (tau as f64 + 0.5) * (2.0 * h / self.num_beamlets as f64)
    }

    /// `(angle_index, beamlet_index)` of ray `b`.
    pub fn ray_coords(&self, b: usize) -> (usize, usize) {
        (b / self.num_beamlets, b % self.num_beamlets)
    }
}

/// `n` angles evenly spaced over `[1, 2*pi)` radians: `1 + t (2 pi - 1) / n`.
pub fn default_angles(n: usize) -> Vec<f64> {
    let span = 2.0 * PI - 1.0;
    (0..n).map(|t| 1.0 + t as f64 * span / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_geometry() {
        assert_eq!(ScanGeometry::with_unit_detector(0, alloc::vec![0.0], 3), Err(Error::EmptyGrid));
        assert_eq!(ScanGeometry::with_unit_detector(4, Vec::new(), 3), Err(Error::NoAngles));
        assert_eq!(ScanGeometry::with_unit_detector(4, alloc::vec![0.0], 0), Err(Error::NoBeamlets));
        assert!(ScanGeometry::full_coverage(64, 30, 90).is_err());
    }

    #[test]
    fn experimental_layout() {
        let g = ScanGeometry::full_coverage(64, 30, 91).unwrap();
        assert_eq!(g.num_rays(), 2730);
        assert!(g.covers_grid());
        assert_eq!(g.beamlet_offset(45), 0.0);
        assert_eq!(g.beamlet_offset(0), -45.0);
        assert_eq!(g.angles()[0], 1.0);
        let last = *g.angles().last().unwrap();
        assert!(last < 2.0 * PI && last > 2.0 * PI - 0.2);
    }

    #[test]
    fn ray_index_convention() {
        let g = ScanGeometry::with_unit_detector(4, default_angles(3), 7).unwrap();
        assert_eq!(g.ray_coords(0), (0, 0));
        assert_eq!(g.ray_coords(9), (1, 2));
    }
}
