//! Synthetic ground-truth images.

use alloc::string::String;

use crate::cp::{default_rank_tol, matrix_rank};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub name: String,
    pub image: Image,
    pub measured_rank: usize,
}

impl Phantom {
    pub fn new(name: impl Into<String>, image: Image) -> Self {
        let measured_rank = matrix_rank(&image, default_rank_tol(image.size()));
        Phantom {
            name: name.into(),
            image,
            measured_rank,
        }
    }
}

pub const CIRCLE_INTENSITY: f64 = 1.0;
pub const TRIANGLE_INTENSITY: f64 = 0.6;

/// A filled circle (centre `(0.3K, 0.3K)`, radius `0.15K`, value 1.0) and a
/// filled triangle (vertices `(0.55K, 0.75K)`, `(0.85K, 0.55K)`,
/// `(0.85K, 0.9K)`, value 0.6) on a zero background.
///
/// Points are `(row, col)` in pixel units from the top-left corner; a pixel
/// takes a shape's value when its centre `(i + 0.5, j + 0.5)` lies inside
/// or on the shape boundary.
pub fn circle_triangle(size: usize) -> Result<Phantom> {
    if size < 16 {
        return Err(Error::PhantomTooSmall(size));
    }
    let k = size as f64;
    let (cy, cx, radius) = (0.3 * k, 0.3 * k, 0.15 * k);
    let tri = [(0.55 * k, 0.75 * k), (0.85 * k, 0.55 * k), (0.85 * k, 0.9 * k)];
    let image = Image::from_fn(size, |i, j| {
        let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
        if in_triangle((y, x), &tri) {
            TRIANGLE_INTENSITY
        } else if (y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius {
            CIRCLE_INTENSITY
        } else {
            0.0
        }
    });
    Ok(Phantom::new("circle-triangle", image))
}

fn in_triangle(p: (f64, f64), t: &[(f64, f64); 3]) -> bool {
    let cross = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let d = [cross(t[0], t[1]), cross(t[1], t[2]), cross(t[2], t[0])];
    let neg = d.iter().any(|&v| v < 0.0);
    let pos = d.iter().any(|&v| v > 0.0);
    !(neg && pos)
}
