use crate::error::{check_len, Result};
use crate::image::Image;

/// Root mean squared pixel difference over all `K^2` pixels.
pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    check_len("image size", a.size(), b.size())?;
    rmse_slices(a.as_row_major(), b.as_row_major())
}

pub fn rmse_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("vector length", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(ss / a.len() as f64))
}
