//! Ground-truth images addressable by id.

use std::path::Path;

use lrtomo_core::{circle_triangle, Phantom};

use crate::pgm::{load_image_pgm, parse_pgm};

/// 64x64 resample of the Shepp-Logan head phantom, 8-bit.
const BRAIN_PGM: &[u8] = include_bytes!("../assets/brain64.pgm");
pub const BRAIN_SIZE: usize = 64;

pub const IDS: &[&str] = &["circle-triangle", "brain"];

/// Resolves `circle-triangle`, `brain`, or a path to a `.pgm` file.
pub fn load_phantom(id: &str, size: usize) -> Result<Phantom, String> {
    match id {
        "circle-triangle" => circle_triangle(size).map_err(|e| e.to_string()),
        "brain" => {
            if size != BRAIN_SIZE {
                return Err(format!("the brain image is {BRAIN_SIZE}x{BRAIN_SIZE}; got --K {size}"));
            }
            let image = parse_pgm(BRAIN_PGM).map_err(|e| e.to_string())?;
            Ok(Phantom::new("brain", image))
        }
        path if path.ends_with(".pgm") => {
            let image = load_image_pgm(path).map_err(|e| format!("{path}: {e}"))?;
            if image.size() != size {
                return Err(format!("{path} is {0}x{0}, expected {size}x{size}", image.size()));
            }
            let name = Path::new(path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.to_owned());
            Ok(Phantom::new(name, image))
        }
        other => Err(format!("unknown phantom `{other}` (expected one of {IDS:?} or a .pgm path)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_bundled_ids() {
        let b = load_phantom("brain", 64).unwrap();
        assert_eq!(b.image.size(), 64);
        assert!(b.image.as_row_major().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(load_phantom("brain", 32).is_err());
        assert_eq!(load_phantom("circle-triangle", 32).unwrap().name, "circle-triangle");
        assert!(load_phantom("shepp", 64).is_err());
    }
}
