use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::{Patch, PlanarImage};
use crate::error::{Error, Result};

/// Square patch geometry for training crops and evaluation tiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub size: usize,
    pub stride: usize,
    pub count: usize,
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec { size: 224, stride: 64, count: 64 }
    }
}

impl PatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.stride == 0 || self.count == 0 {
            return Err(Error::InvalidConfig(format!(
                "patch size, stride and count must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    fn check_fits(&self, image: &PlanarImage) -> Result<()> {
        self.validate()?;
        if image.width < self.size || image.height < self.size {
            return Err(Error::TooSmallImage { width: image.width, height: image.height, size: self.size });
        }
        Ok(())
    }
}

/// `spec.count` random crops with origins drawn uniformly over valid positions.
pub fn sample_training_patches(image: &PlanarImage, spec: &PatchSpec, rng_state: u64) -> Result<Vec<Patch>> {
    spec.check_fits(image)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_state);
    let (max_x, max_y) = (image.width - spec.size, image.height - spec.size);
    Ok((0..spec.count)
        .map(|_| {
            let x = rng.random_range(0..=max_x);
            let y = rng.random_range(0..=max_y);
            Patch::from_image(image, x, y, spec.size)
        })
        .collect())
}

/// Patch origins along one axis: `0, stride, 2*stride, ...` plus a final
/// origin at `dim - size` when the stride grid does not land on it.
pub fn tile_origins(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    assert!(dim >= size && stride > 0);
    let last = dim - size;
    let mut origins: Vec<usize> = (0..=last).step_by(stride).collect();
    if !last.is_multiple_of(stride) {
        origins.push(last);
    }
    origins
}

/// Edge-inclusive sliding-window tiling, row-major over origins. The patches
/// cover every pixel whenever `stride <= size`.
pub fn tile_eval_patches(image: &PlanarImage, spec: &PatchSpec) -> Result<Vec<Patch>> {
    spec.check_fits(image)?;
    let xs = tile_origins(image.width, spec.size, spec.stride);
    let ys = tile_origins(image.height, spec.size, spec.stride);
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .map(|(x, y)| Patch::from_image(image, x, y, spec.size))
        .collect())
}
