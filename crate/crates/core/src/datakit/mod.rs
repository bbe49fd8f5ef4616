//! Dataset manifests, scale derivation, train/test splitting, patch sampling
//! and the synthetic degradation benchmark.

mod image;
mod manifest;
mod patches;
mod scale;
mod split;
pub mod synth;

pub use self::image::{Normalization, Patch, PlanarImage};
pub use manifest::{DatasetManifest, LabelPolarity, LabelRange, SampleRecord};
pub use patches::{sample_training_patches, tile_eval_patches, tile_origins, PatchSpec};
pub use scale::{derive_scale, Scale};
pub use split::{make_split, make_split_by, SplitBy, SplitPlan};
pub use synth::{synth_benchmark, SourceImage, SynthSources};
