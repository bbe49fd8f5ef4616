use serde::{Deserialize, Serialize};

use crate::datakit::{Normalization, PatchSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::AdamConfig;
use crate::perception::{EncoderConfig, EncoderKind};

use super::model::Framework;

/// Everything that determines a training run. Serialized verbatim into each
/// checkpoint; `execution` is left out because it never changes results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub framework: Framework,
    pub epochs: usize,
    /// Patches per optimizer step.
    pub batch_patches: usize,
    /// Distinct images the patches of one step are cropped from.
    pub images_per_batch: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Keep the encoder at its initialization and train only the rest.
    pub freeze_encoder: bool,
    pub split_ratio: f64,
    pub encoder: EncoderConfig,
    /// Crop size and evaluation stride; `count` is not used by training,
    /// which draws `batch_patches` crops per step.
    pub patch: PatchSpec,
    pub normalization: Normalization,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            framework: Framework::Sgh,
            epochs: 50,
            batch_patches: 64,
            images_per_batch: 8,
            adam: AdamConfig::default(),
            seed: 0,
            freeze_encoder: false,
            split_ratio: 0.8,
            encoder: EncoderConfig::default(),
            patch: PatchSpec::default(),
            normalization: Normalization::default(),
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.patch.validate()?;
        self.normalization.validate()?;
        if self.encoder.kind != EncoderKind::BuiltinSmallCnn {
            return Err(Error::InvalidConfig("training needs the builtin encoder; external encoders are inference-only".into()));
        }
        if self.patch.size != self.encoder.input_size {
            return Err(Error::InvalidConfig(format!(
                "patch size {} differs from encoder input size {}",
                self.patch.size, self.encoder.input_size
            )));
        }
        if self.batch_patches == 0 || self.images_per_batch == 0 {
            return Err(Error::InvalidConfig("batch_patches and images_per_batch must be positive".into()));
        }
        if self.images_per_batch > self.batch_patches {
            return Err(Error::InvalidConfig("images_per_batch exceeds batch_patches".into()));
        }
        let a = &self.adam;
        let bad = !(a.learning_rate > 0.0 && a.learning_rate.is_finite())
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.epsilon > 0.0)
            || !(a.weight_decay >= 0.0);
        if bad {
            return Err(Error::InvalidConfig(format!("bad optimizer settings {a:?}")));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!("split ratio {} outside (0, 1)", self.split_ratio)));
        }
        Ok(())
    }

    /// Crops taken from the `k`-th image of a step; sums to `batch_patches`.
    pub fn patches_for_image(&self, k: usize) -> usize {
        let (q, r) = (self.batch_patches / self.images_per_batch, self.batch_patches % self.images_per_batch);
        q + usize::from(k < r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.adam.learning_rate, 1e-4);
        assert_eq!((c.epochs, c.batch_patches), (50, 64));
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn patch_split_sums_to_batch() {
        let c = TrainConfig { batch_patches: 30, images_per_batch: 8, ..Default::default() };
        let per: Vec<_> = (0..8).map(|k| c.patches_for_image(k)).collect();
        assert_eq!(per.iter().sum::<usize>(), 30);
        assert_eq!(per[0], 4);
        assert_eq!(per[7], 3);
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let mut c = TrainConfig::default();
        c.patch.size = 64;
        assert!(c.validate().is_err());
        let c = TrainConfig { images_per_batch: 100, ..Default::default() };
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.adam.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
