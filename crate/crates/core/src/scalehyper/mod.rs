//! Evaluation-rule generation and quality prediction: the scale embedder, the
//! per-layer head generator and the generated quality head.

mod embed;
mod generator;
mod head;

pub use embed::{embed_scale, EmbedTrace, ScaleEmbedder, ScaleRepresentation, SCALE_EMBED_DIM};
pub use generator::{generate_params, HeadGenerator, GENERATOR_GAIN};
pub use head::{
    apply_head, head_backward, head_forward_trace, Activation, GeneratedHeadParams, HeadLayout, HeadParams,
    HeadTrace, HEAD_HIDDEN,
};

use crate::datakit::Scale;
use crate::error::Result;
use crate::nn::Scalar;
use crate::perception::{gap_flatten, FeatureEncoder};

/// Scores one normalized patch: encode, pool, embed the scale, generate the
/// head and apply it.
pub fn predict<T: Scalar, E: FeatureEncoder<T> + ?Sized>(
    input: &[T],
    scale: Scale,
    encoder: &E,
    embedder: &ScaleEmbedder<T>,
    generator: &HeadGenerator<T>,
) -> Result<T> {
    let v = gap_flatten(&encoder.encode(input)?)?;
    let s = embed_scale(scale, embedder)?;
    let head = generate_params(&s, &generator.layout, generator)?;
    apply_head(&v, &head, &generator.layout)
}
