use crate::datakit::Scale;
use crate::error::Result;
use crate::exec::{try_map_range, Execution};
use crate::nn::Scalar;
use crate::perception::{gap_backward, gap_flatten};
use crate::scalehyper::{head_backward, head_forward_trace, HeadParams};

use super::model::{Model, ScaleContext};

/// Samples per work unit. Fixed so the reduction order never depends on the
/// number of worker threads.
pub const CHUNK: usize = 4;

/// One normalized patch with its scale (an index into the batch's scale list)
/// and regression target.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub input: Vec<T>,
    pub scale: usize,
    pub target: T,
}

/// Batch-mean absolute error and its derivative with respect to each score.
pub fn mae_loss<T: Scalar>(scores: &[T], targets: &[T]) -> (T, Vec<T>) {
    assert_eq!(scores.len(), targets.len());
    let n = T::of(scores.len() as f64);
    let mut loss = T::zero();
    let grads = scores
        .iter()
        .zip(targets)
        .map(|(&q, &y)| {
            loss += (q - y).abs();
            let sign = if q > y {
                T::one()
            } else if q < y {
                -T::one()
            } else {
                T::zero()
            };
            sign / n
        })
        .collect();
    (loss / n, grads)
}

/// Result of [`forward_backward`].
#[derive(Clone, Debug)]
pub struct BatchGrad<T> {
    pub loss: T,
    pub scores: Vec<T>,
    pub grads: Model<T>,
}

struct ChunkAcc<T> {
    loss: T,
    scores: Vec<T>,
    encoder: Option<crate::perception::SmallCnn<T>>,
    /// Per-scale head gradients (SGH) or a single entry for the shared head.
    heads: Vec<Option<HeadParams<T>>>,
    /// Per-scale gradients with respect to `S` (fusion only).
    ds: Vec<Option<Vec<T>>>,
}

/// Mean absolute error over `samples` and its gradient with respect to every
/// parameter of `model`. With `train_encoder` false the encoder gradient is
/// left at zero and not computed.
pub fn forward_backward<T: Scalar>(
    model: &Model<T>,
    scales: &[Scale],
    samples: &[Sample<T>],
    train_encoder: bool,
    exec: Execution,
) -> Result<BatchGrad<T>> {
    let contexts = scales.iter().map(|&s| model.scale_context(s)).collect::<Result<Vec<_>>>()?;
    let n = samples.len();
    let inv_n = T::of(1.0 / n.max(1) as f64);
    let d = model.feature_dim();
    let n_chunks = n.div_ceil(CHUNK);
    let head_slots = if model.framework == crate::training::Framework::Sgh { scales.len() } else { 1 };

    let chunks = try_map_range(exec, n_chunks, |c| -> Result<ChunkAcc<T>> {
        let mut acc = ChunkAcc {
            loss: T::zero(),
            scores: Vec::with_capacity(CHUNK),
            encoder: train_encoder.then(|| model.encoder.zeros_like()),
            heads: vec![None; head_slots],
            ds: vec![None; scales.len()],
        };
        for sample in &samples[c * CHUNK..((c + 1) * CHUNK).min(n)] {
            let (map, etrace) = model.encoder.forward_trace(&sample.input)?;
            let area = map.height * map.width;
            let v = gap_flatten(&map)?;
            let ctx = &contexts[sample.scale];
            let (x, head, slot) = match ctx {
                ScaleContext::Sgh { head, .. } => (v.0, head, sample.scale),
                ScaleContext::Fusion { s, .. } => {
                    let mut x = v.0;
                    x.extend_from_slice(&s.0);
                    (x, model.head.as_ref().expect("fusion has a head"), 0)
                }
                ScaleContext::Blind => (v.0, model.head.as_ref().expect("blind has a head"), 0),
            };
            let (q, htrace) = head_forward_trace(&x, head, &model.layout);
            acc.scores.push(q);
            let diff = q - sample.target;
            acc.loss += diff.abs();
            let g = if diff > T::zero() {
                inv_n
            } else if diff < T::zero() {
                -inv_n
            } else {
                T::zero()
            };
            let hg = acc.heads[slot].get_or_insert_with(|| head.zeros_like());
            let fusion = matches!(ctx, ScaleContext::Fusion { .. });
            let gx = head_backward(head, &model.layout, &htrace, g, hg, train_encoder || fusion);
            if let Some(gx) = gx {
                if fusion {
                    let ds = acc.ds[sample.scale].get_or_insert_with(|| vec![T::zero(); gx.len() - d]);
                    ds.iter_mut().zip(&gx[d..]).for_each(|(a, &b)| *a += b);
                }
                if let Some(enc) = acc.encoder.as_mut() {
                    model.encoder.backward(&etrace, gap_backward(&gx[..d], area), enc);
                }
            }
        }
        Ok(acc)
    })?;

    let mut grads = model.zeros_like();
    let mut loss = T::zero();
    let mut scores = Vec::with_capacity(n);
    let mut heads: Vec<Option<HeadParams<T>>> = vec![None; head_slots];
    let mut ds: Vec<Option<Vec<T>>> = vec![None; scales.len()];
    for acc in chunks {
        loss += acc.loss;
        scores.extend(acc.scores);
        if let Some(e) = &acc.encoder {
            grads.encoder.add_assign(e);
        }
        for (dst, src) in heads.iter_mut().zip(acc.heads) {
            if let Some(src) = src {
                match dst {
                    Some(d) => d.add_assign(&src),
                    None => *dst = Some(src),
                }
            }
        }
        for (dst, src) in ds.iter_mut().zip(acc.ds) {
            if let Some(src) = src {
                match dst {
                    Some(d) => d.iter_mut().zip(&src).for_each(|(a, &b)| *a += b),
                    None => *dst = Some(src),
                }
            }
        }
    }

    for (k, ctx) in contexts.iter().enumerate() {
        match ctx {
            ScaleContext::Sgh { s, trace, .. } => {
                if let Some(hg) = &heads[k] {
                    let gen = model.generator.as_ref().expect("sgh has a generator");
                    let gs = gen.backward(s, hg, grads.generator.as_mut().expect("sgh has a generator"));
                    let emb = model.embedder.as_ref().expect("sgh has an embedder");
                    emb.backward(trace, &gs, grads.embedder.as_mut().expect("sgh has an embedder"));
                }
            }
            ScaleContext::Fusion { trace, .. } => {
                if let Some(gs) = &ds[k] {
                    let emb = model.embedder.as_ref().expect("fusion has an embedder");
                    emb.backward(trace, gs, grads.embedder.as_mut().expect("fusion has an embedder"));
                }
            }
            ScaleContext::Blind => {}
        }
    }
    if model.framework != crate::training::Framework::Sgh {
        if let Some(h) = heads.pop().flatten() {
            *grads.head.as_mut().expect("fixed head") = h;
        }
    }

    Ok(BatchGrad { loss: loss * inv_n, scores, grads })
}
