use rand::Rng;

use crate::datakit::Scale;
use crate::error::{Error, Result};
use crate::nn::{Linear, Scalar, Tensor};

/// Width of the scale representation `S`.
pub const SCALE_EMBED_DIM: usize = 128;

/// The 128-dim scale representation `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRepresentation<T>(pub Vec<T>);

/// Two fully-connected layers with a rectifier in between, fed `log2(scale)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleEmbedder<T> {
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
}

#[derive(Clone, Debug)]
pub struct EmbedTrace<T> {
    input: [T; 1],
    hidden: Vec<T>,
}

fn scale_input<T: Scalar>(scale: Scale) -> Result<T> {
    if scale.numer() < scale.denom() {
        return Err(Error::InvalidScale(format!("scale {scale} is below 1")));
    }
    Ok(T::of(scale.log2()))
}

impl<T: Scalar> ScaleEmbedder<T> {
    pub fn zeros() -> Self {
        ScaleEmbedder { fc1: Linear::zeros(1, SCALE_EMBED_DIM), fc2: Linear::zeros(SCALE_EMBED_DIM, SCALE_EMBED_DIM) }
    }

    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ScaleEmbedder {
            fc1: Linear::init_default(1, SCALE_EMBED_DIM, rng),
            fc2: Linear::init_default(SCALE_EMBED_DIM, SCALE_EMBED_DIM, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros()
    }

    pub fn forward_trace(&self, scale: Scale) -> Result<(ScaleRepresentation<T>, EmbedTrace<T>)> {
        let input = [scale_input::<T>(scale)?];
        let mut hidden = self.fc1.forward(&input);
        hidden.iter_mut().for_each(|h| *h = h.max(T::zero()));
        let s = self.fc2.forward(&hidden);
        Ok((ScaleRepresentation(s), EmbedTrace { input, hidden }))
    }

    pub fn backward(&self, trace: &EmbedTrace<T>, grad_s: &[T], grads: &mut ScaleEmbedder<T>) {
        let mut gh = self.fc2.backward(&trace.hidden, grad_s, &mut grads.fc2, true).unwrap();
        for (g, &h) in gh.iter_mut().zip(&trace.hidden) {
            if h <= T::zero() {
                *g = T::zero();
            }
        }
        self.fc1.backward(&trace.input, &gh, &mut grads.fc1, false);
    }

    pub fn add_assign(&mut self, other: &ScaleEmbedder<T>) {
        self.fc1.add_assign(&other.fc1);
        self.fc2.add_assign(&other.fc2);
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = self.fc1.named("embedder.fc1").to_vec();
        v.extend(self.fc2.named("embedder.fc2"));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let [a, b] = self.fc1.tensors_mut();
        let [c, d] = self.fc2.tensors_mut();
        vec![a, b, c, d]
    }

    pub fn cast<U: Scalar>(&self) -> ScaleEmbedder<U> {
        ScaleEmbedder { fc1: self.fc1.cast(), fc2: self.fc2.cast() }
    }
}

pub fn embed_scale<T: Scalar>(scale: Scale, embedder: &ScaleEmbedder<T>) -> Result<ScaleRepresentation<T>> {
    Ok(embedder.forward_trace(scale)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(k: u32) -> Scale {
        Scale::integer(k).unwrap()
    }

    #[test]
    fn deterministic_and_scale_sensitive() {
        let e = ScaleEmbedder::<f64>::init(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(embed_scale(s(2), &e).unwrap(), embed_scale(s(2), &e).unwrap());
        assert_ne!(embed_scale(s(2), &e).unwrap(), embed_scale(s(8), &e).unwrap());
    }

    #[test]
    fn zero_weights_leave_bias_path() {
        let mut e = ScaleEmbedder::<f64>::zeros();
        e.fc2.bias.data.iter_mut().enumerate().for_each(|(i, b)| *b = i as f64);
        let a = embed_scale(s(2), &e).unwrap();
        assert_eq!(a, embed_scale(s(8), &e).unwrap());
        assert_eq!(a.0, e.fc2.bias.data);
    }

    #[test]
    fn below_one_is_rejected() {
        let e = ScaleEmbedder::<f64>::zeros();
        let half = Scale::new(1, 2).unwrap();
        assert!(matches!(embed_scale(half, &e), Err(Error::InvalidScale(_))));
        assert!(embed_scale(s(1), &e).is_ok());
    }
}
