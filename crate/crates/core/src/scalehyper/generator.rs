use rand::Rng;

use super::embed::{ScaleRepresentation, SCALE_EMBED_DIM};
use super::head::{GeneratedHeadParams, HeadLayout, HeadParams};
use crate::error::{Error, Result};
use crate::nn::{Linear, Scalar, Tensor};

/// Standard deviation of the generator weight matrices at initialization.
pub const GENERATOR_GAIN: f64 = 0.01;

/// One affine map per head weight block and one per head bias block, each
/// reading the scale representation.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGenerator<T> {
    pub layout: HeadLayout,
    pub weight_gens: Vec<Linear<T>>,
    pub bias_gens: Vec<Linear<T>>,
}

impl<T: Scalar> HeadGenerator<T> {
    pub fn zeros(layout: &HeadLayout) -> Self {
        HeadGenerator {
            layout: layout.clone(),
            weight_gens: layout.weight_shapes().iter().map(|&(i, o)| Linear::zeros(SCALE_EMBED_DIM, i * o)).collect(),
            bias_gens: layout.bias_lengths().iter().map(|&o| Linear::zeros(SCALE_EMBED_DIM, o)).collect(),
        }
    }

    /// Small generator weights; generator biases chosen so the generated head
    /// starts out like a default-initialized plain MLP.
    pub fn init<R: Rng + ?Sized>(layout: &HeadLayout, rng: &mut R) -> Self {
        let mut g = Self::zeros(layout);
        for (j, (wg, bg)) in g.weight_gens.iter_mut().zip(&mut g.bias_gens).enumerate() {
            wg.weight.fill_normal(rng, GENERATOR_GAIN);
            // divided by sqrt(fan_in) after generation
            wg.bias.fill_uniform(rng, 1.0);
            bg.weight.fill_normal(rng, GENERATOR_GAIN);
            bg.bias.fill_uniform(rng, 1.0 / (layout.dims[j] as f64).sqrt());
        }
        g
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layout)
    }

    fn weight_scale(&self, layer: usize) -> T {
        T::one() / T::of(self.layout.dims[layer] as f64).sqrt()
    }

    pub fn generate(&self, s: &ScaleRepresentation<T>) -> GeneratedHeadParams<T> {
        let mut head = HeadParams::zeros(&self.layout);
        for j in 0..self.layout.n_layers() {
            let k = self.weight_scale(j);
            let mut w = self.weight_gens[j].forward(&s.0);
            w.iter_mut().for_each(|v| *v *= k);
            head.weights[j].data = w;
            head.biases[j].data = self.bias_gens[j].forward(&s.0);
        }
        head
    }

    /// Accumulates generator gradients from head-parameter gradients and
    /// returns the gradient with respect to `S`.
    pub fn backward(&self, s: &ScaleRepresentation<T>, grad_head: &HeadParams<T>, grads: &mut HeadGenerator<T>) -> Vec<T> {
        let mut grad_s = vec![T::zero(); SCALE_EMBED_DIM];
        for j in 0..self.layout.n_layers() {
            let k = self.weight_scale(j);
            let gw: Vec<T> = grad_head.weights[j].data.iter().map(|&g| g * k).collect();
            let gs_w = self.weight_gens[j].backward(&s.0, &gw, &mut grads.weight_gens[j], true).unwrap();
            let gs_b = self.bias_gens[j].backward(&s.0, &grad_head.biases[j].data, &mut grads.bias_gens[j], true).unwrap();
            for ((acc, a), b) in grad_s.iter_mut().zip(gs_w).zip(gs_b) {
                *acc += a + b;
            }
        }
        grad_s
    }

    pub fn add_assign(&mut self, other: &HeadGenerator<T>) {
        for (a, b) in self.weight_gens.iter_mut().zip(&other.weight_gens) {
            a.add_assign(b);
        }
        for (a, b) in self.bias_gens.iter_mut().zip(&other.bias_gens) {
            a.add_assign(b);
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = Vec::new();
        for (j, (wg, bg)) in self.weight_gens.iter().zip(&self.bias_gens).enumerate() {
            v.extend(wg.named(&format!("generator.fc{j}.weight_gen")));
            v.extend(bg.named(&format!("generator.fc{j}.bias_gen")));
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.weight_gens
            .iter_mut()
            .zip(self.bias_gens.iter_mut())
            .flat_map(|(wg, bg)| {
                let [a, b] = wg.tensors_mut();
                let [c, d] = bg.tensors_mut();
                [a, b, c, d]
            })
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> HeadGenerator<U> {
        HeadGenerator {
            layout: self.layout.clone(),
            weight_gens: self.weight_gens.iter().map(Linear::cast).collect(),
            bias_gens: self.bias_gens.iter().map(Linear::cast).collect(),
        }
    }
}

/// Generates the quality head's parameters for scale representation `s`.
pub fn generate_params<T: Scalar>(
    s: &ScaleRepresentation<T>,
    layout: &HeadLayout,
    generator: &HeadGenerator<T>,
) -> Result<GeneratedHeadParams<T>> {
    if &generator.layout != layout {
        return Err(Error::InvalidConfig(format!(
            "generator built for layout {:?}, asked for {:?}",
            generator.layout.dims, layout.dims
        )));
    }
    if s.0.len() != SCALE_EMBED_DIM || s.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("scale representation must hold 128 finite values".into()));
    }
    Ok(generator.generate(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::Scale;
    use crate::scalehyper::{embed_scale, ScaleEmbedder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_shapes_follow_layout() {
        let layout = HeadLayout::new(128);
        let g = HeadGenerator::<f32>::zeros(&layout);
        let head = generate_params(&ScaleRepresentation(vec![0.0; 128]), &layout, &g).unwrap();
        let shapes: Vec<_> = head.weights.iter().map(|w| (w.shape[0], w.shape[1])).collect();
        assert_eq!(shapes, vec![(128, 128), (128, 64), (64, 32), (32, 16), (16, 1)]);
        let biases: Vec<_> = head.biases.iter().map(|b| b.len()).collect();
        assert_eq!(biases, vec![128, 64, 32, 16, 1]);
    }

    #[test]
    fn deterministic_and_scale_dependent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layout = HeadLayout::new(16);
        let e = ScaleEmbedder::<f64>::init(&mut rng);
        let g = HeadGenerator::<f64>::init(&layout, &mut rng);
        let s2 = embed_scale(Scale::integer(2).unwrap(), &e).unwrap();
        let s4 = embed_scale(Scale::integer(4).unwrap(), &e).unwrap();
        let a = generate_params(&s2, &layout, &g).unwrap();
        assert_eq!(a, generate_params(&s2, &layout, &g).unwrap());
        let b = generate_params(&s4, &layout, &g).unwrap();
        assert!(a.weights.iter().zip(&b.weights).any(|(x, y)| x != y));
        assert!(a.all_finite());
    }

    #[test]
    fn init_resembles_default_mlp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = HeadLayout::new(128);
        let g = HeadGenerator::<f64>::init(&layout, &mut rng);
        let s = ScaleRepresentation(vec![0.5; 128]);
        let head = g.generate(&s);
        let w = &head.weights[0].data;
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        // uniform(-1/sqrt(128), 1/sqrt(128)) has variance 1/384
        assert!((var * 384.0 - 1.0).abs() < 0.15, "variance ratio {}", var * 384.0);
    }

    #[test]
    fn layout_mismatch_is_config_error() {
        let g = HeadGenerator::<f64>::zeros(&HeadLayout::new(8));
        let e = generate_params(&ScaleRepresentation(vec![0.0; 128]), &HeadLayout::new(9), &g);
        assert!(matches!(e, Err(Error::InvalidConfig(_))));
        let e = generate_params(&ScaleRepresentation(vec![f64::NAN; 128]), &HeadLayout::new(8), &g);
        assert!(e.is_err());
    }
}
