use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{affine_backward, affine_into, sigmoid, Scalar, Tensor};
use crate::perception::FeatureVector;

/// Output widths of the quality head after its input layer.
pub const HEAD_HIDDEN: [usize; 5] = [128, 64, 32, 16, 1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Identity,
}

/// Layer widths `[D, 128, 64, 32, 16, 1]`; sigmoid after the first four
/// layers, identity after the last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub dims: Vec<usize>,
}

impl HeadLayout {
    pub fn new(input_dim: usize) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&HEAD_HIDDEN);
        HeadLayout { dims }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 < self.n_layers() {
            Activation::Sigmoid
        } else {
            Activation::Identity
        }
    }

    pub fn activations(&self) -> Vec<Activation> {
        (0..self.n_layers()).map(|j| self.activation(j)).collect()
    }

    /// `(fan_in, fan_out)` of layer `j`.
    pub fn weight_shape(&self, layer: usize) -> (usize, usize) {
        (self.dims[layer], self.dims[layer + 1])
    }

    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.n_layers()).map(|j| self.weight_shape(j)).collect()
    }

    pub fn bias_lengths(&self) -> Vec<usize> {
        self.dims[1..].to_vec()
    }

    /// Glorot-uniform bound, with the usual gain of 4 for logistic layers so
    /// gradients keep their scale through the sigmoid stack.
    pub fn weight_init_bound(&self, layer: usize) -> f64 {
        let (fan_in, fan_out) = self.weight_shape(layer);
        let gain = match self.activation(layer) {
            Activation::Sigmoid => 4.0,
            Activation::Identity => 1.0,
        };
        gain * (6.0 / (fan_in + fan_out) as f64).sqrt()
    }

    pub fn bias_init_bound(&self, layer: usize) -> f64 {
        1.0 / (self.dims[layer] as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() != HEAD_HIDDEN.len() + 1 || self.dims[1..] != HEAD_HIDDEN || self.dims[0] == 0 {
            return Err(Error::InvalidConfig(format!("head layout {:?} is not [D, 128, 64, 32, 16, 1]", self.dims)));
        }
        Ok(())
    }
}

/// Weights `w_j` (shape `dims[j] x dims[j+1]`) and biases `b_j` of a quality
/// head, either generated per scale or learned directly.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<T> {
    pub weights: Vec<Tensor<T>>,
    pub biases: Vec<Tensor<T>>,
}

/// Head parameters emitted by the hypernetwork for one scale.
pub type GeneratedHeadParams<T> = HeadParams<T>;

impl<T: Scalar> HeadParams<T> {
    pub fn zeros(layout: &HeadLayout) -> Self {
        HeadParams {
            weights: layout.weight_shapes().iter().map(|&(i, o)| Tensor::zeros(&[i, o])).collect(),
            biases: layout.bias_lengths().iter().map(|&o| Tensor::zeros(&[o])).collect(),
        }
    }

    /// Weights uniform within [`HeadLayout::weight_init_bound`], biases
    /// uniform within `1/sqrt(fan_in)`; for heads learned directly.
    pub fn init<R: Rng + ?Sized>(layout: &HeadLayout, rng: &mut R) -> Self {
        let mut h = Self::zeros(layout);
        for (j, (w, b)) in h.weights.iter_mut().zip(&mut h.biases).enumerate() {
            w.fill_uniform(rng, layout.weight_init_bound(j));
            b.fill_uniform(rng, layout.bias_init_bound(j));
        }
        h
    }

    pub fn zeros_like(&self) -> Self {
        HeadParams {
            weights: self.weights.iter().map(Tensor::zeros_like).collect(),
            biases: self.biases.iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub fn matches(&self, layout: &HeadLayout) -> bool {
        self.weights.len() == layout.n_layers()
            && self.biases.len() == layout.n_layers()
            && (0..layout.n_layers()).all(|j| {
                let (i, o) = layout.weight_shape(j);
                self.weights[j].shape == [i, o] && self.biases[j].shape == [o]
            })
    }

    pub fn check(&self, layout: &HeadLayout) -> Result<()> {
        if !self.matches(layout) {
            return Err(Error::InvalidInput(format!("head parameters do not fit layout {:?}", layout.dims)));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(Tensor::all_finite)
    }

    pub fn add_assign(&mut self, other: &HeadParams<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights).chain(self.biases.iter_mut().zip(&other.biases)) {
            a.add_assign(b);
        }
    }

    pub fn named<'a>(&'a self, prefix: &str) -> Vec<(String, &'a Tensor<T>)> {
        let mut out = Vec::new();
        for (j, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push((format!("{prefix}.fc{j}.weight"), w));
            out.push((format!("{prefix}.fc{j}.bias"), b));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn cast<U: Scalar>(&self) -> HeadParams<U> {
        HeadParams {
            weights: self.weights.iter().map(Tensor::cast).collect(),
            biases: self.biases.iter().map(Tensor::cast).collect(),
        }
    }
}

/// Layer inputs kept for backpropagation: `acts[j]` feeds layer `j`.
#[derive(Clone, Debug)]
pub struct HeadTrace<T> {
    acts: Vec<Vec<T>>,
}

pub fn head_forward_trace<T: Scalar>(x: &[T], head: &HeadParams<T>, layout: &HeadLayout) -> (T, HeadTrace<T>) {
    let mut acts = vec![x.to_vec()];
    for j in 0..layout.n_layers() {
        let mut out = vec![T::zero(); layout.dims[j + 1]];
        affine_into(acts.last().unwrap(), &head.weights[j].data, &head.biases[j].data, &mut out);
        if layout.activation(j) == Activation::Sigmoid {
            out.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        acts.push(out);
    }
    let score = acts.pop().unwrap()[0];
    (score, HeadTrace { acts })
}

/// Accumulates head parameter gradients for upstream gradient `grad_score`;
/// returns the gradient with respect to the head input when asked for.
pub fn head_backward<T: Scalar>(
    head: &HeadParams<T>,
    layout: &HeadLayout,
    trace: &HeadTrace<T>,
    grad_score: T,
    grads: &mut HeadParams<T>,
    want_input: bool,
) -> Option<Vec<T>> {
    let mut grad = vec![grad_score];
    for j in (0..layout.n_layers()).rev() {
        // `grad` is with respect to the pre-activation output of layer j
        let input = &trace.acts[j];
        let need_input = j > 0 || want_input;
        let mut gin = need_input.then(|| vec![T::zero(); input.len()]);
        affine_backward(
            input,
            &head.weights[j].data,
            &grad,
            &mut grads.weights[j].data,
            &mut grads.biases[j].data,
            gin.as_deref_mut(),
        );
        match gin {
            Some(mut g) if j > 0 => {
                // input of layer j is the sigmoid output of layer j-1
                for (gi, &a) in g.iter_mut().zip(input) {
                    *gi *= a * (T::one() - a);
                }
                grad = g;
            }
            other => return other,
        }
    }
    None
}

/// `x_{j+1} = act_j(x_j w_j + b_j)`; returns the scalar `x_5`.
pub fn apply_head<T: Scalar>(v: &FeatureVector<T>, head: &HeadParams<T>, layout: &HeadLayout) -> Result<T> {
    if v.len() != layout.input_dim() {
        return Err(Error::InvalidInput(format!(
            "feature vector has length {}, head expects {}",
            v.len(),
            layout.input_dim()
        )));
    }
    head.check(layout)?;
    Ok(head_forward_trace(&v.0, head, layout).0)
}
