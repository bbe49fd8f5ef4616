//! Small numeric building blocks shared by the encoder, the hypernetwork and
//! the fixed-head baselines: a scalar abstraction, a shaped tensor, dense
//! layer kernels and the Adam optimizer.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

/// Floating-point element type. Training runs in `f32`; gradient checks use `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length mismatch");
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }

    pub fn fill_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R, bound: f64) {
        if bound == 0.0 {
            self.data.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for x in &mut self.data {
            *x = T::of(dist.sample(rng));
        }
    }

    pub fn fill_normal<R: Rng + ?Sized>(&mut self, rng: &mut R, std: f64) {
        if std == 0.0 {
            self.data.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        let dist = Normal::new(0.0, std).expect("positive std");
        for x in &mut self.data {
            *x = T::of(dist.sample(rng));
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `out[o] = bias[o] + sum_i x[i] * weight[i, o]` with `weight` stored `(in, out)` row-major.
pub fn affine_into<T: Scalar>(x: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let n_out = bias.len();
    debug_assert_eq!(weight.len(), x.len() * n_out);
    debug_assert_eq!(out.len(), n_out);
    out.copy_from_slice(bias);
    for (i, &xi) in x.iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        let row = &weight[i * n_out..(i + 1) * n_out];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: T = ac.remainder().iter().zip(bc.remainder()).map(|(&x, &y)| x * y).fold(T::zero(), |s, v| s + v);
    for (x, y) in ac.zip(bc) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Backward of [`affine_into`]: accumulates weight/bias gradients and, when
/// `grad_x` is given, writes the input gradient.
pub fn affine_backward<T: Scalar>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    grad_weight: &mut [T],
    grad_bias: &mut [T],
    grad_x: Option<&mut [T]>,
) {
    let n_out = grad_out.len();
    for (gb, &g) in grad_bias.iter_mut().zip(grad_out) {
        *gb += g;
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        let row = &mut grad_weight[i * n_out..(i + 1) * n_out];
        for (gw, &g) in row.iter_mut().zip(grad_out) {
            *gw += xi * g;
        }
    }
    if let Some(gx) = grad_x {
        for (i, gxi) in gx.iter_mut().enumerate() {
            let row = &weight[i * n_out..(i + 1) * n_out];
            *gxi = dot(row, grad_out);
        }
    }
}

/// Fully-connected layer `y = x W + b` with `W` stored `(in, out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Linear { weight: Tensor::zeros(&[n_in, n_out]), bias: Tensor::zeros(&[n_out]) }
    }

    /// Uniform `(-1/sqrt(in), 1/sqrt(in))` for weights and biases.
    pub fn init_default<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(n_in, n_out);
        let bound = 1.0 / (n_in as f64).sqrt();
        l.weight.fill_uniform(rng, bound);
        l.bias.fill_uniform(rng, bound);
        l
    }

    pub fn n_in(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn n_out(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_out()];
        affine_into(x, &self.weight.data, &self.bias.data, &mut out);
        out
    }

    /// Accumulates into `grads`; returns the input gradient when asked for.
    pub fn backward(&self, x: &[T], grad_out: &[T], grads: &mut Linear<T>, want_input: bool) -> Option<Vec<T>> {
        let mut gx = want_input.then(|| vec![T::zero(); self.n_in()]);
        affine_backward(x, &self.weight.data, grad_out, &mut grads.weight.data, &mut grads.bias.data, gx.as_deref_mut());
        gx
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_in(), self.n_out())
    }

    pub fn add_assign(&mut self, other: &Linear<T>) {
        self.weight.add_assign(&other.weight);
        self.bias.add_assign(&other.bias);
    }

    pub fn cast<U: Scalar>(&self) -> Linear<U> {
        Linear { weight: self.weight.cast(), bias: self.bias.cast() }
    }

    pub fn named<'a>(&'a self, prefix: &str) -> [(String, &'a Tensor<T>); 2] {
        [(format!("{prefix}.weight"), &self.weight), (format!("{prefix}.bias"), &self.bias)]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Adam hyperparameters. Serialized into checkpoints for reproducibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 0.0 }
    }
}

/// Adam over an ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params` and `grads` must list tensors in the same
    /// order on every call.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: Vec<&Tensor<T>>) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient list mismatch");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as f64;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        let lr_t = T::of(c.learning_rate * (1.0 - c.beta2.powf(t)).sqrt() / (1.0 - c.beta1.powf(t)));
        let eps_hat = T::of(c.epsilon * (1.0 - c.beta2.powf(t)).sqrt());
        let wd = T::of(c.weight_decay);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((pi, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gi = gi + wd * *pi;
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                *pi -= lr_t * *mi / (vi.sqrt() + eps_hat);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_matches_loops() {
        let x = [1.0f64, -2.0, 0.5];
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [0.1, -0.1];
        let mut out = [0.0; 2];
        affine_into(&x, &w, &b, &mut out);
        assert!((out[0] - (0.1 + 1.0 - 6.0 + 2.5)).abs() < 1e-12);
        assert!((out[1] - (-0.1 + 2.0 - 8.0 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = Tensor::from_vec(&[2], vec![3.0f64, -2.0]);
        let mut opt = Adam::new(AdamConfig { learning_rate: 0.05, ..Default::default() });
        for _ in 0..2000 {
            let g = Tensor::from_vec(&[2], p.data.iter().map(|x| 2.0 * x).collect());
            opt.step(vec![&mut p], vec![&g]);
        }
        assert!(p.data.iter().all(|x| x.abs() < 1e-2), "{:?}", p.data);
        assert_eq!(opt.steps_taken(), 2000);
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(sigmoid(0.0f64), 0.5);
    }
}
