//! Content perception: a pluggable encoder producing a `C x H' x W'` feature
//! map from a normalized patch, followed by global average pooling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{dot, Scalar, Tensor};

const KERNEL: usize = 3;
const STRIDE: usize = 2;
const PAD: usize = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    #[default]
    BuiltinSmallCnn,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Channel count of the final feature map, `D`.
    pub feature_dim: usize,
    /// Side of the square input patch in pixels.
    pub input_size: usize,
    /// Output channels of each builtin convolution block.
    #[serde(default = "default_channels")]
    pub channels: Vec<usize>,
}

fn default_channels() -> Vec<usize> {
    vec![16, 32, 64, 128]
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { kind: EncoderKind::BuiltinSmallCnn, feature_dim: 128, input_size: 224, channels: default_channels() }
    }
}

impl EncoderConfig {
    pub fn builtin(input_size: usize, channels: Vec<usize>) -> Self {
        let feature_dim = channels.last().copied().unwrap_or(0);
        EncoderConfig { kind: EncoderKind::BuiltinSmallCnn, feature_dim, input_size, channels }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.input_size == 0 {
            return Err(Error::InvalidConfig("encoder feature_dim and input_size must be positive".into()));
        }
        if self.kind == EncoderKind::BuiltinSmallCnn {
            if self.channels.is_empty() || self.channels.contains(&0) {
                return Err(Error::InvalidConfig("builtin encoder needs positive channel counts".into()));
            }
            if self.channels.last() != Some(&self.feature_dim) {
                return Err(Error::InvalidConfig(format!(
                    "feature_dim {} differs from the last channel count {:?}",
                    self.feature_dim, self.channels
                )));
            }
        }
        Ok(())
    }

    /// Spatial side of the builtin encoder's output for this input size.
    pub fn output_side(&self) -> usize {
        self.channels.iter().fold(self.input_size, |s, _| conv_out(s))
    }
}

fn conv_out(side: usize) -> usize {
    (side + 2 * PAD - KERNEL) / STRIDE + 1
}

/// A `C x H x W` activation volume.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

/// Flattened pooled features `V`, the input of the quality head.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T>(pub Vec<T>);

impl<T> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Anything that maps a normalized `3 x s x s` patch to a feature map.
pub trait FeatureEncoder<T: Scalar>: Sync {
    fn feature_dim(&self) -> usize;
    fn input_size(&self) -> usize;
    fn encode(&self, input: &[T]) -> Result<FeatureMap<T>>;
}

fn check_input(len: usize, size: usize) -> Result<()> {
    if len != 3 * size * size {
        return Err(Error::InvalidInput(format!("expected a 3x{size}x{size} patch, got {len} values")));
    }
    Ok(())
}

/// 3x3 convolution with stride 2 and zero padding 1, followed by a rectifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Conv2d { weight: Tensor::zeros(&[cout, cin, KERNEL, KERNEL]), bias: Tensor::zeros(&[cout]) }
    }

    pub fn cin(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn cout(&self) -> usize {
        self.weight.shape[0]
    }

    /// Valid output index range along one axis for kernel tap `k`.
    fn tap_range(k: usize, in_side: usize, out_side: usize) -> (usize, usize) {
        let lo = PAD.saturating_sub(k).div_ceil(STRIDE);
        // largest o with STRIDE*o + k - PAD <= in_side - 1
        let hi = if in_side + PAD > k { ((in_side + PAD - k - 1) / STRIDE + 1).min(out_side) } else { 0 };
        (lo, hi.max(lo))
    }

    /// Unrolls the receptive fields: row `ci*9 + ky*3 + kx` holds, for every
    /// output position, the input value under that kernel tap (zero in the
    /// padding).
    fn im2col(&self, input: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
        let (oh, ow) = (conv_out(h), conv_out(w));
        let positions = oh * ow;
        let mut col = vec![T::zero(); self.cin() * KERNEL * KERNEL * positions];
        for ci in 0..self.cin() {
            let inp = &input[ci * h * w..(ci + 1) * h * w];
            for ky in 0..KERNEL {
                let (oy0, oy1) = Self::tap_range(ky, h, oh);
                for kx in 0..KERNEL {
                    let (ox0, ox1) = Self::tap_range(kx, w, ow);
                    let k = (ci * KERNEL + ky) * KERNEL + kx;
                    let row = &mut col[k * positions..(k + 1) * positions];
                    for oy in oy0..oy1 {
                        let iy = STRIDE * oy + ky - PAD;
                        let src = &inp[iy * w..(iy + 1) * w];
                        for ox in ox0..ox1 {
                            row[oy * ow + ox] = src[STRIDE * ox + kx - PAD];
                        }
                    }
                }
            }
        }
        (col, oh, ow)
    }

    fn forward(&self, input: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
        let (col, oh, ow) = self.im2col(input, h, w);
        let positions = oh * ow;
        let taps = self.cin() * KERNEL * KERNEL;
        let mut out = vec![T::zero(); self.cout() * positions];
        for (co, plane) in out.chunks_exact_mut(positions).enumerate() {
            plane.iter_mut().for_each(|v| *v = self.bias.data[co]);
            let wrow = &self.weight.data[co * taps..(co + 1) * taps];
            for (&wv, crow) in wrow.iter().zip(col.chunks_exact(positions)) {
                for (o, &c) in plane.iter_mut().zip(crow) {
                    *o += wv * c;
                }
            }
        }
        for v in &mut out {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        (out, oh, ow)
    }

    /// `grad_out` is taken with respect to the rectified output and is masked
    /// in place by `output > 0`.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        input: &[T],
        h: usize,
        w: usize,
        output: &[T],
        grad_out: &mut [T],
        grads: &mut Conv2d<T>,
        grad_in: Option<&mut [T]>,
    ) {
        for (g, &o) in grad_out.iter_mut().zip(output) {
            if o <= T::zero() {
                *g = T::zero();
            }
        }
        let (col, oh, ow) = self.im2col(input, h, w);
        let positions = oh * ow;
        let taps = self.cin() * KERNEL * KERNEL;
        let mut gcol = grad_in.is_some().then(|| vec![T::zero(); col.len()]);
        for (co, gplane) in grad_out.chunks_exact(positions).enumerate() {
            grads.bias.data[co] += gplane.iter().copied().sum();
            let gw = &mut grads.weight.data[co * taps..(co + 1) * taps];
            for (g, crow) in gw.iter_mut().zip(col.chunks_exact(positions)) {
                *g += dot(gplane, crow);
            }
            if let Some(gc) = gcol.as_mut() {
                let wrow = &self.weight.data[co * taps..(co + 1) * taps];
                for (&wv, grow) in wrow.iter().zip(gc.chunks_exact_mut(positions)) {
                    for (o, &g) in grow.iter_mut().zip(gplane) {
                        *o += wv * g;
                    }
                }
            }
        }
        let (Some(gi), Some(gc)) = (grad_in, gcol) else { return };
        gi.iter_mut().for_each(|v| *v = T::zero());
        for ci in 0..self.cin() {
            let gin = &mut gi[ci * h * w..(ci + 1) * h * w];
            for ky in 0..KERNEL {
                let (oy0, oy1) = Self::tap_range(ky, h, oh);
                for kx in 0..KERNEL {
                    let (ox0, ox1) = Self::tap_range(kx, w, ow);
                    let k = (ci * KERNEL + ky) * KERNEL + kx;
                    let row = &gc[k * positions..(k + 1) * positions];
                    for oy in oy0..oy1 {
                        let iy = STRIDE * oy + ky - PAD;
                        let dst = &mut gin[iy * w..(iy + 1) * w];
                        for ox in ox0..ox1 {
                            dst[STRIDE * ox + kx - PAD] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// The builtin encoder: a stack of stride-2 convolution blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallCnn<T> {
    pub input_size: usize,
    pub convs: Vec<Conv2d<T>>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct EncoderTrace<T> {
    /// `acts[0]` is the input; `acts[l + 1]` the rectified output of block `l`.
    acts: Vec<Vec<T>>,
    sides: Vec<usize>,
}

impl<T: Scalar> SmallCnn<T> {
    pub fn zeros(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        if config.kind != EncoderKind::BuiltinSmallCnn {
            return Err(Error::InvalidConfig("SmallCnn requires the builtin encoder kind".into()));
        }
        let mut cin = 3;
        let convs = config
            .channels
            .iter()
            .map(|&cout| {
                let c = Conv2d::zeros(cin, cout);
                cin = cout;
                c
            })
            .collect();
        Ok(SmallCnn { input_size: config.input_size, convs })
    }

    /// He-normal weights, zero biases.
    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        for c in &mut net.convs {
            let fan_in = c.cin() * KERNEL * KERNEL;
            c.weight.fill_normal(rng, (2.0 / fan_in as f64).sqrt());
        }
        Ok(net)
    }

    pub fn zeros_like(&self) -> Self {
        SmallCnn {
            input_size: self.input_size,
            convs: self.convs.iter().map(|c| Conv2d::zeros(c.cin(), c.cout())).collect(),
        }
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        self.convs
            .iter()
            .enumerate()
            .flat_map(|(l, c)| [(format!("encoder.conv{l}.weight"), &c.weight), (format!("encoder.conv{l}.bias"), &c.bias)])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.convs.iter_mut().flat_map(|c| [&mut c.weight, &mut c.bias]).collect()
    }

    pub fn forward_trace(&self, input: &[T]) -> Result<(FeatureMap<T>, EncoderTrace<T>)> {
        check_input(input.len(), self.input_size)?;
        let mut acts = vec![input.to_vec()];
        let mut sides = vec![self.input_size];
        for conv in &self.convs {
            let side = *sides.last().unwrap();
            let (out, oh, _) = conv.forward(acts.last().unwrap(), side, side);
            acts.push(out);
            sides.push(oh);
        }
        let side = *sides.last().unwrap();
        let map = FeatureMap {
            channels: self.convs.last().map_or(3, |c| c.cout()),
            height: side,
            width: side,
            data: acts.last().unwrap().clone(),
        };
        Ok((map, EncoderTrace { acts, sides }))
    }

    /// Accumulates parameter gradients into `grads` given the gradient of the
    /// loss with respect to the output feature map.
    pub fn backward(&self, trace: &EncoderTrace<T>, grad_map: Vec<T>, grads: &mut SmallCnn<T>) {
        let mut grad = grad_map;
        for l in (0..self.convs.len()).rev() {
            let side = trace.sides[l];
            let mut grad_in = if l > 0 { Some(vec![T::zero(); trace.acts[l].len()]) } else { None };
            self.convs[l].backward(
                &trace.acts[l],
                side,
                side,
                &trace.acts[l + 1],
                &mut grad,
                &mut grads.convs[l],
                grad_in.as_deref_mut(),
            );
            match grad_in {
                Some(g) => grad = g,
                None => break,
            }
        }
    }

    pub fn add_assign(&mut self, other: &SmallCnn<T>) {
        for (a, b) in self.convs.iter_mut().zip(&other.convs) {
            a.weight.add_assign(&b.weight);
            a.bias.add_assign(&b.bias);
        }
    }

    pub fn cast<U: Scalar>(&self) -> SmallCnn<U> {
        SmallCnn {
            input_size: self.input_size,
            convs: self.convs.iter().map(|c| Conv2d { weight: c.weight.cast(), bias: c.bias.cast() }).collect(),
        }
    }
}

impl<T: Scalar> FeatureEncoder<T> for SmallCnn<T> {
    fn feature_dim(&self) -> usize {
        self.convs.last().map_or(3, |c| c.cout())
    }

    fn input_size(&self) -> usize {
        self.input_size
    }

    fn encode(&self, input: &[T]) -> Result<FeatureMap<T>> {
        check_input(input.len(), self.input_size)?;
        let mut cur = input.to_vec();
        let mut side = self.input_size;
        for conv in &self.convs {
            let (out, oh, _) = conv.forward(&cur, side, side);
            cur = out;
            side = oh;
        }
        Ok(FeatureMap { channels: self.feature_dim(), height: side, width: side, data: cur })
    }
}

/// Adapter for any backbone closure honouring the encode contract. External
/// encoders are inference-only: they take no part in gradient updates.
pub struct ExternalEncoder<F> {
    pub feature_dim: usize,
    pub input_size: usize,
    pub f: F,
}

impl<T, F> FeatureEncoder<T> for ExternalEncoder<F>
where
    T: Scalar,
    F: Fn(&[T]) -> FeatureMap<T> + Sync,
{
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn input_size(&self) -> usize {
        self.input_size
    }

    fn encode(&self, input: &[T]) -> Result<FeatureMap<T>> {
        check_input(input.len(), self.input_size)?;
        let map = (self.f)(input);
        if map.channels != self.feature_dim || map.data.len() != map.channels * map.height * map.width {
            return Err(Error::InvalidInput(format!(
                "external encoder returned {} channels / {} values, expected {} channels",
                map.channels,
                map.data.len(),
                self.feature_dim
            )));
        }
        Ok(map)
    }
}

/// Runs `encoder` on `input` after checking it against `config`.
pub fn encode<T: Scalar, E: FeatureEncoder<T> + ?Sized>(
    input: &[T],
    config: &EncoderConfig,
    encoder: &E,
) -> Result<FeatureMap<T>> {
    if encoder.feature_dim() != config.feature_dim || encoder.input_size() != config.input_size {
        return Err(Error::InvalidInput("encoder parameters do not match the encoder config".into()));
    }
    check_input(input.len(), config.input_size)?;
    encoder.encode(input)
}

/// Per-channel spatial mean.
pub fn gap_flatten<T: Scalar>(map: &FeatureMap<T>) -> Result<FeatureVector<T>> {
    let area = map.height * map.width;
    if map.channels == 0 || area == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot pool a {}x{}x{} feature map",
            map.channels, map.height, map.width
        )));
    }
    if map.data.len() != map.channels * area {
        return Err(Error::InvalidInput("feature map data does not match its shape".into()));
    }
    let inv = T::one() / T::of(area as f64);
    Ok(FeatureVector(map.data.chunks(area).map(|plane| plane.iter().copied().sum::<T>() * inv).collect()))
}

/// Gradient of [`gap_flatten`] spread back over the `area` positions of each channel.
pub fn gap_backward<T: Scalar>(grad: &[T], area: usize) -> Vec<T> {
    let inv = T::one() / T::of(area as f64);
    grad.iter().flat_map(|&g| std::iter::repeat_n(g * inv, area)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(size: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3 * size * size).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Direct zero-padded strided convolution with bounds checks on every tap.
    fn conv_oracle(c: &Conv2d<f64>, input: &[f64], side: usize) -> Vec<f64> {
        let o = conv_out(side);
        let mut out = vec![0.0; c.cout() * o * o];
        for co in 0..c.cout() {
            for oy in 0..o {
                for ox in 0..o {
                    let mut s = c.bias.data[co];
                    for ci in 0..c.cin() {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (2 * oy + ky) as isize - 1;
                                let ix = (2 * ox + kx) as isize - 1;
                                if iy < 0 || ix < 0 || iy >= side as isize || ix >= side as isize {
                                    continue;
                                }
                                s += c.weight.data[((co * c.cin() + ci) * 3 + ky) * 3 + kx]
                                    * input[(ci * side + iy as usize) * side + ix as usize];
                            }
                        }
                    }
                    out[(co * o + oy) * o + ox] = s.max(0.0);
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_oracle_on_odd_and_even_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for side in [1usize, 2, 5, 8, 13] {
            let mut c = Conv2d::<f64>::zeros(3, 4);
            c.weight.fill_normal(&mut rng, 0.5);
            c.bias.fill_normal(&mut rng, 0.1);
            let x = random_input(side, side as u64);
            let (fast, oh, _) = c.forward(&x, side, side);
            assert_eq!(oh, conv_out(side));
            let slow = conv_oracle(&c, &x, side);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn builtin_shape_at_224() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.output_side(), 14);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = SmallCnn::<f32>::init(&cfg, &mut rng).unwrap();
        let x = vec![0.1f32; 3 * 224 * 224];
        let map = encode(&x, &cfg, &net).unwrap();
        assert_eq!((map.channels, map.height, map.width), (128, 14, 14));
        assert_eq!(map, net.encode(&x).unwrap());
    }

    #[test]
    fn zero_final_conv_gives_zero_map() {
        let cfg = EncoderConfig::builtin(16, vec![4, 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = SmallCnn::<f64>::init(&cfg, &mut rng).unwrap();
        let last = net.convs.last_mut().unwrap();
        last.weight.data.iter_mut().for_each(|w| *w = 0.0);
        let map = net.encode(&vec![0.0; 3 * 16 * 16]).unwrap();
        assert!(map.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_invalid_input() {
        let cfg = EncoderConfig::builtin(16, vec![4]);
        let net = SmallCnn::<f64>::zeros(&cfg).unwrap();
        assert!(matches!(net.encode(&[0.0; 10]), Err(Error::InvalidInput(_))));
        let other = EncoderConfig::builtin(32, vec![4]);
        assert!(encode(&vec![0.0; 3 * 16 * 16], &other, &net).is_err());
    }

    #[test]
    fn gap_examples() {
        let ones = FeatureMap { channels: 8, height: 4, width: 4, data: vec![1.0f64; 128] };
        assert_eq!(gap_flatten(&ones).unwrap().0, vec![1.0; 8]);
        let seq = FeatureMap { channels: 1, height: 4, width: 4, data: (1..=16).map(|v| v as f64).collect() };
        assert_eq!(gap_flatten(&seq).unwrap().0, vec![8.5]);
        let empty = FeatureMap::<f64> { channels: 2, height: 0, width: 3, data: vec![] };
        assert!(matches!(gap_flatten(&empty), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn external_encoder_adapter() {
        let ext = ExternalEncoder {
            feature_dim: 2,
            input_size: 4,
            f: |x: &[f64]| FeatureMap { channels: 2, height: 1, width: 1, data: vec![x[0], x[1]] },
        };
        let cfg = EncoderConfig { kind: EncoderKind::External, feature_dim: 2, input_size: 4, channels: vec![] };
        let x: Vec<f64> = (0..48).map(|v| v as f64).collect();
        let v = gap_flatten(&encode(&x, &cfg, &ext).unwrap()).unwrap();
        assert_eq!(v.0, vec![0.0, 1.0]);
    }

    fn param_mut(n: &mut SmallCnn<f64>, l: usize, is_bias: bool, k: usize) -> &mut f64 {
        let c = &mut n.convs[l];
        if is_bias {
            &mut c.bias.data[k]
        } else {
            &mut c.weight.data[k]
        }
    }

    /// Central differences on a scalar probe of the feature map.
    #[test]
    fn encoder_gradients_match_finite_differences() {
        let cfg = EncoderConfig::builtin(16, vec![4, 6, 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = SmallCnn::<f64>::init(&cfg, &mut rng).unwrap();
        let x = random_input(16, 99);
        let (map, trace) = net.forward_trace(&x).unwrap();
        let probe: Vec<f64> = (0..map.data.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let objective = |n: &SmallCnn<f64>| -> f64 {
            n.encode(&x).unwrap().data.iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let mut grads = net.zeros_like();
        net.backward(&trace, probe.clone(), &mut grads);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (l, conv) in net.convs.iter().enumerate() {
            for (is_bias, n) in [(false, conv.weight.len()), (true, conv.bias.len())] {
                for k in (0..n).step_by(7) {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    *param_mut(&mut plus, l, is_bias, k) += h;
                    *param_mut(&mut minus, l, is_bias, k) -= h;
                    let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    let analytic = if is_bias { grads.convs[l].bias.data[k] } else { grads.convs[l].weight.data[k] };
                    let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    proptest! {
        #[test]
        fn gap_is_permutation_invariant_and_linear(
            vals in proptest::collection::vec(-10.0f64..10.0, 3 * 16),
            other in proptest::collection::vec(-10.0f64..10.0, 3 * 16),
            shift in 0usize..16, a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let map = FeatureMap { channels: 3, height: 4, width: 4, data: vals.clone() };
            let mut permuted = vals.clone();
            for plane in permuted.chunks_mut(16) {
                plane.rotate_left(shift);
                plane.reverse();
            }
            let pm = FeatureMap { data: permuted, ..map.clone() };
            let g1 = gap_flatten(&map).unwrap().0;
            let g2 = gap_flatten(&pm).unwrap().0;
            for (x, y) in g1.iter().zip(&g2) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let om = FeatureMap { data: other.clone(), ..map.clone() };
            let mix = FeatureMap { data: vals.iter().zip(&other).map(|(x, y)| a * x + b * y).collect(), ..map.clone() };
            let lhs = gap_flatten(&mix).unwrap().0;
            let go = gap_flatten(&om).unwrap().0;
            for i in 0..3 {
                prop_assert!((lhs[i] - (a * g1[i] + b * go[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn output_shape_depends_only_on_config(v in -5.0f64..5.0) {
            let cfg = EncoderConfig::builtin(16, vec![2, 3]);
            let net = SmallCnn::<f64>::zeros(&cfg).unwrap();
            let map = net.encode(&vec![v; 3 * 16 * 16]).unwrap();
            prop_assert_eq!((map.channels, map.height, map.width), (3, 4, 4));
        }
    }
}
