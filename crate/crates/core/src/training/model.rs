use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::Scale;
use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};
use crate::perception::{gap_flatten, EncoderConfig, FeatureVector, SmallCnn};
use crate::scalehyper::{
    apply_head, embed_scale, generate_params, EmbedTrace, GeneratedHeadParams, HeadGenerator, HeadLayout,
    HeadParams, ScaleEmbedder, ScaleRepresentation, SCALE_EMBED_DIM,
};

/// How (and whether) the scale factor enters the quality prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    /// Scale-generated head parameters.
    #[default]
    Sgh,
    /// Scale representation concatenated with image features, fixed head.
    Fusion,
    /// Fixed head, no scale input.
    Blind,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framework::Sgh => "sgh",
            Framework::Fusion => "fusion",
            Framework::Blind => "blind",
        })
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgh" => Ok(Framework::Sgh),
            "fusion" => Ok(Framework::Fusion),
            "blind" => Ok(Framework::Blind),
            other => Err(Error::InvalidConfig(format!("unknown framework {other:?}"))),
        }
    }
}

/// Every learnable parameter of one framework instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub framework: Framework,
    pub encoder: SmallCnn<T>,
    pub embedder: Option<ScaleEmbedder<T>>,
    pub generator: Option<HeadGenerator<T>>,
    pub head: Option<HeadParams<T>>,
    pub layout: HeadLayout,
}

/// Per-scale quantities shared by every sample of that scale in a batch.
#[derive(Clone, Debug)]
pub enum ScaleContext<T> {
    Sgh { s: ScaleRepresentation<T>, trace: EmbedTrace<T>, head: GeneratedHeadParams<T> },
    Fusion { s: ScaleRepresentation<T>, trace: EmbedTrace<T> },
    Blind,
}

impl<T: Scalar> Model<T> {
    /// All-zero parameters with the framework's parameter groups.
    pub fn zeros(framework: Framework, encoder: &EncoderConfig) -> Result<Self> {
        let enc = SmallCnn::zeros(encoder)?;
        let d = encoder.feature_dim;
        let m = match framework {
            Framework::Sgh => {
                let layout = HeadLayout::new(d);
                Model {
                    framework,
                    encoder: enc,
                    embedder: Some(ScaleEmbedder::zeros()),
                    generator: Some(HeadGenerator::zeros(&layout)),
                    head: None,
                    layout,
                }
            }
            Framework::Fusion => {
                let layout = HeadLayout::new(d + SCALE_EMBED_DIM);
                Model {
                    framework,
                    encoder: enc,
                    embedder: Some(ScaleEmbedder::zeros()),
                    generator: None,
                    head: Some(HeadParams::zeros(&layout)),
                    layout,
                }
            }
            Framework::Blind => {
                let layout = HeadLayout::new(d);
                Model { framework, encoder: enc, embedder: None, generator: None, head: Some(HeadParams::zeros(&layout)), layout }
            }
        };
        Ok(m)
    }

    /// Random initialization; draws encoder, embedder, then generator or head.
    pub fn init<R: Rng + ?Sized>(framework: Framework, encoder: &EncoderConfig, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(framework, encoder)?;
        m.encoder = SmallCnn::init(encoder, rng)?;
        if m.embedder.is_some() {
            m.embedder = Some(ScaleEmbedder::init(rng));
        }
        if m.generator.is_some() {
            m.generator = Some(HeadGenerator::init(&m.layout, rng));
        }
        if m.head.is_some() {
            m.head = Some(HeadParams::init(&m.layout, rng));
        }
        Ok(m)
    }

    pub fn zeros_like(&self) -> Self {
        Model {
            framework: self.framework,
            encoder: self.encoder.zeros_like(),
            embedder: self.embedder.as_ref().map(ScaleEmbedder::zeros_like),
            generator: self.generator.as_ref().map(HeadGenerator::zeros_like),
            head: self.head.as_ref().map(HeadParams::zeros_like),
            layout: self.layout.clone(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        use crate::perception::FeatureEncoder;
        self.encoder.feature_dim()
    }

    /// Named parameter blocks in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = self.encoder.params();
        if let Some(e) = &self.embedder {
            v.extend(e.named());
        }
        if let Some(g) = &self.generator {
            v.extend(g.named());
        }
        if let Some(h) = &self.head {
            v.extend(h.named("head"));
        }
        v
    }

    /// Tensors in the order of [`Model::named`], optionally skipping the encoder.
    pub fn tensors(&self, with_encoder: bool) -> Vec<&Tensor<T>> {
        let skip = if with_encoder { 0 } else { 2 * self.encoder.convs.len() };
        self.named().into_iter().skip(skip).map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self, with_encoder: bool) -> Vec<&mut Tensor<T>> {
        let mut v = if with_encoder { self.encoder.params_mut() } else { Vec::new() };
        if let Some(e) = &mut self.embedder {
            v.extend(e.tensors_mut());
        }
        if let Some(g) = &mut self.generator {
            v.extend(g.tensors_mut());
        }
        if let Some(h) = &mut self.head {
            v.extend(h.tensors_mut());
        }
        v
    }

    pub fn add_assign(&mut self, other: &Model<T>) {
        for (a, b) in self.tensors_mut(true).into_iter().zip(other.tensors(true)) {
            a.add_assign(b);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            framework: self.framework,
            encoder: self.encoder.cast(),
            embedder: self.embedder.as_ref().map(ScaleEmbedder::cast),
            generator: self.generator.as_ref().map(HeadGenerator::cast),
            head: self.head.as_ref().map(HeadParams::cast),
            layout: self.layout.clone(),
        }
    }

    pub fn scale_context(&self, scale: Scale) -> Result<ScaleContext<T>> {
        match self.framework {
            Framework::Sgh => {
                let (s, trace) = self.embedder.as_ref().expect("sgh has an embedder").forward_trace(scale)?;
                let gen = self.generator.as_ref().expect("sgh has a generator");
                let head = generate_params(&s, &self.layout, gen)?;
                Ok(ScaleContext::Sgh { s, trace, head })
            }
            Framework::Fusion => {
                let (s, trace) = self.embedder.as_ref().expect("fusion has an embedder").forward_trace(scale)?;
                Ok(ScaleContext::Fusion { s, trace })
            }
            Framework::Blind => Ok(ScaleContext::Blind),
        }
    }

    /// Head output for pooled features under a prepared scale context.
    pub fn score_features(&self, v: &FeatureVector<T>, ctx: &ScaleContext<T>) -> Result<T> {
        match ctx {
            ScaleContext::Sgh { head, .. } => apply_head(v, head, &self.layout),
            ScaleContext::Fusion { s, .. } => fusion_forward(v, s, self.head.as_ref().expect("fusion has a head")),
            ScaleContext::Blind => blind_forward(v, self.head.as_ref().expect("blind has a head")),
        }
    }

    /// Scores one normalized patch.
    pub fn predict(&self, input: &[T], scale: Scale) -> Result<T> {
        use crate::perception::FeatureEncoder;
        let v = gap_flatten(&self.encoder.encode(input)?)?;
        self.score_features(&v, &self.scale_context(scale)?)
    }

    /// Generated head for `scale`; only meaningful for the SGH framework.
    pub fn generated_head(&self, scale: Scale) -> Result<GeneratedHeadParams<T>> {
        match self.framework {
            Framework::Sgh => {
                let s = embed_scale(scale, self.embedder.as_ref().expect("sgh has an embedder"))?;
                generate_params(&s, &self.layout, self.generator.as_ref().expect("sgh has a generator"))
            }
            other => Err(Error::WrongFramework { expected: "sgh".into(), found: other.to_string() }),
        }
    }
}

/// Concatenates `[V || S]` and applies a fixed head of input width `D + 128`.
pub fn fusion_forward<T: Scalar>(v: &FeatureVector<T>, s: &ScaleRepresentation<T>, head: &HeadParams<T>) -> Result<T> {
    if s.0.len() != SCALE_EMBED_DIM {
        return Err(Error::InvalidInput(format!("scale representation has length {}", s.0.len())));
    }
    let layout = HeadLayout::new(v.len() + SCALE_EMBED_DIM);
    let mut x = v.0.clone();
    x.extend_from_slice(&s.0);
    apply_head(&FeatureVector(x), head, &layout)
}

/// Fixed head over image features only.
pub fn blind_forward<T: Scalar>(v: &FeatureVector<T>, head: &HeadParams<T>) -> Result<T> {
    let layout = HeadLayout::new(v.len());
    apply_head(v, head, &layout)
}
