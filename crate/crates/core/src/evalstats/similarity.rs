use serde::{Deserialize, Serialize};

use crate::datakit::Scale;
use crate::error::{Error, Result};
use crate::training::{Checkpoint, Framework};

/// Cosine similarity between flattened generated weights, one symmetric
/// matrix per head layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSimilarity {
    pub scales: Vec<Scale>,
    /// `layers[j][a][b]` compares layer `j` weights generated for `scales[a]` and `scales[b]`.
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl WeightSimilarity {
    /// Long-format CSV: `layer,scale_a,scale_b,cosine`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,scale_a,scale_b,cosine\n");
        for (j, m) in self.layers.iter().enumerate() {
            for (a, row) in m.iter().enumerate() {
                for (b, c) in row.iter().enumerate() {
                    out.push_str(&format!("{j},{},{},{c}\n", self.scales[a], self.scales[b]));
                }
            }
        }
        out
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    ab / (aa.sqrt() * bb.sqrt())
}

pub fn weight_similarity(checkpoint: &Checkpoint, scales: &[Scale]) -> Result<WeightSimilarity> {
    if checkpoint.framework != Framework::Sgh {
        return Err(Error::WrongFramework { expected: "sgh".into(), found: checkpoint.framework.to_string() });
    }
    if scales.is_empty() {
        return Err(Error::InvalidInput("no scales given".into()));
    }
    let heads = scales.iter().map(|&s| checkpoint.model.generated_head(s)).collect::<Result<Vec<_>>>()?;
    let n = scales.len();
    let layers = (0..checkpoint.model.layout.n_layers())
        .map(|j| {
            let mut m = vec![vec![0.0; n]; n];
            for a in 0..n {
                m[a][a] = 1.0;
                for b in a + 1..n {
                    let c = cosine(&heads[a].weights[j].data, &heads[b].weights[j].data);
                    m[a][b] = c;
                    m[b][a] = c;
                }
            }
            m
        })
        .collect();
    Ok(WeightSimilarity { scales: scales.to_vec(), layers })
}
