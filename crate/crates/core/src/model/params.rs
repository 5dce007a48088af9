use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

const LAYER_TENSORS: [&str; 16] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1_gain", "ln1_bias", "w1", "b1", "w2", "b2", "ln2_gain",
    "ln2_bias",
];

impl LayerParams {
    fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.ln2_gain,
            &self.ln2_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
        ]
    }
}

/// Every learnable weight of the encoder classifier. Linear weights are
/// stored `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParameters {
    pub embed_w: Tensor,
    pub embed_b: Tensor,
    pub layers: Vec<LayerParams>,
    pub head_w: Tensor,
    pub head_b: Tensor,
}

impl TransformerParameters {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        let layer = LayerParams {
            wq: Tensor::zeros(&[d, d]),
            bq: Tensor::zeros(&[d]),
            wk: Tensor::zeros(&[d, d]),
            bk: Tensor::zeros(&[d]),
            wv: Tensor::zeros(&[d, d]),
            bv: Tensor::zeros(&[d]),
            wo: Tensor::zeros(&[d, d]),
            bo: Tensor::zeros(&[d]),
            ln1_gain: Tensor::zeros(&[d]),
            ln1_bias: Tensor::zeros(&[d]),
            w1: Tensor::zeros(&[d, config.d_ff]),
            b1: Tensor::zeros(&[config.d_ff]),
            w2: Tensor::zeros(&[config.d_ff, d]),
            b2: Tensor::zeros(&[d]),
            ln2_gain: Tensor::zeros(&[d]),
            ln2_bias: Tensor::zeros(&[d]),
        };
        TransformerParameters {
            embed_w: Tensor::zeros(&[config.input_dim, d]),
            embed_b: Tensor::zeros(&[d]),
            layers: vec![layer; config.n_layers],
            head_w: Tensor::zeros(&[d, config.n_classes]),
            head_b: Tensor::zeros(&[config.n_classes]),
        }
    }

    /// Tensors in declaration order: embedding, layers, head.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embed_w, &self.embed_b];
        for layer in &self.layers {
            out.extend(layer.tensors());
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embed_w, &mut self.embed_b];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    /// Names matching [`Self::tensors`], e.g. `layers.1.wq`.
    pub fn names(&self) -> Vec<String> {
        let mut out = vec!["embed_w".to_string(), "embed_b".to_string()];
        for l in 0..self.layers.len() {
            out.extend(LAYER_TENSORS.iter().map(|n| format!("layers.{l}.{n}")));
        }
        out.push("head_w".into());
        out.push("head_b".into());
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Whether every tensor has the shape `config` implies.
    pub fn matches(&self, config: &ModelConfig) -> bool {
        let expected = TransformerParameters::zeros(config);
        self.layers.len() == expected.layers.len()
            && self
                .tensors()
                .iter()
                .zip(expected.tensors())
                .all(|(a, b)| a.shape == b.shape)
    }

    /// Rounds every value to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            for v in &mut t.data {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Seeded initialization: linear weights uniform in `±1/sqrt(fan_in)`,
/// biases zero, layer-norm gains one. Values are rounded to `f32`.
pub fn init_params(config: &ModelConfig, seed: u64) -> TransformerParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = TransformerParameters::zeros(config);
    let mut fill = |t: &mut Tensor| {
        let bound = 1.0 / (t.shape[0] as f64).sqrt();
        for v in &mut t.data {
            *v = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
    };
    fill(&mut params.embed_w);
    for layer in &mut params.layers {
        fill(&mut layer.wq);
        fill(&mut layer.wk);
        fill(&mut layer.wv);
        fill(&mut layer.wo);
        fill(&mut layer.w1);
        fill(&mut layer.w2);
        layer.ln1_gain = Tensor::filled(&[config.d_model], 1.0);
        layer.ln2_gain = Tensor::filled(&[config.d_model], 1.0);
    }
    fill(&mut params.head_w);
    params.round_to_f32();
    params
}
