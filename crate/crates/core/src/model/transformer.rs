//! Encoder forward pass and its analytic backward pass.
//!
//! Each sample is processed independently over its unmasked positions only.
//! Padded keys therefore receive exactly zero attention (the limit of an
//! additive `-inf` score) and padded values cannot reach the logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{layer_norm, layer_norm_backward, linear, linear_backward, linear_backward_params, softmax, NormCache};
use super::{sinusoidal_pe, ModelConfig, ModelError, TransformerParameters};
use crate::encoding::FeatureMatrix;

/// A padded mini-batch. `inputs` is `size x max_len x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<f64>,
    /// `size x max_len`; true marks a real frame.
    pub mask: Vec<bool>,
    /// One class index per sample; may be empty for inference.
    pub labels: Vec<usize>,
    pub size: usize,
    pub max_len: usize,
    pub width: usize,
}

impl Batch {
    pub fn new(
        inputs: Vec<f64>,
        mask: Vec<bool>,
        labels: Vec<usize>,
        size: usize,
        max_len: usize,
        width: usize,
    ) -> Result<Self, ModelError> {
        if size == 0 || max_len == 0 {
            return Err(ModelError::Shape("empty batch".into()));
        }
        if inputs.len() != size * max_len * width || mask.len() != size * max_len {
            return Err(ModelError::Shape(format!(
                "batch of {size} x {max_len} x {width} got {} inputs and {} mask entries",
                inputs.len(),
                mask.len()
            )));
        }
        if !labels.is_empty() && labels.len() != size {
            return Err(ModelError::Shape(format!("{} labels for {size} samples", labels.len())));
        }
        if let Some(b) = (0..size).find(|&b| !mask[b * max_len..(b + 1) * max_len].iter().any(|&m| m)) {
            return Err(ModelError::EmptySample(b));
        }
        Ok(Batch {
            inputs,
            mask,
            labels,
            size,
            max_len,
            width,
        })
    }

    /// Zero-pads encoded clips to the longest one.
    pub fn from_matrices(matrices: &[&FeatureMatrix], labels: Vec<usize>, max_frames: usize) -> Result<Self, ModelError> {
        let width = crate::landmark::FEATURE_DIM;
        let max_len = matrices.iter().map(|m| m.frames()).max().unwrap_or(0);
        if max_len > max_frames {
            return Err(ModelError::TooLong {
                frames: max_len,
                max: max_frames,
            });
        }
        let size = matrices.len();
        let mut inputs = vec![0.0; size * max_len * width];
        let mut mask = vec![false; size * max_len];
        for (b, m) in matrices.iter().enumerate() {
            let base = b * max_len * width;
            for (dst, &v) in inputs[base..base + m.values().len()].iter_mut().zip(m.values()) {
                *dst = v as f64;
            }
            mask[b * max_len..b * max_len + m.frames()].fill(true);
        }
        Batch::new(inputs, mask, labels, size, max_len, width)
    }

    fn positions(&self, b: usize) -> Vec<usize> {
        (0..self.max_len).filter(|&t| self.mask[b * self.max_len + t]).collect()
    }

    fn gather(&self, b: usize, positions: &[usize]) -> Vec<f64> {
        let mut rows = Vec::with_capacity(positions.len() * self.width);
        for &t in positions {
            let at = (b * self.max_len + t) * self.width;
            rows.extend_from_slice(&self.inputs[at..at + self.width]);
        }
        rows
    }
}

/// Attention weights of one sample, indexed `[layer][head][query][key]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    pub layers: usize,
    pub heads: usize,
    pub frames: usize,
    pub weights: Vec<f64>,
    pub mask: Vec<bool>,
}

impl AttentionTensor {
    pub fn zeros(layers: usize, heads: usize, frames: usize, mask: Vec<bool>) -> Self {
        AttentionTensor {
            layers,
            heads,
            frames,
            weights: vec![0.0; layers * heads * frames * frames],
            mask,
        }
    }

    fn offset(&self, layer: usize, head: usize) -> usize {
        (layer * self.heads + head) * self.frames * self.frames
    }

    /// The `frames x frames` matrix of one layer and head. Rows of masked
    /// queries are all zero.
    pub fn matrix(&self, layer: usize, head: usize) -> &[f64] {
        let at = self.offset(layer, head);
        &self.weights[at..at + self.frames * self.frames]
    }

    pub fn matrix_mut(&mut self, layer: usize, head: usize) -> &mut [f64] {
        let at = self.offset(layer, head);
        let n = self.frames * self.frames;
        &mut self.weights[at..at + n]
    }

    pub fn get(&self, layer: usize, head: usize, query: usize, key: usize) -> f64 {
        self.matrix(layer, head)[query * self.frames + key]
    }
}

struct LayerCache {
    x_in: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `heads x n x n`
    probs: Vec<f64>,
    ctx: Vec<f64>,
    attn_drop: Option<Vec<f64>>,
    ln1: NormCache,
    x1: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    ffn_drop: Option<Vec<f64>>,
    ln2: NormCache,
}

struct SampleTrace {
    n: usize,
    input: Vec<f64>,
    embed_drop: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    pooled: Vec<f64>,
    logits: Vec<f64>,
}

fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect()
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

fn run_sample(
    params: &TransformerParameters,
    config: &ModelConfig,
    pe: &[f64],
    input: Vec<f64>,
    positions: &[usize],
    mut rng: Option<ChaCha8Rng>,
) -> SampleTrace {
    let n = positions.len();
    let d = config.d_model;
    let heads = config.n_heads;
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let p = config.dropout;
    let mut draw = |len: usize| rng.as_mut().filter(|_| p > 0.0).map(|r| dropout_mask(r, len, p));

    let mut x = linear(&input, n, &params.embed_w, &params.embed_b);
    for (row, &pos) in x.chunks_exact_mut(d).zip(positions) {
        for (v, e) in row.iter_mut().zip(&pe[pos * d..(pos + 1) * d]) {
            *v += e;
        }
    }
    let embed_drop = draw(n * d);
    apply_mask(&mut x, &embed_drop);

    let mut layers = Vec::with_capacity(config.n_layers);
    for lp in &params.layers {
        let q = linear(&x, n, &lp.wq, &lp.bq);
        let k = linear(&x, n, &lp.wk, &lp.bk);
        let v = linear(&x, n, &lp.wv, &lp.bv);
        let mut probs = vec![0.0; heads * n * n];
        let mut ctx = vec![0.0; n * d];
        for h in 0..heads {
            let off = h * dh;
            let ph = &mut probs[h * n * n..(h + 1) * n * n];
            for t in 0..n {
                let qt = &q[t * d + off..t * d + off + dh];
                let row = &mut ph[t * n..(t + 1) * n];
                for (u, s) in row.iter_mut().enumerate() {
                    let ku = &k[u * d + off..u * d + off + dh];
                    *s = scale * qt.iter().zip(ku).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax(row);
                let ct = &mut ctx[t * d + off..t * d + off + dh];
                for (u, &w) in row.iter().enumerate() {
                    for (c, vv) in ct.iter_mut().zip(&v[u * d + off..u * d + off + dh]) {
                        *c += w * vv;
                    }
                }
            }
        }
        let mut attn = linear(&ctx, n, &lp.wo, &lp.bo);
        let attn_drop = draw(n * d);
        apply_mask(&mut attn, &attn_drop);
        let r1: Vec<f64> = x.iter().zip(&attn).map(|(a, b)| a + b).collect();
        let (x1, ln1) = layer_norm(&r1, d, &lp.ln1_gain, &lp.ln1_bias);

        let hidden_pre = linear(&x1, n, &lp.w1, &lp.b1);
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let mut ffn = linear(&hidden, n, &lp.w2, &lp.b2);
        let ffn_drop = draw(n * d);
        apply_mask(&mut ffn, &ffn_drop);
        let r2: Vec<f64> = x1.iter().zip(&ffn).map(|(a, b)| a + b).collect();
        let (x2, ln2) = layer_norm(&r2, d, &lp.ln2_gain, &lp.ln2_bias);

        layers.push(LayerCache {
            x_in: std::mem::replace(&mut x, x2),
            q,
            k,
            v,
            probs,
            ctx,
            attn_drop,
            ln1,
            x1,
            hidden_pre,
            hidden,
            ffn_drop,
            ln2,
        });
    }

    let mut pooled = vec![0.0; d];
    for row in x.chunks_exact(d) {
        for (p, v) in pooled.iter_mut().zip(row) {
            *p += v;
        }
    }
    for p in &mut pooled {
        *p /= n as f64;
    }
    let logits = linear(&pooled, 1, &params.head_w, &params.head_b);
    SampleTrace {
        n,
        input,
        embed_drop,
        layers,
        pooled,
        logits,
    }
}

fn backward_sample(
    trace: &SampleTrace,
    dlogits: &[f64],
    params: &TransformerParameters,
    config: &ModelConfig,
    grads: &mut TransformerParameters,
) {
    let n = trace.n;
    let d = config.d_model;
    let heads = config.n_heads;
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let dpooled = linear_backward(&trace.pooled, dlogits, &params.head_w, &mut grads.head_w, &mut grads.head_b);
    let mut dx: Vec<f64> = (0..n).flat_map(|_| dpooled.iter().map(|g| g / n as f64)).collect();

    for (l, cache) in trace.layers.iter().enumerate().rev() {
        let lp = &params.layers[l];
        let lg = &mut grads.layers[l];

        let dr2 = layer_norm_backward(&dx, d, &cache.ln2, &lp.ln2_gain, &mut lg.ln2_gain, &mut lg.ln2_bias);
        let mut dffn = dr2.clone();
        apply_mask(&mut dffn, &cache.ffn_drop);
        let mut dhidden = linear_backward(&cache.hidden, &dffn, &lp.w2, &mut lg.w2, &mut lg.b2);
        for (g, &pre) in dhidden.iter_mut().zip(&cache.hidden_pre) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        let dx1_ffn = linear_backward(&cache.x1, &dhidden, &lp.w1, &mut lg.w1, &mut lg.b1);
        let dx1: Vec<f64> = dr2.iter().zip(&dx1_ffn).map(|(a, b)| a + b).collect();

        let dr1 = layer_norm_backward(&dx1, d, &cache.ln1, &lp.ln1_gain, &mut lg.ln1_gain, &mut lg.ln1_bias);
        let mut dattn = dr1.clone();
        apply_mask(&mut dattn, &cache.attn_drop);
        let dctx = linear_backward(&cache.ctx, &dattn, &lp.wo, &mut lg.wo, &mut lg.bo);

        let mut dq = vec![0.0; n * d];
        let mut dk = vec![0.0; n * d];
        let mut dv = vec![0.0; n * d];
        let mut dscore = vec![0.0; n];
        for h in 0..heads {
            let off = h * dh;
            let ph = &cache.probs[h * n * n..(h + 1) * n * n];
            for t in 0..n {
                let row = &ph[t * n..(t + 1) * n];
                let dct = &dctx[t * d + off..t * d + off + dh];
                let mut dot = 0.0;
                for u in 0..n {
                    let vu = &cache.v[u * d + off..u * d + off + dh];
                    let dp: f64 = dct.iter().zip(vu).map(|(a, b)| a * b).sum();
                    dscore[u] = dp;
                    dot += dp * row[u];
                    for (g, c) in dv[u * d + off..u * d + off + dh].iter_mut().zip(dct) {
                        *g += row[u] * c;
                    }
                }
                for u in 0..n {
                    let ds = row[u] * (dscore[u] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for j in 0..dh {
                        dq[t * d + off + j] += ds * cache.k[u * d + off + j];
                        dk[u * d + off + j] += ds * cache.q[t * d + off + j];
                    }
                }
            }
        }
        let dxq = linear_backward(&cache.x_in, &dq, &lp.wq, &mut lg.wq, &mut lg.bq);
        let dxk = linear_backward(&cache.x_in, &dk, &lp.wk, &mut lg.wk, &mut lg.bk);
        let dxv = linear_backward(&cache.x_in, &dv, &lp.wv, &mut lg.wv, &mut lg.bv);
        dx = (0..n * d).map(|i| dr1[i] + dxq[i] + dxk[i] + dxv[i]).collect();
    }

    apply_mask(&mut dx, &trace.embed_drop);
    linear_backward_params(&trace.input, &dx, &mut grads.embed_w, &mut grads.embed_b);
}

fn check(batch: &Batch, params: &TransformerParameters, config: &ModelConfig) -> Result<(), ModelError> {
    config.validate()?;
    if !params.matches(config) {
        return Err(ModelError::Shape("parameters do not match the model config".into()));
    }
    if batch.width != config.input_dim {
        return Err(ModelError::Shape(format!(
            "batch width {} but model input width {}",
            batch.width, config.input_dim
        )));
    }
    if batch.max_len > config.max_frames {
        return Err(ModelError::TooLong {
            frames: batch.max_len,
            max: config.max_frames,
        });
    }
    Ok(())
}

fn sample_rng(train_mode: bool, seed: u64, b: usize) -> Option<ChaCha8Rng> {
    train_mode.then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        rng
    })
}

fn traces(
    batch: &Batch,
    params: &TransformerParameters,
    config: &ModelConfig,
    train_mode: bool,
    seed: u64,
) -> Result<Vec<(Vec<usize>, SampleTrace)>, ModelError> {
    check(batch, params, config)?;
    let pe = sinusoidal_pe(batch.max_len, config.d_model)?;
    Ok((0..batch.size)
        .map(|b| {
            let positions = batch.positions(b);
            let input = batch.gather(b, &positions);
            let trace = run_sample(params, config, &pe, input, &positions, sample_rng(train_mode, seed, b));
            (positions, trace)
        })
        .collect())
}

/// Logits, `size x n_classes` row-major. Dropout is active only in
/// `train_mode`, driven by `seed`.
pub fn forward(
    batch: &Batch,
    params: &TransformerParameters,
    config: &ModelConfig,
    train_mode: bool,
    seed: u64,
) -> Result<Vec<f64>, ModelError> {
    Ok(traces(batch, params, config, train_mode, seed)?
        .into_iter()
        .flat_map(|(_, t)| t.logits)
        .collect())
}

/// Inference pass that also returns every layer's attention weights.
pub fn forward_with_attention(
    batch: &Batch,
    params: &TransformerParameters,
    config: &ModelConfig,
) -> Result<(Vec<f64>, Vec<AttentionTensor>), ModelError> {
    let mut logits = Vec::with_capacity(batch.size * config.n_classes);
    let mut attention = Vec::with_capacity(batch.size);
    for (b, (positions, trace)) in traces(batch, params, config, false, 0)?.into_iter().enumerate() {
        let t_max = batch.max_len;
        let mask = batch.mask[b * t_max..(b + 1) * t_max].to_vec();
        let mut att = AttentionTensor::zeros(config.n_layers, config.n_heads, t_max, mask);
        let n = trace.n;
        for (l, cache) in trace.layers.iter().enumerate() {
            for h in 0..config.n_heads {
                let src = &cache.probs[h * n * n..(h + 1) * n * n];
                let dst = att.matrix_mut(l, h);
                for (i, &qt) in positions.iter().enumerate() {
                    for (j, &kt) in positions.iter().enumerate() {
                        dst[qt * t_max + kt] = src[i * n + j];
                    }
                }
            }
        }
        logits.extend(trace.logits);
        attention.push(att);
    }
    Ok((logits, attention))
}

fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut probs = logits.to_vec();
    softmax(&mut probs);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    (lse - logits[label], probs)
}

/// Mean cross-entropy over the batch and its exact gradient. Dropout is
/// active (seeded by `seed`) whenever the config's dropout is non-zero.
pub fn loss_and_gradients(
    batch: &Batch,
    params: &TransformerParameters,
    config: &ModelConfig,
    seed: u64,
) -> Result<(f64, TransformerParameters), ModelError> {
    if batch.labels.len() != batch.size {
        return Err(ModelError::Shape("loss needs one label per sample".into()));
    }
    if let Some(&bad) = batch.labels.iter().find(|&&y| y >= config.n_classes) {
        return Err(ModelError::Shape(format!("label {bad} out of range for {} classes", config.n_classes)));
    }
    let traces = traces(batch, params, config, true, seed)?;
    let mut grads = TransformerParameters::zeros(config);
    let mut loss = 0.0;
    let inv_b = 1.0 / batch.size as f64;
    for ((_, trace), &label) in traces.iter().zip(&batch.labels) {
        let (l, mut dlogits) = cross_entropy(&trace.logits, label);
        loss += l * inv_b;
        dlogits[label] -= 1.0;
        for g in &mut dlogits {
            *g *= inv_b;
        }
        backward_sample(trace, &dlogits, params, config, &mut grads);
    }
    Ok((loss, grads))
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
