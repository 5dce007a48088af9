//! Browser bindings for three small demos over `slr-core`:
//! the quantizer transfer curve, the encoding of one synthetic clip as a
//! frames x channels heatmap, and how many feature values survive a
//! rescale and shift of the whole signer under each feature mode.
//!
//! The logic lives in plain functions so it can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use slr_core::encoding::quantize;
use slr_core::synth::apply_similarity;
use slr_core::{encode_clip, generate_synthetic, Clip, EncodingConfig, Mode, SynthConfig, FEATURE_DIM};
use wasm_bindgen::prelude::*;

/// Words available in the demo vocabulary.
pub const DEMO_WORDS: usize = 20;

/// `[x0, q(x0), x1, q(x1), ...]` for `samples` points spread over
/// `[-1.5 range, 1.5 range]`, so the clamp is visible at both ends.
pub fn quantizer_curve(levels: u32, range: f64, samples: usize) -> Result<Vec<f64>, String> {
    if levels < 2 || !range.is_finite() || range <= 0.0 || samples < 2 {
        return Err("need at least 2 levels, a positive range and 2 samples".into());
    }
    let span = 1.5 * range;
    Ok((0..samples)
        .flat_map(|i| {
            let x = -span + 2.0 * span * i as f64 / (samples - 1) as f64;
            [x, quantize(x, levels, range).value]
        })
        .collect())
}

fn demo_clip(word: usize, seed: u64) -> Result<Clip, String> {
    if word >= DEMO_WORDS {
        return Err(format!("word must be below {DEMO_WORDS}"));
    }
    let cfg = SynthConfig {
        n_classes: DEMO_WORDS,
        n_signers: 1,
        trials: 1,
        ..SynthConfig::default()
    };
    let set = generate_synthetic(&cfg, seed).map_err(|e| e.to_string())?;
    Ok(set.clips.into_iter().nth(word).expect("one clip per word").1)
}

fn encode(clip: &Clip, mode: &str) -> Result<Vec<f32>, String> {
    let mode: Mode = mode.parse().map_err(|e: slr_core::encoding::EncodingError| e.to_string())?;
    let enc = encode_clip(clip, &EncodingConfig::with_mode(mode)).map_err(|e| e.to_string())?;
    Ok(enc.matrix.values().to_vec())
}

/// Row-major `frames x FEATURE_DIM` encoding of one synthetic clip.
#[wasm_bindgen]
pub struct Heatmap {
    frames: usize,
    values: Vec<f32>,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[wasm_bindgen(getter)]
    pub fn channels(&self) -> usize {
        FEATURE_DIM
    }

    pub fn values(&self) -> Vec<f32> {
        self.values.clone()
    }
}

pub fn heatmap(word: usize, seed: u64, mode: &str) -> Result<Heatmap, String> {
    let clip = demo_clip(word, seed)?;
    let values = encode(&clip, mode)?;
    Ok(Heatmap {
        frames: values.len() / FEATURE_DIM,
        values,
    })
}

/// Fraction of feature values that change when the clip is scaled by
/// `scale` about the image center and shifted by `(dx, dy)`.
pub fn changed_fraction(word: usize, seed: u64, mode: &str, scale: f64, dx: f64, dy: f64) -> Result<f64, String> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err("scale must be positive".into());
    }
    let clip = demo_clip(word, seed)?;
    let mut moved = clip.clone();
    apply_similarity(&mut moved, scale, (dx, dy));
    let (a, b) = (encode(&clip, mode)?, encode(&moved, mode)?);
    let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    Ok(changed as f64 / a.len() as f64)
}

#[wasm_bindgen(js_name = quantizerCurve)]
pub fn quantizer_curve_js(levels: u32, range: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    quantizer_curve(levels, range, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = encodeWord)]
pub fn heatmap_js(word: usize, seed: u64, mode: &str) -> Result<Heatmap, JsError> {
    heatmap(word, seed, mode).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = changedFraction)]
pub fn changed_fraction_js(word: usize, seed: u64, mode: &str, scale: f64, dx: f64, dy: f64) -> Result<f64, JsError> {
    changed_fraction(word, seed, mode, scale, dx, dy).map_err(|e| JsError::new(&e))
}
