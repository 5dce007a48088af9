//! Numeric properties of the encoder: finite-difference gradients, attention
//! normalization, padding invariance, determinism and checkpoint fidelity.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slr_core::model::{
    forward, forward_with_attention, init_params, loss_and_gradients, Batch, Checkpoint, ModelConfig,
    TransformerParameters,
};
use slr_core::FEATURE_DIM;

fn tiny(dropout: f64) -> ModelConfig {
    ModelConfig {
        input_dim: FEATURE_DIM,
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        dropout,
        n_classes: 3,
        max_frames: 16,
    }
}

fn random_batch(seed: u64, size: usize, lens: &[usize], max_len: usize) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = vec![0.0; size * max_len * FEATURE_DIM];
    let mut mask = vec![false; size * max_len];
    for b in 0..size {
        for t in 0..lens[b] {
            mask[b * max_len + t] = true;
            for c in 0..FEATURE_DIM {
                inputs[(b * max_len + t) * FEATURE_DIM + c] = rng.random_range(-1.0..1.0);
            }
        }
    }
    let labels = (0..size).map(|b| b % 3).collect();
    Batch::new(inputs, mask, labels, size, max_len, FEATURE_DIM).unwrap()
}

/// Independent loss evaluation: forward logits, then log-sum-exp cross-entropy.
fn oracle_loss(batch: &Batch, params: &TransformerParameters, cfg: &ModelConfig, seed: u64) -> f64 {
    let logits = forward(batch, params, cfg, true, seed).unwrap();
    let c = cfg.n_classes;
    let mut total = 0.0;
    for (b, &y) in batch.labels.iter().enumerate() {
        let row = &logits[b * c..(b + 1) * c];
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / batch.size as f64
}

fn check_gradients(cfg: &ModelConfig, seed: u64) {
    const STEP: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    // Components smaller than this are compared absolutely.
    const FLOOR: f64 = 1e-6;
    let params = init_params(cfg, seed);
    let batch = random_batch(seed + 100, 2, &[3, 2], 3);
    let (loss, grads) = loss_and_gradients(&batch, &params, cfg, seed).unwrap();
    assert!((loss - oracle_loss(&batch, &params, cfg, seed)).abs() < 1e-12);

    let names = params.names();
    let mut worst = (0.0f64, String::new());
    for (ti, name) in names.iter().enumerate() {
        let n = params.tensors()[ti].len();
        for i in 0..n {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data[i] += STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data[i] -= STEP;
            let numeric = (oracle_loss(&batch, &plus, cfg, seed) - oracle_loss(&batch, &minus, cfg, seed)) / (2.0 * STEP);
            let analytic = grads.tensors()[ti].data[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]: analytic {analytic:e} numeric {numeric:e}"));
            }
        }
    }
    assert!(worst.0 < TOL, "worst relative error {} at {}", worst.0, worst.1);
}

#[test]
fn gradients_match_finite_differences() {
    check_gradients(&tiny(0.0), 1);
}

#[test]
fn gradients_match_finite_differences_with_dropout() {
    check_gradients(&tiny(0.1), 2);
}

#[test]
fn gradients_match_finite_differences_two_layers() {
    let cfg = ModelConfig {
        n_layers: 2,
        ..tiny(0.0)
    };
    check_gradients(&cfg, 3);
}

#[test]
fn disconnected_inputs_get_no_gradient() {
    let cfg = tiny(0.0);
    let params = init_params(&cfg, 4);
    // zero the first 10 input channels everywhere: their embedding rows see no signal
    let mut batch = random_batch(9, 2, &[3, 3], 3);
    for row in batch.inputs.chunks_exact_mut(FEATURE_DIM) {
        row[..10].fill(0.0);
    }
    let (_, grads) = loss_and_gradients(&batch, &params, &cfg, 0).unwrap();
    let d = cfg.d_model;
    assert!(grads.embed_w.data[..10 * d].iter().all(|&g| g == 0.0));
    assert!(grads.embed_w.data[10 * d..].iter().any(|&g| g != 0.0));
}

#[test]
fn attention_rows_are_stochastic() {
    let cfg = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        ..tiny(0.0)
    };
    let params = init_params(&cfg, 5);
    let batch = random_batch(6, 3, &[5, 2, 4], 5);
    let (_, atts) = forward_with_attention(&batch, &params, &cfg).unwrap();
    for att in &atts {
        for l in 0..att.layers {
            for h in 0..att.heads {
                for q in 0..att.frames {
                    let row: Vec<f64> = (0..att.frames).map(|k| att.get(l, h, q, k)).collect();
                    for (k, &w) in row.iter().enumerate() {
                        assert!(w >= 0.0);
                        if !att.mask[k] {
                            assert_eq!(w, 0.0);
                        }
                    }
                    if att.mask[q] {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                    }
                }
            }
        }
    }
}

#[test]
fn padding_values_never_reach_logits() {
    let cfg = tiny(0.1);
    let params = init_params(&cfg, 7);
    let clean = random_batch(8, 2, &[4, 2], 4);
    let mut dirty = clean.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (i, m) in clean.mask.iter().enumerate() {
        if !m {
            for v in &mut dirty.inputs[i * FEATURE_DIM..(i + 1) * FEATURE_DIM] {
                *v = rng.random_range(-50.0..50.0);
            }
        }
    }
    assert_eq!(
        forward(&clean, &params, &cfg, false, 0).unwrap(),
        forward(&dirty, &params, &cfg, false, 0).unwrap()
    );
    assert_eq!(
        forward(&clean, &params, &cfg, true, 3).unwrap(),
        forward(&dirty, &params, &cfg, true, 3).unwrap()
    );
    let (la, _) = loss_and_gradients(&clean, &params, &cfg, 3).unwrap();
    let (lb, _) = loss_and_gradients(&dirty, &params, &cfg, 3).unwrap();
    assert_eq!(la, lb);
}

#[test]
fn loss_is_deterministic() {
    let cfg = tiny(0.1);
    let params = init_params(&cfg, 10);
    let batch = random_batch(11, 2, &[3, 3], 3);
    let (a, ga) = loss_and_gradients(&batch, &params, &cfg, 42).unwrap();
    let (b, gb) = loss_and_gradients(&batch, &params, &cfg, 42).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(ga, gb);
}

#[test]
fn checkpoint_reproduces_logits() {
    let cfg = tiny(0.1);
    let params = init_params(&cfg, 12);
    let ck = Checkpoint {
        config: cfg,
        params: params.clone(),
        labels: vec!["W001".into(), "W002".into(), "W003".into()],
    };
    let loaded = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
    let batch = random_batch(13, 2, &[3, 1], 3);
    assert_eq!(
        forward(&batch, &params, &cfg, false, 0).unwrap(),
        forward(&batch, &loaded.params, &loaded.config, false, 0).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permuting_samples_permutes_logits(seed in 0u64..1000, rotate in 1usize..3) {
        let cfg = tiny(0.1);
        let params = init_params(&cfg, seed);
        let lens = [3usize, 1, 2];
        let batch = random_batch(seed + 1, 3, &lens, 3);
        let logits = forward(&batch, &params, &cfg, false, 0).unwrap();

        let order: Vec<usize> = (0..3).map(|i| (i + rotate) % 3).collect();
        let w = batch.max_len * FEATURE_DIM;
        let mut inputs = Vec::new();
        let mut mask = Vec::new();
        for &b in &order {
            inputs.extend_from_slice(&batch.inputs[b * w..(b + 1) * w]);
            mask.extend_from_slice(&batch.mask[b * batch.max_len..(b + 1) * batch.max_len]);
        }
        let permuted = Batch::new(inputs, mask, vec![], 3, batch.max_len, FEATURE_DIM).unwrap();
        let plogits = forward(&permuted, &params, &cfg, false, 0).unwrap();
        let c = cfg.n_classes;
        for (i, &b) in order.iter().enumerate() {
            prop_assert_eq!(&plogits[i * c..(i + 1) * c], &logits[b * c..(b + 1) * c]);
        }
    }
}
