use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{wer, TrainingError, WerReport};
use crate::encoding::FeatureMatrix;
use crate::model::{argmax, forward, init_params, loss_and_gradients, Batch, Checkpoint, ModelConfig, TransformerParameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience_epochs: usize,
    pub lr_decay_factor: f64,
    /// Epochs without improvement before the learning rate decays.
    /// Defaults to a quarter of `patience_epochs`.
    pub lr_patience: Option<usize>,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            min_learning_rate: 1e-7,
            patience_epochs: 30,
            lr_decay_factor: 0.5,
            lr_patience: None,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn effective_lr_patience(&self) -> usize {
        self.lr_patience.unwrap_or(self.patience_epochs / 4).max(1)
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.min_learning_rate >= 0.0 && self.min_learning_rate <= self.learning_rate) {
            return bad("min_learning_rate must lie in [0, learning_rate]");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return bad("lr_decay_factor must lie in (0, 1)");
        }
        if self.patience_epochs == 0 || self.max_epochs == 0 {
            return bad("patience_epochs and max_epochs must be positive");
        }
        Ok(())
    }
}

/// Encoded clips with their class indices.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub matrices: Vec<FeatureMatrix>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn push(&mut self, matrix: FeatureMatrix, label: usize) {
        self.matrices.push(matrix);
        self.labels.push(label);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_wer: f64,
    /// Learning rate in effect during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_wer: f64,
    pub stopped: StopReason,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_wer,lr\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_wer, r.lr));
        }
        s
    }
}

pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

/// Adam with parameters kept on the `f32` grid after every step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &TransformerParameters) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut TransformerParameters, grads: &TransformerParameters, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (ti, (p, g)) in params.tensors_mut().into_iter().zip(grads.tensors()).enumerate() {
            let (m, v) = (&mut self.m[ti], &mut self.v[ti]);
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                p.data[i] = (p.data[i] - update) as f32 as f64;
            }
        }
    }
}

// splitmix64 finalizer; spreads (seed, epoch, batch) into a dropout seed
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const EVAL_BATCH: usize = 32;

/// Predicted class index of every clip (inference mode, no dropout).
pub fn predict(
    params: &TransformerParameters,
    config: &ModelConfig,
    matrices: &[FeatureMatrix],
) -> Result<Vec<usize>, TrainingError> {
    let mut out = Vec::with_capacity(matrices.len());
    for chunk in matrices.chunks(EVAL_BATCH) {
        let refs: Vec<&FeatureMatrix> = chunk.iter().collect();
        let batch = Batch::from_matrices(&refs, vec![], config.max_frames)?;
        let logits = forward(&batch, params, config, false, 0)?;
        out.extend(logits.chunks_exact(config.n_classes).map(argmax));
    }
    Ok(out)
}

fn score(
    params: &TransformerParameters,
    config: &ModelConfig,
    set: &LabeledSet,
    labels: &[String],
) -> Result<WerReport, TrainingError> {
    let hyps = predict(params, config, &set.matrices)?;
    let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
    let refs: Vec<Vec<String>> = set.labels.iter().map(|&y| vec![name(y)]).collect();
    let hyps: Vec<Vec<String>> = hyps.into_iter().map(|y| vec![name(y)]).collect();
    wer(&refs, &hyps)
}

/// Word error rate of a checkpoint on a labeled set. Every clip is one
/// reference word.
pub fn evaluate(checkpoint: &Checkpoint, set: &LabeledSet) -> Result<WerReport, TrainingError> {
    score(&checkpoint.params, &checkpoint.config, set, &checkpoint.labels)
}

fn check_set(name: &str, set: &LabeledSet, config: &ModelConfig) -> Result<(), TrainingError> {
    if set.is_empty() {
        return Err(TrainingError::Data(format!("{name} set is empty")));
    }
    if set.matrices.len() != set.labels.len() {
        return Err(TrainingError::Data(format!("{name} set: labels and clips differ in count")));
    }
    if let Some(&y) = set.labels.iter().find(|&&y| y >= config.n_classes) {
        return Err(TrainingError::Data(format!("{name} set: label {y} out of range")));
    }
    for (i, m) in set.matrices.iter().enumerate() {
        if m.frames() > config.max_frames {
            return Err(TrainingError::Data(format!(
                "{name} clip {i} has {} frames, model accepts at most {}",
                m.frames(),
                config.max_frames
            )));
        }
    }
    Ok(())
}

/// Minibatch Adam with reduce-on-plateau learning rate decay and early
/// stopping, both driven by validation WER. Returns the best checkpoint.
pub fn train(
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    model: &ModelConfig,
    cfg: &TrainConfig,
    labels: Vec<String>,
) -> Result<TrainOutcome, TrainingError> {
    model.validate()?;
    cfg.validate()?;
    check_set("training", train_set, model)?;
    check_set("validation", val_set, model)?;
    if !labels.is_empty() && labels.len() != model.n_classes {
        return Err(TrainingError::Data(format!(
            "{} labels for {} classes",
            labels.len(),
            model.n_classes
        )));
    }

    let mut params = init_params(model, cfg.seed);
    let mut adam = Adam::new(&params);
    let mut lr = cfg.learning_rate;
    let lr_patience = cfg.effective_lr_patience();

    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut since_best = 0;
    let mut since_decay = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mats: Vec<&FeatureMatrix> = idx.iter().map(|&i| &train_set.matrices[i]).collect();
            let ys = idx.iter().map(|&i| train_set.labels[i]).collect();
            let batch = Batch::from_matrices(&mats, ys, model.max_frames)?;
            let dropout_seed = mix(cfg.seed ^ mix(((epoch as u64) << 32) | bi as u64));
            let (loss, grads) = loss_and_gradients(&batch, &params, model, dropout_seed)?;
            loss_sum += loss * idx.len() as f64;
            adam.step(&mut params, &grads, lr);
        }
        if !params.is_finite() {
            return Err(TrainingError::Data(format!("parameters diverged in epoch {epoch}")));
        }

        let val_wer = score(&params, model, val_set, &labels)?.wer;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_wer,
            lr,
        });
        log::debug!("epoch {epoch}: loss {:.4} val wer {val_wer:.4} lr {lr:e}", loss_sum / train_set.len() as f64);

        if val_wer < best.0 {
            best = (val_wer, epoch, params.clone());
            since_best = 0;
            since_decay = 0;
        } else {
            since_best += 1;
            since_decay += 1;
            if since_best >= cfg.patience_epochs {
                stopped = StopReason::Patience;
                break;
            }
            if since_decay >= lr_patience {
                lr = (lr * cfg.lr_decay_factor).max(cfg.min_learning_rate);
                since_decay = 0;
            }
        }
    }

    let (best_val_wer, best_epoch, best_params) = best;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: *model,
            params: best_params,
            labels,
        },
        history: TrainHistory {
            epochs,
            best_epoch,
            best_val_wer,
            stopped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FEATURE_DIM;

    fn tiny(n_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim: FEATURE_DIM,
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
            dropout: 0.0,
            n_classes,
            max_frames: 8,
        }
    }

    // class k lights up channel k in every frame
    fn toy_set(n_classes: usize, per_class: usize) -> LabeledSet {
        let mut set = LabeledSet::default();
        for k in 0..n_classes {
            for t in 0..per_class {
                let frames = 3 + t % 3;
                let mut v = vec![0.0f32; frames * FEATURE_DIM];
                for f in 0..frames {
                    v[f * FEATURE_DIM + k] = 1.0;
                }
                set.push(FeatureMatrix::new(frames, v).unwrap(), k);
            }
        }
        set
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            learning_rate: 1e-2,
            patience_epochs: 8,
            max_epochs: 40,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_separable_toy_problem() {
        let set = toy_set(3, 4);
        let out = train(&set, &set, &tiny(3), &quick(), vec!["A".into(), "B".into(), "C".into()]).unwrap();
        assert_eq!(out.history.best_val_wer, 0.0);
        assert_eq!(evaluate(&out.checkpoint, &set).unwrap().wer, 0.0);
    }

    #[test]
    fn history_invariants() {
        let set = toy_set(2, 3);
        let cfg = TrainConfig {
            patience_epochs: 4,
            ..quick()
        };
        let h = train(&set, &set, &tiny(2), &cfg, vec![]).unwrap().history;
        for w in h.epochs.windows(2) {
            assert!(w[1].lr <= w[0].lr);
            assert_eq!(w[1].epoch, w[0].epoch + 1);
        }
        assert!(h.epochs.iter().all(|r| r.lr >= cfg.min_learning_rate));
        if h.stopped == StopReason::Patience {
            let tail = &h.epochs[h.epochs.len() - cfg.patience_epochs..];
            assert!(tail.iter().all(|r| r.val_wer >= h.best_val_wer));
        }
        assert!(h.to_csv().starts_with("epoch,train_loss,val_wer,lr\n"));
    }

    #[test]
    fn single_class_is_trivially_perfect() {
        let set = toy_set(1, 3);
        let h = train(&set, &set, &tiny(1), &quick(), vec!["W001".into()]).unwrap().history;
        assert_eq!(h.epochs[0].val_wer, 0.0);
        assert_eq!(h.best_epoch, 1);
    }

    #[test]
    fn training_is_reproducible() {
        let set = toy_set(2, 3);
        let a = train(&set, &set, &tiny(2), &quick(), vec![]).unwrap();
        let b = train(&set, &set, &tiny(2), &quick(), vec![]).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.checkpoint, b.checkpoint);
    }

    #[test]
    fn rejects_bad_inputs() {
        let set = toy_set(2, 2);
        assert!(train(&LabeledSet::default(), &set, &tiny(2), &quick(), vec![]).is_err());
        assert!(train(&set, &set, &tiny(1), &quick(), vec![]).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..quick()
        };
        assert!(train(&set, &set, &tiny(2), &bad, vec![]).is_err());
    }

    #[test]
    fn adam_keeps_f32_grid() {
        let cfg = tiny(2);
        let mut p = init_params(&cfg, 1);
        let mut g = p.clone();
        for t in g.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.123456789);
        }
        let mut adam = Adam::new(&p);
        adam.step(&mut p, &g, 1e-3);
        assert!(p.tensors().iter().all(|t| t.data.iter().all(|&v| v == v as f32 as f64)));
    }
}
