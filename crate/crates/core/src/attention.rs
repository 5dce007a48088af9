//! Per-frame attention profiles: which frames of a clip the encoder attends
//! to, averaged over layers, heads and query positions.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::encoding::FeatureMatrix;
use crate::model::{forward_with_attention, AttentionTensor, Batch, Checkpoint, ModelError};

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("profile csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Attention averaged over layers and heads, `frames x frames` row-major.
pub fn mean_attention(att: &AttentionTensor) -> Vec<f64> {
    let t = att.frames;
    let mut out = vec![0.0; t * t];
    let n = (att.layers * att.heads) as f64;
    for l in 0..att.layers {
        for h in 0..att.heads {
            for (o, &w) in out.iter_mut().zip(att.matrix(l, h)) {
                *o += w / n;
            }
        }
    }
    out
}

/// Attention received by each frame: column means of `mean` (`T x T`)
/// over the unmasked query rows. Masked frames score zero.
pub fn per_frame_scores(clip_id: impl Into<String>, mean: &[f64], mask: &[bool]) -> FrameAttentionProfile {
    let t = mask.len();
    assert_eq!(mean.len(), t * t, "attention matrix must be frames x frames");
    let rows: Vec<usize> = (0..t).filter(|&q| mask[q]).collect();
    let mut scores = vec![0.0; t];
    for &q in &rows {
        for (k, s) in scores.iter_mut().enumerate() {
            if mask[k] {
                *s += mean[q * t + k];
            }
        }
    }
    if !rows.is_empty() {
        scores.iter_mut().for_each(|s| *s /= rows.len() as f64);
    }
    FrameAttentionProfile {
        clip_id: clip_id.into(),
        scores,
        mask: mask.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAttentionProfile {
    pub clip_id: String,
    /// Attention received by each frame; sums to one over valid frames.
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
}

impl FrameAttentionProfile {
    pub fn from_attention(clip_id: impl Into<String>, att: &AttentionTensor) -> Self {
        per_frame_scores(clip_id, &mean_attention(att), &att.mask)
    }

    /// Share of attention landing on the central half of the valid frames,
    /// `[floor(T/4), ceil(3T/4))`.
    pub fn middle_half_mass(&self) -> f64 {
        let valid: Vec<f64> = self.scores.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(&s, _)| s).collect();
        let t = valid.len();
        let total: f64 = valid.iter().sum();
        if t == 0 || total == 0.0 {
            return 0.0;
        }
        valid[t / 4..(3 * t).div_ceil(4)].iter().sum::<f64>() / total
    }

    /// One `frame_index,score` row per frame, masked frames included with
    /// score 0. Scores carry 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame_index,score\n");
        for (i, &score) in self.scores.iter().enumerate() {
            s.push_str(&format!("{i},{score:.11e}\n"));
        }
        s
    }

    /// Reads a profile written by [`Self::to_csv`]. The mask is not stored,
    /// so every frame comes back as valid.
    pub fn from_csv(clip_id: impl Into<String>, text: &str) -> Result<Self, AttentionError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "frame_index,score")) => {}
            _ => {
                return Err(AttentionError::Csv {
                    line: 1,
                    reason: "expected header frame_index,score".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            let bad = |reason: &str| AttentionError::Csv {
                line: n + 1,
                reason: reason.to_string(),
            };
            let (i, s) = line.split_once(',').ok_or_else(|| bad("expected two fields"))?;
            let i: usize = i.trim().parse().map_err(|_| bad("bad frame index"))?;
            let s: f64 = s.trim().parse().map_err(|_| bad("bad score"))?;
            if i != rows.len() {
                return Err(bad("frame indices must count up from 0"));
            }
            if !(s >= 0.0 && s.is_finite()) {
                return Err(bad("score must be a non-negative number"));
            }
            rows.push((i, s));
        }
        Ok(FrameAttentionProfile {
            clip_id: clip_id.into(),
            mask: vec![true; rows.len()],
            scores: rows.into_iter().map(|(_, s)| s).collect(),
        })
    }
}

/// Writes the profile CSV through a temporary file in the target directory.
pub fn export_profile(profile: &FrameAttentionProfile, path: &Path) -> std::io::Result<()> {
    let ctx = |e: std::io::Error| std::io::Error::new(e.kind(), format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(ctx)?;
    tmp.write_all(profile.to_csv().as_bytes()).map_err(ctx)?;
    tmp.persist(path).map_err(|e| ctx(e.error))?;
    Ok(())
}

/// Runs one clip through the checkpoint's encoder and profiles its attention.
pub fn profile_clip(
    checkpoint: &Checkpoint,
    matrix: &FeatureMatrix,
    clip_id: &str,
) -> Result<FrameAttentionProfile, AttentionError> {
    let batch = Batch::from_matrices(&[matrix], vec![], checkpoint.config.max_frames)?;
    let (_, atts) = forward_with_attention(&batch, &checkpoint.params, &checkpoint.config)?;
    Ok(FrameAttentionProfile::from_attention(clip_id, &atts[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(frames: usize, valid: usize) -> AttentionTensor {
        let mask: Vec<bool> = (0..frames).map(|i| i < valid).collect();
        let mut att = AttentionTensor::zeros(2, 2, frames, mask);
        for l in 0..2 {
            for h in 0..2 {
                let m = att.matrix_mut(l, h);
                for q in 0..valid {
                    for k in 0..valid {
                        m[q * frames + k] = 1.0 / valid as f64;
                    }
                }
            }
        }
        att
    }

    #[test]
    fn uniform_attention_gives_uniform_profile() {
        let p = FrameAttentionProfile::from_attention("c", &uniform(6, 4));
        for (i, &s) in p.scores.iter().enumerate() {
            let want = if i < 4 { 0.25 } else { 0.0 };
            assert!((s - want).abs() < 1e-15);
        }
        assert!((p.middle_half_mass() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let p = FrameAttentionProfile {
            clip_id: "x".into(),
            scores: vec![0.1234567891234, 0.5, 1.0 / 3.0],
            mask: vec![true; 3],
        };
        let q = FrameAttentionProfile::from_csv("x", &p.to_csv()).unwrap();
        for (a, b) in p.scores.iter().zip(&q.scores) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
        assert!(FrameAttentionProfile::from_csv("x", "nope\n").is_err());
        assert!(FrameAttentionProfile::from_csv("x", "frame_index,score\n1,0.5\n0,0.5\n").is_err());
    }

    #[test]
    fn masked_tail_is_exported_as_zero() {
        let p = FrameAttentionProfile::from_attention("c", &uniform(5, 3));
        let csv = p.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.ends_with("4,0.00000000000e0\n"));
    }

    #[test]
    fn point_mass_rows() {
        let mut mean = vec![0.0; 16];
        for q in 0..4 {
            mean[q * 4 + 2] = 1.0;
        }
        let p = per_frame_scores("c", &mean, &[true; 4]);
        assert_eq!(p.scores, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
