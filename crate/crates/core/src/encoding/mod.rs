//! Landmark encoders: raw passthrough, relative quantization encoding (RQE)
//! and its shoulder-fixed variant (RQE-SF), with optional hand-dominance
//! flipping.

mod anchor;
mod flip;
mod quantize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anchor::{anchor_frame, anchor_of, compute_reference, Anchor, ReferenceFrame, RelativeFrame};
pub use flip::{detect_dominant_hand, flip_clip, Hand};
pub use quantize::{quantize, Quantized};

use crate::landmark::{
    channel_index, flatten_frame, flatten_values, pose, Clip, ClipMetadata, FEATURE_DIM, FRAME_LANDMARKS,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EncodingError {
    #[error("no frame has both shoulders and both hips present")]
    NoReferenceFrame,
    #[error("degenerate reference in frame {frame}: shoulder width {shoulder_width}, torso length {torso_length}")]
    DegenerateReference {
        frame: usize,
        shoulder_width: f64,
        torso_length: f64,
    },
    #[error("neither wrist is present in two or more frames")]
    NoWristMotion,
    #[error("invalid encoding config: {0}")]
    InvalidConfig(String),
    #[error("malformed encoded matrix: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "rqe")]
    Rqe,
    #[serde(rename = "rqe-sf")]
    RqeSf,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Raw => "raw",
            Mode::Rqe => "rqe",
            Mode::RqeSf => "rqe-sf",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Mode::Raw),
            "rqe" => Ok(Mode::Rqe),
            "rqe-sf" | "rqe_sf" => Ok(Mode::RqeSf),
            other => Err(EncodingError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipPolicy {
    Off,
    /// Flip clips whose dominant hand is detected as left.
    Auto,
    Force,
}

impl FromStr for FlipPolicy {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(FlipPolicy::Off),
            "auto" => Ok(FlipPolicy::Auto),
            "force" => Ok(FlipPolicy::Force),
            other => Err(EncodingError::InvalidConfig(format!("unknown flip policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    pub mode: Mode,
    /// Quantization levels for the x, y and d axes.
    pub levels: [u32; 3],
    /// Offsets are clamped to `[-clamp_range, clamp_range]` before binning.
    pub clamp_range: f64,
    pub flip_policy: FlipPolicy,
    pub lower_body_fixed: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            mode: Mode::Rqe,
            levels: [10; 3],
            clamp_range: 1.0,
            flip_policy: FlipPolicy::Off,
            lower_body_fixed: true,
        }
    }
}

impl EncodingConfig {
    pub fn with_mode(mode: Mode) -> Self {
        EncodingConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        if self.levels.iter().any(|&q| q < 2) {
            return Err(EncodingError::InvalidConfig(format!(
                "levels must be at least 2 per axis, got {:?}",
                self.levels
            )));
        }
        if !(self.clamp_range.is_finite() && self.clamp_range > 0.0) {
            return Err(EncodingError::InvalidConfig(format!(
                "clamp range must be positive, got {}",
                self.clamp_range
            )));
        }
        Ok(())
    }
}

/// A row-major `frames x 224` matrix of model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    values: Vec<f32>,
}

const RQE_MAGIC: &[u8; 4] = b"RQE1";

impl FeatureMatrix {
    pub fn new(frames: usize, values: Vec<f32>) -> Result<Self, EncodingError> {
        if frames == 0 || values.len() != frames * FEATURE_DIM {
            return Err(EncodingError::Format(format!(
                "expected {frames} x {FEATURE_DIM} values, got {}",
                values.len()
            )));
        }
        Ok(FeatureMatrix { frames, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    /// Serializes as `RQE1`, `u32 T`, `u32 D`, then `T * D` little-endian f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.values.len());
        out.extend_from_slice(RQE_MAGIC);
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        if bytes.len() < 12 || &bytes[..4] != RQE_MAGIC {
            return Err(EncodingError::Format("missing RQE1 header".into()));
        }
        let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let frames = read_u32(4);
        let width = read_u32(8);
        if width != FEATURE_DIM {
            return Err(EncodingError::Format(format!("width {width}, expected {FEATURE_DIM}")));
        }
        let body = &bytes[12..];
        if body.len() != frames * width * 4 {
            return Err(EncodingError::Format(format!(
                "{} payload bytes for {frames} x {width}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        FeatureMatrix::new(frames, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedClip {
    pub meta: ClipMetadata,
    pub matrix: FeatureMatrix,
    pub config: EncodingConfig,
    pub flipped: bool,
}

/// Channels of both shoulders (x, y, d).
pub fn shoulder_channels() -> impl Iterator<Item = usize> {
    landmark_channels([pose::LEFT_SHOULDER, pose::RIGHT_SHOULDER].into_iter())
}

/// Channels of pose points 23..=32.
pub fn lower_body_channels() -> impl Iterator<Item = usize> {
    landmark_channels(pose::LOWER_BODY)
}

fn landmark_channels(landmarks: impl Iterator<Item = usize>) -> impl Iterator<Item = usize> {
    landmarks.flat_map(|l| (0..3).filter_map(move |a| channel_index(l, a)))
}

pub fn encode_clip(clip: &Clip, config: &EncodingConfig) -> Result<EncodedClip, EncodingError> {
    config.validate()?;
    let flipped = match config.flip_policy {
        FlipPolicy::Off => false,
        FlipPolicy::Force => true,
        // A clip with no usable wrist track keeps its orientation.
        FlipPolicy::Auto => matches!(detect_dominant_hand(clip), Ok(Hand::Left)),
    };
    let flipped_clip;
    let clip = if flipped {
        flipped_clip = flip_clip(clip);
        &flipped_clip
    } else {
        clip
    };

    let mut values = Vec::with_capacity(clip.frames.len() * FEATURE_DIM);
    match config.mode {
        Mode::Raw => {
            for frame in &clip.frames {
                values.extend(flatten_frame(frame).0.iter().map(|&v| v as f32));
            }
        }
        Mode::Rqe | Mode::RqeSf => {
            let reference = compute_reference(clip)?;
            let mut fixed: Vec<usize> = Vec::new();
            if config.mode == Mode::RqeSf {
                fixed.extend(shoulder_channels());
            }
            if config.lower_body_fixed {
                fixed.extend(lower_body_channels());
            }
            for frame in &clip.frames {
                let rel = anchor_frame(frame, &reference);
                let mut quantized = [[0.0; 3]; FRAME_LANDMARKS];
                for (q, (offset, &present)) in quantized.iter_mut().zip(rel.offsets.iter().zip(rel.present.iter())) {
                    if !present {
                        continue;
                    }
                    for axis in 0..3 {
                        q[axis] = quantize(offset[axis], config.levels[axis], config.clamp_range).value;
                    }
                }
                let mut row = flatten_values(&quantized, &rel.present);
                for &ch in &fixed {
                    row[ch] = 0.0;
                }
                values.extend(row.iter().map(|&v| v as f32));
            }
        }
    }

    Ok(EncodedClip {
        meta: clip.meta.clone(),
        matrix: FeatureMatrix::new(clip.frames.len(), values)?,
        config: *config,
        flipped,
    })
}
