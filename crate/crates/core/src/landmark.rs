//! Clip data model, the canonical JSON clip format and the 224-channel
//! frame flattening.
//!
//! Landmark order inside a frame is fixed: 33 pose points (MediaPipe pose
//! numbering), then 21 left-hand points, then 21 right-hand points.

use std::fmt;

use serde_json::{Map, Number, Value};
use thiserror::Error;

pub const POSE_LANDMARKS: usize = 33;
pub const HAND_LANDMARKS: usize = 21;
pub const FRAME_LANDMARKS: usize = POSE_LANDMARKS + 2 * HAND_LANDMARKS;
/// Width of a flattened frame: every landmark contributes (x, y, d) except
/// the depth of the last pose point.
pub const FEATURE_DIM: usize = FRAME_LANDMARKS * 3 - 1;

/// First channel of the left hand block.
pub const LEFT_HAND_OFFSET: usize = POSE_LANDMARKS * 3 - 1;
/// First channel of the right hand block.
pub const RIGHT_HAND_OFFSET: usize = LEFT_HAND_OFFSET + HAND_LANDMARKS * 3;

/// MediaPipe pose indices used by the encoders.
pub mod pose {
    pub const NOSE: usize = 0;
    pub const LEFT_SHOULDER: usize = 11;
    pub const RIGHT_SHOULDER: usize = 12;
    pub const LEFT_ELBOW: usize = 13;
    pub const RIGHT_ELBOW: usize = 14;
    pub const LEFT_WRIST: usize = 15;
    pub const RIGHT_WRIST: usize = 16;
    pub const LEFT_HIP: usize = 23;
    pub const RIGHT_HIP: usize = 24;
    pub const LEFT_KNEE: usize = 25;
    pub const RIGHT_KNEE: usize = 26;
    pub const LEFT_ANKLE: usize = 27;
    pub const RIGHT_ANKLE: usize = 28;
    /// Hips, knees, ankles, heels and feet.
    pub const LOWER_BODY: std::ops::RangeInclusive<usize> = 23..=32;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub d: f64,
    pub present: bool,
}

impl Landmark {
    pub const MISSING: Landmark = Landmark {
        x: 0.0,
        y: 0.0,
        d: 0.0,
        present: false,
    };

    pub fn new(x: f64, y: f64, d: f64) -> Self {
        Landmark {
            x,
            y,
            d,
            present: true,
        }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.d]
    }
}

impl Default for Landmark {
    fn default() -> Self {
        Landmark::MISSING
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub pose: [Landmark; POSE_LANDMARKS],
    pub left_hand: [Landmark; HAND_LANDMARKS],
    pub right_hand: [Landmark; HAND_LANDMARKS],
}

impl LandmarkFrame {
    /// A frame in which every landmark is missing.
    pub fn empty() -> Self {
        LandmarkFrame {
            pose: [Landmark::MISSING; POSE_LANDMARKS],
            left_hand: [Landmark::MISSING; HAND_LANDMARKS],
            right_hand: [Landmark::MISSING; HAND_LANDMARKS],
        }
    }

    /// Landmark by its position in file order (0..75).
    pub fn get(&self, index: usize) -> &Landmark {
        match index {
            i if i < POSE_LANDMARKS => &self.pose[i],
            i if i < POSE_LANDMARKS + HAND_LANDMARKS => &self.left_hand[i - POSE_LANDMARKS],
            i => &self.right_hand[i - POSE_LANDMARKS - HAND_LANDMARKS],
        }
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Landmark {
        match index {
            i if i < POSE_LANDMARKS => &mut self.pose[i],
            i if i < POSE_LANDMARKS + HAND_LANDMARKS => &mut self.left_hand[i - POSE_LANDMARKS],
            i => &mut self.right_hand[i - POSE_LANDMARKS - HAND_LANDMARKS],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Landmark> {
        self.pose
            .iter()
            .chain(self.left_hand.iter())
            .chain(self.right_hand.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Landmark> {
        self.pose
            .iter_mut()
            .chain(self.left_hand.iter_mut())
            .chain(self.right_hand.iter_mut())
    }
}

impl Default for LandmarkFrame {
    fn default() -> Self {
        LandmarkFrame::empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum View {
    Front,
    Lateral,
}

impl View {
    pub fn as_str(&self) -> &'static str {
        match self {
            View::Front => "front",
            View::Lateral => "lateral",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for View {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "front" => Ok(View::Front),
            "lateral" => Ok(View::Lateral),
            other => Err(ParseError::InvalidView(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipMetadata {
    pub signer_id: String,
    pub word_id: String,
    pub view: View,
    pub source_fps: Option<f64>,
}

impl ClipMetadata {
    pub fn new(signer_id: impl Into<String>, word_id: impl Into<String>, view: View) -> Self {
        ClipMetadata {
            signer_id: signer_id.into(),
            word_id: word_id.into(),
            view,
            source_fps: None,
        }
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        validate_token("signer", &self.signer_id)?;
        validate_token("word", &self.word_id)?;
        if let Some(fps) = self.source_fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(ParseError::InvalidFps(fps));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_token(field: &'static str, value: &str) -> Result<(), ParseError> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        return Err(ParseError::InvalidToken {
            field,
            value: value.to_string(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub meta: ClipMetadata,
    pub frames: Vec<LandmarkFrame>,
}

impl Clip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("malformed clip JSON: {0}")]
    Json(String),
    #[error("missing or invalid field `{0}`")]
    Field(&'static str),
    #[error("{field} must be a non-empty token without whitespace, got {value:?}")]
    InvalidToken { field: &'static str, value: String },
    #[error("unknown view {0:?} (expected \"front\" or \"lateral\")")]
    InvalidView(String),
    #[error("source fps must be a positive number, got {0}")]
    InvalidFps(f64),
    #[error("clip has no frames")]
    NoFrames,
    #[error("frame {frame}: expected {FRAME_LANDMARKS} landmarks, found {found}")]
    LandmarkCount { frame: usize, found: usize },
    #[error("frame {frame}, landmark {landmark}: expected null or [x, y, d]")]
    LandmarkShape { frame: usize, landmark: usize },
    #[error("frame {frame}, landmark {landmark}: non-finite coordinate")]
    NonFinite { frame: usize, landmark: usize },
}

/// Parses one clip document.
///
/// Landmarks given as `null` become missing with zeroed coordinates.
pub fn parse_clip(bytes: &[u8]) -> Result<Clip, ParseError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    let obj = root.as_object().ok_or(ParseError::Json("top level must be an object".into()))?;

    let signer = obj.get("signer").and_then(Value::as_str).ok_or(ParseError::Field("signer"))?;
    let word = obj.get("word").and_then(Value::as_str).ok_or(ParseError::Field("word"))?;
    let view: View = obj
        .get("view")
        .and_then(Value::as_str)
        .ok_or(ParseError::Field("view"))?
        .parse()?;
    let source_fps = match obj.get("fps") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or(ParseError::Field("fps"))?),
    };
    let meta = ClipMetadata {
        signer_id: signer.to_string(),
        word_id: word.to_string(),
        view,
        source_fps,
    };
    meta.validate()?;

    let raw_frames = obj.get("frames").and_then(Value::as_array).ok_or(ParseError::Field("frames"))?;
    if raw_frames.is_empty() {
        return Err(ParseError::NoFrames);
    }

    let mut frames = Vec::with_capacity(raw_frames.len());
    for (fi, raw) in raw_frames.iter().enumerate() {
        let entries = raw.as_array().ok_or(ParseError::LandmarkCount { frame: fi, found: 0 })?;
        if entries.len() != FRAME_LANDMARKS {
            return Err(ParseError::LandmarkCount {
                frame: fi,
                found: entries.len(),
            });
        }
        let mut frame = LandmarkFrame::empty();
        for (li, entry) in entries.iter().enumerate() {
            *frame.get_mut(li) = parse_landmark(entry, fi, li)?;
        }
        frames.push(frame);
    }

    Ok(Clip { meta, frames })
}

fn parse_landmark(entry: &Value, frame: usize, landmark: usize) -> Result<Landmark, ParseError> {
    let shape_err = ParseError::LandmarkShape { frame, landmark };
    match entry {
        Value::Null => Ok(Landmark::MISSING),
        Value::Array(xs) if xs.len() == 3 => {
            let mut c = [0.0; 3];
            for (slot, v) in c.iter_mut().zip(xs) {
                *slot = v.as_f64().ok_or(shape_err.clone())?;
                if !slot.is_finite() {
                    return Err(ParseError::NonFinite { frame, landmark });
                }
            }
            Ok(Landmark::new(c[0], c[1], c[2]))
        }
        _ => Err(shape_err),
    }
}

/// Emits the canonical compact JSON form of a clip.
///
/// Coordinates are written in shortest round-trip form, so parsing the
/// output reproduces every `f64` exactly.
pub fn serialize_clip(clip: &Clip) -> Vec<u8> {
    let mut obj = Map::new();
    obj.insert("signer".into(), Value::String(clip.meta.signer_id.clone()));
    obj.insert("word".into(), Value::String(clip.meta.word_id.clone()));
    obj.insert("view".into(), Value::String(clip.meta.view.as_str().into()));
    if let Some(fps) = clip.meta.source_fps {
        obj.insert("fps".into(), number(fps));
    }
    let frames = clip
        .frames
        .iter()
        .map(|frame| {
            Value::Array(
                frame
                    .iter()
                    .map(|lm| {
                        if lm.present {
                            Value::Array(lm.coords().iter().map(|&c| number(c)).collect())
                        } else {
                            Value::Null
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    obj.insert("frames".into(), Value::Array(frames));
    // serde_json's default map keeps keys sorted, which fixes the byte layout.
    serde_json::to_vec(&Value::Object(obj)).expect("clip values are always serializable")
}

fn number(v: f64) -> Value {
    Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

/// One flattened frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Channel that holds `axis` (0 = x, 1 = y, 2 = d) of the landmark at file
/// position `landmark`, or `None` for the dropped depth of pose point 32.
pub fn channel_index(landmark: usize, axis: usize) -> Option<usize> {
    debug_assert!(landmark < FRAME_LANDMARKS && axis < 3);
    const LAST_POSE: usize = POSE_LANDMARKS - 1;
    match landmark {
        LAST_POSE if axis == 2 => None,
        l if l < POSE_LANDMARKS => Some(3 * l + axis),
        l => Some(LEFT_HAND_OFFSET + 3 * (l - POSE_LANDMARKS) + axis),
    }
}

/// Flattens per-landmark triples into the fixed channel layout. Entries
/// flagged missing are written as zeros.
pub(crate) fn flatten_values(values: &[[f64; 3]; FRAME_LANDMARKS], present: &[bool; FRAME_LANDMARKS]) -> [f64; FEATURE_DIM] {
    let mut out = [0.0; FEATURE_DIM];
    for (l, (v, &p)) in values.iter().zip(present.iter()).enumerate() {
        if !p {
            continue;
        }
        for (axis, &c) in v.iter().enumerate() {
            if let Some(ch) = channel_index(l, axis) {
                out[ch] = c;
            }
        }
    }
    out
}

pub fn flatten_frame(frame: &LandmarkFrame) -> FeatureVector {
    let mut values = [[0.0; 3]; FRAME_LANDMARKS];
    let mut present = [false; FRAME_LANDMARKS];
    for (l, lm) in frame.iter().enumerate() {
        values[l] = lm.coords();
        present[l] = lm.present;
    }
    FeatureVector(flatten_values(&values, &present))
}
