//! Pose-landmark sign recognition toolkit: relative quantization encoding
//! of landmark clips, a small transformer encoder classifier trained from
//! scratch, word error rate evaluation and attention profiling.

pub mod attention;
pub mod encoding;
pub mod landmark;
pub mod manifest;
pub mod model;
pub mod synth;
pub mod training;

pub use encoding::{encode_clip, EncodedClip, EncodingConfig, FeatureMatrix, FlipPolicy, Mode};
pub use landmark::{parse_clip, serialize_clip, Clip, ClipMetadata, Landmark, LandmarkFrame, View, FEATURE_DIM};
pub use manifest::{Manifest, ManifestEntry, Split};
pub use synth::{generate_synthetic, SynthConfig};
pub use training::{make_splits, train, wer, SplitSpec, TrainConfig, WerReport};
