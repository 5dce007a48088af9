use crate::landmark::{pose, Clip, Landmark};

use super::EncodingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hand {
    Left,
    Right,
}

/// Left/right pose pairs swapped by a mirror.
const MIRROR_PAIRS: [(usize, usize); 16] = [
    (1, 4),
    (2, 5),
    (3, 6),
    (7, 8),
    (9, 10),
    (11, 12),
    (13, 14),
    (15, 16),
    (17, 18),
    (19, 20),
    (21, 22),
    (23, 24),
    (25, 26),
    (27, 28),
    (29, 30),
    (31, 32),
];

fn mirror(lm: &mut Landmark) {
    if lm.present {
        lm.x = 1.0 - lm.x;
    }
}

/// Mirrors a clip horizontally: `x -> 1 - x`, hands swapped, paired pose
/// points swapped. Missing landmarks stay missing with zero coordinates.
pub fn flip_clip(clip: &Clip) -> Clip {
    let mut out = clip.clone();
    for frame in &mut out.frames {
        for lm in frame.iter_mut() {
            mirror(lm);
        }
        std::mem::swap(&mut frame.left_hand, &mut frame.right_hand);
        for (a, b) in MIRROR_PAIRS {
            frame.pose.swap(a, b);
        }
    }
    out
}

/// The hand whose pose wrist travels further in the image plane.
pub fn detect_dominant_hand(clip: &Clip) -> Result<Hand, EncodingError> {
    let left = wrist_path(clip, pose::LEFT_WRIST);
    let right = wrist_path(clip, pose::RIGHT_WRIST);
    match (left, right) {
        (None, None) => Err(EncodingError::NoWristMotion),
        (Some(l), r) if l > r.unwrap_or(0.0) => Ok(Hand::Left),
        _ => Ok(Hand::Right),
    }
}

/// Summed segment length between consecutive frames in which the wrist is
/// present; `None` if it is present in fewer than two frames.
fn wrist_path(clip: &Clip, wrist: usize) -> Option<f64> {
    let mut points = clip
        .frames
        .iter()
        .map(|f| f.pose[wrist])
        .filter(|lm| lm.present);
    let mut prev = points.next()?;
    let mut length = 0.0;
    let mut segments = 0;
    for p in points {
        length += (p.x - prev.x).hypot(p.y - prev.y);
        prev = p;
        segments += 1;
    }
    (segments > 0).then_some(length)
}
