//! Physiological anchoring: every landmark becomes an offset from a parent
//! landmark in the same frame, or from the clip's reference mid-shoulder,
//! scaled by the reference shoulder width (x, d) and torso length (y).

use crate::landmark::{pose, Clip, Landmark, LandmarkFrame, FRAME_LANDMARKS, HAND_LANDMARKS, POSE_LANDMARKS};

use super::EncodingError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFrame {
    pub mid_shoulder: [f64; 3],
    pub shoulder_width: f64,
    pub torso_length: f64,
    pub reference_index: usize,
}

/// What a landmark is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    MidShoulder,
    /// Another landmark of the same frame, by file position.
    Landmark(usize),
}

const LEFT_HAND_ROOT: usize = POSE_LANDMARKS;
const RIGHT_HAND_ROOT: usize = POSE_LANDMARKS + HAND_LANDMARKS;

/// Anchor of the landmark at file position `index`.
pub const fn anchor_of(index: usize) -> Anchor {
    use Anchor::*;
    match index {
        0..=10 => MidShoulder,
        11 | 12 => MidShoulder,
        pose::LEFT_ELBOW => Landmark(pose::LEFT_SHOULDER),
        pose::RIGHT_ELBOW => Landmark(pose::RIGHT_SHOULDER),
        pose::LEFT_WRIST => Landmark(pose::LEFT_ELBOW),
        pose::RIGHT_WRIST => Landmark(pose::RIGHT_ELBOW),
        17 | 19 | 21 => Landmark(pose::LEFT_WRIST),
        18 | 20 | 22 => Landmark(pose::RIGHT_WRIST),
        23 | 24 => MidShoulder,
        pose::LEFT_KNEE => Landmark(pose::LEFT_HIP),
        pose::RIGHT_KNEE => Landmark(pose::RIGHT_HIP),
        pose::LEFT_ANKLE => Landmark(pose::LEFT_KNEE),
        pose::RIGHT_ANKLE => Landmark(pose::RIGHT_KNEE),
        29 | 31 => Landmark(pose::LEFT_ANKLE),
        30 | 32 => Landmark(pose::RIGHT_ANKLE),
        LEFT_HAND_ROOT => Landmark(pose::LEFT_WRIST),
        RIGHT_HAND_ROOT => Landmark(pose::RIGHT_WRIST),
        i if i < RIGHT_HAND_ROOT => Landmark(LEFT_HAND_ROOT),
        _ => Landmark(RIGHT_HAND_ROOT),
    }
}

/// Reference built from the first frame in which both shoulders and both
/// hips are present.
pub fn compute_reference(clip: &Clip) -> Result<ReferenceFrame, EncodingError> {
    let (index, frame) = clip
        .frames
        .iter()
        .enumerate()
        .find(|(_, f)| {
            [pose::LEFT_SHOULDER, pose::RIGHT_SHOULDER, pose::LEFT_HIP, pose::RIGHT_HIP]
                .iter()
                .all(|&i| f.pose[i].present)
        })
        .ok_or(EncodingError::NoReferenceFrame)?;

    let ls = &frame.pose[pose::LEFT_SHOULDER];
    let rs = &frame.pose[pose::RIGHT_SHOULDER];
    let lh = &frame.pose[pose::LEFT_HIP];
    let rh = &frame.pose[pose::RIGHT_HIP];
    let mid_shoulder = midpoint(ls, rs);
    let mid_hip = midpoint(lh, rh);
    let shoulder_width = (ls.x - rs.x).hypot(ls.y - rs.y);
    let torso_length = (mid_shoulder[0] - mid_hip[0]).hypot(mid_shoulder[1] - mid_hip[1]);
    if !(shoulder_width > 0.0 && torso_length > 0.0) {
        return Err(EncodingError::DegenerateReference {
            frame: index,
            shoulder_width,
            torso_length,
        });
    }
    Ok(ReferenceFrame {
        mid_shoulder,
        shoulder_width,
        torso_length,
        reference_index: index,
    })
}

fn midpoint(a: &Landmark, b: &Landmark) -> [f64; 3] {
    [(a.x + b.x) / 2.0, (a.y + b.y) / 2.0, (a.d + b.d) / 2.0]
}

/// Scaled offsets for all 75 landmarks of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeFrame {
    pub offsets: [[f64; 3]; FRAME_LANDMARKS],
    /// False where the landmark or its anchor is missing; such offsets are zero.
    pub present: [bool; FRAME_LANDMARKS],
}

pub fn anchor_frame(frame: &LandmarkFrame, reference: &ReferenceFrame) -> RelativeFrame {
    let mut offsets = [[0.0; 3]; FRAME_LANDMARKS];
    let mut present = [false; FRAME_LANDMARKS];
    for index in 0..FRAME_LANDMARKS {
        let lm = frame.get(index);
        if !lm.present {
            continue;
        }
        let origin = match anchor_of(index) {
            Anchor::MidShoulder => reference.mid_shoulder,
            Anchor::Landmark(parent) => {
                let p = frame.get(parent);
                if !p.present {
                    continue;
                }
                p.coords()
            }
        };
        offsets[index] = [
            (lm.x - origin[0]) / reference.shoulder_width,
            (lm.y - origin[1]) / reference.torso_length,
            (lm.d - origin[2]) / reference.shoulder_width,
        ];
        present[index] = true;
    }
    RelativeFrame { offsets, present }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::{ClipMetadata, View};

    fn torso_frame() -> LandmarkFrame {
        let mut f = LandmarkFrame::empty();
        f.pose[pose::LEFT_SHOULDER] = Landmark::new(0.4, 0.3, 0.0);
        f.pose[pose::RIGHT_SHOULDER] = Landmark::new(0.6, 0.3, 0.0);
        f.pose[pose::LEFT_HIP] = Landmark::new(0.45, 0.7, 0.0);
        f.pose[pose::RIGHT_HIP] = Landmark::new(0.55, 0.7, 0.0);
        f
    }

    fn clip(frames: Vec<LandmarkFrame>) -> Clip {
        Clip {
            meta: ClipMetadata::new("S01", "W001", View::Front),
            frames,
        }
    }

    #[test]
    fn reference_from_first_frame() {
        let r = compute_reference(&clip(vec![torso_frame()])).unwrap();
        assert_eq!(r.reference_index, 0);
        assert!((r.mid_shoulder[0] - 0.5).abs() < 1e-12);
        assert!((r.mid_shoulder[1] - 0.3).abs() < 1e-12);
        assert!((r.shoulder_width - 0.2).abs() < 1e-12);
        assert!((r.torso_length - 0.4).abs() < 1e-12);
    }

    #[test]
    fn reference_skips_incomplete_frames() {
        let mut first = torso_frame();
        first.pose[pose::LEFT_SHOULDER] = Landmark::MISSING;
        let r = compute_reference(&clip(vec![first, torso_frame()])).unwrap();
        assert_eq!(r.reference_index, 1);
        assert_eq!(
            compute_reference(&clip(vec![LandmarkFrame::empty()])),
            Err(EncodingError::NoReferenceFrame)
        );
    }

    #[test]
    fn coincident_shoulders_are_degenerate() {
        let mut f = torso_frame();
        f.pose[pose::RIGHT_SHOULDER] = f.pose[pose::LEFT_SHOULDER];
        assert!(matches!(
            compute_reference(&clip(vec![f])),
            Err(EncodingError::DegenerateReference { frame: 0, .. })
        ));
    }

    #[test]
    fn elbow_offset_is_scaled_per_axis() {
        let mut f = torso_frame();
        f.pose[pose::LEFT_ELBOW] = Landmark::new(0.5, 0.5, 0.0);
        let r = compute_reference(&clip(vec![f.clone()])).unwrap();
        let rel = anchor_frame(&f, &r);
        let o = rel.offsets[pose::LEFT_ELBOW];
        assert!(rel.present[pose::LEFT_ELBOW]);
        assert!((o[0] - 0.5).abs() < 1e-12 && (o[1] - 0.5).abs() < 1e-12 && o[2] == 0.0);
    }

    #[test]
    fn missing_anchor_makes_dependent_missing() {
        let mut f = torso_frame();
        f.pose[pose::LEFT_WRIST] = Landmark::new(0.4, 0.6, 0.0);
        f.left_hand[0] = Landmark::new(0.41, 0.62, 0.0);
        f.left_hand[5] = Landmark::new(0.41, 0.62, 0.0);
        let r = compute_reference(&clip(vec![f.clone()])).unwrap();
        let rel = anchor_frame(&f, &r);
        // elbow is missing, so the wrist has no anchor
        assert!(!rel.present[pose::LEFT_WRIST]);
        assert_eq!(rel.offsets[pose::LEFT_WRIST], [0.0; 3]);
        // the hand root still anchors to the (present) pose wrist
        assert!(rel.present[LEFT_HAND_ROOT]);
        // finger coincident with its hand root
        assert!(rel.present[LEFT_HAND_ROOT + 5]);
        assert_eq!(rel.offsets[LEFT_HAND_ROOT + 5], [0.0; 3]);
    }

    #[test]
    fn shoulders_at_reference_are_constant() {
        let frames = vec![torso_frame(); 4];
        let r = compute_reference(&clip(frames.clone())).unwrap();
        let first = anchor_frame(&frames[0], &r);
        for f in &frames {
            let rel = anchor_frame(f, &r);
            assert_eq!(rel.offsets[pose::LEFT_SHOULDER], first.offsets[pose::LEFT_SHOULDER]);
            assert!((rel.offsets[pose::LEFT_SHOULDER][0] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn every_anchor_points_to_an_existing_landmark() {
        for i in 0..FRAME_LANDMARKS {
            if let Anchor::Landmark(p) = anchor_of(i) {
                assert!(p < FRAME_LANDMARKS && p != i, "landmark {i}");
            }
        }
        assert_eq!(anchor_of(40), Anchor::Landmark(LEFT_HAND_ROOT));
        assert_eq!(anchor_of(74), Anchor::Landmark(RIGHT_HAND_ROOT));
    }
}
