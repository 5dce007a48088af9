#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slr_core::encoding::{anchor_frame, compute_reference};
use slr_core::landmark::{channel_index, FRAME_LANDMARKS};
use slr_core::{Clip, ClipMetadata, Landmark, LandmarkFrame, View};

/// Random clip whose coordinates are multiples of 2^-53, so `1 - x` is
/// exact. Landmarks go missing with probability `missing`.
pub fn random_clip(seed: u64, frames: usize, missing: f64) -> Clip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..frames)
        .map(|_| {
            let mut f = LandmarkFrame::empty();
            for lm in f.iter_mut() {
                if rng.random::<f64>() >= missing {
                    *lm = Landmark::new(rng.random(), rng.random(), rng.random::<f64>() - 0.5);
                }
            }
            f
        })
        .collect();
    let view = if rng.random() { View::Front } else { View::Lateral };
    Clip {
        meta: ClipMetadata::new(format!("S{:02}", rng.random_range(1..20)), format!("W{:03}", rng.random_range(1..300)), view),
        frames,
    }
}

/// Channels whose scaled offset lies within `eps` of a quantizer bin edge.
/// Exact invariance is only promised away from the edges.
pub fn near_boundary_channels(clip: &Clip, levels: [u32; 3], range: f64, eps: f64) -> Vec<Vec<usize>> {
    let reference = compute_reference(clip).expect("clip has a reference frame");
    clip.frames
        .iter()
        .map(|frame| {
            let rel = anchor_frame(frame, &reference);
            let mut near = Vec::new();
            for l in 0..FRAME_LANDMARKS {
                if !rel.present[l] {
                    continue;
                }
                for (axis, &lv) in levels.iter().enumerate() {
                    let Some(ch) = channel_index(l, axis) else { continue };
                    let q = lv as f64;
                    let width = 2.0 * range / q;
                    let v = rel.offsets[l][axis];
                    let k = ((v + range) / width).round();
                    if (0.0..=q).contains(&k) && (v - (-range + k * width)).abs() < eps {
                        near.push(ch);
                    }
                }
            }
            near
        })
        .collect()
}

/// `p + s (x - p) + t` on x and y, `s d + t_d` on depth, every landmark.
pub fn similarity(clip: &Clip, s: f64, pivot: (f64, f64), t: (f64, f64, f64)) -> Clip {
    let mut out = clip.clone();
    for f in &mut out.frames {
        for lm in f.iter_mut().filter(|l| l.present) {
            lm.x = pivot.0 + s * (lm.x - pivot.0) + t.0;
            lm.y = pivot.1 + s * (lm.y - pivot.1) + t.1;
            lm.d = s * lm.d + t.2;
        }
    }
    out
}
