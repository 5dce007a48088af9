mod common;

use proptest::prelude::*;
use slr_core::landmark::{channel_index, flatten_frame, FRAME_LANDMARKS, LEFT_HAND_OFFSET, RIGHT_HAND_OFFSET};
use slr_core::{parse_clip, serialize_clip, FEATURE_DIM};

/// Channel table built by walking landmarks in file order and handing out
/// the next free slot, skipping the depth of the last pose landmark.
fn reference_table() -> Vec<[Option<usize>; 3]> {
    let mut next = 0;
    (0..FRAME_LANDMARKS)
        .map(|l| {
            let mut row = [None; 3];
            for (axis, slot) in row.iter_mut().enumerate() {
                if l == 32 && axis == 2 {
                    continue;
                }
                *slot = Some(next);
                next += 1;
            }
            row
        })
        .collect()
}

#[test]
fn channel_map_matches_sequential_table() {
    let table = reference_table();
    for (l, row) in table.iter().enumerate() {
        for (axis, &want) in row.iter().enumerate() {
            assert_eq!(channel_index(l, axis), want, "landmark {l} axis {axis}");
        }
    }
    assert_eq!(table[33][0], Some(LEFT_HAND_OFFSET));
    assert_eq!(table[54][0], Some(RIGHT_HAND_OFFSET));
    assert_eq!(table[74][2], Some(FEATURE_DIM - 1));
}

#[test]
fn round_trip_on_a_thousand_clips() {
    for seed in 0..1000 {
        let clip = common::random_clip(seed, 1 + (seed % 4) as usize, 0.2);
        let bytes = serialize_clip(&clip);
        let back = parse_clip(&bytes).unwrap();
        assert_eq!(back, clip, "seed {seed}");
        assert_eq!(serialize_clip(&back), bytes);
    }
}

proptest! {
    #[test]
    fn flatten_places_every_coordinate(seed in any::<u64>()) {
        let clip = common::random_clip(seed, 1, 0.3);
        let frame = &clip.frames[0];
        let v = flatten_frame(frame);
        let table = reference_table();
        let mut covered = [false; FEATURE_DIM];
        for (l, lm) in frame.iter().enumerate() {
            let coords = [lm.x, lm.y, lm.d];
            for axis in 0..3 {
                if let Some(ch) = table[l][axis] {
                    covered[ch] = true;
                    let want = if lm.present { coords[axis] } else { 0.0 };
                    prop_assert_eq!(v.0[ch], want);
                }
            }
        }
        prop_assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn reserializing_is_stable(seed in any::<u64>(), frames in 1usize..5) {
        let clip = common::random_clip(seed, frames, 0.5);
        let once = serialize_clip(&clip);
        let twice = serialize_clip(&parse_clip(&once).unwrap());
        prop_assert_eq!(once, twice);
    }
}
