use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slr_core::attention::{mean_attention, FrameAttentionProfile};
use slr_core::model::AttentionTensor;

/// Row-stochastic attention over the valid keys, zero rows for masked queries.
fn random_attention(seed: u64, layers: usize, heads: usize, frames: usize) -> AttentionTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let valid = rng.random_range(1..=frames);
    let mask: Vec<bool> = (0..frames).map(|t| t < valid).collect();
    let mut att = AttentionTensor::zeros(layers, heads, frames, mask.clone());
    for l in 0..layers {
        for h in 0..heads {
            let m = att.matrix_mut(l, h);
            for q in 0..valid {
                let row: Vec<f64> = (0..valid).map(|_| rng.random::<f64>().exp()).collect();
                let z: f64 = row.iter().sum();
                for (k, w) in row.iter().enumerate() {
                    m[q * frames + k] = w / z;
                }
            }
        }
    }
    att
}

proptest! {
    #[test]
    fn mean_matches_direct_average(seed in any::<u64>(), layers in 1usize..4, heads in 1usize..5, frames in 1usize..12) {
        let att = random_attention(seed, layers, heads, frames);
        let mean = mean_attention(&att);
        for q in 0..frames {
            for k in 0..frames {
                let mut sum = 0.0;
                for l in 0..layers {
                    for h in 0..heads {
                        sum += att.weights[((l * heads + h) * frames + q) * frames + k];
                    }
                }
                let want = sum / (layers * heads) as f64;
                prop_assert!((mean[q * frames + k] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn profile_is_a_distribution(seed in any::<u64>(), frames in 1usize..40) {
        let att = random_attention(seed, 2, 3, frames);
        let p = FrameAttentionProfile::from_attention("c", &att);
        let total: f64 = p.scores.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for (s, &m) in p.scores.iter().zip(&p.mask) {
            prop_assert!(*s >= 0.0);
            if !m {
                prop_assert_eq!(*s, 0.0);
            }
        }
        let mass = p.middle_half_mass();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&mass));
    }

    #[test]
    fn csv_round_trips_within_print_precision(seed in any::<u64>(), frames in 1usize..30) {
        let p = FrameAttentionProfile::from_attention("c", &random_attention(seed, 1, 2, frames));
        let csv = p.to_csv();
        let back = FrameAttentionProfile::from_csv("c", &csv).unwrap();
        prop_assert_eq!(back.scores.len(), frames);
        for (a, b) in p.scores.iter().zip(&back.scores) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
        }
    }
}

#[test]
fn uniform_attention_puts_half_the_mass_in_the_middle() {
    let frames = 8;
    let mut att = AttentionTensor::zeros(1, 1, frames, vec![true; frames]);
    att.matrix_mut(0, 0).iter_mut().for_each(|w| *w = 1.0 / frames as f64);
    let p = FrameAttentionProfile::from_attention("u", &att);
    assert!((p.middle_half_mass() - 0.5).abs() < 1e-12);
}
