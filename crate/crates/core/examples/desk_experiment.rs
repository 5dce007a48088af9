//! Leave-one-signer-out comparison of raw and RQE features on the default
//! synthetic corpus. Usage: `desk_experiment [seeds] [held_out_signer]`.

use std::time::Instant;

use slr_core::attention::profile_clip;
use slr_core::model::ModelConfig;
use slr_core::training::{train, LabeledSet, TrainConfig};
use slr_core::{encode_clip, generate_synthetic, make_splits, EncodingConfig, Mode, Split, SplitSpec, SynthConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let held_out = args.next().unwrap_or_else(|| "S03".into());

    let data = generate_synthetic(&SynthConfig::default(), 42).expect("default config is valid");
    let manifest = make_splits(&data.manifest, &SplitSpec::leave_one_user_out(&held_out), 0).expect("signer exists");
    let vocab = manifest.vocabulary();

    for mode in [Mode::Raw, Mode::Rqe] {
        let enc = EncodingConfig::with_mode(mode);
        let (mut tr, mut va) = (LabeledSet::default(), LabeledSet::default());
        for ((_, clip), entry) in data.clips.iter().zip(&manifest.entries) {
            let m = encode_clip(clip, &enc).expect("synthetic clips encode").matrix;
            let y = vocab.binary_search(&entry.word_id).expect("word in vocabulary");
            match entry.split {
                Some(Split::Val) => va.push(m, y),
                _ => tr.push(m, y),
            }
        }
        let model = ModelConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
            ..ModelConfig::small(vocab.len())
        };
        for seed in 0..seeds {
            let cfg = TrainConfig {
                patience_epochs: 10,
                seed,
                ..TrainConfig::default()
            };
            let t0 = Instant::now();
            let out = train(&tr, &va, &model, &cfg, vocab.clone()).expect("training runs");
            let h = &out.history;
            if mode == Mode::Rqe {
                let masses: Vec<String> = (0..5)
                    .map(|i| {
                        let p = profile_clip(&out.checkpoint, &va.matrices[i * 37 % va.len()], "clip").expect("profile");
                        format!("{:.3}", p.middle_half_mass())
                    })
                    .collect();
                println!("middle-half attention mass: {}", masses.join(" "));
            }
            println!(
                "{mode} seed {seed}: best wer {:.4} at epoch {} of {} ({}) in {:.1}s",
                h.best_val_wer,
                h.best_epoch,
                h.epochs.len(),
                h.stopped,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
