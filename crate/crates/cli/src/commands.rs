use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use slr_core::attention::profile_clip;
use slr_core::encoding::EncodingError;
use slr_core::manifest::base_dir;
use slr_core::model::Checkpoint;
use slr_core::training::{evaluate, make_splits, LabeledSet, SplitStrategy};
use slr_core::{
    encode_clip, generate_synthetic, parse_clip, serialize_clip, EncodingConfig, FeatureMatrix, Manifest,
    ManifestEntry, Split, SplitSpec, SynthConfig,
};

use crate::error::CliError;
use crate::fsio::{encoded_path, read, read_string, write_atomic};
use crate::run_config::RunConfig;
use crate::{AttendArgs, EncodeArgs, EvalArgs, SplitArgs, StrategyArg, SynthArgs, TrainArgs};

const ENCODING_ECHO: &str = "encoding.toml";

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        n_classes: a.classes,
        n_signers: a.signers,
        trials: a.trials,
        frames: (a.min_frames, a.max_frames),
        scale_range: (a.scale_min, a.scale_max),
        translation: a.translation,
        jitter_std: a.jitter,
        missing_prob: a.missing,
        left_handed_prob: a.left_handed,
        view: a.view,
    };
    let set = generate_synthetic(&config, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    for (path, clip) in &set.clips {
        write_atomic(&a.out.join(path), &serialize_clip(clip))?;
    }
    write_atomic(&a.out.join("manifest.csv"), set.manifest.to_csv().as_bytes())?;
    println!(
        "wrote {} clips ({} classes x {} signers x {} trials) and manifest.csv to {}",
        set.clips.len(),
        a.classes,
        a.signers,
        a.trials,
        a.out.display()
    );
    Ok(())
}

fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    Manifest::load(path).map_err(|e| match e {
        slr_core::manifest::ManifestError::Io { path, source } => CliError::Io { path, source },
        other => CliError::data(other),
    })
}

fn worker_count() -> usize {
    std::env::var("SLR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Applies `f` to every item on a bounded pool; results keep input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = worker_count().min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let done: Vec<Vec<(usize, R)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every index visited")).collect()
}

enum ClipFailure {
    Io(CliError),
    Data(String),
}

fn encode_entries(
    manifest_path: &Path,
    entries: &[&ManifestEntry],
    config: &EncodingConfig,
) -> Result<Vec<FeatureMatrix>, CliError> {
    let base = base_dir(manifest_path);
    let results = par_map(entries, |e| {
        let path = base.join(&e.clip_path);
        let bytes = read(&path).map_err(ClipFailure::Io)?;
        let clip = parse_clip(&bytes).map_err(|err| ClipFailure::Data(format!("{}: {err}", e.clip_path)))?;
        encode_clip(&clip, config)
            .map(|enc| enc.matrix)
            .map_err(|err| ClipFailure::Data(format!("{}: {err}", e.clip_path)))
    });
    let mut matrices = Vec::with_capacity(results.len());
    let mut bad = Vec::new();
    for r in results {
        match r {
            Ok(m) => matrices.push(m),
            Err(ClipFailure::Io(e)) => return Err(e),
            Err(ClipFailure::Data(msg)) => bad.push(msg),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Data(format!("{} clips failed to encode:\n  {}", bad.len(), bad.join("\n  "))));
    }
    Ok(matrices)
}

fn encoding_echo(config: &EncodingConfig) -> String {
    toml::to_string(config).expect("encoding config serializes")
}

pub fn encode(a: &EncodeArgs) -> Result<(), CliError> {
    let config = a.encoding.config()?;
    let manifest = load_manifest(&a.manifest)?;
    let entries: Vec<&ManifestEntry> = manifest.entries.iter().collect();
    // everything is encoded before anything is written
    let matrices = encode_entries(&a.manifest, &entries, &config)?;
    for (e, m) in entries.iter().zip(&matrices) {
        write_atomic(&encoded_path(&a.out, &e.clip_path), &m.to_bytes())?;
    }
    write_atomic(&a.out.join(ENCODING_ECHO), encoding_echo(&config).as_bytes())?;
    println!("encoded {} clips ({}) into {}", matrices.len(), config.mode, a.out.display());
    Ok(())
}

pub fn split(a: &SplitArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&a.manifest)?;
    let spec = SplitSpec {
        strategy: match a.strategy {
            StrategyArg::FixedTestSigners => SplitStrategy::FixedTestSigners,
            StrategyArg::Stratified => SplitStrategy::Stratified,
            StrategyArg::LeaveOneUserOut => SplitStrategy::LeaveOneUserOut,
        },
        test_signers: a.test_signers.clone(),
        val_trials_per_pair: a.val_trials,
        held_out_user: a.held_out.clone(),
    };
    let out = make_splits(&manifest, &spec, a.seed).map_err(CliError::data)?;
    write_atomic(&a.out, out.to_csv().as_bytes())?;
    let n = |s| out.with_split(s).count();
    println!(
        "train {} / val {} / test {} written to {}",
        n(Split::Train),
        n(Split::Val),
        n(Split::Test),
        a.out.display()
    );
    Ok(())
}

/// Feature matrices for `entries`, read from an encode directory or
/// encoded from the clip files.
fn matrices_for(
    manifest_path: &Path,
    entries: &[&ManifestEntry],
    encoded_dir: Option<&Path>,
    config: &EncodingConfig,
) -> Result<Vec<FeatureMatrix>, CliError> {
    let Some(dir) = encoded_dir else {
        return encode_entries(manifest_path, entries, config);
    };
    let echo = dir.join(ENCODING_ECHO);
    if echo.is_file() {
        let stored: EncodingConfig = toml::from_str(&read_string(&echo)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", echo.display())))?;
        if stored != *config {
            return Err(CliError::Data(format!(
                "{} was encoded with {}, which differs from the requested encoding {}",
                dir.display(),
                encoding_echo(&stored).replace('\n', " "),
                encoding_echo(config).replace('\n', " ")
            )));
        }
    }
    entries
        .iter()
        .map(|e| {
            let path = encoded_path(dir, &e.clip_path);
            FeatureMatrix::from_bytes(&read(&path)?).map_err(|err| CliError::Data(format!("{}: {err}", path.display())))
        })
        .collect()
}

fn labeled(
    entries: &[&ManifestEntry],
    matrices: Vec<FeatureMatrix>,
    vocab: &[String],
) -> Result<LabeledSet, CliError> {
    let mut set = LabeledSet::default();
    for (e, m) in entries.iter().zip(matrices) {
        let y = vocab
            .iter()
            .position(|w| *w == e.word_id)
            .ok_or_else(|| CliError::Internal(format!("word {} missing from vocabulary", e.word_id)))?;
        set.push(m, y);
    }
    Ok(set)
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config)?;
    cfg.encoding.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = load_manifest(&cfg.paths.manifest)?;
    if manifest.entries.iter().all(|e| e.split.is_none()) {
        log::info!("manifest has no split column; applying the [split] section");
        manifest = make_splits(&manifest, &cfg.split, cfg.seed).map_err(CliError::data)?;
    }
    let vocab = manifest.vocabulary();
    cfg.materialize(vocab.len());

    let train_entries: Vec<&ManifestEntry> = manifest.with_split(Split::Train).collect();
    let val_entries: Vec<&ManifestEntry> = manifest.with_split(Split::Val).collect();
    if train_entries.is_empty() || val_entries.is_empty() {
        return Err(CliError::Data(format!(
            "need train and val clips, found {} and {}",
            train_entries.len(),
            val_entries.len()
        )));
    }
    let encoded = cfg.paths.encoded_dir.as_deref();
    let train_set = labeled(
        &train_entries,
        matrices_for(&cfg.paths.manifest, &train_entries, encoded, &cfg.encoding)?,
        &vocab,
    )?;
    let val_set = labeled(
        &val_entries,
        matrices_for(&cfg.paths.manifest, &val_entries, encoded, &cfg.encoding)?,
        &vocab,
    )?;

    let outcome = slr_core::train(&train_set, &val_set, &cfg.model, &cfg.train, vocab).map_err(|e| match e {
        slr_core::training::TrainingError::InvalidConfig(m) => CliError::Usage(m),
        slr_core::training::TrainingError::Model(slr_core::model::ModelError::InvalidConfig(m)) => CliError::Usage(m),
        other => CliError::data(other),
    })?;

    let out = &cfg.paths.output_dir;
    write_atomic(&out.join("checkpoint.slrt"), &outcome.checkpoint.to_bytes())?;
    write_atomic(&out.join("history.csv"), outcome.history.to_csv().as_bytes())?;
    write_atomic(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    let h = &outcome.history;
    println!(
        "best val wer {:.4} at epoch {} of {} (stopped: {}); artifacts in {}",
        h.best_val_wer,
        h.best_epoch,
        h.epochs.len(),
        h.stopped,
        out.display()
    );
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::from_bytes(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let encoding = a.encoding.config()?;
    let checkpoint = load_checkpoint(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    let entries: Vec<&ManifestEntry> = match a.split.split() {
        Some(s) => manifest.with_split(s).collect(),
        None => manifest.entries.iter().collect(),
    };
    if entries.is_empty() {
        return Err(CliError::Data("no manifest entries in the requested split".into()));
    }
    let matrices = matrices_for(&a.manifest, &entries, a.encoded.as_deref(), &encoding)?;

    // references may name words the checkpoint never saw; they can only be errors
    let mut vocab = checkpoint.labels.clone();
    for e in &entries {
        if !vocab.contains(&e.word_id) {
            vocab.push(e.word_id.clone());
        }
    }
    let set = labeled(&entries, matrices, &vocab)?;
    let report = evaluate(&checkpoint, &set).map_err(CliError::data)?;
    if let Some(out) = &a.out {
        write_atomic(out, report.to_json().as_bytes())?;
    }
    println!("wer {:.4}", report.wer);
    Ok(())
}

pub fn attend(a: &AttendArgs) -> Result<(), CliError> {
    let encoding = a.encoding.config()?;
    let checkpoint = load_checkpoint(&a.checkpoint)?;
    let clip = parse_clip(&read(&a.clip)?).map_err(|e| CliError::Data(format!("{}: {e}", a.clip.display())))?;
    let matrix = encode_clip(&clip, &encoding)
        .map_err(|e: EncodingError| CliError::Data(format!("{}: {e}", a.clip.display())))?
        .matrix;
    let id = clip_id(&a.clip);
    let profile = profile_clip(&checkpoint, &matrix, &id).map_err(CliError::data)?;
    write_atomic(&a.out, profile.to_csv().as_bytes())?;
    println!(
        "{} frames, {:.1}% of attention on the middle half; profile written to {}",
        profile.scores.len(),
        100.0 * profile.middle_half_mass(),
        a.out.display()
    );
    Ok(())
}

fn clip_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| PathBuf::from(path).display().to_string())
}
