//! Synthetic multi-signer gesture corpus.
//!
//! Every class is a parametric trajectory of the dominant (right) arm and
//! hand rendered into the 75-landmark layout. A trial perturbs the class
//! parameters; signers then apply their own similarity transform (isotropic
//! scale about the image center plus a translation), Gaussian jitter and
//! random landmark dropout. Left-handed signers perform the mirrored
//! gesture.
//!
//! The canonical gesture of a (class, trial) pair does not depend on the
//! signer, so two signers without jitter or dropout produce clips that are
//! exact similarity transforms of each other.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::encoding::flip_clip;
use crate::landmark::{pose, Clip, ClipMetadata, Landmark, LandmarkFrame, View, HAND_LANDMARKS};
use crate::manifest::{Manifest, ManifestEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_signers: usize,
    pub trials: usize,
    /// Inclusive frame-count range.
    pub frames: (usize, usize),
    /// Inclusive isotropic scale range of a signer.
    pub scale_range: (f64, f64),
    /// Maximum absolute translation of a signer along x and y.
    pub translation: f64,
    pub jitter_std: f64,
    pub missing_prob: f64,
    pub left_handed_prob: f64,
    pub view: View,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 20,
            n_signers: 3,
            trials: 10,
            frames: (20, 36),
            scale_range: (0.7, 1.4),
            translation: 0.1,
            jitter_std: 0.005,
            missing_prob: 0.1,
            left_handed_prob: 0.0,
            view: View::Front,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid synthetic config: {0}")]
pub struct SynthError(String);

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError(m.to_string()));
        if self.n_classes < 1 || self.n_signers < 1 || self.trials < 1 {
            return fail("classes, signers and trials must all be at least 1");
        }
        if self.n_classes > 999 || self.n_signers > 99 {
            return fail("at most 999 classes and 99 signers");
        }
        if self.frames.0 < 1 || self.frames.0 > self.frames.1 {
            return fail("frame range must satisfy 1 <= min <= max");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return fail("scale range must satisfy 0 < min <= max");
        }
        if !(self.translation >= 0.0 && self.translation.is_finite()) {
            return fail("translation must be non-negative");
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return fail("jitter std must be non-negative");
        }
        for (name, p) in [("missing", self.missing_prob), ("left-handed", self.left_handed_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError(format!("{name} probability must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Per-signer nuisance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignerStyle {
    pub scale: f64,
    pub translation: (f64, f64),
    pub left_handed: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    /// Clips paired with their manifest-relative paths.
    pub clips: Vec<(String, Clip)>,
    pub manifest: Manifest,
}

pub fn signer_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

pub fn word_id(index: usize) -> String {
    format!("W{:03}", index + 1)
}

const STREAM_CLASS: u64 = 1;
const STREAM_TRIAL: u64 = 2;
const STREAM_SIGNER: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn rng_for(seed: u64, domain: u64, a: usize, b: usize, c: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 56) | ((a as u64) << 36) | ((b as u64) << 16) | c as u64);
    rng
}

pub fn signer_style(config: &SynthConfig, seed: u64, signer: usize) -> SignerStyle {
    let mut rng = rng_for(seed, STREAM_SIGNER, signer, 0, 0);
    let (lo, hi) = config.scale_range;
    let scale = lo + (hi - lo) * rng.random::<f64>();
    let t = config.translation;
    let tx = t * (2.0 * rng.random::<f64>() - 1.0);
    let ty = t * (2.0 * rng.random::<f64>() - 1.0);
    let left_handed = rng.random::<f64>() < config.left_handed_prob;
    SignerStyle {
        scale,
        translation: (tx, ty),
        left_handed,
    }
}

/// Generates the full corpus: signers x classes x trials clips, in that
/// nesting order.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticSet, SynthError> {
    config.validate()?;
    let patterns: Vec<ClassPattern> = (0..config.n_classes)
        .map(|k| ClassPattern::sample(&mut rng_for(seed, STREAM_CLASS, k, 0, 0)))
        .collect();

    let mut clips = Vec::with_capacity(config.n_signers * config.n_classes * config.trials);
    let mut entries = Vec::with_capacity(clips.capacity());
    for s in 0..config.n_signers {
        let style = signer_style(config, seed, s);
        for (k, pattern) in patterns.iter().enumerate() {
            for trial in 0..config.trials {
                let canonical = render_trial(config, seed, k, trial, pattern);
                let mut clip = Clip {
                    meta: ClipMetadata::new(signer_id(s), word_id(k), config.view),
                    frames: canonical,
                };
                if style.left_handed {
                    clip = flip_clip(&clip);
                }
                apply_style(&mut clip, &style);
                let mut noise = rng_for(seed, STREAM_NOISE, s, k, trial);
                add_noise(&mut clip, config.jitter_std, config.missing_prob, &mut noise);

                let path = format!("clips/{}_{}_T{:02}.json", signer_id(s), word_id(k), trial);
                entries.push(ManifestEntry {
                    clip_path: path.clone(),
                    signer_id: clip.meta.signer_id.clone(),
                    word_id: clip.meta.word_id.clone(),
                    view: config.view,
                    split: None,
                });
                clips.push((path, clip));
            }
        }
    }
    Ok(SyntheticSet {
        clips,
        manifest: Manifest { entries },
    })
}

/// Isotropic scaling about the image center followed by a translation.
pub fn apply_similarity(clip: &mut Clip, scale: f64, translation: (f64, f64)) {
    for frame in &mut clip.frames {
        for lm in frame.iter_mut().filter(|l| l.present) {
            lm.x = 0.5 + scale * (lm.x - 0.5) + translation.0;
            lm.y = 0.5 + scale * (lm.y - 0.5) + translation.1;
            lm.d *= scale;
        }
    }
}

fn apply_style(clip: &mut Clip, style: &SignerStyle) {
    apply_similarity(clip, style.scale, style.translation);
}

fn add_noise(clip: &mut Clip, jitter_std: f64, missing_prob: f64, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, jitter_std.max(f64::MIN_POSITIVE)).expect("finite std");
    for frame in &mut clip.frames {
        for lm in frame.iter_mut() {
            // Draw unconditionally so the noise stream stays aligned.
            let j = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
            let drop = rng.random::<f64>() < missing_prob;
            if !lm.present {
                continue;
            }
            if drop {
                *lm = Landmark::MISSING;
            } else if jitter_std > 0.0 {
                lm.x += j[0];
                lm.y += j[1];
                lm.d += j[2];
            }
        }
    }
}

/// Shape of one class's gesture, in canonical body units (shoulder width 0.2).
#[derive(Debug, Clone, Copy)]
struct ClassPattern {
    center: [f64; 3],
    radius: f64,
    aspect: f64,
    cycles: f64,
    phase: f64,
    direction: f64,
    extended: [bool; 5],
    hand_angle: f64,
    hand_roll: f64,
}

impl ClassPattern {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let mut extended = [false; 5];
        for e in &mut extended {
            *e = rng.random::<bool>();
        }
        ClassPattern {
            center: [
                -0.13 + 0.22 * rng.random::<f64>(),
                -0.17 + 0.3 * rng.random::<f64>(),
                -0.15 + 0.2 * rng.random::<f64>(),
            ],
            radius: 0.02 + 0.07 * rng.random::<f64>(),
            aspect: 0.3 + 0.7 * rng.random::<f64>(),
            cycles: [0.5, 1.0, 1.5, 2.0][rng.random_range(0..4)],
            phase: TAU * rng.random::<f64>(),
            direction: if rng.random::<bool>() { 1.0 } else { -1.0 },
            extended,
            hand_angle: -PI / 2.0 + 1.6 * (rng.random::<f64>() - 0.5),
            hand_roll: 2.0 * (rng.random::<f64>() - 0.5),
        }
    }

    fn perturbed(&self, rng: &mut ChaCha8Rng) -> Self {
        let mut p = *self;
        for c in &mut p.center {
            *c += 0.008 * (2.0 * rng.random::<f64>() - 1.0);
        }
        p.radius *= 1.0 + 0.08 * (2.0 * rng.random::<f64>() - 1.0);
        p.phase += 0.2 * (2.0 * rng.random::<f64>() - 1.0);
        p.hand_angle += 0.05 * (2.0 * rng.random::<f64>() - 1.0);
        p
    }
}

const HAND_SIZE: f64 = 0.09;
const RIGHT_SHOULDER: [f64; 3] = [0.4, 0.35, 0.0];
const LEFT_SHOULDER: [f64; 3] = [0.6, 0.35, 0.0];
const MID_SHOULDER: [f64; 3] = [0.5, 0.35, 0.0];
const REST_WRIST: [f64; 3] = [0.43, 0.72, 0.0];

fn render_trial(config: &SynthConfig, seed: u64, class: usize, trial: usize, pattern: &ClassPattern) -> Vec<LandmarkFrame> {
    let mut rng = rng_for(seed, STREAM_TRIAL, class, trial, 0);
    let n = rng.random_range(config.frames.0..=config.frames.1);
    let p = pattern.perturbed(&mut rng);
    (0..n)
        .map(|t| {
            let u = if n == 1 { 0.5 } else { t as f64 / (n - 1) as f64 };
            render_frame(&p, u)
        })
        .collect()
}

fn lm(p: [f64; 3]) -> Landmark {
    Landmark::new(p[0], p[1], p[2])
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn lerp(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

/// Renders the canonical right-handed pose at normalized time `u` in [0, 1].
fn render_frame(p: &ClassPattern, u: f64) -> LandmarkFrame {
    let mut f = LandmarkFrame::empty();
    // Hands rise from rest and return; motion peaks mid-clip.
    let envelope = (PI * u).sin().powi(2);

    // face: nose, eyes, ears, mouth corners
    let face: [[f64; 2]; 11] = [
        [0.5, 0.2],
        [0.515, 0.185],
        [0.525, 0.185],
        [0.535, 0.185],
        [0.485, 0.185],
        [0.475, 0.185],
        [0.465, 0.185],
        [0.55, 0.195],
        [0.45, 0.195],
        [0.515, 0.235],
        [0.485, 0.235],
    ];
    for (i, q) in face.iter().enumerate() {
        f.pose[i] = Landmark::new(q[0], q[1], -0.05);
    }

    f.pose[pose::LEFT_SHOULDER] = lm(LEFT_SHOULDER);
    f.pose[pose::RIGHT_SHOULDER] = lm(RIGHT_SHOULDER);
    f.pose[pose::LEFT_HIP] = Landmark::new(0.56, 0.75, 0.0);
    f.pose[pose::RIGHT_HIP] = Landmark::new(0.44, 0.75, 0.0);
    f.pose[pose::LEFT_KNEE] = Landmark::new(0.57, 0.95, 0.01);
    f.pose[pose::RIGHT_KNEE] = Landmark::new(0.43, 0.95, 0.01);
    f.pose[pose::LEFT_ANKLE] = Landmark::new(0.57, 1.15, 0.02);
    f.pose[pose::RIGHT_ANKLE] = Landmark::new(0.43, 1.15, 0.02);
    f.pose[29] = Landmark::new(0.575, 1.17, 0.03);
    f.pose[30] = Landmark::new(0.425, 1.17, 0.03);
    f.pose[31] = Landmark::new(0.56, 1.19, -0.02);
    f.pose[32] = Landmark::new(0.44, 1.19, -0.02);

    // non-dominant arm resting
    let l_wrist = [0.57, 0.72, 0.0];
    f.pose[pose::LEFT_ELBOW] = Landmark::new(0.64, 0.55, 0.01);
    f.pose[pose::LEFT_WRIST] = lm(l_wrist);
    let left = hand_landmarks(add(l_wrist, [0.004, 0.006, 0.0]), PI / 2.0, [true; 5], 0.0);
    place_hand(&mut f, &left, false);

    // dominant arm
    let angle = TAU * p.cycles * u + p.phase;
    let target = [
        MID_SHOULDER[0] + p.center[0] + p.direction * p.radius * angle.cos(),
        MID_SHOULDER[1] + p.center[1] + p.radius * p.aspect * angle.sin(),
        p.center[2],
    ];
    let wrist = lerp(REST_WRIST, target, envelope);
    let elbow = add(lerp(RIGHT_SHOULDER, wrist, 0.5), [-0.06 + 0.02 * envelope, 0.05, 0.02]);
    f.pose[pose::RIGHT_ELBOW] = lm(elbow);
    f.pose[pose::RIGHT_WRIST] = lm(wrist);
    let hand_angle = p.hand_angle * envelope + (PI / 2.0) * (1.0 - envelope) + p.hand_roll * envelope * u;
    let curl = envelope;
    let extended = p.extended;
    let right = hand_landmarks(add(wrist, [-0.004, 0.006, 0.0]), hand_angle, extended, curl);
    place_hand(&mut f, &right, true);
    f
}

fn place_hand(f: &mut LandmarkFrame, hand: &[[f64; 3]; HAND_LANDMARKS], right: bool) {
    let (slots, pinky, index, thumb) = if right {
        (&mut f.right_hand, 18, 20, 22)
    } else {
        (&mut f.left_hand, 17, 19, 21)
    };
    for (slot, p) in slots.iter_mut().zip(hand) {
        *slot = lm(*p);
    }
    f.pose[pinky] = lm(hand[17]);
    f.pose[index] = lm(hand[5]);
    f.pose[thumb] = lm(hand[2]);
}

/// 21 hand landmarks in MediaPipe order. `angle` points from the wrist to
/// the middle-finger knuckle; non-extended fingers curl by `curl` in [0, 1].
fn hand_landmarks(root: [f64; 3], angle: f64, extended: [bool; 5], curl: f64) -> [[f64; 3]; HAND_LANDMARKS] {
    const SPREAD: [f64; 5] = [-0.9, -0.25, 0.0, 0.22, 0.45];
    const BASE: [f64; 5] = [0.15, 0.45, 0.45, 0.42, 0.38];
    const SEGMENT: [f64; 5] = [0.16, 0.2, 0.22, 0.2, 0.16];
    let mut out = [[0.0; 3]; HAND_LANDMARKS];
    out[0] = root;
    for finger in 0..5 {
        let mut dir = angle + SPREAD[finger];
        let mut pos = [
            root[0] + HAND_SIZE * BASE[finger] * dir.cos(),
            root[1] + HAND_SIZE * BASE[finger] * dir.sin(),
            root[2] - 0.01,
        ];
        let bend = if extended[finger] { 0.0 } else { 1.1 * curl };
        for joint in 0..4 {
            out[1 + 4 * finger + joint] = pos;
            dir += bend;
            pos = [
                pos[0] + HAND_SIZE * SEGMENT[finger] * dir.cos(),
                pos[1] + HAND_SIZE * SEGMENT[finger] * dir.sin(),
                pos[2] - 0.008 * (1.0 + bend),
            ];
        }
    }
    out
}
