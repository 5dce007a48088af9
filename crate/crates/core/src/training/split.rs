use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingError;
use crate::manifest::{Manifest, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Named signers form the test set; one or more trials per remaining
    /// (signer, word) pair go to validation.
    FixedTestSigners,
    /// Validation trials drawn per (signer, word) pair, no test set.
    Stratified,
    /// One signer's clips form the validation set.
    LeaveOneUserOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub strategy: SplitStrategy,
    pub test_signers: Vec<String>,
    pub val_trials_per_pair: usize,
    pub held_out_user: Option<String>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            strategy: SplitStrategy::FixedTestSigners,
            test_signers: vec!["S04".into(), "S08".into()],
            val_trials_per_pair: 1,
            held_out_user: None,
        }
    }
}

impl SplitSpec {
    pub fn leave_one_user_out(user: impl Into<String>) -> Self {
        SplitSpec {
            strategy: SplitStrategy::LeaveOneUserOut,
            test_signers: Vec::new(),
            val_trials_per_pair: 1,
            held_out_user: Some(user.into()),
        }
    }

    pub fn stratified(val_trials_per_pair: usize) -> Self {
        SplitSpec {
            strategy: SplitStrategy::Stratified,
            test_signers: Vec::new(),
            val_trials_per_pair,
            held_out_user: None,
        }
    }
}

/// Returns a copy of `manifest` with every entry's split assigned.
pub fn make_splits(manifest: &Manifest, spec: &SplitSpec, seed: u64) -> Result<Manifest, TrainingError> {
    if manifest.is_empty() {
        return Err(TrainingError::Split("manifest is empty".into()));
    }
    let signers: BTreeSet<&str> = manifest.entries.iter().map(|e| e.signer_id.as_str()).collect();
    let known = |id: &str| {
        if signers.contains(id) {
            Ok(())
        } else {
            Err(TrainingError::Split(format!("signer {id} does not appear in the manifest")))
        }
    };

    let mut out = manifest.clone();
    match spec.strategy {
        SplitStrategy::LeaveOneUserOut => {
            let user = spec
                .held_out_user
                .as_deref()
                .ok_or_else(|| TrainingError::Split("leave-one-user-out needs a held-out user".into()))?;
            known(user)?;
            for e in &mut out.entries {
                e.split = Some(if e.signer_id == user { Split::Val } else { Split::Train });
            }
        }
        SplitStrategy::FixedTestSigners | SplitStrategy::Stratified => {
            let test: BTreeSet<&str> = if spec.strategy == SplitStrategy::FixedTestSigners {
                if spec.test_signers.is_empty() {
                    return Err(TrainingError::Split("no test signers given".into()));
                }
                for s in &spec.test_signers {
                    known(s)?;
                }
                spec.test_signers.iter().map(String::as_str).collect()
            } else {
                BTreeSet::new()
            };

            let mut pairs: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
            for (i, e) in out.entries.iter_mut().enumerate() {
                if test.contains(e.signer_id.as_str()) {
                    e.split = Some(Split::Test);
                } else {
                    e.split = Some(Split::Train);
                    pairs.entry((e.signer_id.clone(), e.word_id.clone())).or_default().push(i);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for ((signer, word), mut members) in pairs {
                members.shuffle(&mut rng);
                let take = spec.val_trials_per_pair.min(members.len());
                if take == members.len() && take > 0 {
                    log::warn!("pair ({signer}, {word}) has {take} clips; none left for training");
                }
                for &i in &members[..take] {
                    out.entries[i].split = Some(Split::Val);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::View;
    use crate::manifest::ManifestEntry;

    fn grid(signers: usize, words: usize, trials: usize) -> Manifest {
        let mut entries = Vec::new();
        for s in 0..signers {
            for w in 0..words {
                for t in 0..trials {
                    entries.push(ManifestEntry {
                        clip_path: format!("S{:02}_W{w}_{t}.json", s + 1),
                        signer_id: format!("S{:02}", s + 1),
                        word_id: format!("W{w}"),
                        view: View::Front,
                        split: None,
                    });
                }
            }
        }
        Manifest { entries }
    }

    fn count(m: &Manifest, s: Split) -> usize {
        m.with_split(s).count()
    }

    #[test]
    fn stratified_counts() {
        let m = make_splits(&grid(2, 2, 3), &SplitSpec::stratified(1), 0).unwrap();
        assert_eq!(count(&m, Split::Val), 4);
        assert_eq!(count(&m, Split::Train), 8);
        assert_eq!(count(&m, Split::Test), 0);
    }

    #[test]
    fn fixed_signers_are_isolated() {
        let m = make_splits(&grid(18, 3, 4), &SplitSpec::default(), 5).unwrap();
        for e in &m.entries {
            let is_test_signer = e.signer_id == "S04" || e.signer_id == "S08";
            assert_eq!(e.split == Some(Split::Test), is_test_signer);
        }
        assert_eq!(count(&m, Split::Val), 16 * 3);
    }

    #[test]
    fn louo_holds_out_one_signer() {
        let m = make_splits(&grid(3, 2, 2), &SplitSpec::leave_one_user_out("S03"), 0).unwrap();
        assert!(m.entries.iter().all(|e| (e.signer_id == "S03") == (e.split == Some(Split::Val))));
        assert_eq!(count(&m, Split::Test), 0);
    }

    #[test]
    fn seeded_and_deterministic() {
        let a = make_splits(&grid(3, 4, 5), &SplitSpec::stratified(2), 9).unwrap();
        assert_eq!(a, make_splits(&grid(3, 4, 5), &SplitSpec::stratified(2), 9).unwrap());
        assert_ne!(a, make_splits(&grid(3, 4, 5), &SplitSpec::stratified(2), 10).unwrap());
    }

    #[test]
    fn unknown_signers_rejected() {
        assert!(make_splits(&grid(2, 1, 1), &SplitSpec::leave_one_user_out("S09"), 0).is_err());
        assert!(make_splits(&grid(2, 1, 1), &SplitSpec::default(), 0).is_err());
        assert!(make_splits(&Manifest::default(), &SplitSpec::stratified(1), 0).is_err());
    }

    #[test]
    fn small_pairs_go_entirely_to_val() {
        let m = make_splits(&grid(1, 2, 1), &SplitSpec::stratified(3), 0).unwrap();
        assert_eq!(count(&m, Split::Val), 2);
    }
}
