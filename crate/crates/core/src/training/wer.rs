use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrainingError;

/// Edit counts of one minimal alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Levenshtein alignment with unit costs. Among equal-cost alignments the
/// backtrace prefers match/substitution, then deletion, then insertion.
fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<Op> {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut cost = vec![0usize; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 0..=n {
        cost[idx(i, 0)] = i;
    }
    for j in 0..=m {
        cost[idx(0, j)] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[idx(i - 1, j - 1)] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            cost[idx(i, j)] = diag.min(cost[idx(i - 1, j)] + 1).min(cost[idx(i, j - 1)] + 1);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[idx(i, j)];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if here == cost[idx(i - 1, j - 1)] + usize::from(!same) {
                ops.push(if same { Op::Match } else { Op::Substitute });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == cost[idx(i - 1, j)] + 1 {
            ops.push(Op::Delete);
            i -= 1;
        } else {
            ops.push(Op::Insert);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn edit_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let mut c = EditCounts::default();
    for op in align(reference, hypothesis) {
        match op {
            Op::Match => {}
            Op::Substitute => c.substitutions += 1,
            Op::Delete => c.deletions += 1,
            Op::Insert => c.insertions += 1,
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    #[serde(rename = "S")]
    pub substitutions: usize,
    #[serde(rename = "D")]
    pub deletions: usize,
    #[serde(rename = "I")]
    pub insertions: usize,
    #[serde(rename = "N")]
    pub reference_tokens: usize,
    pub wer: f64,
    /// Substitutions and deletions are charged to the reference token,
    /// insertions to the inserted hypothesis token.
    pub per_class_errors: BTreeMap<String, usize>,
}

impl WerReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }
}

/// Corpus word error rate, `(S + D + I) / N`.
pub fn wer<S: AsRef<str>>(references: &[Vec<S>], hypotheses: &[Vec<S>]) -> Result<WerReport, TrainingError> {
    if references.len() != hypotheses.len() {
        return Err(TrainingError::Wer(format!(
            "{} references but {} hypotheses",
            references.len(),
            hypotheses.len()
        )));
    }
    if references.is_empty() {
        return Err(TrainingError::Wer("no reference sequences".into()));
    }
    let mut report = WerReport {
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        reference_tokens: 0,
        wer: 0.0,
        per_class_errors: BTreeMap::new(),
    };
    for (k, (r, h)) in references.iter().zip(hypotheses).enumerate() {
        if r.is_empty() {
            return Err(TrainingError::Wer(format!("reference {k} is empty")));
        }
        let r: Vec<&str> = r.iter().map(AsRef::as_ref).collect();
        let h: Vec<&str> = h.iter().map(AsRef::as_ref).collect();
        let (mut i, mut j) = (0, 0);
        let mut charge = |word: &str| *report.per_class_errors.entry(word.to_string()).or_insert(0) += 1;
        for op in align(&r, &h) {
            match op {
                Op::Match => {
                    i += 1;
                    j += 1;
                }
                Op::Substitute => {
                    report.substitutions += 1;
                    charge(r[i]);
                    i += 1;
                    j += 1;
                }
                Op::Delete => {
                    report.deletions += 1;
                    charge(r[i]);
                    i += 1;
                }
                Op::Insert => {
                    report.insertions += 1;
                    charge(h[j]);
                    j += 1;
                }
            }
        }
        report.reference_tokens += r.len();
    }
    let errors = report.substitutions + report.deletions + report.insertions;
    report.wer = errors as f64 / report.reference_tokens as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_sequences() {
        let r = wer(&[toks("A B"), toks("C")], &[toks("A B"), toks("C")]).unwrap();
        assert_eq!(r.wer, 0.0);
        assert!(r.per_class_errors.is_empty());
    }

    #[test]
    fn single_deletion() {
        let r = wer(&[toks("A B C")], &[toks("A C")]).unwrap();
        assert_eq!((r.substitutions, r.deletions, r.insertions), (0, 1, 0));
        assert!((r.wer - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class_errors["B"], 1);
    }

    #[test]
    fn substitution_plus_insertion() {
        let r = wer(&[toks("A B C D")], &[toks("A X C D E")]).unwrap();
        assert_eq!((r.substitutions, r.deletions, r.insertions), (1, 0, 1));
        assert_eq!(r.wer, 0.5);
        assert_eq!(r.per_class_errors["B"], 1);
        assert_eq!(r.per_class_errors["E"], 1);
    }

    #[test]
    fn isolated_words_give_error_rate() {
        let refs = vec![vec!["W1"], vec!["W2"], vec!["W3"], vec!["W1"]];
        let hyps = vec![vec!["W1"], vec!["W1"], vec!["W3"], vec!["W2"]];
        let r = wer(&refs, &hyps).unwrap();
        assert_eq!(r.wer, 0.5);
        assert_eq!(r.per_class_errors.values().sum::<usize>(), 2);
    }

    #[test]
    fn errors() {
        assert!(wer::<&str>(&[vec![]], &[vec!["A"]]).is_err());
        assert!(wer(&[toks("A")], &[]).is_err());
    }

    #[test]
    fn json_keys() {
        let r = wer(&[toks("A B C")], &[toks("A C")]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["S", "D", "I", "N", "wer", "per_class_errors"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["N"], 3);
    }
}
