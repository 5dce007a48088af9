//! Dataset manifest: a CSV listing of clip files with signer, word, view and
//! an optional split label. Paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::landmark::{validate_token, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(ManifestError::Invalid {
                line: 0,
                reason: format!("unknown split {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub clip_path: String,
    pub signer_id: String,
    pub word_id: String,
    pub view: View,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("duplicate clip path {0:?}")]
    DuplicatePath(String),
    #[error("referenced clip {0} does not exist")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

const HEADER: [&str; 4] = ["clip_path", "signer", "word", "view"];

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses manifest text without touching the filesystem.
    pub fn parse(text: &str) -> Result<Manifest, ManifestError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let with_split = match cols.as_slice() {
            [a, b, c, d] if [*a, *b, *c, *d] == HEADER => false,
            [a, b, c, d, "split"] if [*a, *b, *c, *d] == HEADER => true,
            _ => {
                return Err(ManifestError::Invalid {
                    line: 1,
                    reason: format!("expected header clip_path,signer,word,view[,split], got {}", cols.join(",")),
                })
            }
        };

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record?;
            let invalid = |reason: String| ManifestError::Invalid { line, reason };
            let field = |k: usize| record.get(k).unwrap_or("").to_string();
            let clip_path = field(0);
            if clip_path.is_empty() {
                return Err(invalid("empty clip_path".into()));
            }
            let signer_id = field(1);
            let word_id = field(2);
            validate_token("signer", &signer_id).map_err(|e| invalid(e.to_string()))?;
            validate_token("word", &word_id).map_err(|e| invalid(e.to_string()))?;
            let view: View = field(3).parse().map_err(|e: crate::landmark::ParseError| invalid(e.to_string()))?;
            let split = if with_split {
                match field(4).as_str() {
                    "" => None,
                    s => Some(s.parse::<Split>().map_err(|_| invalid(format!("unknown split {s:?}")))?),
                }
            } else {
                None
            };
            if !seen.insert(clip_path.clone()) {
                return Err(ManifestError::DuplicatePath(clip_path));
            }
            entries.push(ManifestEntry {
                clip_path,
                signer_id,
                word_id,
                view,
                split,
            });
        }
        Ok(Manifest { entries })
    }

    /// Reads a manifest and checks that every referenced clip exists next to it.
    pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest = Manifest::parse(&text)?;
        let base = base_dir(path);
        for entry in &manifest.entries {
            let full = base.join(&entry.clip_path);
            if !full.is_file() {
                return Err(ManifestError::MissingFile(full));
            }
        }
        Ok(manifest)
    }

    /// Canonical CSV text with LF line endings. The split column is written
    /// only when at least one entry carries a split.
    pub fn to_csv(&self) -> String {
        let with_split = self.entries.iter().any(|e| e.split.is_some());
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header: Vec<&str> = HEADER.to_vec();
        if with_split {
            header.push("split");
        }
        writer.write_record(&header).expect("in-memory write");
        for e in &self.entries {
            let mut row = vec![e.clip_path.as_str(), &e.signer_id, &e.word_id, e.view.as_str()];
            if with_split {
                row.push(e.split.map(|s| s.as_str()).unwrap_or(""));
            }
            writer.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn with_split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    /// Sorted, de-duplicated word ids; a word's position is its class index.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut words: Vec<String> = self.entries.iter().map(|e| e.word_id.clone()).collect();
        words.sort();
        words.dedup();
        words
    }
}

/// Directory that relative manifest paths resolve against.
pub fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."))
}
