//! Corpus ingestion and tokenization.
//!
//! Two input shapes are supported: JSONL (one `{"id", "contents"}` object per
//! line) and a directory of plain-text files where the file stem is the
//! document id. Tokenization lowercases, splits on Unicode word boundaries
//! (punctuation is dropped), and truncates to a per-document token cap.

use crate::error::{Error, Result};
use crate::vocab::{TermId, VocabularyBuilder};
use serde::Deserialize;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use unicode_segmentation::UnicodeSegmentation;

/// A document as read from disk, before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
}

/// How raw text becomes tokens. The defaults lowercase, keep no punctuation,
/// and cap documents at 4096 tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizationPolicy {
    pub lowercase: bool,
    pub max_tokens: usize,
}

impl Default for TokenizationPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            max_tokens: 4096,
        }
    }
}

/// A document reduced to vocabulary ids. Construction guarantees at least one
/// token and at most the policy cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub id: String,
    pub tokens: Vec<TermId>,
}

impl TokenizedDocument {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits a document into terms and interns them, registering counts as a
/// side effect. Truncation happens before interning, so vocabulary counts see
/// only the tokens that are kept.
/// Splits text into word tokens under the policy without touching any
/// vocabulary. Used for query text, which must be tokenized exactly like
/// documents were.
pub fn tokenize_words(text: &str, policy: &TokenizationPolicy) -> Vec<String> {
    let lowered;
    let text = if policy.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };
    text.unicode_words()
        .take(policy.max_tokens)
        .map(str::to_owned)
        .collect()
}

pub fn tokenize(
    doc: &RawDocument,
    policy: &TokenizationPolicy,
    vocab: &mut VocabularyBuilder,
) -> Result<TokenizedDocument> {
    let tokens: Vec<TermId> = tokenize_words(&doc.text, policy)
        .iter()
        .map(|w| vocab.intern(w))
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyDocument { id: doc.id.clone() });
    }
    Ok(TokenizedDocument {
        id: doc.id.clone(),
        tokens,
    })
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    contents: String,
}

/// Streaming reader over a JSONL corpus. Yields documents in file order; any
/// malformed or duplicate line is an error and ends the stream.
pub struct JsonlCorpus {
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    seen: HashSet<String>,
    failed: bool,
}

impl JsonlCorpus {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(Self {
            lines: BufReader::new(file).lines(),
            line_no: 0,
            seen: HashSet::new(),
            failed: false,
        })
    }

    fn parse_line(&mut self, line: &str) -> Result<RawDocument> {
        let record: JsonlRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                line: self.line_no,
                message: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(Error::MalformedLine {
                line: self.line_no,
                message: "field \"id\" is empty".to_owned(),
            });
        }
        if !self.seen.insert(record.id.clone()) {
            return Err(Error::DuplicateDocId {
                id: record.id,
                line: self.line_no,
            });
        }
        Ok(RawDocument {
            id: record.id,
            text: record.contents,
        })
    }
}

impl Iterator for JsonlCorpus {
    type Item = Result<RawDocument>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let line = match self.lines.next()? {
            Ok(l) => l,
            Err(e) => {
                self.failed = true;
                return Some(Err(e.into()));
            }
        };
        self.line_no += 1;
        let parsed = self.parse_line(&line);
        if parsed.is_err() {
            self.failed = true;
        }
        Some(parsed)
    }
}

/// Opens a JSONL corpus for streaming.
pub fn ingest_jsonl(path: &Path) -> Result<JsonlCorpus> {
    JsonlCorpus::open(path)
}

/// Reader over a directory of plain-text files, one document per file, file
/// stem as document id. Files are visited in lexicographic name order so runs
/// are reproducible regardless of directory enumeration order.
pub struct DirCorpus {
    files: std::vec::IntoIter<PathBuf>,
    seen: HashSet<String>,
    failed: bool,
}

impl Iterator for DirCorpus {
    type Item = Result<RawDocument>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let path = self.files.next()?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if id.is_empty() {
            self.failed = true;
            return Some(Err(Error::InconsistentArtifacts(format!(
                "{} has no usable file stem",
                path.display()
            ))));
        }
        if !self.seen.insert(id.clone()) {
            self.failed = true;
            return Some(Err(Error::DuplicateDoc { id }));
        }
        match std::fs::read_to_string(&path) {
            Ok(text) => Some(Ok(RawDocument { id, text })),
            Err(e) => {
                self.failed = true;
                Some(Err(e.into()))
            }
        }
    }
}

/// Opens a plain-text directory corpus.
pub fn ingest_text_dir(path: &Path) -> Result<DirCorpus> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(DirCorpus {
        files: files.into_iter(),
        seen: HashSet::new(),
        failed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn doc(id: &str, text: &str) -> RawDocument {
        RawDocument {
            id: id.to_owned(),
            text: text.to_owned(),
        }
    }

    #[test]
    fn tokenize_lowercases_and_folds_repeats() {
        let mut b = VocabularyBuilder::new();
        let t = tokenize(&doc("d1", "The cat. THE"), &TokenizationPolicy::default(), &mut b)
            .unwrap();
        assert_eq!(t.tokens, vec![TermId(0), TermId(1), TermId(0)]);
        let v = b.freeze();
        assert_eq!(v.len(), 2);
        assert_eq!(v.term(TermId(0)), Some("the"));
        assert_eq!(v.term(TermId(1)), Some("cat"));
    }

    #[test]
    fn tokenize_splits_on_word_boundaries() {
        let mut b = VocabularyBuilder::new();
        let t = tokenize(&doc("d1", "a-b c"), &TokenizationPolicy::default(), &mut b).unwrap();
        assert_eq!(t.len(), 3);
        let v = b.freeze();
        assert_eq!(v.id("a"), Some(TermId(0)));
        assert_eq!(v.id("b"), Some(TermId(1)));
        assert_eq!(v.id("c"), Some(TermId(2)));
    }

    #[test]
    fn tokenize_rejects_text_with_no_words() {
        let mut b = VocabularyBuilder::new();
        let err = tokenize(&doc("d9", "!!! ... ??"), &TokenizationPolicy::default(), &mut b)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyDocument { id } if id == "d9"));
    }

    #[test]
    fn tokenize_truncates_and_counts_only_kept_tokens() {
        let mut b = VocabularyBuilder::new();
        let policy = TokenizationPolicy {
            max_tokens: 3,
            ..Default::default()
        };
        let t = tokenize(&doc("d1", "a b c d e"), &policy, &mut b).unwrap();
        assert_eq!(t.len(), 3);
        let v = b.freeze();
        assert_eq!(v.len(), 3);
        assert_eq!(v.total_count(), 3);
    }

    #[test]
    fn tokenize_is_deterministic() {
        let text = "Numbers 2.0 and hy-phens; MIXED case Ünïcode";
        let mut b1 = VocabularyBuilder::new();
        let mut b2 = VocabularyBuilder::new();
        let t1 = tokenize(&doc("d", text), &TokenizationPolicy::default(), &mut b1).unwrap();
        let t2 = tokenize(&doc("d", text), &TokenizationPolicy::default(), &mut b2).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn length_accounting_matches_vocabulary_totals() {
        let texts = ["the cat sat", "the the the dog", "cat dog cat"];
        let mut b = VocabularyBuilder::new();
        let mut total = 0usize;
        for (i, text) in texts.iter().enumerate() {
            let t = tokenize(
                &doc(&format!("d{i}"), text),
                &TokenizationPolicy::default(),
                &mut b,
            )
            .unwrap();
            total += t.len();
        }
        assert_eq!(b.freeze().total_count(), total as u64);
    }

    #[test]
    fn jsonl_reads_documents_in_file_order() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","contents":"alpha"}}"#).unwrap();
        writeln!(f, r#"{{"id":"d2","contents":"beta"}}"#).unwrap();
        let docs: Vec<_> = ingest_jsonl(f.path())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0], doc("d1", "alpha"));
        assert_eq!(docs[1], doc("d2", "beta"));
    }

    #[test]
    fn jsonl_empty_file_yields_empty_stream() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let docs: Vec<_> = ingest_jsonl(f.path())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert!(docs.is_empty());
    }

    #[test]
    fn jsonl_reports_malformed_line_number() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","contents":"fine"}}"#).unwrap();
        writeln!(f, "{{not json").unwrap();
        let err = ingest_jsonl(f.path())
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn jsonl_reports_duplicate_id_and_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","contents":"one"}}"#).unwrap();
        writeln!(f, r#"{{"id":"d1","contents":"two"}}"#).unwrap();
        let err = ingest_jsonl(f.path())
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        match err {
            Error::DuplicateDocId { id, line } => {
                assert_eq!(id, "d1");
                assert_eq!(line, 2);
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_rejects_empty_id() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"","contents":"x"}}"#).unwrap();
        let err = ingest_jsonl(f.path())
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn text_dir_uses_file_stems_in_sorted_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "second doc").unwrap();
        std::fs::write(dir.path().join("a.txt"), "first doc").unwrap();
        let docs: Vec<_> = ingest_text_dir(dir.path())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[1].id, "b");
        assert_eq!(docs[0].text, "first doc");
    }

    #[test]
    fn text_dir_rejects_colliding_stems() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "x").unwrap();
        std::fs::write(dir.path().join("a.text"), "y").unwrap();
        let err = ingest_text_dir(dir.path())
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateDoc { id } if id == "a"));
    }
}
