//! On-disk artifacts. Every file is JSONL whose first line is a manifest
//! header naming the stage, the tool version, and a checksum of the tokenized
//! corpus the file derives from; the remaining lines are records.
//!
//! The corpus checksum is the SHA-256 of the token record lines (each with
//! its trailing newline) of `tokens.jsonl`. Downstream artifacts carry the
//! same checksum, so mixing files from different builds is detected at read
//! time rather than producing silently wrong scores.
//!
//! Manifests record input and output names as basenames, never absolute
//! paths, so two builds in different directories yield byte-identical files.

use crate::error::{Error, Result};
use crate::ingest::TokenizedDocument;
use crate::lm::CollectionModel;
use crate::masker::{MaskAction, MaskEntry, MaskPlan};
use crate::retrieval::{InvertedIndex, Posting};
use crate::sampler::{hex, GeneratedExample};
use crate::vocab::{TermId, Vocabulary};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const TOKENS_FILE: &str = "tokens.jsonl";
pub const VOCAB_FILE: &str = "vocab.jsonl";
pub const COLLECTION_FILE: &str = "collection.jsonl";
pub const TRIPLES_FILE: &str = "triples.jsonl";
pub const INDEX_FILE: &str = "index.jsonl";

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const STAGE_TOKENS: &str = "tokens";
pub const STAGE_VOCAB: &str = "vocab";
pub const STAGE_COLLECTION: &str = "collection";
pub const STAGE_TRIPLES: &str = "triples";
pub const STAGE_INDEX: &str = "index";

/// First line of every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub corpus_checksum: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub params: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(
        stage: &str,
        corpus_checksum: String,
        inputs: Vec<String>,
        outputs: Vec<String>,
        params: BTreeMap<String, String>,
    ) -> Self {
        Self {
            stage: stage.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            corpus_checksum,
            inputs,
            outputs,
            params,
        }
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// The basename a manifest records for an input or output path.
pub fn manifest_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path_str(path))
}

fn read_header(
    lines: &mut std::io::Lines<impl BufRead>,
    path: &Path,
    expected_stage: &str,
) -> Result<Manifest> {
    let Some(first) = lines.next() else {
        return Err(Error::MissingHeader {
            path: path_str(path),
            message: "file is empty".to_owned(),
        });
    };
    let first = first?;
    let manifest: Manifest = serde_json::from_str(&first).map_err(|e| Error::MissingHeader {
        path: path_str(path),
        message: format!("first line is not a manifest: {e}"),
    })?;
    if manifest.stage != expected_stage {
        return Err(Error::WrongStage {
            path: path_str(path),
            expected: expected_stage.to_owned(),
            found: manifest.stage,
        });
    }
    Ok(manifest)
}

#[derive(Debug, Serialize, Deserialize)]
struct DocRecord {
    id: String,
    tokens: Vec<TermId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabRecord {
    id: u32,
    term: String,
    count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CollectionRecord {
    id: u32,
    count: u64,
    prob: f64,
}

/// Serializes token records and hashes each line as the corpus checksum.
fn token_lines(docs: &[TokenizedDocument]) -> Result<(Vec<String>, String)> {
    let mut hasher = Sha256::new();
    let mut lines = Vec::with_capacity(docs.len());
    for doc in docs {
        let line = serde_json::to_string(&DocRecord {
            id: doc.id.clone(),
            tokens: doc.tokens.clone(),
        })?;
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
        lines.push(line);
    }
    Ok((lines, hex(&hasher.finalize())))
}

/// Computes the checksum a corpus would have on disk without writing it.
pub fn corpus_checksum(docs: &[TokenizedDocument]) -> Result<String> {
    token_lines(docs).map(|(_, checksum)| checksum)
}

fn write_artifact(path: &Path, manifest: &Manifest, lines: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", manifest.to_line()?)?;
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// A tokenized corpus with its statistics, as loaded from a model directory.
#[derive(Debug)]
pub struct ModelBundle {
    pub docs: Vec<TokenizedDocument>,
    pub vocab: Vocabulary,
    pub collection: CollectionModel,
    pub checksum: String,
    pub manifest: Manifest,
}

/// Writes `tokens.jsonl`, `vocab.jsonl`, and `collection.jsonl` into `dir`
/// and returns the corpus checksum stamped into all three headers.
pub fn write_corpus_dir(
    dir: &Path,
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    collection: &CollectionModel,
    input_names: Vec<String>,
    params: BTreeMap<String, String>,
) -> Result<String> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    std::fs::create_dir_all(dir)?;
    let (doc_lines, checksum) = token_lines(docs)?;
    let outputs = vec![
        TOKENS_FILE.to_owned(),
        VOCAB_FILE.to_owned(),
        COLLECTION_FILE.to_owned(),
    ];
    let mk = |stage: &str| {
        Manifest::new(
            stage,
            checksum.clone(),
            input_names.clone(),
            outputs.clone(),
            params.clone(),
        )
    };
    write_artifact(&dir.join(TOKENS_FILE), &mk(STAGE_TOKENS), &doc_lines)?;

    let vocab_lines: Vec<String> = vocab
        .iter()
        .map(|(id, term, count)| {
            serde_json::to_string(&VocabRecord {
                id: id.0,
                term: term.to_owned(),
                count,
            })
            .map_err(Error::from)
        })
        .collect::<Result<_>>()?;
    write_artifact(&dir.join(VOCAB_FILE), &mk(STAGE_VOCAB), &vocab_lines)?;

    let collection_lines: Vec<String> = (0..collection.vocab_size() as u32)
        .map(|i| {
            let id = TermId(i);
            serde_json::to_string(&CollectionRecord {
                id: i,
                count: collection.count(id)?,
                prob: collection.prob(id)?,
            })
            .map_err(Error::from)
        })
        .collect::<Result<_>>()?;
    let mut collection_manifest = mk(STAGE_COLLECTION);
    collection_manifest.params.insert(
        "total_tokens".to_owned(),
        collection.total_tokens().to_string(),
    );
    write_artifact(
        &dir.join(COLLECTION_FILE),
        &collection_manifest,
        &collection_lines,
    )?;
    Ok(checksum)
}

fn open_lines(path: &Path) -> Result<std::io::Lines<BufReader<File>>> {
    Ok(BufReader::new(File::open(path)?).lines())
}

/// Reads a model directory back, verifying the stage tags, the cross-file
/// checksum agreement, and the recomputed checksum of the token lines.
pub fn read_corpus_dir(dir: &Path) -> Result<ModelBundle> {
    let tokens_path = dir.join(TOKENS_FILE);
    let mut lines = open_lines(&tokens_path)?;
    let manifest = read_header(&mut lines, &tokens_path, STAGE_TOKENS)?;
    let mut hasher = Sha256::new();
    let mut docs = Vec::new();
    for line in lines {
        let line = line?;
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
        let rec: DocRecord = serde_json::from_str(&line)?;
        if rec.tokens.is_empty() {
            return Err(Error::EmptyDocument { id: rec.id });
        }
        docs.push(TokenizedDocument {
            id: rec.id,
            tokens: rec.tokens,
        });
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let recomputed = hex(&hasher.finalize());
    if recomputed != manifest.corpus_checksum {
        return Err(Error::ChecksumMismatch {
            context: path_str(&tokens_path),
            expected: manifest.corpus_checksum.clone(),
            found: recomputed,
        });
    }

    let vocab_path = dir.join(VOCAB_FILE);
    let mut lines = open_lines(&vocab_path)?;
    let vocab_manifest = read_header(&mut lines, &vocab_path, STAGE_VOCAB)?;
    if vocab_manifest.corpus_checksum != manifest.corpus_checksum {
        return Err(Error::ChecksumMismatch {
            context: path_str(&vocab_path),
            expected: manifest.corpus_checksum.clone(),
            found: vocab_manifest.corpus_checksum,
        });
    }
    let mut entries = Vec::new();
    for line in lines {
        let rec: VocabRecord = serde_json::from_str(&line?)?;
        if rec.id as usize != entries.len() {
            return Err(Error::InconsistentArtifacts(format!(
                "vocabulary id {} at position {}",
                rec.id,
                entries.len()
            )));
        }
        entries.push((rec.term, rec.count));
    }
    let vocab = Vocabulary::from_entries(entries)?;

    let collection_path = dir.join(COLLECTION_FILE);
    let mut lines = open_lines(&collection_path)?;
    let collection_manifest = read_header(&mut lines, &collection_path, STAGE_COLLECTION)?;
    if collection_manifest.corpus_checksum != manifest.corpus_checksum {
        return Err(Error::ChecksumMismatch {
            context: path_str(&collection_path),
            expected: manifest.corpus_checksum.clone(),
            found: collection_manifest.corpus_checksum,
        });
    }
    let mut counts = Vec::new();
    let mut stored_probs = Vec::new();
    for line in lines {
        let rec: CollectionRecord = serde_json::from_str(&line?)?;
        if rec.id as usize != counts.len() {
            return Err(Error::InconsistentArtifacts(format!(
                "collection id {} at position {}",
                rec.id,
                counts.len()
            )));
        }
        counts.push(rec.count);
        stored_probs.push(rec.prob);
    }
    if counts.len() != vocab.len() {
        return Err(Error::InconsistentArtifacts(format!(
            "vocabulary has {} terms but collection has {}",
            vocab.len(),
            counts.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    match collection_manifest.param("total_tokens") {
        Some(stored) if stored == total.to_string() => {}
        Some(stored) => {
            return Err(Error::InconsistentArtifacts(format!(
                "collection header records {stored} total tokens but counts sum to {total}"
            )));
        }
        None => {
            return Err(Error::MissingHeader {
                path: path_str(&collection_path),
                message: "collection header lacks total_tokens".to_owned(),
            });
        }
    }
    for i in 0..counts.len() as u32 {
        let id = TermId(i);
        if Some(counts[i as usize]) != vocab.count(id) {
            return Err(Error::InconsistentArtifacts(format!(
                "count mismatch for term {:?}",
                vocab.term(id).unwrap_or("<unknown>")
            )));
        }
    }
    // Probabilities are recomputed from counts; the stored values must agree
    // bitwise because scores downstream fold them directly.
    let collection = CollectionModel::from_counts(counts)?;
    for (i, &stored) in stored_probs.iter().enumerate() {
        let fresh = collection.prob(TermId(i as u32))?;
        if stored.to_bits() != fresh.to_bits() {
            return Err(Error::InconsistentArtifacts(format!(
                "stored probability {stored} for term id {i} does not match recomputed {fresh}"
            )));
        }
    }

    for doc in &docs {
        for &t in &doc.tokens {
            if t.index() >= vocab.len() {
                return Err(Error::UnknownTerm {
                    id: t,
                    vocab_size: vocab.len(),
                });
            }
        }
    }
    Ok(ModelBundle {
        docs,
        vocab,
        collection,
        checksum: manifest.corpus_checksum.clone(),
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntryRecord {
    pub pos: u32,
    pub action: MaskAction,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replacement: Option<String>,
}

/// One labeled training pair as stored on disk. Words are stored as term
/// strings so the file stands alone without the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub doc_id: String,
    pub length: u32,
    pub pos_words: Vec<String>,
    pub neg_words: Vec<String>,
    pub pos_logql: f64,
    pub neg_logql: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask_plan: Option<Vec<MaskEntryRecord>>,
}

fn term_string(vocab: &Vocabulary, id: TermId) -> Result<String> {
    vocab
        .term(id)
        .map(str::to_owned)
        .ok_or(Error::UnknownTerm {
            id,
            vocab_size: vocab.len(),
        })
}

/// Converts a generated example to its serialized form.
pub fn triple_record(example: &GeneratedExample, vocab: &Vocabulary) -> Result<TripleRecord> {
    let words = |ids: &[TermId]| -> Result<Vec<String>> {
        ids.iter().map(|&id| term_string(vocab, id)).collect()
    };
    let mask_plan = match &example.mask_plan {
        None => None,
        Some(plan) => Some(
            plan.entries
                .iter()
                .map(|e| {
                    Ok(MaskEntryRecord {
                        pos: e.pos,
                        action: e.action,
                        replacement: e
                            .replacement
                            .map(|id| term_string(vocab, id))
                            .transpose()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(TripleRecord {
        doc_id: example.triple.doc_id.clone(),
        length: example.triple.length,
        pos_words: words(&example.triple.pos_words)?,
        neg_words: words(&example.triple.neg_words)?,
        pos_logql: example.triple.pos_score,
        neg_logql: example.triple.neg_score,
        mask_plan,
    })
}

/// Rehydrates a stored mask plan against a vocabulary.
pub fn mask_plan_from_records(
    doc_id: &str,
    records: &[MaskEntryRecord],
    vocab: &Vocabulary,
) -> Result<MaskPlan> {
    let entries = records
        .iter()
        .map(|r| {
            let replacement = match &r.replacement {
                None => None,
                Some(term) => Some(vocab.id(term).ok_or_else(|| {
                    Error::InconsistentArtifacts(format!(
                        "mask replacement {term:?} is not in the vocabulary"
                    ))
                })?),
            };
            Ok(MaskEntry {
                pos: r.pos,
                action: r.action,
                replacement,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MaskPlan {
        doc_id: doc_id.to_owned(),
        entries,
    })
}

/// Streams triple records to disk behind a manifest header.
pub struct TriplesWriter {
    out: BufWriter<File>,
    written: u64,
}

impl TriplesWriter {
    pub fn create(path: &Path, manifest: &Manifest) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", manifest.to_line()?)?;
        Ok(Self { out, written: 0 })
    }

    pub fn write(&mut self, record: &TripleRecord) -> Result<()> {
        writeln!(self.out, "{}", serde_json::to_string(record)?)?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<u64> {
        self.out.flush()?;
        Ok(self.written)
    }
}

pub fn read_triples(path: &Path) -> Result<(Manifest, Vec<TripleRecord>)> {
    let mut lines = open_lines(path)?;
    let manifest = read_header(&mut lines, path, STAGE_TRIPLES)?;
    let mut records = Vec::new();
    for line in lines {
        records.push(serde_json::from_str(&line?)?);
    }
    Ok((manifest, records))
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexDocsRecord {
    docs: Vec<(String, u32)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PostingsRecord {
    id: u32,
    term: String,
    postings: Vec<(u32, u32)>,
}

/// Writes an index file: manifest, then the document table, then one
/// postings record per term in id order.
pub fn write_index_file(path: &Path, index: &InvertedIndex, manifest: &Manifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", manifest.to_line()?)?;
    let docs: Vec<(String, u32)> = (0..index.num_docs() as u32)
        .map(|ord| {
            (
                index.doc_id(ord).expect("ordinal in range").to_owned(),
                index.doc_len(ord).expect("ordinal in range"),
            )
        })
        .collect();
    writeln!(w, "{}", serde_json::to_string(&IndexDocsRecord { docs })?)?;
    for i in 0..index.num_terms() as u32 {
        let id = TermId(i);
        let rec = PostingsRecord {
            id: i,
            term: index.term(id).expect("term id in range").to_owned(),
            postings: index
                .postings(id)
                .expect("term id in range")
                .iter()
                .map(|p| (p.doc, p.tf))
                .collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_file(path: &Path) -> Result<(Manifest, InvertedIndex)> {
    let mut lines = open_lines(path)?;
    let manifest = read_header(&mut lines, path, STAGE_INDEX)?;
    let Some(doc_line) = lines.next() else {
        return Err(Error::MissingHeader {
            path: path_str(path),
            message: "missing document table".to_owned(),
        });
    };
    let doc_table: IndexDocsRecord = serde_json::from_str(&doc_line?)?;
    let mut terms = Vec::new();
    let mut postings = Vec::new();
    for line in lines {
        let rec: PostingsRecord = serde_json::from_str(&line?)?;
        if rec.id as usize != terms.len() {
            return Err(Error::InconsistentArtifacts(format!(
                "postings id {} at position {}",
                rec.id,
                terms.len()
            )));
        }
        terms.push(rec.term);
        postings.push(
            rec.postings
                .into_iter()
                .map(|(doc, tf)| Posting { doc, tf })
                .collect(),
        );
    }
    let index = InvertedIndex::from_parts(doc_table.docs, terms, postings)?;
    Ok((manifest, index))
}
