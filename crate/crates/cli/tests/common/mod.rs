//! Seeded synthetic corpora shared by the acceptance tests.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repwords::ingest::TokenizedDocument;
use repwords::vocab::{Vocabulary, VocabularyBuilder};

pub struct CorpusParams {
    pub docs: usize,
    pub vocab: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub seed: u64,
}

pub fn word(rank: usize) -> String {
    format!("w{rank:04}")
}

/// Zipf-weighted vocabulary plus a per-document topical band, so the corpus
/// has a realistic global frequency skew while documents still differ.
pub fn text_corpus(p: &CorpusParams) -> Vec<(String, String)> {
    assert!(p.vocab >= 10 && p.len_min >= 1 && p.len_max >= p.len_min);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let zipf: Vec<f64> = (0..p.vocab)
        .map(|r| 1.0 / (r as f64 + 1.0).powf(1.07))
        .collect();
    let zipf_total: f64 = zipf.iter().sum();
    let band = p.vocab / 10 + 1;
    let bonus = zipf_total / band as f64;
    let mut docs = Vec::with_capacity(p.docs);
    for d in 0..p.docs {
        let start = (d * 37) % p.vocab;
        let mut cum = zipf.clone();
        for j in 0..band {
            cum[(start + j) % p.vocab] += bonus;
        }
        let mut running = 0.0;
        for w in &mut cum {
            running += *w;
            *w = running;
        }
        let total = *cum.last().unwrap();
        let len = rng.random_range(p.len_min..=p.len_max);
        let mut text = String::with_capacity(len * 6);
        for i in 0..len {
            let x = rng.random::<f64>() * total;
            let idx = cum.partition_point(|&c| c <= x).min(p.vocab - 1);
            if i > 0 {
                text.push(' ');
            }
            text.push_str(&word(idx));
        }
        docs.push((format!("d{d:05}"), text));
    }
    docs
}

/// The same corpus, tokenized in memory. Words are single lowercase tokens,
/// so splitting on spaces matches the ingest tokenizer.
pub fn tokenized_corpus(p: &CorpusParams) -> (Vec<TokenizedDocument>, Vocabulary) {
    let mut builder = VocabularyBuilder::new();
    let docs = text_corpus(p)
        .into_iter()
        .map(|(id, text)| TokenizedDocument {
            id,
            tokens: text.split(' ').map(|w| builder.intern(w)).collect(),
        })
        .collect();
    (docs, builder.freeze())
}

pub fn write_jsonl(path: &Path, docs: &[(String, String)]) {
    let mut out = String::new();
    for (id, text) in docs {
        out.push_str(&serde_json::json!({"id": id, "contents": text}).to_string());
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}
