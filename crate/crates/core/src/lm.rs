//! Unigram language models with Dirichlet prior smoothing.
//!
//! The collection model is the maximum-likelihood estimate over the whole
//! corpus: `P(w|C) = count(w) / total_tokens`. A document model smooths the
//! document's term frequencies toward the collection:
//!
//! ```text
//! P(w|D) = (c(w, D) + mu * P(w|C)) / (|D| + mu)
//! ```
//!
//! With `mu = 0` this degrades to the unsmoothed MLE; as `mu` grows the
//! document model approaches the collection model. Word-set likelihoods are
//! accumulated in natural-log space, one `ln` per occurrence, in input order.

use crate::error::{Error, Result};
use crate::ingest::TokenizedDocument;
use crate::vocab::{TermId, Vocabulary};
use std::collections::HashMap;

/// Default smoothing mass. Deliberately mid-range for ad-hoc retrieval;
/// override per run when the corpus is unusually short or long.
pub const DIRICHLET_MU_DEFAULT: f64 = 2000.0;

/// The single smoothed-probability formula shared by every scoring path, so
/// document-model scoring and index-based scoring agree bit for bit.
#[inline]
pub(crate) fn dirichlet_term_prob(count: u32, doc_len: u32, mu: f64, p_collection: f64) -> f64 {
    (f64::from(count) + mu * p_collection) / (f64::from(doc_len) + mu)
}

/// Corpus-wide unigram statistics: per-term counts and MLE probabilities.
#[derive(Debug, Clone)]
pub struct CollectionModel {
    counts: Vec<u64>,
    probs: Vec<f64>,
    total_tokens: u64,
}

impl CollectionModel {
    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn count(&self, w: TermId) -> Result<u64> {
        self.counts
            .get(w.index())
            .copied()
            .ok_or(Error::UnknownTerm {
                id: w,
                vocab_size: self.counts.len(),
            })
    }

    /// `P(w|C)`, always in `(0, 1]`.
    pub fn prob(&self, w: TermId) -> Result<f64> {
        self.probs.get(w.index()).copied().ok_or(Error::UnknownTerm {
            id: w,
            vocab_size: self.probs.len(),
        })
    }

    /// Rebuilds the model from per-term counts (id = position). Probabilities
    /// are recomputed from the counts rather than trusted from disk.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(pos) = counts.iter().position(|&c| c == 0) {
            return Err(Error::ZeroCountTerm {
                term: format!("id {pos}"),
            });
        }
        let total_tokens: u64 = counts.iter().sum();
        let probs = counts
            .iter()
            .map(|&c| c as f64 / total_tokens as f64)
            .collect();
        Ok(Self {
            counts,
            probs,
            total_tokens,
        })
    }
}

/// Counts every term over the corpus and normalizes. Errors if the corpus is
/// empty or if some vocabulary term never occurs (the probabilities must stay
/// strictly positive).
pub fn build_collection_model(
    corpus: &[TokenizedDocument],
    vocab: &Vocabulary,
) -> Result<CollectionModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = vec![0u64; vocab.len()];
    for doc in corpus {
        for &t in &doc.tokens {
            match counts.get_mut(t.index()) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::UnknownTerm {
                        id: t,
                        vocab_size: vocab.len(),
                    })
                }
            }
        }
    }
    if let Some(pos) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCountTerm {
            term: vocab
                .term(TermId(pos as u32))
                .unwrap_or("<unknown>")
                .to_owned(),
        });
    }
    let total_tokens: u64 = counts.iter().sum();
    let probs = counts
        .iter()
        .map(|&c| c as f64 / total_tokens as f64)
        .collect();
    Ok(CollectionModel {
        counts,
        probs,
        total_tokens,
    })
}

/// A document's smoothed unigram model, borrowing the collection statistics.
#[derive(Debug)]
pub struct DocumentModel<'a> {
    doc_id: String,
    counts: HashMap<TermId, u32>,
    len: u32,
    mu: f64,
    collection: &'a CollectionModel,
}

impl<'a> DocumentModel<'a> {
    pub fn new(
        doc: &TokenizedDocument,
        mu: f64,
        collection: &'a CollectionModel,
    ) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
            });
        }
        if doc.is_empty() {
            return Err(Error::EmptyDocument { id: doc.id.clone() });
        }
        let mut counts: HashMap<TermId, u32> = HashMap::new();
        for &t in &doc.tokens {
            if t.index() >= collection.vocab_size() {
                return Err(Error::UnknownTerm {
                    id: t,
                    vocab_size: collection.vocab_size(),
                });
            }
            *counts.entry(t).or_insert(0) += 1;
        }
        Ok(Self {
            doc_id: doc.id.clone(),
            counts,
            len: doc.len() as u32,
            mu,
            collection,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn doc_len(&self) -> u32 {
        self.len
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn collection(&self) -> &CollectionModel {
        self.collection
    }

    pub fn term_count(&self, w: TermId) -> u32 {
        self.counts.get(&w).copied().unwrap_or(0)
    }

    /// Smoothed `P(w|D)` for any vocabulary term, present in the document or
    /// not.
    pub fn dirichlet_prob(&self, w: TermId) -> Result<f64> {
        let p_c = self.collection.prob(w)?;
        Ok(dirichlet_term_prob(self.term_count(w), self.len, self.mu, p_c))
    }

    /// Natural-log likelihood of a word multiset: the sum of `ln P(w|D)` over
    /// occurrences, folded in input order. Appending a word therefore shifts
    /// the result by exactly that word's log probability.
    pub fn log_likelihood(&self, words: &[TermId]) -> Result<f64> {
        if words.is_empty() {
            return Err(Error::EmptyWordSet);
        }
        let mut acc = 0.0;
        for &w in words {
            acc += self.dirichlet_prob(w)?.ln();
        }
        Ok(acc)
    }
}
