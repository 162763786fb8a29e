//! Term vocabulary: a bijection between term strings and dense integer ids,
//! with per-term corpus counts.
//!
//! Ids are assigned in first-seen order while a [`VocabularyBuilder`] is fed
//! tokens; freezing yields an immutable [`Vocabulary`] that the rest of the
//! pipeline shares read-only.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Dense vocabulary id. Serializes as a bare integer.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TermId(pub u32);

impl TermId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Single-writer vocabulary under construction. Interning a term assigns the
/// next free id on first sight and bumps its count on every sight.
#[derive(Debug, Default)]
pub struct VocabularyBuilder {
    index: HashMap<String, TermId>,
    terms: Vec<String>,
    counts: Vec<u64>,
}

impl VocabularyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, term: &str) -> TermId {
        if let Some(&id) = self.index.get(term) {
            self.counts[id.index()] += 1;
            return id;
        }
        let id = TermId(self.terms.len() as u32);
        self.index.insert(term.to_owned(), id);
        self.terms.push(term.to_owned());
        self.counts.push(1);
        id
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn freeze(self) -> Vocabulary {
        Vocabulary {
            index: self.index,
            terms: self.terms,
            counts: self.counts,
        }
    }
}

/// Immutable term table. Every registered term has occurred at least once.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    index: HashMap<String, TermId>,
    terms: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from `(term, count)` rows ordered by id.
    /// Rejects duplicate terms and zero counts.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut terms = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (term, count) in entries {
            if count == 0 {
                return Err(Error::ZeroCountTerm { term });
            }
            let id = TermId(terms.len() as u32);
            if index.insert(term.clone(), id).is_some() {
                return Err(Error::InconsistentArtifacts(format!(
                    "term {term:?} appears twice in the vocabulary"
                )));
            }
            terms.push(term);
            counts.push(count);
        }
        Ok(Self {
            index,
            terms,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id.index()).map(String::as_str)
    }

    pub fn count(&self, id: TermId) -> Option<u64> {
        self.counts.get(id.index()).copied()
    }

    /// Sum of all per-term counts; equals the token count of the corpus the
    /// vocabulary was built from.
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (TermId, &str, u64)> {
        self.terms
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (t, &c))| (TermId(i as u32), t.as_str(), c))
    }
}
