//! Masked-token planning for the language-model objective.
//!
//! A plan selects 15% of a document's eligible positions (eligible means the
//! token is outside the caller's exclusion set, typically the sampled word
//! pair) and assigns each selected position one of three actions: replace
//! with the mask symbol (80%), replace with a random different vocabulary
//! token (10%), or keep the original token (10%).

use crate::error::{Error, Result};
use crate::ingest::TokenizedDocument;
use crate::vocab::TermId;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Fraction of eligible positions selected for the objective.
pub const MASK_RATE: f64 = 0.15;
/// Action split over selected positions.
pub const P_MASK: f64 = 0.8;
pub const P_RANDOM: f64 = 0.1;
pub const P_KEEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskAction {
    Mask,
    Random,
    Keep,
}

/// One selected position. `replacement` is present exactly when the action
/// is [`MaskAction::Random`], and never equals the original token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskEntry {
    pub pos: u32,
    pub action: MaskAction,
    pub replacement: Option<TermId>,
}

/// All selected positions for one document, in strictly increasing position
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPlan {
    pub doc_id: String,
    pub entries: Vec<MaskEntry>,
}

impl MaskPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Plans masks for one document under a fixed RNG stream.
///
/// The selection count is `round(0.15 * eligible)`; when nothing is eligible
/// the plan is empty rather than an error. Random replacements are uniform
/// over the vocabulary minus the original token, which requires at least two
/// vocabulary terms.
pub fn plan_masks<R: Rng + ?Sized>(
    doc: &TokenizedDocument,
    excluded: &HashSet<TermId>,
    vocab_size: usize,
    rng: &mut R,
) -> Result<MaskPlan> {
    let mut eligible: Vec<u32> = doc
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !excluded.contains(t))
        .map(|(i, _)| i as u32)
        .collect();
    let n_select = (MASK_RATE * eligible.len() as f64).round() as usize;
    let mut selected = Vec::with_capacity(n_select);
    // Partial Fisher-Yates: the first n_select slots become a uniform draw
    // without replacement.
    for i in 0..n_select {
        let j = rng.random_range(i..eligible.len());
        eligible.swap(i, j);
        selected.push(eligible[i]);
    }
    selected.sort_unstable();
    let mut entries = Vec::with_capacity(n_select);
    for pos in selected {
        let roll: f64 = rng.random();
        let (action, replacement) = if roll < P_MASK {
            (MaskAction::Mask, None)
        } else if roll < P_MASK + P_RANDOM {
            let original = doc.tokens[pos as usize];
            (MaskAction::Random, Some(random_replacement(original, vocab_size, rng)?))
        } else {
            (MaskAction::Keep, None)
        };
        entries.push(MaskEntry {
            pos,
            action,
            replacement,
        });
    }
    debug_assert!(entries.windows(2).all(|w| w[0].pos < w[1].pos));
    Ok(MaskPlan {
        doc_id: doc.id.clone(),
        entries,
    })
}

fn random_replacement<R: Rng + ?Sized>(
    original: TermId,
    vocab_size: usize,
    rng: &mut R,
) -> Result<TermId> {
    if vocab_size < 2 {
        return Err(Error::NoReplacementCandidate { vocab_size });
    }
    // Draw from a range one short of the vocabulary and shift past the
    // original, which samples uniformly over the other vocab_size - 1 terms.
    let r = rng.random_range(0..vocab_size as u32 - 1);
    Ok(if r >= original.0 {
        TermId(r + 1)
    } else {
        TermId(r)
    })
}
