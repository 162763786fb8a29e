//! Representative word-set sampling.
//!
//! For each document, pairs of word sets are drawn from the document's
//! smoothed unigram model restricted to a filtered sampling vocabulary. The
//! set length comes from a zero-truncated Poisson; both sets of a pair share
//! one length and are drawn with replacement. The set with the higher
//! log-likelihood under the document model becomes the positive example.
//! Near-ties are discarded and redrawn so every emitted pair carries a real
//! preference signal.
//!
//! Reproducibility contract: every (document, pair index) gets its own RNG
//! stream derived by hashing the run seed with the document id and pair
//! index, so output is identical across runs, thread counts, and document
//! processing order.

use crate::error::{Error, Result};
use crate::ingest::TokenizedDocument;
use crate::lm::{CollectionModel, DocumentModel};
use crate::masker::{plan_masks, MaskPlan};
use crate::vocab::{TermId, Vocabulary};
use crate::weighted::{DiscreteSampler, SamplerKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

pub const LAMBDA_DEFAULT: f64 = 3.0;
pub const PAIRS_PER_DOC_DEFAULT: u32 = 5;
pub const MIN_COUNT_DEFAULT: u64 = 50;
pub const SUBSAMPLE_THRESHOLD_DEFAULT: f64 = 1e-5;
/// Log-score gap below which a pair is considered a tie and redrawn.
pub const TIE_EPS: f64 = 1e-12;
/// Redraw budget per pair before giving up on a document.
pub const MAX_ATTEMPTS_DEFAULT: u32 = 100;

/// A stopword list plus a digest identifying its exact contents. Terms are
/// trimmed and lowercased on load to match the document tokenization policy.
#[derive(Debug, Clone)]
pub struct Stoplist {
    terms: HashSet<String>,
    digest: String,
}

impl Stoplist {
    pub fn empty() -> Self {
        Self::from_terms(std::iter::empty::<String>())
    }

    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: HashSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let mut sorted: Vec<&str> = terms.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        let mut hasher = Sha256::new();
        for t in sorted {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hex(&hasher.finalize());
        Self { terms, digest }
    }

    /// One term per line; blank lines are ignored.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let lines = reader.lines().collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self::from_terms(lines))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Hex SHA-256 over the sorted term list; stable across load order.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The vocabulary subset that word sets may be drawn from, with a per-term
/// keep weight from frequency subsampling.
#[derive(Debug, Clone)]
pub struct SamplingVocabulary {
    entries: Vec<(TermId, f64)>,
    min_count: u64,
    subsample_threshold: f64,
    stoplist_digest: String,
}

impl SamplingVocabulary {
    /// Filters the vocabulary: stopwords out, terms rarer than `min_count`
    /// out, and every survivor weighted by
    /// `keep(f) = min(1, sqrt(t/f) + t/f)` where `f` is the term's relative
    /// corpus frequency. Rare terms keep weight 1; very frequent terms are
    /// damped instead of dropped.
    pub fn build(
        vocab: &Vocabulary,
        collection: &CollectionModel,
        stoplist: &Stoplist,
        min_count: u64,
        subsample_threshold: f64,
    ) -> Result<Self> {
        if !subsample_threshold.is_finite() || subsample_threshold <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "subsample_threshold",
                value: subsample_threshold,
            });
        }
        let total = collection.total_tokens() as f64;
        let mut entries = Vec::new();
        for (id, term, _) in vocab.iter() {
            let count = collection.count(id)?;
            if count < min_count || stoplist.contains(term) {
                continue;
            }
            let f = count as f64 / total;
            let keep = (subsample_threshold / f).sqrt() + subsample_threshold / f;
            entries.push((id, keep.min(1.0)));
        }
        if entries.is_empty() {
            return Err(Error::EmptySamplingVocabulary);
        }
        Ok(Self {
            entries,
            min_count,
            subsample_threshold,
            stoplist_digest: stoplist.digest().to_owned(),
        })
    }

    /// Direct construction from `(term, keep)` pairs, for callers that manage
    /// their own filtering. Entries must be unique, keep weights in (0, 1].
    pub fn from_entries(
        entries: Vec<(TermId, f64)>,
        min_count: u64,
        subsample_threshold: f64,
        stoplist_digest: String,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySamplingVocabulary);
        }
        let mut seen = HashSet::new();
        for &(id, keep) in &entries {
            if !keep.is_finite() || keep <= 0.0 || keep > 1.0 {
                return Err(Error::InvalidParameter {
                    name: "keep",
                    value: keep,
                });
            }
            if !seen.insert(id) {
                return Err(Error::InconsistentArtifacts(format!(
                    "term id {} appears twice in the sampling vocabulary",
                    id.0
                )));
            }
        }
        Ok(Self {
            entries,
            min_count,
            subsample_threshold,
            stoplist_digest,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(TermId, f64)] {
        &self.entries
    }

    pub fn contains(&self, id: TermId) -> bool {
        self.entries.iter().any(|&(t, _)| t == id)
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn subsample_threshold(&self) -> f64 {
        self.subsample_threshold
    }

    pub fn stoplist_digest(&self) -> &str {
        &self.stoplist_digest
    }
}

/// The per-(document, pair) RNG stream. Hashing the seed, document id, and
/// pair index makes the stream independent of worker count and of where the
/// document sits in the corpus.
pub fn pair_rng(seed: u64, doc_id: &str, pair_index: u32) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"pair-stream.v1");
    hasher.update(seed.to_le_bytes());
    hasher.update((doc_id.len() as u64).to_le_bytes());
    hasher.update(doc_id.as_bytes());
    hasher.update(pair_index.to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Draws a set length from a Poisson(`lambda`) conditioned on being at least
/// one, by redrawing zeros. The mean is `lambda / (1 - exp(-lambda))`.
pub fn sample_length<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u32> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
        });
    }
    let dist = Poisson::new(lambda).map_err(|_| Error::InvalidParameter {
        name: "lambda",
        value: lambda,
    })?;
    loop {
        let draw: f64 = dist.sample(rng);
        if draw >= 1.0 {
            return Ok(draw.min(u32::MAX as f64) as u32);
        }
    }
}

/// One document's word-sampling distribution: smoothed term probabilities
/// times keep weights, renormalized over the sampling vocabulary. Zero-weight
/// terms (possible only with `mu = 0`) are dropped from the support.
#[derive(Debug)]
pub struct DocSamplingDistribution {
    doc_id: String,
    support: Vec<TermId>,
    weights: Vec<f64>,
    sampler: DiscreteSampler,
}

impl DocSamplingDistribution {
    pub fn new(
        dm: &DocumentModel<'_>,
        sv: &SamplingVocabulary,
        kind: SamplerKind,
    ) -> Result<Self> {
        let mut support = Vec::with_capacity(sv.len());
        let mut raw = Vec::with_capacity(sv.len());
        for &(id, keep) in sv.entries() {
            let w = dm.dirichlet_prob(id)? * keep;
            if w > 0.0 {
                support.push(id);
                raw.push(w);
            }
        }
        if support.is_empty() {
            return Err(Error::EmptySupport {
                doc_id: dm.doc_id().to_owned(),
            });
        }
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let sampler = DiscreteSampler::new(&weights, kind)?;
        Ok(Self {
            doc_id: dm.doc_id().to_owned(),
            support,
            weights,
            sampler,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn support(&self) -> &[TermId] {
        &self.support
    }

    /// Normalized weights aligned with `support()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TermId {
        self.support[self.sampler.sample(rng)]
    }
}

/// Draws a pair of same-length word sets with replacement from the document
/// distribution, interleaving draws (first of each, second of each, ...).
pub fn sample_pair<R: Rng + ?Sized>(
    dist: &DocSamplingDistribution,
    len: u32,
    rng: &mut R,
) -> Result<(Vec<TermId>, Vec<TermId>)> {
    if len == 0 {
        return Err(Error::InvalidParameter {
            name: "len",
            value: 0.0,
        });
    }
    let mut s1 = Vec::with_capacity(len as usize);
    let mut s2 = Vec::with_capacity(len as usize);
    for _ in 0..len {
        s1.push(dist.draw(rng));
        s2.push(dist.draw(rng));
    }
    Ok((s1, s2))
}

/// Baseline pair: both sets drawn uniformly with replacement over the
/// sampling vocabulary, ignoring document and keep weights.
pub fn random_baseline_pair<R: Rng + ?Sized>(
    sv: &SamplingVocabulary,
    len: u32,
    rng: &mut R,
) -> Result<(Vec<TermId>, Vec<TermId>)> {
    if len == 0 {
        return Err(Error::InvalidParameter {
            name: "len",
            value: 0.0,
        });
    }
    let entries = sv.entries();
    let mut s1 = Vec::with_capacity(len as usize);
    let mut s2 = Vec::with_capacity(len as usize);
    for _ in 0..len {
        s1.push(entries[rng.random_range(0..entries.len())].0);
        s2.push(entries[rng.random_range(0..entries.len())].0);
    }
    Ok((s1, s2))
}

/// A labeled pair: the positive set scored at least `TIE_EPS` higher than the
/// negative set under the document model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriple {
    pub doc_id: String,
    pub length: u32,
    pub pos_words: Vec<TermId>,
    pub neg_words: Vec<TermId>,
    pub pos_score: f64,
    pub neg_score: f64,
}

fn multiset_eq(a: &[TermId], b: &[TermId]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}

/// Scores both sets and orders them. Returns `None` for ties: identical
/// multisets, or log scores within `TIE_EPS` of each other.
pub fn label_pair(
    dm: &DocumentModel<'_>,
    s1: Vec<TermId>,
    s2: Vec<TermId>,
) -> Result<Option<TrainingTriple>> {
    let ll1 = dm.log_likelihood(&s1)?;
    let ll2 = dm.log_likelihood(&s2)?;
    if multiset_eq(&s1, &s2) || (ll1 - ll2).abs() < TIE_EPS {
        return Ok(None);
    }
    let length = s1.len() as u32;
    let (pos_words, neg_words, pos_score, neg_score) = if ll1 > ll2 {
        (s1, s2, ll1, ll2)
    } else {
        (s2, s1, ll2, ll1)
    };
    Ok(Some(TrainingTriple {
        doc_id: dm.doc_id().to_owned(),
        length,
        pos_words,
        neg_words,
        pos_score,
        neg_score,
    }))
}

/// Where pair word sets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingStrategy {
    /// The document's smoothed unigram model (the real signal).
    #[default]
    DocLm,
    /// Uniform over the sampling vocabulary (ablation baseline).
    Random,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doclm" => Ok(Self::DocLm),
            "random" => Ok(Self::Random),
            _ => Err(Error::InconsistentArtifacts(format!(
                "unknown sampling strategy {s:?} (expected \"doclm\" or \"random\")"
            ))),
        }
    }
}

impl std::fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DocLm => "doclm",
            Self::Random => "random",
        })
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub lambda: f64,
    pub mu: f64,
    pub pairs_per_doc: u32,
    pub seed: u64,
    pub strategy: SamplingStrategy,
    pub sampler_kind: SamplerKind,
    /// Attach a mask plan to each pair, excluding the pair's words.
    pub mask_plans: bool,
    pub max_attempts: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            lambda: LAMBDA_DEFAULT,
            mu: crate::lm::DIRICHLET_MU_DEFAULT,
            pairs_per_doc: PAIRS_PER_DOC_DEFAULT,
            seed: 0,
            strategy: SamplingStrategy::default(),
            sampler_kind: SamplerKind::default(),
            mask_plans: false,
            max_attempts: MAX_ATTEMPTS_DEFAULT,
        }
    }
}

/// One emitted example: the labeled pair, plus a mask plan when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedExample {
    pub triple: TrainingTriple,
    pub mask_plan: Option<MaskPlan>,
}

/// Generates all pairs for one document. Each pair draws from its own
/// derived RNG stream; tie redraws stay inside that stream.
pub fn generate_for_doc(
    doc: &TokenizedDocument,
    collection: &CollectionModel,
    sv: &SamplingVocabulary,
    cfg: &GeneratorConfig,
) -> Result<Vec<GeneratedExample>> {
    let dm = DocumentModel::new(doc, cfg.mu, collection)?;
    let dist = match cfg.strategy {
        SamplingStrategy::DocLm => {
            Some(DocSamplingDistribution::new(&dm, sv, cfg.sampler_kind)?)
        }
        SamplingStrategy::Random => None,
    };
    let mut out = Vec::with_capacity(cfg.pairs_per_doc as usize);
    for pair_index in 0..cfg.pairs_per_doc {
        let mut rng = pair_rng(cfg.seed, &doc.id, pair_index);
        let mut triple = None;
        for _ in 0..cfg.max_attempts {
            let len = sample_length(cfg.lambda, &mut rng)?;
            let (s1, s2) = match &dist {
                Some(d) => sample_pair(d, len, &mut rng)?,
                None => random_baseline_pair(sv, len, &mut rng)?,
            };
            if let Some(t) = label_pair(&dm, s1, s2)? {
                triple = Some(t);
                break;
            }
        }
        let triple = triple.ok_or_else(|| Error::TieExhausted {
            doc_id: doc.id.clone(),
            attempts: cfg.max_attempts,
        })?;
        let mask_plan = if cfg.mask_plans {
            let excluded: HashSet<TermId> = triple
                .pos_words
                .iter()
                .chain(&triple.neg_words)
                .copied()
                .collect();
            Some(plan_masks(doc, &excluded, collection.vocab_size(), &mut rng)?)
        } else {
            None
        };
        out.push(GeneratedExample { triple, mask_plan });
    }
    Ok(out)
}

/// Generates pairs for the whole corpus, processing documents in parallel
/// batches but delivering examples to the sink in corpus order: all pairs for
/// document 0 in pair order, then document 1, and so on.
pub fn generate_for_corpus<F>(
    corpus: &[TokenizedDocument],
    collection: &CollectionModel,
    sv: &SamplingVocabulary,
    cfg: &GeneratorConfig,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(GeneratedExample) -> Result<()>,
{
    const BATCH: usize = 256;
    for chunk in corpus.chunks(BATCH) {
        let batches: Vec<Result<Vec<GeneratedExample>>> = chunk
            .par_iter()
            .map(|doc| generate_for_doc(doc, collection, sv, cfg))
            .collect();
        for batch in batches {
            for example in batch? {
                sink(example)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{tokenize, RawDocument, TokenizationPolicy};
    use crate::lm::build_collection_model;
    use crate::vocab::VocabularyBuilder;

    fn corpus_from(texts: &[&str]) -> (Vec<TokenizedDocument>, Vocabulary) {
        let mut b = VocabularyBuilder::new();
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                tokenize(
                    &RawDocument {
                        id: format!("d{i}"),
                        text: (*text).to_owned(),
                    },
                    &TokenizationPolicy::default(),
                    &mut b,
                )
                .unwrap()
            })
            .collect();
        (docs, b.freeze())
    }

    #[test]
    fn stoplist_normalizes_and_digests_stably() {
        let a = Stoplist::from_terms(["The", " and ", "of"]);
        let b = Stoplist::from_terms(["of", "and", "the"]);
        assert!(a.contains("the"));
        assert!(a.contains("and"));
        assert_eq!(a.len(), 3);
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), Stoplist::empty().digest());
    }

    #[test]
    fn sampling_vocab_filters_stopwords_and_rare_terms() {
        // "a" x6, "b" x3, "c" x2, "d" x1 over 12 tokens.
        let (docs, vocab) = corpus_from(&["a a a b b c", "a a a b c d"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let stoplist = Stoplist::from_terms(["a"]);
        let sv = SamplingVocabulary::build(&vocab, &cm, &stoplist, 2, 0.5).unwrap();
        let kept: Vec<&str> = sv
            .entries()
            .iter()
            .map(|&(id, _)| vocab.term(id).unwrap())
            .collect();
        assert_eq!(kept, vec!["b", "c"]); // "a" stopped, "d" under min count
        assert_eq!(sv.min_count(), 2);
        assert_eq!(sv.stoplist_digest(), stoplist.digest());
    }

    #[test]
    fn keep_weight_is_one_at_the_threshold_frequency() {
        // "d" occurs once in 12 tokens: f = 1/12. Setting t = 1/12 gives
        // keep = min(1, sqrt(1) + 1) = 1.
        let (docs, vocab) = corpus_from(&["a a a b b c", "a a a b c d"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv =
            SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 1.0 / 12.0).unwrap();
        let d = vocab.id("d").unwrap();
        let keep_d = sv.entries().iter().find(|&&(id, _)| id == d).unwrap().1;
        assert_eq!(keep_d, 1.0);
        // "a" has f = 0.5: keep = sqrt(t/f) + t/f with t = 1/12.
        let a = vocab.id("a").unwrap();
        let keep_a = sv.entries().iter().find(|&&(id, _)| id == a).unwrap().1;
        let t = 1.0 / 12.0;
        let expected = (t / 0.5f64).sqrt() + t / 0.5;
        assert!((keep_a - expected).abs() < 1e-15);
        assert!(keep_a < 1.0);
    }

    #[test]
    fn sampling_vocab_rejects_filtering_everything() {
        let (docs, vocab) = corpus_from(&["a b", "b a"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let err =
            SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1000, 1e-5).unwrap_err();
        assert!(matches!(err, Error::EmptySamplingVocabulary));
    }

    #[test]
    fn pair_rng_streams_are_distinct_and_reproducible() {
        let mut a = pair_rng(7, "doc-1", 0);
        let mut b = pair_rng(7, "doc-1", 0);
        let mut c = pair_rng(7, "doc-1", 1);
        let mut d = pair_rng(7, "doc-2", 0);
        let mut e = pair_rng(8, "doc-1", 0);
        let xs: Vec<u64> = (0..8).map(|_| a.random()).collect();
        assert_eq!(xs, (0..8).map(|_| b.random()).collect::<Vec<u64>>());
        assert_ne!(xs, (0..8).map(|_| c.random()).collect::<Vec<u64>>());
        assert_ne!(xs, (0..8).map(|_| d.random()).collect::<Vec<u64>>());
        assert_ne!(xs, (0..8).map(|_| e.random()).collect::<Vec<u64>>());
    }

    #[test]
    fn sample_length_never_returns_zero() {
        let mut rng = pair_rng(0, "len", 0);
        for _ in 0..20_000 {
            assert!(sample_length(3.0, &mut rng).unwrap() >= 1);
        }
    }

    #[test]
    fn sample_length_mean_matches_truncated_poisson() {
        let mut rng = pair_rng(1, "len", 0);
        let n = 50_000;
        let sum: u64 = (0..n)
            .map(|_| u64::from(sample_length(3.0, &mut rng).unwrap()))
            .sum();
        let mean = sum as f64 / n as f64;
        let expected = 3.0 / (1.0 - (-3.0f64).exp());
        assert!((mean - expected).abs() < 0.03, "mean = {mean}, want {expected}");
    }

    #[test]
    fn sample_length_rejects_bad_lambda() {
        let mut rng = pair_rng(0, "len", 0);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                sample_length(bad, &mut rng),
                Err(Error::InvalidParameter { name: "lambda", .. })
            ));
        }
    }

    // Weight oracle: document [a a a b c c c c c c] under mu = 0 has
    // P(a|D) = 0.3 and P(b|D) = 0.1. Restricted to {a, b} with keep = 1 the
    // normalized weights are 0.75 / 0.25; damping a by keep = 0.5 shifts
    // them to 0.6 / 0.4.
    #[test]
    fn doc_distribution_renormalizes_hand_values() {
        let (docs, vocab) = corpus_from(&["a a a b c c c c c c", "a b c"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let dm = DocumentModel::new(&docs[0], 0.0, &cm).unwrap();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();

        let sv = SamplingVocabulary::from_entries(
            vec![(a, 1.0), (b, 1.0)],
            1,
            1e-5,
            "test".to_owned(),
        )
        .unwrap();
        let dist = DocSamplingDistribution::new(&dm, &sv, SamplerKind::Cumulative).unwrap();
        assert_eq!(dist.support(), &[a, b]);
        assert!((dist.weights()[0] - 0.75).abs() < 1e-12);
        assert!((dist.weights()[1] - 0.25).abs() < 1e-12);

        let sv = SamplingVocabulary::from_entries(
            vec![(a, 0.5), (b, 1.0)],
            1,
            1e-5,
            "test".to_owned(),
        )
        .unwrap();
        let dist = DocSamplingDistribution::new(&dm, &sv, SamplerKind::Cumulative).unwrap();
        assert!((dist.weights()[0] - 0.6).abs() < 1e-12);
        assert!((dist.weights()[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn doc_distribution_weights_sum_to_one() {
        let (docs, vocab) = corpus_from(&[
            "a a a b c c c d e f g h",
            "b d f h a c e g a b c d",
        ]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        for mu in [0.0, 15.0, 2000.0] {
            let dm = DocumentModel::new(&docs[0], mu, &cm).unwrap();
            let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.2).unwrap();
            let dist = DocSamplingDistribution::new(&dm, &sv, SamplerKind::Cumulative).unwrap();
            let sum: f64 = dist.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "mu = {mu}: sum = {sum}");
        }
    }

    #[test]
    fn unsmoothed_distribution_drops_absent_terms() {
        let (docs, vocab) = corpus_from(&["a a b", "c c c"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let dm = DocumentModel::new(&docs[0], 0.0, &cm).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.5).unwrap();
        let dist = DocSamplingDistribution::new(&dm, &sv, SamplerKind::Cumulative).unwrap();
        let c = vocab.id("c").unwrap();
        assert!(!dist.support().contains(&c));
    }

    #[test]
    fn unsmoothed_distribution_errors_when_support_vanishes() {
        let (docs, vocab) = corpus_from(&["a a b", "c c c"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let dm = DocumentModel::new(&docs[1], 0.0, &cm).unwrap();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        let sv = SamplingVocabulary::from_entries(
            vec![(a, 1.0), (b, 1.0)],
            1,
            1e-5,
            "test".to_owned(),
        )
        .unwrap();
        let err = DocSamplingDistribution::new(&dm, &sv, SamplerKind::Cumulative).unwrap_err();
        assert!(matches!(err, Error::EmptySupport { doc_id } if doc_id == "d1"));
    }

    #[test]
    fn sample_pair_draws_matched_lengths_with_replacement() {
        let (docs, vocab) = corpus_from(&["a a a a b", "a b a b"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let dm = DocumentModel::new(&docs[0], 10.0, &cm).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let dist = DocSamplingDistribution::new(&dm, &sv, SamplerKind::Cumulative).unwrap();
        let mut rng = pair_rng(3, "d0", 0);
        let (s1, s2) = sample_pair(&dist, 6, &mut rng).unwrap();
        assert_eq!(s1.len(), 6);
        assert_eq!(s2.len(), 6);
        // Two distinct terms, six draws: some term must repeat.
        let distinct: HashSet<_> = s1.iter().collect();
        assert!(distinct.len() < s1.len());
        assert!(matches!(
            sample_pair(&dist, 0, &mut rng),
            Err(Error::InvalidParameter { name: "len", .. })
        ));
    }

    #[test]
    fn label_pair_orders_by_score_and_reports_ties() {
        let (docs, vocab) = corpus_from(&["a a a a a a a b", "a b"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let dm = DocumentModel::new(&docs[0], 0.0, &cm).unwrap();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();

        let t = label_pair(&dm, vec![b, b], vec![a, a]).unwrap().unwrap();
        assert_eq!(t.pos_words, vec![a, a]);
        assert_eq!(t.neg_words, vec![b, b]);
        assert!(t.pos_score > t.neg_score + TIE_EPS);
        assert_eq!(t.length, 2);

        // Identical multisets in different orders are a tie.
        assert!(label_pair(&dm, vec![a, b], vec![b, a]).unwrap().is_none());
    }

    #[test]
    fn label_pair_treats_equal_scores_as_ties() {
        // Both terms occur twice, so their smoothed probabilities coincide
        // and distinct multisets can still score identically.
        let (docs, vocab) = corpus_from(&["a b a b"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let dm = DocumentModel::new(&docs[0], 5.0, &cm).unwrap();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        assert!(label_pair(&dm, vec![a], vec![b]).unwrap().is_none());
    }

    fn toy_setup() -> (Vec<TokenizedDocument>, Vocabulary) {
        corpus_from(&[
            "cat cat cat dog bird bird fish",
            "dog dog dog dog cat fish fish fish",
            "bird bird bird bird bird cat cat dog",
            "fish cat dog bird fish cat dog bird",
        ])
    }

    #[test]
    fn generate_for_doc_emits_exactly_pairs_per_doc() {
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let cfg = GeneratorConfig {
            mu: 10.0,
            pairs_per_doc: 7,
            ..Default::default()
        };
        let out = generate_for_doc(&docs[0], &cm, &sv, &cfg).unwrap();
        assert_eq!(out.len(), 7);
        for ex in &out {
            let t = &ex.triple;
            assert_eq!(t.doc_id, "d0");
            assert_eq!(t.pos_words.len(), t.length as usize);
            assert_eq!(t.neg_words.len(), t.length as usize);
            assert!(t.pos_score > t.neg_score);
            for w in t.pos_words.iter().chain(&t.neg_words) {
                assert!(sv.contains(*w));
            }
        }
    }

    #[test]
    fn generate_for_doc_is_reproducible() {
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let cfg = GeneratorConfig {
            mu: 10.0,
            seed: 99,
            mask_plans: true,
            ..Default::default()
        };
        let a = generate_for_doc(&docs[1], &cm, &sv, &cfg).unwrap();
        let b = generate_for_doc(&docs[1], &cm, &sv, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mask_plans_exclude_the_pair_words() {
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let cfg = GeneratorConfig {
            mu: 10.0,
            mask_plans: true,
            ..Default::default()
        };
        for doc in &docs {
            for ex in generate_for_doc(doc, &cm, &sv, &cfg).unwrap() {
                let plan = ex.mask_plan.expect("mask plans requested");
                let excluded: HashSet<TermId> = ex
                    .triple
                    .pos_words
                    .iter()
                    .chain(&ex.triple.neg_words)
                    .copied()
                    .collect();
                for e in &plan.entries {
                    assert!(!excluded.contains(&doc.tokens[e.pos as usize]));
                }
            }
        }
    }

    #[test]
    fn degenerate_single_term_support_exhausts_ties() {
        let (docs, vocab) = corpus_from(&["a a a b"]);
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let a = vocab.id("a").unwrap();
        let sv = SamplingVocabulary::from_entries(vec![(a, 1.0)], 1, 1e-5, "t".to_owned())
            .unwrap();
        let cfg = GeneratorConfig {
            mu: 10.0,
            pairs_per_doc: 1,
            ..Default::default()
        };
        let err = generate_for_doc(&docs[0], &cm, &sv, &cfg).unwrap_err();
        assert!(matches!(err, Error::TieExhausted { doc_id, attempts: 100 } if doc_id == "d0"));
    }

    #[test]
    fn generate_for_corpus_orders_by_document_then_pair() {
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let cfg = GeneratorConfig {
            mu: 10.0,
            pairs_per_doc: 3,
            ..Default::default()
        };
        let mut seen = Vec::new();
        generate_for_corpus(&docs, &cm, &sv, &cfg, |ex| {
            seen.push(ex.triple.doc_id.clone());
            Ok(())
        })
        .unwrap();
        let expected: Vec<String> = docs
            .iter()
            .flat_map(|d| std::iter::repeat_n(d.id.clone(), 3))
            .collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn generation_is_independent_of_thread_count() {
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let cfg = GeneratorConfig {
            mu: 10.0,
            seed: 5,
            mask_plans: true,
            ..Default::default()
        };
        let run = |threads: usize| -> Vec<GeneratedExample> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let mut out = Vec::new();
                generate_for_corpus(&docs, &cm, &sv, &cfg, |ex| {
                    out.push(ex);
                    Ok(())
                })
                .unwrap();
                out
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn doclm_strategy_scores_higher_than_random_on_average() {
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let mean_pos = |strategy: SamplingStrategy| -> f64 {
            let cfg = GeneratorConfig {
                mu: 10.0,
                pairs_per_doc: 50,
                strategy,
                ..Default::default()
            };
            let mut sum = 0.0;
            let mut n = 0usize;
            for doc in &docs {
                for ex in generate_for_doc(doc, &cm, &sv, &cfg).unwrap() {
                    sum += ex.triple.pos_score / ex.triple.length as f64;
                    n += 1;
                }
            }
            sum / n as f64
        };
        assert!(mean_pos(SamplingStrategy::DocLm) > mean_pos(SamplingStrategy::Random));
    }

    #[test]
    fn random_baseline_is_uniform_over_the_sampling_vocabulary() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let (docs, vocab) = toy_setup();
        let cm = build_collection_model(&docs, &vocab).unwrap();
        let sv = SamplingVocabulary::build(&vocab, &cm, &Stoplist::empty(), 1, 0.9).unwrap();
        let k = sv.len();
        let mut counts = vec![0u64; vocab.len()];
        let mut rng = pair_rng(17, "uniformity", 0);
        let draws = 100_000u64;
        for _ in 0..draws / 2 {
            let (s1, s2) = random_baseline_pair(&sv, 1, &mut rng).unwrap();
            counts[s1[0].index()] += 1;
            counts[s2[0].index()] += 1;
        }
        let expected = draws as f64 / k as f64;
        let chi2: f64 = sv
            .entries()
            .iter()
            .map(|&(id, _)| {
                let diff = counts[id.index()] as f64 - expected;
                diff * diff / expected
            })
            .sum();
        let dist = ChiSquared::new((k - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
    }
}
