//! Inverted-index retrieval with query-likelihood and BM25 scoring, plus
//! TREC-style run lists and rerank support.
//!
//! Query-likelihood scoring reuses the exact smoothed-probability formula of
//! the language-model module, folded over query tokens in order, so index
//! scoring and document-model scoring agree bit for bit. BM25 uses the
//! plus-one idf `ln((N - df + 0.5) / (df + 0.5) + 1)`, which keeps every
//! contribution non-negative.
//!
//! Ranking order everywhere: score descending, ties by ascending document id.

use crate::error::{Error, Result};
use crate::ingest::TokenizedDocument;
use crate::lm::{dirichlet_term_prob, CollectionModel};
use crate::vocab::{TermId, Vocabulary};
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

pub const BM25_K1_DEFAULT: f64 = 0.9;
pub const BM25_B_DEFAULT: f64 = 0.4;
/// First-stage depth used when reranking with external scores.
pub const RERANK_DEPTH_DEFAULT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Postings plus enough document and term metadata to score queries without
/// the original corpus.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    doc_lookup: HashMap<String, u32>,
    terms: Vec<String>,
    term_lookup: HashMap<String, TermId>,
    postings: Vec<Vec<Posting>>,
    total_tokens: u64,
}

impl InvertedIndex {
    pub fn build(corpus: &[TokenizedDocument], vocab: &Vocabulary) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lens = Vec::with_capacity(corpus.len());
        let mut doc_lookup = HashMap::with_capacity(corpus.len());
        let mut postings: Vec<Vec<Posting>> = vec![Vec::new(); vocab.len()];
        let mut total_tokens = 0u64;
        for (ord, doc) in corpus.iter().enumerate() {
            let ord = ord as u32;
            if doc_lookup.insert(doc.id.clone(), ord).is_some() {
                return Err(Error::DuplicateDoc { id: doc.id.clone() });
            }
            doc_ids.push(doc.id.clone());
            doc_lens.push(doc.len() as u32);
            total_tokens += doc.len() as u64;
            let mut counts: HashMap<TermId, u32> = HashMap::new();
            for &t in &doc.tokens {
                if t.index() >= vocab.len() {
                    return Err(Error::UnknownTerm {
                        id: t,
                        vocab_size: vocab.len(),
                    });
                }
                *counts.entry(t).or_insert(0) += 1;
            }
            let mut counts: Vec<(TermId, u32)> = counts.into_iter().collect();
            counts.sort_unstable_by_key(|&(t, _)| t);
            for (t, tf) in counts {
                postings[t.index()].push(Posting { doc: ord, tf });
            }
        }
        if let Some(pos) = postings.iter().position(Vec::is_empty) {
            return Err(Error::ZeroCountTerm {
                term: vocab
                    .term(TermId(pos as u32))
                    .unwrap_or("<unknown>")
                    .to_owned(),
            });
        }
        let terms: Vec<String> = vocab.iter().map(|(_, t, _)| t.to_owned()).collect();
        let term_lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), TermId(i as u32)))
            .collect();
        Ok(Self {
            doc_ids,
            doc_lens,
            doc_lookup,
            terms,
            term_lookup,
            postings,
            total_tokens,
        })
    }

    /// Rebuilds an index from its serialized parts, re-validating the
    /// invariants the builder guarantees.
    pub fn from_parts(
        docs: Vec<(String, u32)>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if terms.len() != postings.len() {
            return Err(Error::InconsistentArtifacts(format!(
                "{} terms but {} postings lists",
                terms.len(),
                postings.len()
            )));
        }
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lens = Vec::with_capacity(docs.len());
        let mut doc_lookup = HashMap::with_capacity(docs.len());
        for (id, len) in docs {
            if len == 0 {
                return Err(Error::EmptyDocument { id });
            }
            let ord = doc_ids.len() as u32;
            if doc_lookup.insert(id.clone(), ord).is_some() {
                return Err(Error::DuplicateDoc { id });
            }
            doc_ids.push(id);
            doc_lens.push(len);
        }
        let mut tokens_in_postings = 0u64;
        for (i, list) in postings.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::ZeroCountTerm {
                    term: terms[i].clone(),
                });
            }
            for pair in list.windows(2) {
                if pair[0].doc >= pair[1].doc {
                    return Err(Error::InconsistentArtifacts(format!(
                        "postings for term {:?} are not sorted by document",
                        terms[i]
                    )));
                }
            }
            for p in list {
                if p.doc as usize >= doc_ids.len() || p.tf == 0 {
                    return Err(Error::InconsistentArtifacts(format!(
                        "bad posting for term {:?}",
                        terms[i]
                    )));
                }
                tokens_in_postings += u64::from(p.tf);
            }
        }
        let total_tokens: u64 = doc_lens.iter().map(|&l| u64::from(l)).sum();
        if tokens_in_postings != total_tokens {
            return Err(Error::InconsistentArtifacts(format!(
                "postings hold {tokens_in_postings} tokens but documents hold {total_tokens}"
            )));
        }
        let mut term_lookup = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if term_lookup.insert(t.clone(), TermId(i as u32)).is_some() {
                return Err(Error::InconsistentArtifacts(format!(
                    "term {t:?} appears twice in the index"
                )));
            }
        }
        Ok(Self {
            doc_ids,
            doc_lens,
            doc_lookup,
            terms,
            term_lookup,
            postings,
            total_tokens,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn avgdl(&self) -> f64 {
        self.total_tokens as f64 / self.num_docs() as f64
    }

    pub fn doc_id(&self, ord: u32) -> Option<&str> {
        self.doc_ids.get(ord as usize).map(String::as_str)
    }

    pub fn doc_len(&self, ord: u32) -> Option<u32> {
        self.doc_lens.get(ord as usize).copied()
    }

    pub fn doc_ordinal(&self, id: &str) -> Option<u32> {
        self.doc_lookup.get(id).copied()
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.term_lookup.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id.index()).map(String::as_str)
    }

    pub fn postings(&self, id: TermId) -> Option<&[Posting]> {
        self.postings.get(id.index()).map(Vec::as_slice)
    }

    pub fn df(&self, id: TermId) -> usize {
        self.postings.get(id.index()).map_or(0, Vec::len)
    }

    /// Term frequency of `id` in document `ord`, zero when absent.
    pub fn tf(&self, id: TermId, ord: u32) -> u32 {
        match self.postings.get(id.index()) {
            Some(list) => list
                .binary_search_by_key(&ord, |p| p.doc)
                .map(|i| list[i].tf)
                .unwrap_or(0),
            None => 0,
        }
    }

    /// Collection statistics recomputed from the postings. Counts are the
    /// same integers the corpus would yield, so the probabilities are
    /// bit-identical to a model built from the documents.
    pub fn collection_model(&self) -> Result<CollectionModel> {
        let counts: Vec<u64> = self
            .postings
            .iter()
            .map(|list| list.iter().map(|p| u64::from(p.tf)).sum())
            .collect();
        CollectionModel::from_counts(counts)
    }

    fn check_ordinal(&self, ord: u32) -> Result<()> {
        if ord as usize >= self.num_docs() {
            return Err(Error::InconsistentArtifacts(format!(
                "document ordinal {ord} out of range ({} documents)",
                self.num_docs()
            )));
        }
        Ok(())
    }
}

/// Smoothed log query likelihood of `query` against one document, folded per
/// token in query order. Empty queries score zero (the empty product).
pub fn ql_score(
    index: &InvertedIndex,
    collection: &CollectionModel,
    query: &[TermId],
    doc: u32,
    mu: f64,
) -> Result<f64> {
    index.check_ordinal(doc)?;
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: mu,
        });
    }
    let dl = index.doc_len(doc).expect("ordinal checked");
    let mut acc = 0.0;
    for &t in query {
        let p_c = collection.prob(t)?;
        acc += dirichlet_term_prob(index.tf(t, doc), dl, mu, p_c).ln();
    }
    Ok(acc)
}

/// Plus-one idf, non-negative for every df <= N.
pub fn bm25_idf(num_docs: usize, df: usize) -> f64 {
    ((num_docs as f64 - df as f64 + 0.5) / (df as f64 + 0.5) + 1.0).ln()
}

/// Okapi BM25 over query tokens; a repeated query term contributes once per
/// occurrence. Terms absent from the document contribute zero, and `b = 0`
/// switches document-length normalization off.
pub fn bm25_score(
    index: &InvertedIndex,
    query: &[TermId],
    doc: u32,
    k1: f64,
    b: f64,
) -> Result<f64> {
    index.check_ordinal(doc)?;
    for (name, v) in [("k1", k1), ("b", b)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    let dl = f64::from(index.doc_len(doc).expect("ordinal checked"));
    let avgdl = index.avgdl();
    let mut acc = 0.0;
    for &t in query {
        if t.index() >= index.num_terms() {
            return Err(Error::UnknownTerm {
                id: t,
                vocab_size: index.num_terms(),
            });
        }
        let tf = f64::from(index.tf(t, doc));
        if tf == 0.0 {
            continue;
        }
        let idf = bm25_idf(index.num_docs(), index.df(t));
        acc += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub score: f64,
}

/// A ranking for one query: entries sorted by score descending, ties broken
/// by ascending document id, no duplicate documents, all scores finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RunList {
    pub query_id: String,
    pub tag: String,
    entries: Vec<RunEntry>,
}

impl RunList {
    pub fn new(query_id: String, tag: String, mut entries: Vec<RunEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !e.score.is_finite() {
                return Err(Error::NonFiniteScore {
                    name: "run score",
                    value: e.score,
                });
            }
            if !seen.insert(e.doc_id.clone()) {
                return Err(Error::DuplicateDoc {
                    id: e.doc_id.clone(),
                });
            }
        }
        entries.sort_unstable_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        Ok(Self {
            query_id,
            tag,
            entries,
        })
    }

    pub fn entries(&self) -> &[RunEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// What to score with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoringMethod {
    QueryLikelihood { mu: f64 },
    Bm25 { k1: f64, b: f64 },
}

/// A ranked result plus how many query tokens were dropped for being outside
/// the index vocabulary.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub run: RunList,
    pub skipped_terms: u32,
}

/// Maps query tokens to term ids, counting tokens the index has never seen.
pub fn resolve_query(index: &InvertedIndex, tokens: &[String]) -> (Vec<TermId>, u32) {
    let mut ids = Vec::with_capacity(tokens.len());
    let mut skipped = 0u32;
    for t in tokens {
        match index.term_id(t) {
            Some(id) => ids.push(id),
            None => skipped += 1,
        }
    }
    (ids, skipped)
}

/// Scores every document and keeps the top `k` under the canonical order.
/// This is exhaustive evaluation, not candidate pruning, so smoothed scores
/// for documents sharing no term with the query are ranked too.
pub fn search(
    index: &InvertedIndex,
    collection: &CollectionModel,
    query_id: &str,
    query_tokens: &[String],
    method: ScoringMethod,
    k: usize,
    tag: &str,
) -> Result<SearchOutcome> {
    if query_tokens.is_empty() {
        return Ok(SearchOutcome {
            run: RunList::new(query_id.to_owned(), tag.to_owned(), Vec::new())?,
            skipped_terms: 0,
        });
    }
    let (ids, skipped_terms) = resolve_query(index, query_tokens);
    let mut scored: Vec<(u32, f64)> = Vec::with_capacity(index.num_docs());
    for ord in 0..index.num_docs() as u32 {
        let score = match method {
            ScoringMethod::QueryLikelihood { mu } => ql_score(index, collection, &ids, ord, mu)?,
            ScoringMethod::Bm25 { k1, b } => bm25_score(index, &ids, ord, k1, b)?,
        };
        scored.push((ord, score));
    }
    scored.sort_unstable_by(|a, b| {
        b.1.total_cmp(&a.1).then_with(|| {
            index
                .doc_id(a.0)
                .expect("ordinal in range")
                .cmp(index.doc_id(b.0).expect("ordinal in range"))
        })
    });
    scored.truncate(k);
    let entries = scored
        .into_iter()
        .map(|(ord, score)| RunEntry {
            doc_id: index.doc_id(ord).expect("ordinal in range").to_owned(),
            score,
        })
        .collect();
    Ok(SearchOutcome {
        run: RunList::new(query_id.to_owned(), tag.to_owned(), entries)?,
        skipped_terms,
    })
}

/// External scores keyed by (query id, doc id).
pub type ExternalScores = HashMap<(String, String), f64>;

/// Reorders a run by externally supplied scores. The document set is
/// preserved exactly; every entry must have a score.
pub fn rerank_from_scores(run: &RunList, scores: &ExternalScores) -> Result<RunList> {
    let missing: Vec<&RunEntry> = run
        .entries()
        .iter()
        .filter(|e| !scores.contains_key(&(run.query_id.clone(), e.doc_id.clone())))
        .collect();
    if let Some(first) = missing.first() {
        return Err(Error::MissingExternalScore {
            count: missing.len(),
            qid: run.query_id.clone(),
            docid: first.doc_id.clone(),
        });
    }
    let entries = run
        .entries()
        .iter()
        .map(|e| RunEntry {
            doc_id: e.doc_id.clone(),
            score: scores[&(run.query_id.clone(), e.doc_id.clone())],
        })
        .collect();
    RunList::new(run.query_id.clone(), run.tag.clone(), entries)
}

/// Writes runs in the six-column format `qid Q0 docid rank score tag`, ranks
/// from 1. Scores print in shortest round-trip form so reading the file back
/// reproduces them exactly.
pub fn write_run_file(mut w: impl Write, runs: &[RunList]) -> Result<()> {
    for run in runs {
        for (i, e) in run.entries().iter().enumerate() {
            writeln!(
                w,
                "{} Q0 {} {} {} {}",
                run.query_id,
                e.doc_id,
                i + 1,
                e.score,
                run.tag
            )?;
        }
    }
    Ok(())
}

/// Reads a six-column run file, grouping consecutive lines by query id in
/// first-appearance order. Stored ranks are ignored; the canonical order is
/// recomputed from the scores.
pub fn read_run_file(r: impl BufRead) -> Result<Vec<RunList>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (String, Vec<RunEntry>)> = HashMap::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::MalformedLine {
                line: line_no,
                message: format!("expected 6 run fields, found {}", fields.len()),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| Error::MalformedLine {
            line: line_no,
            message: format!("bad score {:?}", fields[4]),
        })?;
        let (_, entries) = groups
            .entry(fields[0].to_owned())
            .or_insert_with(|| {
                order.push(fields[0].to_owned());
                (fields[5].to_owned(), Vec::new())
            });
        entries.push(RunEntry {
            doc_id: fields[2].to_owned(),
            score,
        });
    }
    order
        .into_iter()
        .map(|qid| {
            let (tag, entries) = groups.remove(&qid).expect("group exists");
            RunList::new(qid, tag, entries)
        })
        .collect()
}

/// Reads a tab-separated score file: `qid<TAB>docid<TAB>score`.
pub fn read_score_file(r: impl BufRead) -> Result<ExternalScores> {
    let mut scores = ExternalScores::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedLine {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let score: f64 = fields[2].parse().map_err(|_| Error::MalformedLine {
            line: line_no,
            message: format!("bad score {:?}", fields[2]),
        })?;
        if !score.is_finite() {
            return Err(Error::MalformedLine {
                line: line_no,
                message: format!("non-finite score {score}"),
            });
        }
        if scores
            .insert((fields[0].to_owned(), fields[1].to_owned()), score)
            .is_some()
        {
            return Err(Error::MalformedLine {
                line: line_no,
                message: format!("duplicate score for ({}, {})", fields[0], fields[1]),
            });
        }
    }
    Ok(scores)
}
