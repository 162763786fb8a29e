//! Subcommand implementations. Each is a pure function of its input files
//! and resolved options: data goes to the named output files, progress and
//! warnings go to standard error, and nothing depends on wall-clock time or
//! thread scheduling.

use anyhow::{bail, Context, Result};
use repwords::eval::{evaluate_runs, Metric, Qrels};
use repwords::files::{
    self, manifest_name, read_corpus_dir, read_index_file, triple_record, Manifest, TriplesWriter,
};
use repwords::ingest::{
    ingest_jsonl, ingest_text_dir, tokenize, tokenize_words, TokenizationPolicy,
    TokenizedDocument,
};
use repwords::lm::build_collection_model;
use repwords::retrieval::{
    read_run_file, read_score_file, rerank_from_scores, search, write_run_file, InvertedIndex,
    ScoringMethod,
};
use repwords::sampler::{
    generate_for_corpus, GeneratorConfig, SamplingVocabulary, Stoplist,
};
use repwords::vocab::VocabularyBuilder;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Provenance value for artifacts whose lineage starts outside this tool,
/// such as run files produced elsewhere.
const EXTERNAL_CHECKSUM: &str = "external";

fn create_parent_dirs(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    Ok(())
}

/// Run files and reports are plain tabular formats, so their manifest lives
/// in a JSON sidecar next to the data file.
fn write_sidecar_manifest(data_path: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let side = data_path.with_file_name(format!(
        "{}.manifest.json",
        data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    ));
    let mut w = BufWriter::new(File::create(&side)?);
    writeln!(w, "{}", serde_json::to_string(manifest)?)?;
    w.flush()?;
    Ok(side)
}

fn read_sidecar_manifest(data_path: &Path) -> Result<Option<Manifest>> {
    let side = data_path.with_file_name(format!(
        "{}.manifest.json",
        data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    ));
    if !side.exists() {
        return Ok(None);
    }
    let mut text = String::new();
    BufReader::new(File::open(&side)?).read_to_string(&mut text)?;
    let manifest = serde_json::from_str(text.trim())
        .with_context(|| format!("parsing sidecar manifest {}", side.display()))?;
    Ok(Some(manifest))
}

fn policy_params(policy: &TokenizationPolicy) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("lowercase".to_owned(), policy.lowercase.to_string()),
        ("max_tokens".to_owned(), policy.max_tokens.to_string()),
    ])
}

fn policy_from_manifest(manifest: &Manifest) -> Result<TokenizationPolicy> {
    let lowercase = manifest
        .param("lowercase")
        .context("manifest lacks the lowercase parameter")?
        .parse()
        .context("bad lowercase parameter")?;
    let max_tokens = manifest
        .param("max_tokens")
        .context("manifest lacks the max_tokens parameter")?
        .parse()
        .context("bad max_tokens parameter")?;
    Ok(TokenizationPolicy {
        lowercase,
        max_tokens,
    })
}

/// Tokenizes a JSONL corpus file or a directory of text files into a model
/// directory holding tokens, vocabulary, and collection statistics.
pub fn cmd_build(corpus: &Path, out: &Path, max_tokens: usize) -> Result<()> {
    let policy = TokenizationPolicy {
        lowercase: true,
        max_tokens,
    };
    let mut builder = VocabularyBuilder::new();
    let mut docs: Vec<TokenizedDocument> = Vec::new();
    let raw_docs: Box<dyn Iterator<Item = repwords::error::Result<repwords::ingest::RawDocument>>> =
        if corpus.is_dir() {
            Box::new(ingest_text_dir(corpus)?)
        } else {
            Box::new(ingest_jsonl(corpus)?)
        };
    for raw in raw_docs {
        let raw = raw.with_context(|| format!("reading corpus {}", corpus.display()))?;
        docs.push(tokenize(&raw, &policy, &mut builder)?);
    }
    let vocab = builder.freeze();
    let collection = build_collection_model(&docs, &vocab)?;
    std::fs::create_dir_all(out)?;
    let checksum = files::write_corpus_dir(
        out,
        &docs,
        &vocab,
        &collection,
        vec![manifest_name(corpus)],
        policy_params(&policy),
    )?;
    eprintln!(
        "built {} documents, {} terms, {} tokens, checksum {checksum}",
        docs.len(),
        vocab.len(),
        collection.total_tokens()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub struct SampleOptions {
    pub lambda: f64,
    pub mu: f64,
    pub pairs_per_doc: u32,
    pub min_count: u64,
    pub subsample: f64,
    pub stoplist: Option<PathBuf>,
    pub seed: u64,
    pub strategy: repwords::sampler::SamplingStrategy,
    pub sampler: repwords::weighted::SamplerKind,
    pub mask_plans: bool,
}

/// Draws labeled word-set pairs from every document in a model directory and
/// writes them as one triples file.
pub fn cmd_sample(model_dir: &Path, out: &Path, opts: &SampleOptions) -> Result<()> {
    let bundle = read_corpus_dir(model_dir)
        .with_context(|| format!("reading model directory {}", model_dir.display()))?;
    let stoplist = match &opts.stoplist {
        Some(path) => Stoplist::from_path(path)
            .with_context(|| format!("reading stoplist {}", path.display()))?,
        None => Stoplist::empty(),
    };
    let sv = SamplingVocabulary::build(
        &bundle.vocab,
        &bundle.collection,
        &stoplist,
        opts.min_count,
        opts.subsample,
    )?;
    let cfg = GeneratorConfig {
        lambda: opts.lambda,
        mu: opts.mu,
        pairs_per_doc: opts.pairs_per_doc,
        seed: opts.seed,
        strategy: opts.strategy,
        sampler_kind: opts.sampler,
        mask_plans: opts.mask_plans,
        ..GeneratorConfig::default()
    };
    let params = BTreeMap::from([
        ("lambda".to_owned(), opts.lambda.to_string()),
        ("mu".to_owned(), opts.mu.to_string()),
        ("pairs_per_doc".to_owned(), opts.pairs_per_doc.to_string()),
        ("min_count".to_owned(), opts.min_count.to_string()),
        ("subsample_threshold".to_owned(), opts.subsample.to_string()),
        (
            "stoplist".to_owned(),
            opts.stoplist
                .as_deref()
                .map(manifest_name)
                .unwrap_or_else(|| "none".to_owned()),
        ),
        ("stoplist_digest".to_owned(), stoplist.digest().to_owned()),
        ("seed".to_owned(), opts.seed.to_string()),
        ("strategy".to_owned(), opts.strategy.to_string()),
        ("sampler".to_owned(), opts.sampler.to_string()),
        ("mask_plans".to_owned(), opts.mask_plans.to_string()),
        ("mask_base".to_owned(), "eligible".to_owned()),
    ]);
    let manifest = Manifest::new(
        files::STAGE_TRIPLES,
        bundle.checksum.clone(),
        vec![
            files::TOKENS_FILE.to_owned(),
            files::VOCAB_FILE.to_owned(),
            files::COLLECTION_FILE.to_owned(),
        ],
        vec![manifest_name(out)],
        params,
    );
    create_parent_dirs(out)?;
    let mut writer = TriplesWriter::create(out, &manifest)?;
    generate_for_corpus(&bundle.docs, &bundle.collection, &sv, &cfg, |example| {
        let record = triple_record(&example, &bundle.vocab)?;
        writer.write(&record)
    })?;
    let written = writer.finish()?;
    eprintln!(
        "sampled {written} pairs over {} documents ({} sampling terms)",
        bundle.docs.len(),
        sv.len()
    );
    Ok(())
}

/// Builds the inverted index for a model directory.
pub fn cmd_index(model_dir: &Path, out: &Path) -> Result<()> {
    let bundle = read_corpus_dir(model_dir)
        .with_context(|| format!("reading model directory {}", model_dir.display()))?;
    let index = InvertedIndex::build(&bundle.docs, &bundle.vocab)?;
    let mut params = BTreeMap::new();
    for key in ["lowercase", "max_tokens"] {
        if let Some(v) = bundle.manifest.param(key) {
            params.insert(key.to_owned(), v.to_owned());
        }
    }
    let manifest = Manifest::new(
        files::STAGE_INDEX,
        bundle.checksum.clone(),
        vec![files::TOKENS_FILE.to_owned(), files::VOCAB_FILE.to_owned()],
        vec![manifest_name(out)],
        params,
    );
    create_parent_dirs(out)?;
    files::write_index_file(out, &index, &manifest)?;
    eprintln!(
        "indexed {} documents, {} terms, {} tokens",
        index.num_docs(),
        index.num_terms(),
        index.total_tokens()
    );
    Ok(())
}

/// Reads a tab-separated queries file: `qid<TAB>query text`.
fn read_queries(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading queries {}", path.display()))?;
    let mut seen = std::collections::HashSet::new();
    let mut queries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((qid, query)) = line.split_once('\t') else {
            bail!("queries line {}: expected qid<TAB>query", i + 1);
        };
        let qid = qid.trim();
        if qid.is_empty() {
            bail!("queries line {}: empty query id", i + 1);
        }
        if !seen.insert(qid.to_owned()) {
            bail!("queries line {}: duplicate query id {qid:?}", i + 1);
        }
        queries.push((qid.to_owned(), query.to_owned()));
    }
    Ok(queries)
}

pub struct SearchOptions {
    pub method: ScoringMethod,
    pub k: usize,
    pub tag: String,
}

/// Scores every document for every query and writes a six-column run file
/// plus its sidecar manifest.
pub fn cmd_search(
    index_path: &Path,
    queries_path: &Path,
    out: &Path,
    opts: &SearchOptions,
) -> Result<()> {
    if opts.k == 0 {
        bail!("k must be at least 1");
    }
    let (index_manifest, index) = read_index_file(index_path)
        .with_context(|| format!("reading index {}", index_path.display()))?;
    let collection = index.collection_model()?;
    let policy = policy_from_manifest(&index_manifest)
        .with_context(|| format!("in index header {}", index_path.display()))?;
    let queries = read_queries(queries_path)?;
    let mut runs = Vec::with_capacity(queries.len());
    let mut total_skipped = 0u32;
    for (qid, text) in &queries {
        let tokens = tokenize_words(text, &policy);
        let outcome = search(
            &index,
            &collection,
            qid,
            &tokens,
            opts.method,
            opts.k,
            &opts.tag,
        )?;
        if outcome.skipped_terms > 0 {
            eprintln!(
                "query {qid}: skipped {} tokens outside the index vocabulary",
                outcome.skipped_terms
            );
            total_skipped += outcome.skipped_terms;
        }
        if outcome.run.is_empty() {
            eprintln!("query {qid}: empty result");
        }
        runs.push(outcome.run);
    }
    create_parent_dirs(out)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_run_file(&mut w, &runs)?;
    w.flush()?;
    let mut params = index_manifest.params.clone();
    params.insert("k".to_owned(), opts.k.to_string());
    params.insert("tag".to_owned(), opts.tag.clone());
    params.insert("queries".to_owned(), manifest_name(queries_path));
    match opts.method {
        ScoringMethod::QueryLikelihood { mu } => {
            params.insert("scorer".to_owned(), "ql".to_owned());
            params.insert("mu".to_owned(), mu.to_string());
        }
        ScoringMethod::Bm25 { k1, b } => {
            params.insert("scorer".to_owned(), "bm25".to_owned());
            params.insert("k1".to_owned(), k1.to_string());
            params.insert("b".to_owned(), b.to_string());
        }
    }
    let manifest = Manifest::new(
        "run",
        index_manifest.corpus_checksum.clone(),
        vec![manifest_name(index_path), manifest_name(queries_path)],
        vec![manifest_name(out)],
        params,
    );
    write_sidecar_manifest(out, &manifest)?;
    eprintln!(
        "searched {} queries ({} tokens skipped)",
        queries.len(),
        total_skipped
    );
    Ok(())
}

/// Reorders an existing run by externally supplied scores.
pub fn cmd_rerank(
    run_path: &Path,
    scores_path: &Path,
    out: &Path,
    tag: Option<&str>,
) -> Result<()> {
    let runs = read_run_file(BufReader::new(
        File::open(run_path).with_context(|| format!("opening run {}", run_path.display()))?,
    ))?;
    let scores = read_score_file(BufReader::new(File::open(scores_path).with_context(
        || format!("opening scores {}", scores_path.display()),
    )?))?;
    let mut reranked = Vec::with_capacity(runs.len());
    for run in &runs {
        let mut new_run = rerank_from_scores(run, &scores)?;
        if let Some(tag) = tag {
            new_run.tag = tag.to_owned();
        }
        reranked.push(new_run);
    }
    create_parent_dirs(out)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_run_file(&mut w, &reranked)?;
    w.flush()?;
    let corpus_checksum = read_sidecar_manifest(run_path)?
        .map(|m| m.corpus_checksum)
        .unwrap_or_else(|| EXTERNAL_CHECKSUM.to_owned());
    let mut params = BTreeMap::from([
        ("run".to_owned(), manifest_name(run_path)),
        ("scores".to_owned(), manifest_name(scores_path)),
    ]);
    if let Some(tag) = tag {
        params.insert("tag".to_owned(), tag.to_owned());
    }
    let manifest = Manifest::new(
        "run",
        corpus_checksum,
        vec![manifest_name(run_path), manifest_name(scores_path)],
        vec![manifest_name(out)],
        params,
    );
    write_sidecar_manifest(out, &manifest)?;
    eprintln!("reranked {} queries", reranked.len());
    Ok(())
}

/// Evaluates a run against qrels and writes a tab-separated metric report.
pub fn cmd_eval(run_path: &Path, qrels_path: &Path, metrics: &str, out: &Path) -> Result<()> {
    let runs = read_run_file(BufReader::new(
        File::open(run_path).with_context(|| format!("opening run {}", run_path.display()))?,
    ))?;
    let qrels = Qrels::parse(BufReader::new(File::open(qrels_path).with_context(
        || format!("opening qrels {}", qrels_path.display()),
    )?))?;
    let parsed: Vec<Metric> = metrics
        .split(',')
        .map(|m| m.parse())
        .collect::<repwords::error::Result<_>>()?;
    if parsed.is_empty() {
        bail!("no metrics requested");
    }
    let (report, skipped) = evaluate_runs(&runs, &qrels, &parsed)?;
    if skipped > 0 {
        eprintln!("skipped {skipped} queries with no relevance judgments");
    }
    create_parent_dirs(out)?;
    let mut w = BufWriter::new(File::create(out)?);
    repwords::eval::write_report(&mut w, &report)?;
    w.flush()?;
    let corpus_checksum = read_sidecar_manifest(run_path)?
        .map(|m| m.corpus_checksum)
        .unwrap_or_else(|| EXTERNAL_CHECKSUM.to_owned());
    let manifest = Manifest::new(
        "report",
        corpus_checksum,
        vec![manifest_name(run_path), manifest_name(qrels_path)],
        vec![manifest_name(out)],
        BTreeMap::from([("metrics".to_owned(), metrics.to_owned())]),
    );
    write_sidecar_manifest(out, &manifest)?;
    for row in &report.rows {
        if row.query_id == "all" {
            eprintln!("{} mean over judged queries: {}", row.metric, row.value);
        }
    }
    Ok(())
}
