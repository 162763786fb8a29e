//! Command-line front end for the corpus-processing pipeline: tokenize a
//! corpus, sample labeled word-set pairs, build an index, search, rerank,
//! and evaluate, with every stage persisted as a checksummed file.

pub mod commands;
pub mod config;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use commands::{SampleOptions, SearchOptions};
use config::ConfigMap;
use repwords::lm::DIRICHLET_MU_DEFAULT;
use repwords::retrieval::{ScoringMethod, BM25_B_DEFAULT, BM25_K1_DEFAULT, RERANK_DEPTH_DEFAULT};
use repwords::sampler::{
    SamplingStrategy, LAMBDA_DEFAULT, MIN_COUNT_DEFAULT, PAIRS_PER_DOC_DEFAULT,
    SUBSAMPLE_THRESHOLD_DEFAULT,
};
use repwords::weighted::SamplerKind;
use std::path::PathBuf;

pub const SEED_DEFAULT: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "repwords",
    version,
    about = "Corpus pipeline for representative word-set pretraining data and retrieval evaluation"
)]
pub struct Cli {
    /// Worker threads for data-parallel stages (output never depends on it)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// RNG seed for sampling stages
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Flat key=value config file; command-line flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a corpus into a model directory (tokens, vocabulary,
    /// collection statistics)
    Build {
        /// JSONL corpus file ({"id", "contents"} per line) or directory of
        /// text files (file stem = document id)
        #[arg(long)]
        corpus: PathBuf,
        /// Output model directory
        #[arg(long)]
        out: PathBuf,
        /// Truncate documents beyond this many tokens
        #[arg(long)]
        max_tokens: Option<usize>,
    },
    /// Sample labeled representative word-set pairs from a model directory
    Sample {
        /// Model directory written by `build`
        #[arg(long)]
        model_dir: PathBuf,
        /// Output triples file (JSONL with a manifest header)
        #[arg(long)]
        out: PathBuf,
        /// Poisson rate for set lengths
        #[arg(long)]
        lambda: Option<f64>,
        /// Dirichlet smoothing parameter
        #[arg(long)]
        mu: Option<f64>,
        /// Pairs drawn per document
        #[arg(long)]
        pairs_per_doc: Option<u32>,
        /// Drop terms with corpus count below this from the sampling
        /// vocabulary
        #[arg(long)]
        min_count: Option<u64>,
        /// Frequency subsampling threshold
        #[arg(long)]
        subsample: Option<f64>,
        /// One stopword per line; omit for no stoplist
        #[arg(long)]
        stoplist: Option<PathBuf>,
        /// doclm (document language model) or random (uniform baseline)
        #[arg(long)]
        strategy: Option<SamplingStrategy>,
        /// cumulative or alias
        #[arg(long)]
        sampler: Option<SamplerKind>,
        /// Attach a mask plan to every pair
        #[arg(long)]
        mask_plans: bool,
    },
    /// Build an inverted index from a model directory
    Index {
        #[arg(long)]
        model_dir: PathBuf,
        /// Output index file
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank documents for queries and write a six-column run file
    Search {
        /// Index file written by `index`
        #[arg(long)]
        index: PathBuf,
        /// Tab-separated queries: qid<TAB>query text
        #[arg(long)]
        queries: PathBuf,
        /// Output run file
        #[arg(long)]
        out: PathBuf,
        /// ql or bm25
        #[arg(long)]
        scorer: Option<String>,
        /// Ranks kept per query
        #[arg(long)]
        k: Option<usize>,
        /// Dirichlet smoothing parameter (ql)
        #[arg(long)]
        mu: Option<f64>,
        /// Term-frequency saturation (bm25)
        #[arg(long)]
        k1: Option<f64>,
        /// Length normalization strength (bm25)
        #[arg(long)]
        b: Option<f64>,
        /// Run tag recorded in column six
        #[arg(long)]
        tag: Option<String>,
    },
    /// Reorder a run file by externally computed scores
    Rerank {
        /// Input run file
        #[arg(long)]
        run: PathBuf,
        /// Tab-separated scores: qid<TAB>docid<TAB>score
        #[arg(long)]
        scores: PathBuf,
        /// Output run file
        #[arg(long)]
        out: PathBuf,
        /// Replace the run tag
        #[arg(long)]
        tag: Option<String>,
    },
    /// Score a run against relevance judgments
    Eval {
        /// Run file to evaluate
        #[arg(long)]
        run: PathBuf,
        /// Four-column qrels: qid <ignored> docid grade
        #[arg(long)]
        qrels: PathBuf,
        /// Comma-separated metrics such as ndcg@20,p@20
        #[arg(long)]
        metrics: Option<String>,
        /// Output report (TSV)
        #[arg(long)]
        out: PathBuf,
    },
}

fn apply_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        bail!("threads must be at least 1");
    }
    // A second initialization in the same process keeps the existing pool;
    // outputs are thread-count independent, so that is only a warning.
    if rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_err()
    {
        eprintln!("thread pool already initialized; --threads ignored");
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = ConfigMap::load(cli.config.as_deref())?;
    apply_threads(cfg.resolve_opt(cli.threads, "threads")?)?;
    let seed = cfg.resolve(cli.seed, "seed", SEED_DEFAULT)?;
    match cli.command {
        Command::Build {
            corpus,
            out,
            max_tokens,
        } => {
            let max_tokens = cfg.resolve(max_tokens, "max-tokens", 4096)?;
            if max_tokens == 0 {
                bail!("max-tokens must be at least 1");
            }
            commands::cmd_build(&corpus, &out, max_tokens)
        }
        Command::Sample {
            model_dir,
            out,
            lambda,
            mu,
            pairs_per_doc,
            min_count,
            subsample,
            stoplist,
            strategy,
            sampler,
            mask_plans,
        } => {
            let opts = SampleOptions {
                lambda: cfg.resolve(lambda, "lambda", LAMBDA_DEFAULT)?,
                mu: cfg.resolve(mu, "mu", DIRICHLET_MU_DEFAULT)?,
                pairs_per_doc: cfg.resolve(pairs_per_doc, "pairs-per-doc", PAIRS_PER_DOC_DEFAULT)?,
                min_count: cfg.resolve(min_count, "min-count", MIN_COUNT_DEFAULT)?,
                subsample: cfg.resolve(subsample, "subsample", SUBSAMPLE_THRESHOLD_DEFAULT)?,
                stoplist: match stoplist {
                    Some(p) => Some(p),
                    None => cfg.raw("stoplist").map(PathBuf::from),
                },
                seed,
                strategy: cfg.resolve(strategy, "strategy", SamplingStrategy::DocLm)?,
                sampler: cfg.resolve(sampler, "sampler", SamplerKind::Cumulative)?,
                mask_plans: cfg.resolve_switch(mask_plans, "mask-plans")?,
            };
            commands::cmd_sample(&model_dir, &out, &opts)
        }
        Command::Index { model_dir, out } => commands::cmd_index(&model_dir, &out),
        Command::Search {
            index,
            queries,
            out,
            scorer,
            k,
            mu,
            k1,
            b,
            tag,
        } => {
            let scorer = cfg.resolve(scorer, "scorer", "ql".to_owned())?;
            let method = match scorer.as_str() {
                "ql" => ScoringMethod::QueryLikelihood {
                    mu: cfg.resolve(mu, "mu", DIRICHLET_MU_DEFAULT)?,
                },
                "bm25" => ScoringMethod::Bm25 {
                    k1: cfg.resolve(k1, "k1", BM25_K1_DEFAULT)?,
                    b: cfg.resolve(b, "b", BM25_B_DEFAULT)?,
                },
                other => bail!("unknown scorer {other:?} (expected \"ql\" or \"bm25\")"),
            };
            let opts = SearchOptions {
                method,
                k: cfg.resolve(k, "k", RERANK_DEPTH_DEFAULT)?,
                tag: cfg.resolve(tag, "tag", scorer)?,
            };
            commands::cmd_search(&index, &queries, &out, &opts)
        }
        Command::Rerank {
            run,
            scores,
            out,
            tag,
        } => {
            let tag = cfg.resolve_opt(tag, "tag")?;
            commands::cmd_rerank(&run, &scores, &out, tag.as_deref())
        }
        Command::Eval {
            run,
            qrels,
            metrics,
            out,
        } => {
            let metrics = cfg.resolve(metrics, "metrics", "ndcg@20,p@20".to_owned())?;
            commands::cmd_eval(&run, &qrels, &metrics, &out)
        }
    }
}
