//! Ranking evaluation: graded relevance judgments, precision and nDCG
//! cutoffs, per-query reports, and seeded k-fold query splits.
//!
//! nDCG uses exponential gain `(2^g - 1) / log2(rank + 1)` with ranks from 1.
//! The ideal ranking is built from all judged documents for the query, not
//! just retrieved ones, so a run that misses relevant documents is penalized.
//! Unjudged retrieved documents count as non-relevant, and precision always
//! divides by the cutoff even when fewer documents were retrieved.

use crate::error::{Error, Result};
use crate::retrieval::RunList;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

/// Graded relevance judgments keyed by query id, then document id.
#[derive(Debug, Clone, Default)]
pub struct Qrels {
    grades: HashMap<String, HashMap<String, u32>>,
}

impl Qrels {
    /// Parses the four-column format `qid <ignored> docid grade`.
    pub fn parse(r: impl BufRead) -> Result<Self> {
        let mut grades: HashMap<String, HashMap<String, u32>> = HashMap::new();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::MalformedLine {
                    line: line_no,
                    message: format!("expected 4 qrels fields, found {}", fields.len()),
                });
            }
            let grade: u32 = fields[3].parse().map_err(|_| Error::MalformedLine {
                line: line_no,
                message: format!("bad grade {:?}", fields[3]),
            })?;
            let by_doc = grades.entry(fields[0].to_owned()).or_default();
            if by_doc.insert(fields[2].to_owned(), grade).is_some() {
                return Err(Error::MalformedLine {
                    line: line_no,
                    message: format!("duplicate judgment for ({}, {})", fields[0], fields[2]),
                });
            }
        }
        Ok(Self { grades })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, String, u32)>) -> Result<Self> {
        let mut grades: HashMap<String, HashMap<String, u32>> = HashMap::new();
        for (qid, docid, grade) in entries {
            let by_doc = grades.entry(qid.clone()).or_default();
            if by_doc.insert(docid.clone(), grade).is_some() {
                return Err(Error::InconsistentArtifacts(format!(
                    "duplicate judgment for ({qid}, {docid})"
                )));
            }
        }
        Ok(Self { grades })
    }

    pub fn num_queries(&self) -> usize {
        self.grades.len()
    }

    pub fn is_judged(&self, query_id: &str) -> bool {
        self.grades.contains_key(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.grades.get(query_id).and_then(|m| m.get(doc_id)).copied()
    }

    /// All grades judged for a query, unordered.
    pub fn judged_grades(&self, query_id: &str) -> Option<Vec<u32>> {
        self.grades
            .get(query_id)
            .map(|m| m.values().copied().collect())
    }
}

/// Fraction of the first `k` ranks holding a document judged with grade > 0.
/// The denominator is always `k`; unjudged documents are non-relevant.
pub fn p_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: 0.0,
        });
    }
    if !qrels.is_judged(&run.query_id) {
        return Err(Error::UnjudgedQuery {
            qid: run.query_id.clone(),
        });
    }
    let hits = run
        .entries()
        .iter()
        .take(k)
        .filter(|e| qrels.grade(&run.query_id, &e.doc_id).unwrap_or(0) > 0)
        .count();
    Ok(hits as f64 / k as f64)
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// Normalized discounted cumulative gain at cutoff `k`. Zero when no judged
/// document for the query has a positive grade.
pub fn ndcg_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: 0.0,
        });
    }
    let Some(mut ideal_grades) = qrels.judged_grades(&run.query_id) else {
        return Err(Error::UnjudgedQuery {
            qid: run.query_id.clone(),
        });
    };
    ideal_grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal = dcg(ideal_grades.into_iter().take(k));
    if ideal == 0.0 {
        return Ok(0.0);
    }
    let actual = dcg(
        run.entries()
            .iter()
            .take(k)
            .map(|e| qrels.grade(&run.query_id, &e.doc_id).unwrap_or(0)),
    );
    Ok(actual / ideal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    PrecisionAt(usize),
    NdcgAt(usize),
}

impl Metric {
    pub fn compute(&self, run: &RunList, qrels: &Qrels) -> Result<f64> {
        match *self {
            Metric::PrecisionAt(k) => p_at_k(run, qrels, k),
            Metric::NdcgAt(k) => ndcg_at_k(run, qrels, k),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parse_k = |prefix: &str| -> Option<usize> {
            lower
                .strip_prefix(prefix)
                .and_then(|rest| rest.parse().ok())
                .filter(|&k| k > 0)
        };
        if let Some(k) = parse_k("p@") {
            return Ok(Metric::PrecisionAt(k));
        }
        if let Some(k) = parse_k("ndcg@") {
            return Ok(Metric::NdcgAt(k));
        }
        Err(Error::UnknownMetric { name: s.to_owned() })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Metric::PrecisionAt(k) => write!(f, "p@{k}"),
            Metric::NdcgAt(k) => write!(f, "ndcg@{k}"),
        }
    }
}

/// One evaluated cell: a metric value for one query, or the mean over all
/// evaluated queries when `query_id` is `"all"`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: Metric,
    pub query_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    /// The mean row for a metric, if present.
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.query_id == "all")
            .map(|r| r.value)
    }
}

/// Evaluates each judged run under each metric. Runs whose query has no
/// judgments are skipped and counted; it is an error for every run to be
/// skipped. Rows appear metric-major, queries in run order, each metric
/// closed by an `"all"` mean row.
pub fn evaluate_runs(
    runs: &[RunList],
    qrels: &Qrels,
    metrics: &[Metric],
) -> Result<(MetricReport, usize)> {
    let judged: Vec<&RunList> = runs.iter().filter(|r| qrels.is_judged(&r.query_id)).collect();
    let skipped = runs.len() - judged.len();
    if judged.is_empty() {
        return Err(Error::NoJudgedQueries);
    }
    let mut rows = Vec::with_capacity(metrics.len() * (judged.len() + 1));
    for &metric in metrics {
        let mut sum = 0.0;
        for run in &judged {
            let value = metric.compute(run, qrels)?;
            sum += value;
            rows.push(MetricRow {
                metric,
                query_id: run.query_id.clone(),
                value,
            });
        }
        rows.push(MetricRow {
            metric,
            query_id: "all".to_owned(),
            value: sum / judged.len() as f64,
        });
    }
    Ok((MetricReport { rows }, skipped))
}

/// Writes a report as tab-separated `metric<TAB>query<TAB>value` rows behind
/// a comment line recording the gain convention.
pub fn write_report(mut w: impl Write, report: &MetricReport) -> Result<()> {
    writeln!(
        w,
        "# metric\tquery\tvalue (ndcg gain: (2^grade - 1) / log2(rank + 1))"
    )?;
    for row in &report.rows {
        writeln!(w, "{}\t{}\t{}", row.metric, row.query_id, row.value)?;
    }
    Ok(())
}

/// Splits query ids into `folds` groups by seeded shuffle plus round-robin
/// assignment. Fold sizes differ by at most one; every query lands in
/// exactly one fold; a fixed seed reproduces the split exactly.
pub fn kfold_split(query_ids: &[String], folds: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if folds == 0 {
        return Err(Error::InvalidParameter {
            name: "folds",
            value: 0.0,
        });
    }
    let mut seen = std::collections::HashSet::with_capacity(query_ids.len());
    for id in query_ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateQueryId { id: id.clone() });
        }
    }
    if query_ids.len() < folds {
        return Err(Error::TooFewQueries {
            queries: query_ids.len(),
            folds,
        });
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut shuffled: Vec<String> = query_ids.to_vec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (i, qid) in shuffled.into_iter().enumerate() {
        out[i % folds].push(qid);
    }
    Ok(out)
}
