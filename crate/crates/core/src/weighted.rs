//! Discrete weighted sampling over a fixed support.
//!
//! Two interchangeable backends: cumulative-sum binary search, which is easy
//! to audit, and a Vose alias table with O(1) draws for hot loops. Both draw
//! index `i` with probability `w_i / sum(w)` and never return a zero-weight
//! index.

use crate::error::{Error, Result};
use rand::Rng;

/// Which backing structure a [`DiscreteSampler`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    Cumulative,
    Alias,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cumulative" => Ok(Self::Cumulative),
            "alias" => Ok(Self::Alias),
            _ => Err(Error::InconsistentArtifacts(format!(
                "unknown sampler kind {s:?} (expected \"cumulative\" or \"alias\")"
            ))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cumulative => "cumulative",
            Self::Alias => "alias",
        })
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    backend: Backend,
}

#[derive(Debug, Clone)]
enum Backend {
    Cumulative(CumulativeTable),
    Alias(AliasTable),
}

impl DiscreteSampler {
    /// Validates weights (finite, non-negative, positive total) and builds
    /// the requested backend.
    pub fn new(weights: &[f64], kind: SamplerKind) -> Result<Self> {
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeight { index, value: w });
            }
        }
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || total <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        let backend = match kind {
            SamplerKind::Cumulative => Backend::Cumulative(CumulativeTable::new(weights, total)),
            SamplerKind::Alias => Backend::Alias(AliasTable::new(weights, total)),
        };
        Ok(Self { backend })
    }

    pub fn len(&self) -> usize {
        match &self.backend {
            Backend::Cumulative(t) => t.cumulative.len(),
            Backend::Alias(t) => t.prob.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.backend {
            Backend::Cumulative(t) => t.sample(rng),
            Backend::Alias(t) => t.sample(rng),
        }
    }
}

#[derive(Debug, Clone)]
struct CumulativeTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl CumulativeTable {
    fn new(weights: &[f64], total: f64) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        // `acc` is the same left-to-right sum as `total`, so a uniform draw
        // in [0, total) always lands strictly below the last entry.
        Self { cumulative, total }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.total;
        // First index whose cumulative sum exceeds u. Zero-weight entries
        // occupy empty intervals and are skipped by the strict comparison.
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Vose alias construction: scale weights to mean 1, then repeatedly pair an
/// underfull cell with an overfull one until every cell holds a primary
/// probability and an alias.
#[derive(Debug, Clone)]
struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    fn new(weights: &[f64], total: f64) -> Self {
        let n = weights.len();
        let mut scaled: Vec<f64> = weights.iter().map(|&w| w * n as f64 / total).collect();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0u32; n];
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while !small.is_empty() && !large.is_empty() {
            let s = small.pop().unwrap();
            let l = large.pop().unwrap();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        // Float drift can strand cells in either worklist; they are full.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
            alias[i] = i as u32;
        }
        Self { prob, alias }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}
