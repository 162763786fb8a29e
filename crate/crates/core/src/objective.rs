//! Reference implementations of the training losses, for checking trainer
//! integrations and for unit oracles. All values are natural-log based.

use crate::error::{Error, Result};
use crate::vocab::TermId;

/// Tolerance for the per-position normalization check: log-sum-exp of each
/// predicted distribution must sit within this of zero.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Pairwise hinge: `max(0, 1 - pos + neg)`. Zero exactly when the positive
/// set outscores the negative by the full unit margin.
pub fn hinge_loss(pos_score: f64, neg_score: f64) -> Result<f64> {
    if !pos_score.is_finite() {
        return Err(Error::NonFiniteScore {
            name: "pos_score",
            value: pos_score,
        });
    }
    if !neg_score.is_finite() {
        return Err(Error::NonFiniteScore {
            name: "neg_score",
            value: neg_score,
        });
    }
    Ok((1.0 - pos_score + neg_score).max(0.0))
}

/// Predicted log-probability rows for a batch of masked positions, one row
/// per position over the scoring vocabulary, with the true token per row.
#[derive(Debug, Clone)]
pub struct MaskedPrediction {
    log_probs: Vec<Vec<f64>>,
    targets: Vec<TermId>,
}

impl MaskedPrediction {
    /// Validates shapes and normalization: every row spans the vocabulary,
    /// log-sum-exps to zero within [`NORMALIZATION_TOL`], and has an
    /// in-vocabulary target.
    pub fn new(log_probs: Vec<Vec<f64>>, targets: Vec<TermId>, vocab_size: usize) -> Result<Self> {
        if log_probs.len() != targets.len() {
            return Err(Error::MalformedPrediction {
                position: 0,
                message: format!(
                    "{} rows but {} targets",
                    log_probs.len(),
                    targets.len()
                ),
            });
        }
        for (position, (row, target)) in log_probs.iter().zip(&targets).enumerate() {
            if row.len() != vocab_size {
                return Err(Error::MalformedPrediction {
                    position,
                    message: format!("row length {} != vocabulary size {vocab_size}", row.len()),
                });
            }
            if target.index() >= vocab_size {
                return Err(Error::MalformedPrediction {
                    position,
                    message: format!("target id {} out of range", target.0),
                });
            }
            if row.iter().any(|x| x.is_nan()) {
                return Err(Error::MalformedPrediction {
                    position,
                    message: "row contains NaN".to_owned(),
                });
            }
            let lse = log_sum_exp(row);
            if lse.abs() > NORMALIZATION_TOL {
                return Err(Error::MalformedPrediction {
                    position,
                    message: format!("row log-sum-exp is {lse}, expected 0"),
                });
            }
        }
        Ok(Self { log_probs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Summed negative log-likelihood of the true tokens, in nats. Errors on an
/// empty batch and on a target with zero predicted probability.
pub fn mlm_loss(prediction: &MaskedPrediction) -> Result<f64> {
    if prediction.is_empty() {
        return Err(Error::EmptyWordSet);
    }
    let mut loss = 0.0;
    for (position, (row, target)) in prediction
        .log_probs
        .iter()
        .zip(&prediction.targets)
        .enumerate()
    {
        let lp = row[target.index()];
        if !lp.is_finite() {
            return Err(Error::MalformedPrediction {
                position,
                message: format!("target log-probability is {lp}"),
            });
        }
        loss -= lp;
    }
    Ok(loss)
}
