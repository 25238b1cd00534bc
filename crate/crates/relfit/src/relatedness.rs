//! Concept-vector pooling and cosine scoring of benchmark pairs.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{BenchmarkDataset, EmbeddingTable, ModelError, SkipReason, Vector};

#[derive(Debug, Error)]
pub enum RelatednessError {
    #[error("no tokens")]
    NoTokens,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("pair `{term1}` / `{term2}`: {reason}")]
    PairUnscorable {
        term1: String,
        term2: String,
        reason: SkipReason,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What to do when a pair cannot be scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScorePolicy {
    /// Record a skip reason and keep going.
    #[default]
    Skip,
    /// Abort on the first unscorable pair.
    Fail,
}

impl FromStr for ScorePolicy {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "skip" => Ok(ScorePolicy::Skip),
            "fail" => Ok(ScorePolicy::Fail),
            _ => Err(ModelError::InvalidConfig("policy must be `skip` or `fail`")),
        }
    }
}

impl fmt::Display for ScorePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorePolicy::Skip => "skip",
            ScorePolicy::Fail => "fail",
        })
    }
}

/// One benchmark pair with its gold score and either a predicted similarity
/// or the reason it was skipped (exactly one of the two is present).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub term1: String,
    pub term2: String,
    pub cui1: Option<String>,
    pub cui2: Option<String>,
    pub gold: f64,
    pub predicted: Option<f64>,
    pub skip_reason: Option<SkipReason>,
}

/// Componentwise arithmetic mean of same-dimension token vectors.
pub fn mean_pool(token_vectors: &[Vector]) -> Result<Vector, RelatednessError> {
    let first = token_vectors.first().ok_or(RelatednessError::NoTokens)?;
    let dim = first.dim();
    let mut acc = vec![0.0f64; dim];
    for v in token_vectors {
        if v.dim() != dim {
            return Err(RelatednessError::DimensionMismatch {
                expected: dim,
                got: v.dim(),
            });
        }
        for (a, c) in acc.iter_mut().zip(v.components()) {
            *a += c;
        }
    }
    let n = token_vectors.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(Vector::new(acc)?)
}

/// Cosine similarity, clamped to [-1, 1] against rounding overshoot.
///
/// Both operands are scaled by their largest absolute component before the
/// dot product, so arbitrarily large or subnormal (but nonzero) vectors are
/// scored without overflow or underflow. `cosine(v, v)` is exactly 1 and
/// the function is exactly symmetric in its arguments.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64, RelatednessError> {
    if u.dim() != v.dim() {
        return Err(RelatednessError::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let max_abs = |x: &Vector| x.components().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mu = max_abs(u);
    let mv = max_abs(v);
    if mu == 0.0 || mv == 0.0 {
        return Err(RelatednessError::ZeroVector);
    }
    let mut dot = 0.0;
    let mut su = 0.0;
    let mut sv = 0.0;
    for (a, b) in u.components().iter().zip(v.components()) {
        let x = a / mu;
        let y = b / mv;
        dot += x * y;
        su += x * x;
        sv += y * y;
    }
    Ok((dot / (su * sv).sqrt()).clamp(-1.0, 1.0))
}

/// Scores every pair of a dataset against an embedding table.
///
/// A pair is skipped (or, under [`ScorePolicy::Fail`], aborts the run) when
/// either CUI is missing, either term has no vector, or either vector is
/// zero — checked in that order. Output order and length match the dataset.
pub fn score_pairs(
    table: &EmbeddingTable,
    dataset: &BenchmarkDataset,
    policy: ScorePolicy,
) -> Result<Vec<ScoredPair>, RelatednessError> {
    let mut out = Vec::with_capacity(dataset.len());
    for pair in dataset.pairs() {
        let mut predicted = None;
        let reason = if pair.cui1.is_none() || pair.cui2.is_none() {
            Some(SkipReason::MissingCui)
        } else {
            match (table.get(&pair.term1), table.get(&pair.term2)) {
                (Some(u), Some(v)) => match cosine(u, v) {
                    Ok(p) => {
                        predicted = Some(p);
                        None
                    }
                    Err(RelatednessError::ZeroVector) => Some(SkipReason::ZeroVector),
                    Err(e) => return Err(e),
                },
                _ => Some(SkipReason::MissingVector),
            }
        };
        if let (Some(reason), ScorePolicy::Fail) = (reason, policy) {
            return Err(RelatednessError::PairUnscorable {
                term1: pair.term1.clone(),
                term2: pair.term2.clone(),
                reason,
            });
        }
        out.push(ScoredPair {
            term1: pair.term1.clone(),
            term2: pair.term2.clone(),
            cui1: pair.cui1.clone(),
            cui2: pair.cui2.clone(),
            gold: pair.mean_score,
            predicted,
            skip_reason: reason,
        });
    }
    Ok(out)
}
