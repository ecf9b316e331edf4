//! InfoNCE over candidate scores.
//!
//! Lower scores are better, so logits are `-score / tau`:
//!
//! ```text
//! L = -log( exp(-S_pos / tau) / sum_i exp(-S_i / tau) )
//! ```
//!
//! Everything goes through a max-shifted log-sum-exp.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig<F> {
    pub tau: F,
}

impl<F: Scalar> LossConfig<F> {
    pub fn new(tau: F) -> Result<Self> {
        if !tau.is_finite() || tau <= F::zero() {
            return Err(Error::InvalidConfig(format!(
                "temperature must be finite and > 0, got {tau}"
            )));
        }
        Ok(LossConfig { tau })
    }
}

impl<F: Scalar> Default for LossConfig<F> {
    fn default() -> Self {
        LossConfig { tau: F::of(0.7) }
    }
}

/// One positive score and `n >= 1` negative scores, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredBatch<F> {
    positive: F,
    negatives: Vec<F>,
}

impl<F: Scalar> ScoredBatch<F> {
    pub fn new(positive: F, negatives: Vec<F>) -> Result<Self> {
        if negatives.is_empty() {
            return Err(Error::NoNegatives);
        }
        if let Some(bad) = std::iter::once(&positive)
            .chain(&negatives)
            .find(|s| !s.is_finite())
        {
            return Err(Error::NonFiniteScore(bad.to_string()));
        }
        Ok(ScoredBatch {
            positive,
            negatives,
        })
    }

    /// Reorders per-answer scores so the correct answer comes first.
    pub fn from_candidates(scores: &[F], correct_index: usize) -> Result<Self> {
        let positive = *scores.get(correct_index).ok_or(Error::AnswerIndex {
            index: correct_index,
            len: scores.len(),
        })?;
        let negatives = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != correct_index)
            .map(|(_, &s)| s)
            .collect();
        Self::new(positive, negatives)
    }

    pub fn positive(&self) -> F {
        self.positive
    }

    pub fn negatives(&self) -> &[F] {
        &self.negatives
    }

    /// Positive first, then negatives in order.
    pub fn scores(&self) -> impl Iterator<Item = F> + '_ {
        std::iter::once(self.positive).chain(self.negatives.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.negatives.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn logits(&self, config: &LossConfig<F>) -> Vec<F> {
        self.scores().map(|s| -s / config.tau).collect()
    }
}

fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    let sum: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Softmax of `-score / tau`, positive first.
pub fn normalized_probs<F: Scalar>(batch: &ScoredBatch<F>, config: &LossConfig<F>) -> Vec<F> {
    let logits = batch.logits(config);
    let lse = log_sum_exp(&logits);
    logits.into_iter().map(|l| (l - lse).exp()).collect()
}

pub fn infonce<F: Scalar>(batch: &ScoredBatch<F>, config: &LossConfig<F>) -> F {
    let logits = batch.logits(config);
    log_sum_exp(&logits) - logits[0]
}

/// Arithmetic mean of per-batch InfoNCE.
pub fn mean_loss<'a, F, I>(batches: I, config: &LossConfig<F>) -> Result<F>
where
    F: Scalar,
    I: IntoIterator<Item = &'a ScoredBatch<F>>,
{
    let mut total = F::zero();
    let mut count = 0usize;
    for batch in batches {
        total = total + infonce(batch, config);
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoBatches);
    }
    Ok(total / F::of_usize(count))
}
