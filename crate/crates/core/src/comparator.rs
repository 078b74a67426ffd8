//! Offline comparator for surrogate-regret reporting.
//!
//! The best fixed predictor in hindsight is approximated by several passes of
//! projected stochastic gradient descent over the realised sequence. The
//! returned loss is therefore an upper bound on the true minimum, and the
//! surrogate regret computed against it is a lower bound on the regret
//! against the best fixed predictor.

use ndarray::{Array2, ArrayView1};

use crate::env::Example;
use crate::error::{Error, Result};
use crate::loss::{scores, SurrogateLoss};
use crate::oco::frobenius;

pub const DEFAULT_EPOCHS: usize = 20;

#[derive(Debug, Clone)]
pub struct Comparator {
    pub weights: Array2<f64>,
    /// `l_t(U)` for every round of the sequence.
    pub per_round_loss: Vec<f64>,
    pub total_loss: f64,
}

impl Comparator {
    pub fn norm(&self) -> f64 {
        frobenius(self.weights.view())
    }

    /// `sum_{s <= t} l_s(U)` for `t = 1..=T`.
    pub fn cumulative_loss(&self) -> Vec<f64> {
        self.per_round_loss
            .iter()
            .scan(0.0, |acc, l| {
                *acc += l;
                Some(*acc)
            })
            .collect()
    }

    /// Surrogate regret `M_T - sum_t l_t(U)` for a given mistake count.
    pub fn report(&self, mistakes: u64) -> RegretReport {
        RegretReport {
            comparator_loss: self.total_loss,
            surrogate_regret: mistakes as f64 - self.total_loss,
            comparator_norm: self.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretReport {
    pub comparator_loss: f64,
    pub surrogate_regret: f64,
    pub comparator_norm: f64,
}

/// Fits a comparator of Frobenius norm at most `radius` by `epochs` passes of
/// projected gradient descent in sequence order. Epoch `e` (from 1) uses the
/// step `1 / (2 L sqrt(e))`, with `L` the largest smoothness constant
/// `L(x_t)` on the sequence. The gated hinge is replaced
/// by the plain hinge, see [`SurrogateLoss::comparator`].
pub fn offline_comparator(
    examples: &[Example],
    n_actions: usize,
    labels: &[usize],
    loss: &SurrogateLoss,
    epochs: usize,
    radius: f64,
) -> Result<Comparator> {
    let dim = examples.first().map_or(1, |e| e.x.len());
    let loss = loss.comparator();
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("comparator radius must be positive, got {radius}")));
    }
    let max_smoothness = examples
        .iter()
        .map(|e| loss.smoothness(e.x.view(), n_actions))
        .fold(0.0, f64::max);
    let base_step = if max_smoothness > 0.0 { 0.5 / max_smoothness } else { 1.0 };
    let mut weights = Array2::<f64>::zeros((n_actions, dim));
    let mut grad = Array2::zeros((n_actions, dim));
    for epoch in 0..epochs {
        let step = base_step / ((epoch + 1) as f64).sqrt();
        for e in examples {
            let x: ArrayView1<f64> = e.x.view();
            let y = *labels.get(e.y).ok_or(Error::ActionOutOfRange {
                action: e.y,
                n_actions: labels.len(),
            })?;
            let s = scores(weights.view(), x)?;
            grad.fill(0.0);
            loss.accumulate_gradient(&s, x, y, 1.0, &mut grad);
            weights.scaled_add(-step, &grad);
            let norm = frobenius(weights.view());
            if norm > radius {
                weights *= radius / norm;
            }
        }
    }
    let per_round_loss = examples
        .iter()
        .map(|e| loss.value(weights.view(), e.x.view(), labels[e.y]))
        .collect::<Result<Vec<_>>>()?;
    let total_loss = per_round_loss.iter().sum();
    Ok(Comparator {
        weights,
        per_round_loss,
        total_loss,
    })
}
