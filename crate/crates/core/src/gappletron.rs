//! The Gappletron learner.
//!
//! Each round the learner computes the argmax action `y*` of `W_t x_t`, the
//! gap `a_t` (surrogate loss of `y*`) and an exploration rate `gamma_t`, then
//! samples from
//!
//! ```text
//! p' = (1 - z a_t - (1 - z) gamma_t) e_{y*} + z a_t / K * 1 + (1 - z) gamma_t / rho * 1_S
//! ```
//!
//! with `z = 1[gamma_t <= a_t]` and `S` a dominating set of size `rho`.
//! `gamma_t` is zero when `y*` is revealing and
//! `min{1/2, gamma / sqrt(n_t)}` otherwise, where `n_t` counts the rounds so
//! far (this one included) whose argmax was not revealing.
//!
//! When the true label shows up in the feedback, the gradient of the
//! surrogate loss is importance weighted by the inverse probability of that
//! happening and handed to the OCO core.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{FeedbackGraph, GraphSummary};
use crate::learner::{
    observation_probability, sample_action, Decision, Feedback, Learner, PredictionOutcome,
    UpdateInfo,
};
use crate::loss::{argmax, LossKind, SurrogateLoss};
use crate::oco::{OcoMode, OcoState};

/// How the exploration parameter `gamma` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tuning {
    /// `gamma = 1`.
    Unit,
    /// `gamma = B sqrt(K rho L) / 2`, tuned for expected surrogate regret.
    TheoryExpectation,
    /// `gamma = sqrt(K rho (L B^2 + 5 l_max ln(2/delta)))`, tuned for
    /// high-probability bounds.
    TheoryHighProbability,
}

impl Tuning {
    pub fn as_str(self) -> &'static str {
        match self {
            Tuning::Unit => "unit",
            Tuning::TheoryExpectation => "theory-expectation",
            Tuning::TheoryHighProbability => "theory-hp",
        }
    }
}

impl fmt::Display for Tuning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tuning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Tuning::Unit),
            "theory-expectation" | "expectation" => Ok(Tuning::TheoryExpectation),
            "theory-hp" | "hp" => Ok(Tuning::TheoryHighProbability),
            _ => Err(Error::InvalidParameter(format!(
                "unknown tuning `{s}` (expected unit, theory-expectation, theory-hp)"
            ))),
        }
    }
}

/// Quantities entering the theory presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    /// Norm bound `B` on the comparator.
    pub radius: f64,
    /// Upper bound on the smoothness `L(x)` over the stream.
    pub smoothness: f64,
    pub rho: usize,
    pub n_actions: usize,
    pub delta: f64,
    /// Upper bound on the surrogate loss values.
    pub ell_max: f64,
}

/// Exploration parameter for a tuning preset.
pub fn theory_gamma(tuning: Tuning, inputs: &TheoryInputs) -> f64 {
    let k = inputs.n_actions as f64;
    let rho = inputs.rho as f64;
    let b = inputs.radius;
    match tuning {
        Tuning::Unit => 1.0,
        Tuning::TheoryExpectation => 0.5 * b * (k * rho * inputs.smoothness).sqrt(),
        Tuning::TheoryHighProbability => (k
            * rho
            * (inputs.smoothness * b * b + 5.0 * inputs.ell_max * (2.0 / inputs.delta).ln()))
        .sqrt(),
    }
}

/// Multiplier of the surrogate loss in the per-round mistake bound:
/// `(K-1)/K` for regular losses and `max{2/3, (K-1)/K}` for the gated hinge.
pub fn mistake_bound_factor(loss: &SurrogateLoss, n_actions: usize) -> f64 {
    let k = n_actions as f64;
    let base = (k - 1.0) / k;
    match loss.kind {
        LossKind::Hinge | LossKind::PlainHinge => base.max(2.0 / 3.0),
        _ => base,
    }
}

/// The sampling distribution `p'`: gap mixture with the uniform
/// distribution when `zeta` holds, otherwise exploration spread evenly over
/// the dominating set.
pub fn mix_distribution(
    n_actions: usize,
    y_star: usize,
    a_t: f64,
    gamma_t: f64,
    zeta: bool,
    dominating_set: &[usize],
) -> Vec<f64> {
    let mut p = vec![0.0; n_actions];
    if zeta {
        let uniform = a_t / n_actions as f64;
        p.iter_mut().for_each(|v| *v = uniform);
        p[y_star] += 1.0 - a_t;
    } else {
        let share = gamma_t / dominating_set.len() as f64;
        for &s in dominating_set {
            p[s] = share;
        }
        p[y_star] += 1.0 - gamma_t;
    }
    p
}

#[derive(Debug, Clone)]
struct Pending {
    p_prime: Vec<f64>,
    scores: ndarray::Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Gappletron {
    graph: FeedbackGraph,
    summary: GraphSummary,
    loss: SurrogateLoss,
    gamma: f64,
    oco: OcoState,
    explore_count: u64,
    t: u64,
    pending: Option<Pending>,
    grad: Array2<f64>,
}

impl Gappletron {
    pub fn new(
        graph: FeedbackGraph,
        loss: SurrogateLoss,
        gamma: f64,
        dim: usize,
        mode: OcoMode,
    ) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be a finite non-negative number, got {gamma}"
            )));
        }
        let k = graph.n_actions();
        if k < 2 {
            return Err(Error::InvalidParameter(
                "Gappletron needs at least 2 actions".into(),
            ));
        }
        let summary = graph.summary();
        Ok(Self {
            oco: OcoState::new(k, dim, mode)?,
            graph,
            summary,
            loss,
            gamma,
            explore_count: 0,
            t: 0,
            pending: None,
            grad: Array2::zeros((k, dim)),
        })
    }

    pub fn summary(&self) -> &GraphSummary {
        &self.summary
    }

    pub fn loss(&self) -> &SurrogateLoss {
        &self.loss
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn explore_count(&self) -> u64 {
        self.explore_count
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn oco(&self) -> &OcoState {
        &self.oco
    }

    /// Computes `p'_t` for `x`, advancing the round counter and the count of
    /// non-revealing argmax rounds.
    pub fn predict_distribution(&mut self, x: ArrayView1<f64>) -> Result<PredictionOutcome> {
        let scores = crate::loss::scores(self.oco.weights(), x)?;
        let k = scores.len();
        let y_star = argmax(&scores);
        self.t += 1;
        let gamma_t = if self.summary.is_revealing(y_star) {
            0.0
        } else {
            self.explore_count += 1;
            (self.gamma / (self.explore_count as f64).sqrt()).min(0.5)
        };
        let a_t = self.loss.gap_from_scores(&scores);
        let zeta_t = gamma_t <= a_t;

        let p = mix_distribution(
            k,
            y_star,
            a_t,
            gamma_t,
            zeta_t,
            &self.summary.dominating_set,
        );
        debug_assert!(p.iter().all(|&v| v >= 0.0));

        self.pending = Some(Pending {
            p_prime: p.clone(),
            scores,
        });
        Ok(PredictionOutcome {
            p_prime: p,
            y_star,
            a_t,
            gamma_t,
            zeta_t,
        })
    }
}

impl Learner for Gappletron {
    fn name(&self) -> &'static str {
        "gappletron"
    }

    fn predict(&mut self, x: ArrayView1<f64>, rng: &mut dyn RngCore) -> Result<Decision> {
        let outcome = self.predict_distribution(x)?;
        let action = sample_action(&outcome.p_prime, rng);
        Ok(Decision { action, outcome })
    }

    fn update(&mut self, x: ArrayView1<f64>, feedback: &Feedback) -> Result<UpdateInfo> {
        feedback.check(&self.graph)?;
        let pending = self.pending.take().ok_or_else(|| {
            Error::InvalidParameter("update called without a preceding prediction".into())
        })?;
        let Some(y_true) = feedback.identified_label() else {
            return Ok(UpdateInfo {
                identified: None,
                observation_probability: 0.0,
                importance_weight: 0.0,
            });
        };
        let prob = observation_probability(&pending.p_prime, &self.graph, y_true);
        let weight = 1.0 / prob;
        self.grad.fill(0.0);
        self.loss
            .accumulate_gradient(&pending.scores, x, y_true, weight, &mut self.grad);
        self.oco.update(self.grad.view())?;
        Ok(UpdateInfo {
            identified: Some(y_true),
            observation_probability: prob,
            importance_weight: weight,
        })
    }

    fn weights(&self) -> ArrayView2<'_, f64> {
        self.oco.weights()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;
    use ndarray::{array, Array1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn learner(kind: GraphKind, k: usize, loss: SurrogateLoss, gamma: f64, d: usize) -> Gappletron {
        let g = FeedbackGraph::standard(kind, k).unwrap();
        Gappletron::new(g, loss, gamma, d, OcoMode::Unprojected).unwrap()
    }

    #[test]
    fn full_information_at_zero_is_uniform() {
        let mut l = learner(GraphKind::FullInformation, 4, SurrogateLoss::logistic(), 1.0, 3);
        let out = l.predict_distribution(array![1.0, 0.0, 2.0].view()).unwrap();
        assert_eq!(out.gamma_t, 0.0);
        assert!(out.zeta_t);
        assert_eq!(out.a_t, 1.0);
        for p in out.p_prime {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert_eq!(l.explore_count(), 0);
    }

    fn confident(l: &mut Gappletron, row: usize, value: f64) {
        // Push W so that `row` wins with a large margin on x = e_1.
        let k = l.weights().nrows();
        let d = l.weights().ncols();
        let mut g = Array2::zeros((k, d));
        g[[row, 0]] = -value;
        l.oco.update(g.view()).unwrap();
    }

    #[test]
    fn bandit_first_exploring_round() {
        // K = 3 bandit, zero gap, gamma = 1: gamma_1 = 1/2, dominating set of
        // size 3 receives 1/6 each.
        let mut l = learner(GraphKind::Bandit, 3, SurrogateLoss::smooth_hinge(), 1.0, 1);
        confident(&mut l, 1, 1.0);
        // After one normalised step W[1] = 1 - tiny; scale x to get margin > 1.
        let out = l.predict_distribution(array![5.0].view()).unwrap();
        assert_eq!(out.y_star, 1);
        assert_eq!(out.a_t, 0.0);
        assert_eq!(out.gamma_t, 0.5);
        assert!(!out.zeta_t);
        let expect = [1.0 / 6.0, 0.5 + 1.0 / 6.0, 1.0 / 6.0];
        for (p, e) in out.p_prime.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn apple_tasting_blind_argmax_explores_the_revealing_action() {
        let mut l = learner(GraphKind::AppleTasting, 2, SurrogateLoss::smooth_hinge(), 1.0, 1);
        confident(&mut l, 1, 1.0);
        let out = l.predict_distribution(array![5.0].view()).unwrap();
        assert_eq!(out.y_star, 1);
        assert_eq!(out.gamma_t, 0.5);
        assert_eq!(out.p_prime, vec![0.5, 0.5]);
    }

    #[test]
    fn revealing_argmax_never_explores() {
        let mut l = learner(GraphKind::AppleTasting, 2, SurrogateLoss::smooth_hinge(), 1.0, 1);
        confident(&mut l, 0, 1.0);
        let out = l.predict_distribution(array![5.0].view()).unwrap();
        assert_eq!(out.y_star, 0);
        assert_eq!(out.gamma_t, 0.0);
        assert_eq!(out.p_prime, vec![1.0, 0.0]);
        assert_eq!(l.explore_count(), 0);
    }

    #[test]
    fn exploration_decays_with_the_count() {
        let mut l = learner(GraphKind::Bandit, 3, SurrogateLoss::smooth_hinge(), 2.0, 1);
        confident(&mut l, 0, 1.0);
        let rates: Vec<f64> = (0..20)
            .map(|_| l.predict_distribution(array![5.0].view()).unwrap().gamma_t)
            .collect();
        for (i, r) in rates.iter().enumerate() {
            let expect = (2.0 / ((i + 1) as f64).sqrt()).min(0.5);
            assert!((r - expect).abs() < 1e-15);
        }
        assert_eq!(l.explore_count(), 20);
    }

    #[test]
    fn bandit_importance_weight() {
        let mut l = learner(GraphKind::Bandit, 4, SurrogateLoss::logistic(), 1.0, 2);
        let x = array![1.0, -1.0];
        let out = l.predict_distribution(x.view()).unwrap();
        // W = 0: a_t = 1 >= gamma_t, uniform over 4 actions.
        assert!((out.p_prime[2] - 0.25).abs() < 1e-15);
        let info = l.update(x.view(), &Feedback { played: 2, pairs: vec![(2, false)] }).unwrap();
        assert_eq!(info.identified, Some(2));
        assert!((info.importance_weight - 4.0).abs() < 1e-12);
        let expected = SurrogateLoss::logistic()
            .gradient(Array2::zeros((4, 2)).view(), x.view(), 2)
            .unwrap()
            * 4.0;
        let sq: f64 = expected.iter().map(|v| v * v).sum();
        assert!((l.oco().grad_sq_sum() - sq).abs() < 1e-12);
    }

    #[test]
    fn bandit_miss_leaves_weights_alone() {
        let mut l = learner(GraphKind::Bandit, 3, SurrogateLoss::smooth_hinge(), 1.0, 2);
        let x = array![1.0, 1.0];
        l.predict_distribution(x.view()).unwrap();
        let info = l.update(x.view(), &Feedback { played: 0, pairs: vec![(0, true)] }).unwrap();
        assert_eq!(info.identified, None);
        assert_eq!(info.importance_weight, 0.0);
        assert!(l.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn full_information_weight_is_one() {
        let mut l = learner(GraphKind::FullInformation, 3, SurrogateLoss::smooth_hinge(), 1.0, 2);
        let graph = FeedbackGraph::standard(GraphKind::FullInformation, 3).unwrap();
        let x = array![0.5, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for y in [0, 2, 1, 1] {
            let d = l.predict(x.view(), &mut rng).unwrap();
            let info = l.update(x.view(), &Feedback::reveal(&graph, d.action, y)).unwrap();
            assert!((info.importance_weight - 1.0).abs() < 1e-15);
            assert_eq!(info.identified, Some(y));
        }
    }

    #[test]
    fn forged_feedback_is_rejected() {
        let mut l = learner(GraphKind::Bandit, 3, SurrogateLoss::smooth_hinge(), 1.0, 1);
        l.predict_distribution(array![1.0].view()).unwrap();
        let err = l
            .update(array![1.0].view(), &Feedback { played: 0, pairs: vec![(1, false)] })
            .unwrap_err();
        assert_eq!(err, Error::FeedbackLeak(1));
    }

    #[test]
    fn update_without_prediction_fails() {
        let mut l = learner(GraphKind::Bandit, 3, SurrogateLoss::smooth_hinge(), 1.0, 1);
        assert!(l.update(array![1.0].view(), &Feedback { played: 0, pairs: vec![] }).is_err());
    }

    #[test]
    fn theory_presets() {
        let base = TheoryInputs {
            radius: 1.0,
            smoothness: 4.0,
            rho: 2,
            n_actions: 2,
            delta: 0.1,
            ell_max: 1.0,
        };
        assert!((theory_gamma(Tuning::TheoryExpectation, &base) - 2.0).abs() < 1e-12);
        assert_eq!(theory_gamma(Tuning::Unit, &base), 1.0);
        let hp = TheoryInputs {
            smoothness: 1.0,
            rho: 1,
            n_actions: 1,
            ell_max: 0.0,
            ..base
        };
        assert!((theory_gamma(Tuning::TheoryHighProbability, &hp) - 1.0).abs() < 1e-12);
        let hp2 = TheoryInputs { ell_max: 1.0, delta: 2.0 / std::f64::consts::E, ..hp };
        assert!((theory_gamma(Tuning::TheoryHighProbability, &hp2) - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bound_factors() {
        assert!((mistake_bound_factor(&SurrogateLoss::smooth_hinge(), 6) - 5.0 / 6.0).abs() < 1e-15);
        assert!((mistake_bound_factor(&SurrogateLoss::hinge(0.5).unwrap(), 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((mistake_bound_factor(&SurrogateLoss::hinge(0.5).unwrap(), 4) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_gamma() {
        let g = FeedbackGraph::standard(GraphKind::Bandit, 3).unwrap();
        assert!(Gappletron::new(g, SurrogateLoss::logistic(), -1.0, 2, OcoMode::Unprojected).is_err());
    }

    #[test]
    fn scores_dimension_is_checked() {
        let mut l = learner(GraphKind::Bandit, 3, SurrogateLoss::logistic(), 1.0, 2);
        assert!(l.predict_distribution(Array1::zeros(3).view()).is_err());
    }
}
