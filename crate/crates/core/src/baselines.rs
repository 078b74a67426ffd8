//! Comparison learners: multiclass Perceptron, passive-aggressive Perceptron
//! and the importance-weighted Banditron.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{FeedbackGraph, GraphKind};
use crate::learner::{
    observation_probability, sample_action, Decision, Feedback, Learner, PredictionOutcome,
    UpdateInfo,
};
use crate::loss::{argmax, scores, Margins, SurrogateLoss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Perceptron,
    PassiveAggressive,
    BanditronIw,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Perceptron => "perceptron",
            BaselineKind::PassiveAggressive => "pa",
            BaselineKind::BanditronIw => "banditron",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perceptron" => Ok(BaselineKind::Perceptron),
            "pa" | "passive-aggressive" => Ok(BaselineKind::PassiveAggressive),
            "banditron" => Ok(BaselineKind::BanditronIw),
            _ => Err(Error::InvalidParameter(format!("unknown baseline `{s}`"))),
        }
    }
}

/// Which of the two printed exploration rules to use for the Banditron:
/// `min{1/2, (X^2/T)^{1/3}}` (vanishing with `T`) or the literal
/// `max{1/2, (X^2/T)^{1/3}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExploreRule {
    #[default]
    Min,
    Max,
}

/// Banditron exploration rate from a bound `X^2` on `|x|^2` and the horizon.
pub fn banditron_explore_rate(x_sq_bound: f64, horizon: u64, rule: ExploreRule) -> f64 {
    let base = (x_sq_bound / horizon.max(1) as f64).cbrt();
    match rule {
        ExploreRule::Min => base.min(0.5),
        ExploreRule::Max => base.max(0.5),
    }
    .min(1.0)
}

/// A baseline learner with a `K x d` weight matrix and unit step size.
#[derive(Debug, Clone)]
pub struct Baseline {
    kind: BaselineKind,
    weights: Array2<f64>,
    graph: FeedbackGraph,
    explore: f64,
    explore_support: Vec<usize>,
    last_p: Vec<f64>,
    last_y_star: usize,
}

impl Baseline {
    /// Builds a baseline, checking that it can run on `graph`. Perceptron and
    /// passive-aggressive need full information; the Banditron runs on the
    /// bandit and spam-filtering graphs.
    pub fn new(kind: BaselineKind, graph: FeedbackGraph, dim: usize, explore: f64) -> Result<Self> {
        let k = graph.n_actions();
        let incompatible = |reason: &str| Error::Incompatible {
            learner: kind.to_string(),
            graph: graph.name(),
            reason: reason.to_string(),
        };
        let explore_support = match kind {
            BaselineKind::Perceptron | BaselineKind::PassiveAggressive => {
                if graph.revealing_set().len() != k {
                    return Err(incompatible("requires full-information feedback"));
                }
                Vec::new()
            }
            BaselineKind::BanditronIw => {
                if !(explore > 0.0 && explore <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Banditron exploration must lie in (0, 1], got {explore}"
                    )));
                }
                match graph.kind() {
                    Some(GraphKind::Bandit) => (0..k).collect(),
                    Some(GraphKind::SpamFilterMulticlass) => graph.revealing_set(),
                    _ => return Err(incompatible("requires the bandit or spam-filter graph")),
                }
            }
        };
        if k < 2 || dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "baseline needs K >= 2 and d >= 1, got {k} and {dim}"
            )));
        }
        Ok(Self {
            kind,
            weights: Array2::zeros((k, dim)),
            graph,
            explore,
            explore_support,
            last_p: vec![0.0; k],
            last_y_star: 0,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn explore(&self) -> f64 {
        self.explore
    }

    fn distribution(&self, y_star: usize) -> Vec<f64> {
        let k = self.graph.n_actions();
        let mut p = vec![0.0; k];
        match self.kind {
            BaselineKind::BanditronIw => {
                let share = self.explore / self.explore_support.len() as f64;
                for &s in &self.explore_support {
                    p[s] = share;
                }
                p[y_star] += 1.0 - self.explore;
            }
            _ => p[y_star] = 1.0,
        }
        p
    }
}

impl Learner for Baseline {
    fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    fn predict(&mut self, x: ArrayView1<f64>, rng: &mut dyn RngCore) -> Result<Decision> {
        let s = scores(self.weights.view(), x)?;
        let y_star = argmax(&s);
        let p = self.distribution(y_star);
        let action = match self.kind {
            BaselineKind::BanditronIw => sample_action(&p, rng),
            _ => y_star,
        };
        self.last_p.clone_from(&p);
        self.last_y_star = y_star;
        let gamma_t = match self.kind {
            BaselineKind::BanditronIw => self.explore,
            _ => 0.0,
        };
        Ok(Decision {
            action,
            outcome: PredictionOutcome {
                p_prime: p,
                y_star,
                a_t: 0.0,
                gamma_t,
                zeta_t: false,
            },
        })
    }

    fn update(&mut self, x: ArrayView1<f64>, feedback: &Feedback) -> Result<UpdateInfo> {
        feedback.check(&self.graph)?;
        let Some(y) = feedback.identified_label() else {
            return Ok(UpdateInfo {
                identified: None,
                observation_probability: 0.0,
                importance_weight: 0.0,
            });
        };
        let s = scores(self.weights.view(), x)?;
        let mut info = UpdateInfo {
            identified: Some(y),
            observation_probability: 1.0,
            importance_weight: 1.0,
        };
        match self.kind {
            BaselineKind::Perceptron => {
                let y_star = self.last_y_star;
                if y_star != y {
                    self.weights.row_mut(y).scaled_add(1.0, &x);
                    self.weights.row_mut(y_star).scaled_add(-1.0, &x);
                }
            }
            BaselineKind::PassiveAggressive => {
                let m = Margins::of(&s, y);
                let loss = (1.0 - m.margin).max(0.0);
                let sq = x.dot(&x);
                if loss > 0.0 && sq > 0.0 {
                    let tau = loss / (2.0 * sq);
                    self.weights.row_mut(y).scaled_add(tau, &x);
                    self.weights.row_mut(m.runner_up).scaled_add(-tau, &x);
                }
            }
            BaselineKind::BanditronIw => {
                let prob = observation_probability(&self.last_p, &self.graph, y);
                let weight = 1.0 / prob;
                info.observation_probability = prob;
                info.importance_weight = weight;
                SurrogateLoss::plain_hinge().accumulate_gradient(&s, x, y, -weight, &mut self.weights);
            }
        }
        Ok(info)
    }

    fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }
}
