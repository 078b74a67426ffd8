//! Interface shared by every online learner.
//!
//! A round has two halves. [`Learner::predict`] sees only the feature
//! vector and returns the sampled action along with the distribution it was
//! drawn from. [`Learner::update`] then receives the played action and the
//! feedback pairs revealed by the graph. The true label is never handed to a
//! learner directly.

use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::graph::FeedbackGraph;

/// The pairs `(y, 1[y != y_t])` for `y` in the out-neighbourhood of the
/// played action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    pub played: usize,
    /// `(action, mistake)` pairs, where `mistake` is `y != y_t`.
    pub pairs: Vec<(usize, bool)>,
}

impl Feedback {
    /// What the environment reveals when `played` is chosen and the label is
    /// `y_true`.
    pub fn reveal(graph: &FeedbackGraph, played: usize, y_true: usize) -> Self {
        Self {
            played,
            pairs: graph
                .out(played)
                .iter()
                .map(|&y| (y, y != y_true))
                .collect(),
        }
    }

    /// The true label, when the feedback contains it.
    pub fn identified_label(&self) -> Option<usize> {
        self.pairs.iter().find(|(_, mistake)| !mistake).map(|(y, _)| *y)
    }

    /// Rejects feedback that mentions actions outside `out(played)`.
    pub fn check(&self, graph: &FeedbackGraph) -> Result<()> {
        match self.pairs.iter().find(|(y, _)| *y >= graph.n_actions() || !graph.observes(self.played, *y)) {
            Some((y, _)) => Err(Error::FeedbackLeak(*y)),
            None => Ok(()),
        }
    }
}

/// The randomised prediction of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutcome {
    /// Sampling distribution over actions.
    pub p_prime: Vec<f64>,
    /// Argmax of the scores.
    pub y_star: usize,
    /// Gap value `a_t` (zero for learners without a gap map).
    pub a_t: f64,
    /// Exploration rate `gamma_t`.
    pub gamma_t: f64,
    /// Whether the gap mixture was used instead of dominating-set exploration.
    pub zeta_t: bool,
}

impl PredictionOutcome {
    /// `sum_y p'(y) 1[y != y_true]`.
    pub fn expected_mistake(&self, y_true: usize) -> f64 {
        1.0 - self.p_prime[y_true]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub outcome: PredictionOutcome,
}

/// What the learner made of the feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub identified: Option<usize>,
    /// Probability that the revealed label was observable this round. Only
    /// meaningful when `identified` is set.
    pub observation_probability: f64,
    /// Importance weight applied to the gradient.
    pub importance_weight: f64,
}

pub trait Learner: Send {
    fn name(&self) -> &'static str;

    fn predict(&mut self, x: ArrayView1<f64>, rng: &mut dyn RngCore) -> Result<Decision>;

    fn update(&mut self, x: ArrayView1<f64>, feedback: &Feedback) -> Result<UpdateInfo>;

    /// Current weight matrix `W_t`.
    fn weights(&self) -> ArrayView2<'_, f64>;
}

/// Inverse-CDF draw from `p`.
pub fn sample_action<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        cum += pi;
        if u < cum {
            return i;
        }
    }
    // Rounding left a sliver above the last cumulative value.
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

/// `P(y_true in out(y'))` for `y'` drawn from `p`. Exactly 1 when every
/// action carrying mass observes `y_true`.
pub fn observation_probability(p: &[f64], graph: &FeedbackGraph, y_true: usize) -> f64 {
    let all_observe = p
        .iter()
        .enumerate()
        .all(|(y, &pi)| pi == 0.0 || graph.observes(y, y_true));
    if all_observe {
        return 1.0;
    }
    p.iter()
        .enumerate()
        .filter(|&(y, _)| graph.observes(y, y_true))
        .map(|(_, &pi)| pi)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_is_always_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = [0.0, 0.0, 1.0, 0.0];
        assert!((0..1000).all(|_| sample_action(&p, &mut rng) == 2));
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| sample_action(&p, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_action(&[0.25; 4], &mut rng)] += 1;
        }
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn observation_probabilities() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let full = FeedbackGraph::standard(GraphKind::FullInformation, 4).unwrap();
        assert!((observation_probability(&p, &full, 2) - 1.0).abs() < 1e-15);
        let bandit = FeedbackGraph::standard(GraphKind::Bandit, 4).unwrap();
        assert_eq!(observation_probability(&p, &bandit, 2), 0.3);
        let apple = FeedbackGraph::standard(GraphKind::AppleTasting, 2).unwrap();
        assert_eq!(observation_probability(&[0.35, 0.65], &apple, 1), 0.35);
    }

    #[test]
    fn feedback_identification_and_leaks() {
        let bandit = FeedbackGraph::standard(GraphKind::Bandit, 3).unwrap();
        let hit = Feedback::reveal(&bandit, 1, 1);
        assert_eq!(hit.identified_label(), Some(1));
        let miss = Feedback::reveal(&bandit, 1, 2);
        assert_eq!(miss.identified_label(), None);
        let forged = Feedback {
            played: 1,
            pairs: vec![(2, false)],
        };
        assert_eq!(forged.check(&bandit), Err(Error::FeedbackLeak(2)));
        assert!(hit.check(&bandit).is_ok());
        let apple = FeedbackGraph::standard(GraphKind::AppleTasting, 2).unwrap();
        assert!(Feedback::reveal(&apple, 1, 0).pairs.is_empty());
    }
}
