//! Synthetic keyword streams and the round-by-round interaction protocol.
//!
//! Feature vectors are binary with `d = 40 d'` coordinates. The first `10 d'`
//! coordinates hold class keywords: every class owns a random subset of them
//! whose size is uniform in `{d', ..., 5 d'}`. The remaining `30 d'`
//! coordinates are noise words, and exactly `5 d'` of them are switched on in
//! every example. Labels are the generating class, replaced by a uniformly
//! random class with probability `noise`.

use ndarray::{Array1, ArrayView1};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::FeedbackGraph;
use crate::learner::{observation_probability, Feedback, Learner};
use crate::loss::SurrogateLoss;

/// Keyword block width per unit of `d'`.
pub const KEYWORD_BITS: usize = 10;
/// Noise block width per unit of `d'`.
pub const NOISE_BITS: usize = 30;
/// Noise words switched on per unit of `d'`.
pub const NOISE_ACTIVE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub d_prime: usize,
    pub noise: f64,
}

impl SynthConfig {
    pub fn new(n_classes: usize, d_prime: usize, noise: f64) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if d_prime == 0 {
            return Err(Error::InvalidParameter("d' must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::InvalidParameter(format!(
                "noise must lie in [0, 1], got {noise}"
            )));
        }
        Ok(Self {
            n_classes,
            d_prime,
            noise,
        })
    }

    /// Feature dimension `40 d'`.
    pub fn dim(&self) -> usize {
        (KEYWORD_BITS + NOISE_BITS) * self.d_prime
    }

    /// Largest possible `|x|^2`: `5 d'` keywords plus `5 d'` noise words.
    pub fn max_sq_norm(&self) -> f64 {
        (5 * self.d_prime + NOISE_ACTIVE * self.d_prime) as f64
    }
}

/// Per-class keyword positions, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    pub sets: Vec<Vec<usize>>,
}

impl KeywordTable {
    pub fn generate<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Self {
        let block = KEYWORD_BITS * config.d_prime;
        let sets = (0..config.n_classes)
            .map(|_| {
                let size = rng.random_range(config.d_prime..=5 * config.d_prime);
                let mut set = index::sample(rng, block, size).into_vec();
                set.sort_unstable();
                set
            })
            .collect();
        Self { sets }
    }
}

/// A labelled example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Array1<f64>,
    pub y: usize,
    /// The class that generated `x`, before label noise.
    pub source_class: usize,
}

/// Draws one example from the keyword model.
pub fn sample_example<R: Rng + ?Sized>(
    config: &SynthConfig,
    keywords: &KeywordTable,
    rng: &mut R,
) -> Example {
    let class = rng.random_range(0..config.n_classes);
    let mut x = Array1::zeros(config.dim());
    for &i in &keywords.sets[class] {
        x[i] = 1.0;
    }
    let offset = KEYWORD_BITS * config.d_prime;
    for i in index::sample(rng, NOISE_BITS * config.d_prime, NOISE_ACTIVE * config.d_prime) {
        x[offset + i] = 1.0;
    }
    let y = if rng.random::<f64>() < config.noise {
        rng.random_range(0..config.n_classes)
    } else {
        class
    };
    Example {
        x,
        y,
        source_class: class,
    }
}

/// A source of labelled examples.
pub trait Environment {
    fn dim(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn next_example(&mut self) -> Example;
}

/// Keyword stream with its own RNG.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    config: SynthConfig,
    keywords: KeywordTable,
    rng: ChaCha8Rng,
}

impl SyntheticStream {
    /// The keyword table and the examples are both drawn from `rng`.
    pub fn new(config: SynthConfig, mut rng: ChaCha8Rng) -> Self {
        let keywords = KeywordTable::generate(&config, &mut rng);
        Self {
            config,
            keywords,
            rng,
        }
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn keywords(&self) -> &KeywordTable {
        &self.keywords
    }
}

impl Environment for SyntheticStream {
    fn dim(&self) -> usize {
        self.config.dim()
    }

    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn next_example(&mut self) -> Example {
        sample_example(&self.config, &self.keywords, &mut self.rng)
    }
}

/// Replays a recorded sequence of examples.
#[derive(Debug, Clone)]
pub struct Replay {
    examples: Vec<Example>,
    n_classes: usize,
    next: usize,
}

impl Replay {
    pub fn new(examples: Vec<Example>, n_classes: usize) -> Self {
        Self {
            examples,
            n_classes,
            next: 0,
        }
    }
}

impl Environment for Replay {
    fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.x.len())
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn next_example(&mut self) -> Example {
        let e = self.examples[self.next % self.examples.len()].clone();
        self.next += 1;
        e
    }
}

/// Independent data and learner RNGs for one run, derived from a master seed
/// by selecting distinct ChaCha streams.
pub fn run_rngs(master_seed: u64, run_index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut data = ChaCha8Rng::seed_from_u64(master_seed);
    data.set_stream(2 * run_index);
    let mut learner = ChaCha8Rng::seed_from_u64(master_seed);
    learner.set_stream(2 * run_index + 1);
    (data, learner)
}

/// Roughly `count` logarithmically spaced rounds in `1..=horizon`, plus every
/// power of ten up to `horizon` and `horizon` itself.
pub fn log_checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    if horizon == 0 {
        return Vec::new();
    }
    let mut points: Vec<u64> = (0..count)
        .map(|i| {
            let frac = if count > 1 { i as f64 / (count - 1) as f64 } else { 1.0 };
            (horizon as f64).powf(frac).round() as u64
        })
        .map(|t| t.clamp(1, horizon))
        .collect();
    points.push(horizon);
    let mut decade = 1u64;
    while decade <= horizon {
        points.push(decade);
        decade = match decade.checked_mul(10) {
            Some(next) => next,
            None => break,
        };
    }
    points.sort_unstable();
    points.dedup();
    points
}

/// Everything observed in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub y_true: usize,
    pub y_star: usize,
    pub a_t: f64,
    pub gamma_t: f64,
    pub zeta_t: bool,
    pub y_prime: usize,
    pub mistake: bool,
    /// The played action was not a label action (a label request).
    pub query: bool,
    pub observed: bool,
    pub v_t: f64,
    /// Exact probability of observing `y_true` under the round's distribution.
    pub observation_probability: f64,
    /// `sum_y p'(y) 1[y != y_true]`.
    pub expected_mistake: f64,
    /// Total mass of the sampling distribution.
    pub p_total: f64,
    /// Smallest entry of the sampling distribution.
    pub p_min: f64,
    /// Surrogate loss `l_t(W_t)` of the true label before the update.
    pub surrogate_at_w: f64,
}

/// Running totals at a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub cum_mistakes: u64,
    pub cum_queries: u64,
    pub cum_surrogate: f64,
    pub cum_explore_gamma: f64,
}

impl Checkpoint {
    pub fn error_rate(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.cum_mistakes as f64 / self.t as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProtocolOptions {
    /// Rounds at which to snapshot totals.
    pub checkpoints: Vec<u64>,
    pub keep_records: bool,
    pub keep_examples: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub checkpoints: Vec<Checkpoint>,
    pub records: Vec<RoundRecord>,
    pub examples: Vec<Example>,
    pub total_mistakes: u64,
    pub total_queries: u64,
}

/// Plays `horizon` rounds. Each round the environment draws `(x_t, y_t)`, the
/// learner samples `y'_t`, the graph reveals `(y, 1[y != y_t])` for
/// `y in out(y'_t)` and the learner updates from that feedback alone.
///
/// `loss` scores `W_t` on the true label for the surrogate columns.
pub fn run_protocol(
    env: &mut dyn Environment,
    graph: &FeedbackGraph,
    learner: &mut dyn Learner,
    loss: &SurrogateLoss,
    horizon: u64,
    rng: &mut ChaCha8Rng,
    options: &ProtocolOptions,
) -> Result<RunResult> {
    if env.n_classes() != graph.n_classes() {
        return Err(Error::Incompatible {
            learner: learner.name().to_string(),
            graph: graph.name(),
            reason: format!(
                "environment has {} classes but the graph has {} label actions",
                env.n_classes(),
                graph.n_classes()
            ),
        });
    }
    if learner.weights().nrows() != graph.n_actions() || learner.weights().ncols() != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_actions() * env.dim(),
            got: learner.weights().len(),
        });
    }

    let mut result = RunResult::default();
    let mut next_checkpoint = options.checkpoints.iter().copied().peekable();
    let mut totals = Checkpoint {
        t: 0,
        cum_mistakes: 0,
        cum_queries: 0,
        cum_surrogate: 0.0,
        cum_explore_gamma: 0.0,
    };
    let labels = graph.label_actions();

    for t in 1..=horizon {
        let example = env.next_example();
        let y_true = labels[example.y];
        let x: ArrayView1<f64> = example.x.view();

        let surrogate_at_w = loss.value(learner.weights(), x, y_true)?;
        let decision = learner.predict(x, rng)?;
        let outcome = &decision.outcome;
        let y_prime = decision.action;
        let feedback = Feedback::reveal(graph, y_prime, y_true);
        let info = learner.update(x, &feedback)?;

        let mistake = y_prime != y_true;
        let query = !graph.is_label_action(y_prime);
        totals.t = t;
        totals.cum_mistakes += u64::from(mistake);
        totals.cum_queries += u64::from(query);
        totals.cum_surrogate += surrogate_at_w;
        totals.cum_explore_gamma += outcome.gamma_t;

        if options.keep_records {
            result.records.push(RoundRecord {
                t,
                y_true,
                y_star: outcome.y_star,
                a_t: outcome.a_t,
                gamma_t: outcome.gamma_t,
                zeta_t: outcome.zeta_t,
                y_prime,
                mistake,
                query,
                observed: graph.observes(y_prime, y_true),
                v_t: info.importance_weight,
                observation_probability: observation_probability(&outcome.p_prime, graph, y_true),
                expected_mistake: outcome.expected_mistake(y_true),
                p_total: outcome.p_prime.iter().sum(),
                p_min: outcome.p_prime.iter().copied().fold(f64::INFINITY, f64::min),
                surrogate_at_w,
            });
        }
        if options.keep_examples {
            result.examples.push(example);
        }
        while next_checkpoint.next_if(|&c| c <= t).is_some() {
            result.checkpoints.push(totals);
        }
    }
    result.total_mistakes = totals.cum_mistakes;
    result.total_queries = totals.cum_queries;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gappletron::Gappletron;
    use crate::graph::GraphKind;
    use crate::oco::OcoMode;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn keyword_sizes_and_positions() {
        for (k, dp) in [(6, 2), (9, 1), (12, 4)] {
            let cfg = SynthConfig::new(k, dp, 0.0).unwrap();
            let table = KeywordTable::generate(&cfg, &mut rng(5));
            assert_eq!(table.sets.len(), k);
            for set in &table.sets {
                assert!(set.len() >= dp && set.len() <= 5 * dp);
                assert!(set.iter().all(|&i| i < 10 * dp));
                assert!(set.windows(2).all(|w| w[0] < w[1]));
            }
            assert_eq!(table, KeywordTable::generate(&cfg, &mut rng(5)));
        }
    }

    #[test]
    fn popcount_range() {
        let cfg = SynthConfig::new(6, 2, 0.0).unwrap();
        assert_eq!(cfg.dim(), 80);
        let table = KeywordTable::generate(&cfg, &mut rng(1));
        let mut r = rng(2);
        for _ in 0..2000 {
            let e = sample_example(&cfg, &table, &mut r);
            let ones = e.x.iter().filter(|&&v| v == 1.0).count();
            let kw = table.sets[e.source_class].len();
            assert_eq!(ones, kw + 10);
            assert!((12..=20).contains(&ones));
            assert_eq!(e.x.slice(ndarray::s![20..]).iter().filter(|&&v| v == 1.0).count(), 10);
            assert_eq!(e.y, e.source_class);
        }
    }

    #[test]
    fn full_noise_decouples_labels() {
        let cfg = SynthConfig::new(6, 1, 1.0).unwrap();
        let table = KeywordTable::generate(&cfg, &mut rng(1));
        let mut r = rng(3);
        let n = 100_000;
        let agree = (0..n)
            .filter(|_| {
                let e = sample_example(&cfg, &table, &mut r);
                e.y == e.source_class
            })
            .count();
        let p = 1.0 / 6.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((agree as f64 / n as f64 - p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::new(1, 2, 0.0).is_err());
        assert!(SynthConfig::new(3, 0, 0.0).is_err());
        assert!(SynthConfig::new(3, 2, 1.5).is_err());
    }

    #[test]
    fn checkpoints_are_log_spaced() {
        let c = log_checkpoints(100_000, 50);
        assert_eq!(c.first(), Some(&1));
        assert_eq!(c.last(), Some(&100_000));
        assert!(c.len() <= 56 && c.len() > 40);
        for decade in [1, 10, 100, 1000, 10_000, 100_000] {
            assert!(c.contains(&decade));
        }
        assert!(log_checkpoints(0, 50).is_empty());
        assert_eq!(log_checkpoints(3, 50), vec![1, 2, 3]);
    }

    #[test]
    fn run_rngs_are_distinct_and_reproducible() {
        use rand::RngCore;
        let (mut a, mut b) = run_rngs(7, 0);
        let (mut c, _) = run_rngs(7, 1);
        let (mut a2, _) = run_rngs(7, 0);
        let first = a.next_u64();
        assert_eq!(first, a2.next_u64());
        assert_ne!(first, b.next_u64());
        assert_ne!(first, c.next_u64());
    }

    fn setup(kind: GraphKind, k: usize) -> (SyntheticStream, FeedbackGraph, Gappletron) {
        let cfg = SynthConfig::new(k, 1, 0.0).unwrap();
        let stream = SyntheticStream::new(cfg, rng(11));
        let graph = FeedbackGraph::standard(kind, k).unwrap();
        let learner = Gappletron::new(
            graph.clone(),
            SurrogateLoss::smooth_hinge(),
            1.0,
            cfg.dim(),
            OcoMode::Unprojected,
        )
        .unwrap();
        (stream, graph, learner)
    }

    #[test]
    fn zero_rounds_is_empty() {
        let (mut env, graph, mut l) = setup(GraphKind::Bandit, 3);
        let opts = ProtocolOptions {
            checkpoints: log_checkpoints(0, 50),
            keep_records: true,
            keep_examples: true,
        };
        let r = run_protocol(&mut env, &graph, &mut l, &SurrogateLoss::smooth_hinge(), 0, &mut rng(0), &opts).unwrap();
        assert!(r.checkpoints.is_empty() && r.records.is_empty() && r.examples.is_empty());
    }

    #[test]
    fn counters_match_records() {
        let (mut env, graph, mut l) = setup(GraphKind::LabelEfficient, 4);
        let opts = ProtocolOptions {
            checkpoints: log_checkpoints(500, 50),
            keep_records: true,
            keep_examples: false,
        };
        let r = run_protocol(&mut env, &graph, &mut l, &SurrogateLoss::smooth_hinge(), 500, &mut rng(1), &opts).unwrap();
        let mistakes = r.records.iter().filter(|rec| rec.mistake).count() as u64;
        let queries = r.records.iter().filter(|rec| rec.query).count() as u64;
        assert_eq!(r.total_mistakes, mistakes);
        assert_eq!(r.total_queries, queries);
        assert!(queries > 0);
        for rec in &r.records {
            if rec.query {
                assert!(rec.mistake);
                assert!(rec.observed);
            }
            assert_eq!(rec.v_t > 0.0, rec.observed);
            if rec.observed {
                assert!((rec.v_t * rec.observation_probability - 1.0).abs() < 1e-12);
            }
        }
        let last = r.checkpoints.last().unwrap();
        assert_eq!(last.t, 500);
        assert_eq!(last.cum_mistakes, mistakes);
        assert!(r.checkpoints.windows(2).all(|w| w[0].cum_mistakes <= w[1].cum_mistakes));
    }

    #[test]
    fn full_information_feedback_has_every_action() {
        let graph = FeedbackGraph::standard(GraphKind::FullInformation, 5).unwrap();
        for played in 0..5 {
            assert_eq!(Feedback::reveal(&graph, played, 2).pairs.len(), 5);
        }
    }

    #[test]
    fn class_count_mismatch_is_rejected() {
        let (mut env, _, _) = setup(GraphKind::Bandit, 3);
        let graph = FeedbackGraph::standard(GraphKind::Bandit, 4).unwrap();
        let mut l = Gappletron::new(graph.clone(), SurrogateLoss::smooth_hinge(), 1.0, 40, OcoMode::Unprojected).unwrap();
        let err = run_protocol(&mut env, &graph, &mut l, &SurrogateLoss::smooth_hinge(), 5, &mut rng(0), &ProtocolOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Incompatible { .. }));
    }

    #[test]
    fn runs_are_reproducible() {
        let go = || {
            let (mut env, graph, mut l) = setup(GraphKind::Bandit, 3);
            let opts = ProtocolOptions { keep_records: true, ..Default::default() };
            run_protocol(&mut env, &graph, &mut l, &SurrogateLoss::smooth_hinge(), 300, &mut rng(4), &opts)
                .unwrap()
                .records
        };
        assert_eq!(go(), go());
    }
}
