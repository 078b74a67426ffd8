//! Property suite behind the `validate` command.
//!
//! Every check returns a [`PropertyOutcome`]. Asserted properties pass or
//! fail; informational ones only report numbers (the base-K logistic loss
//! with `K >= 3` is known to break the wrong-plus-right condition at two-way
//! ties, so its counts are reported without failing the suite).

use std::fmt;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{log_checkpoints, run_protocol, run_rngs, ProtocolOptions, RoundRecord, SynthConfig, SyntheticStream};
use crate::error::Result;
use crate::gappletron::{mistake_bound_factor, Gappletron};
use crate::graph::{exact_domination_number, FeedbackGraph, GraphKind, RawGraph};
use crate::learner::{observation_probability, sample_action};
use crate::loss::{check_regularity, LossKind, Margins, SurrogateLoss};
use crate::oco::OcoMode;

/// Slack allowed in the per-round mistake bound.
pub const LEMMA_TOL: f64 = 1e-9;
/// Tolerance on `sum p' = 1`.
pub const DISTRIBUTION_TOL: f64 = 1e-12;
/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Relative error allowed between analytic and finite-difference gradients.
pub const FD_REL_TOL: f64 = 1e-5;
/// Distance from a hinge kink below which a point is skipped.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl PropertyOutcome {
    fn asserted(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    fn info(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Info,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.status, self.name, self.detail)
    }
}

/// Sizes used by [`run_suite`].
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub regularity_samples: usize,
    pub regularity_classes: Vec<usize>,
    pub regularity_dim: usize,
    pub gradient_points: usize,
    pub lemma_rounds: u64,
    pub lemma_seeds: Vec<u64>,
    pub monte_carlo_samples: usize,
    pub random_graphs: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            regularity_samples: 10_000,
            regularity_classes: vec![2, 6, 9, 12],
            regularity_dim: 10,
            gradient_points: 1_000,
            lemma_rounds: 10_000,
            lemma_seeds: vec![0],
            monte_carlo_samples: 1_000_000,
            random_graphs: 100,
            seed: 2021,
        }
    }
}

/// Runs every property and returns one outcome per check.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    out.extend(regularity_properties(config)?);
    out.extend(gradient_properties(config)?);
    for kind in GraphKind::ALL {
        for loss in [
            SurrogateLoss::smooth_hinge(),
            SurrogateLoss::hinge(0.5)?,
            SurrogateLoss::logistic(),
        ] {
            for &seed in &config.lemma_seeds {
                out.extend(round_properties(kind, loss, seed, config.lemma_rounds)?);
            }
        }
    }
    for kind in [GraphKind::Bandit, GraphKind::AppleTasting] {
        out.push(unbiasedness(kind, config.monte_carlo_samples, config.seed)?);
    }
    out.push(dominating_set_property(config.random_graphs, config.seed)?);
    Ok(out)
}

/// Regularity audits for every loss and class count.
pub fn regularity_properties(config: &SuiteConfig) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for &k in &config.regularity_classes {
        for loss in [
            SurrogateLoss::smooth_hinge(),
            SurrogateLoss::hinge(0.5)?,
            SurrogateLoss::logistic(),
        ] {
            let r = check_regularity(&loss, k, config.regularity_dim, config.regularity_samples, &mut rng)?;
            let name = format!("regularity {loss} K={k}");
            let detail = format!(
                "wrong-plus-right violations {:.4}, gradient-bound violations {:.4}, max ratio {:.4}",
                r.eq2_violation_rate, r.eq3_violation_rate, r.max_eq3_ratio
            );
            out.push(match loss.kind {
                LossKind::SmoothHinge => PropertyOutcome::asserted(
                    name,
                    r.eq2_violation_rate == 0.0 && r.eq3_violation_rate == 0.0,
                    detail,
                ),
                LossKind::Hinge => PropertyOutcome::asserted(name, r.eq3_violation_rate == 0.0, detail),
                LossKind::Logistic if k == 2 => PropertyOutcome::asserted(
                    name,
                    r.eq2_violation_rate == 0.0 && r.eq3_violation_rate == 0.0,
                    detail,
                ),
                _ => PropertyOutcome::info(name, detail),
            });
        }
    }
    Ok(out)
}

/// Central finite-difference gradient of `loss(., x, y)` at `w`, computed
/// from loss values only.
pub fn finite_difference_gradient(
    loss: &SurrogateLoss,
    w: &Array2<f64>,
    x: &Array1<f64>,
    y: usize,
    step: f64,
) -> Result<Array2<f64>> {
    let mut probe = w.clone();
    let mut grad = Array2::zeros(w.raw_dim());
    for idx in 0..w.len() {
        let (r, c) = (idx / w.ncols(), idx % w.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + step;
        let up = loss.value(probe.view(), x.view(), y)?;
        probe[[r, c]] = orig - step;
        let down = loss.value(probe.view(), x.view(), y)?;
        probe[[r, c]] = orig;
        grad[[r, c]] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|)` in Frobenius norm; zero when both vanish.
pub fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let diff = (analytic - numeric).iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = analytic
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(numeric.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// True when `(w, x, y)` sits at least [`KINK_MARGIN`] away from every
/// non-differentiable point of the hinge losses.
pub fn away_from_hinge_kinks(loss: &SurrogateLoss, w: &Array2<f64>, x: &Array1<f64>, y: usize) -> bool {
    let s = w.dot(x);
    let m = Margins::of(&s, y);
    let mut sorted: Vec<f64> = s.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let distinct_scores = sorted.windows(2).all(|p| p[0] - p[1] > KINK_MARGIN);
    distinct_scores
        && (1.0 - m.margin).abs() > KINK_MARGIN
        && (m.star_margin - loss.kappa).abs() > KINK_MARGIN
}

/// Finite-difference agreement on random points for every loss.
pub fn gradient_properties(config: &SuiteConfig) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37);
    let (k, d) = (5, 4);
    for loss in [
        SurrogateLoss::logistic(),
        SurrogateLoss::smooth_hinge(),
        SurrogateLoss::hinge(0.5)?,
    ] {
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        let mut attempts = 0usize;
        while checked < config.gradient_points && attempts < 100 * config.gradient_points {
            attempts += 1;
            let w = Array2::from_shape_fn((k, d), |_| rng.sample::<f64, _>(StandardNormal));
            let x = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
            let y = rng.random_range(0..k);
            if loss.kind == LossKind::Hinge && !away_from_hinge_kinks(&loss, &w, &x, y) {
                continue;
            }
            let analytic = loss.gradient(w.view(), x.view(), y)?;
            let numeric = finite_difference_gradient(&loss, &w, &x, y, FD_STEP)?;
            worst = worst.max(relative_error(&analytic, &numeric));
            checked += 1;
        }
        out.push(PropertyOutcome::asserted(
            format!("gradient {loss}"),
            checked == config.gradient_points && worst <= FD_REL_TOL,
            format!("{checked} points, worst relative error {worst:.3e}"),
        ));
    }
    Ok(out)
}

/// Summary of the per-round checks over one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundAudit {
    pub rounds: usize,
    pub lemma_violations: usize,
    pub worst_lemma_gap: f64,
    pub distribution_violations: usize,
    pub estimator_violations: usize,
    pub budget_violations: usize,
    pub full_info_violations: usize,
}

/// Checks every round of a Gappletron run: the mistake bound, validity of
/// `p'`, `v_t P_t = 1[observed]`, the exploration budget
/// `sum gamma_s <= 2 gamma sqrt(n_t)` and, on full-information graphs,
/// `gamma_t = 0, zeta_t = 1, v_t = 1`.
pub fn audit_rounds(
    records: &[RoundRecord],
    graph: &FeedbackGraph,
    loss: &SurrogateLoss,
    gamma: f64,
) -> RoundAudit {
    let summary = graph.summary();
    let factor = mistake_bound_factor(loss, graph.n_actions());
    let full_info = summary.revealing_set.len() == graph.n_actions();
    let mut audit = RoundAudit {
        rounds: records.len(),
        worst_lemma_gap: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut gamma_sum = 0.0;
    let mut explore_count = 0u64;
    for r in records {
        let gap = r.expected_mistake - (factor * r.surrogate_at_w + r.gamma_t);
        audit.worst_lemma_gap = audit.worst_lemma_gap.max(gap);
        if gap > LEMMA_TOL {
            audit.lemma_violations += 1;
        }
        if (r.p_total - 1.0).abs() > DISTRIBUTION_TOL || r.p_min < 0.0 {
            audit.distribution_violations += 1;
        }
        let estimator_ok = if r.observed {
            r.observation_probability > 0.0 && (r.v_t * r.observation_probability - 1.0).abs() <= 1e-12
        } else {
            r.v_t == 0.0
        };
        if !estimator_ok {
            audit.estimator_violations += 1;
        }
        if !summary.is_revealing(r.y_star) {
            explore_count += 1;
        }
        gamma_sum += r.gamma_t;
        if gamma_sum > 2.0 * gamma * (explore_count as f64).sqrt() + LEMMA_TOL {
            audit.budget_violations += 1;
        }
        if full_info && (r.gamma_t != 0.0 || !r.zeta_t || r.v_t != 1.0) {
            audit.full_info_violations += 1;
        }
    }
    audit
}

/// Number of classes used for a graph kind in the suite.
pub fn suite_classes(kind: GraphKind) -> usize {
    match kind {
        GraphKind::AppleTasting => 2,
        _ => 6,
    }
}

/// Runs Gappletron with unit tuning on a noisy keyword stream and keeps all
/// round records.
pub fn gappletron_run(
    kind: GraphKind,
    loss: SurrogateLoss,
    seed: u64,
    rounds: u64,
) -> Result<(Vec<RoundRecord>, FeedbackGraph, f64)> {
    let k = suite_classes(kind);
    let graph = FeedbackGraph::standard(kind, k)?;
    let cfg = SynthConfig::new(k, 2, 0.1)?;
    let (data_rng, mut learner_rng) = run_rngs(seed, 0);
    let mut env = SyntheticStream::new(cfg, data_rng);
    let gamma = 1.0;
    let mut learner = Gappletron::new(graph.clone(), loss, gamma, cfg.dim(), OcoMode::Unprojected)?;
    let opts = ProtocolOptions {
        checkpoints: log_checkpoints(rounds, 50),
        keep_records: true,
        keep_examples: false,
    };
    let result = run_protocol(&mut env, &graph, &mut learner, &loss, rounds, &mut learner_rng, &opts)?;
    Ok((result.records, graph, gamma))
}

/// Per-round properties of one run.
pub fn round_properties(
    kind: GraphKind,
    loss: SurrogateLoss,
    seed: u64,
    rounds: u64,
) -> Result<Vec<PropertyOutcome>> {
    let (records, graph, gamma) = gappletron_run(kind, loss, seed, rounds)?;
    let a = audit_rounds(&records, &graph, &loss, gamma);
    let tag = format!("{kind} {loss} seed={seed}");
    let lemma_detail = format!(
        "{} violations in {} rounds, worst gap {:.3e}",
        a.lemma_violations, a.rounds, a.worst_lemma_gap
    );
    let lemma = if loss.kind == LossKind::Logistic && graph.n_actions() >= 3 {
        PropertyOutcome::info(format!("mistake bound {tag}"), lemma_detail)
    } else {
        PropertyOutcome::asserted(format!("mistake bound {tag}"), a.lemma_violations == 0, lemma_detail)
    };
    let mut out = vec![
        lemma,
        PropertyOutcome::asserted(
            format!("distribution {tag}"),
            a.distribution_violations == 0,
            format!("{} invalid distributions", a.distribution_violations),
        ),
        PropertyOutcome::asserted(
            format!("importance weights {tag}"),
            a.estimator_violations == 0,
            format!("{} rounds with v_t P_t != observed", a.estimator_violations),
        ),
        PropertyOutcome::asserted(
            format!("exploration budget {tag}"),
            a.budget_violations == 0,
            format!("{} rounds over budget", a.budget_violations),
        ),
    ];
    if kind == GraphKind::FullInformation {
        out.push(PropertyOutcome::asserted(
            format!("full-information specialisation {tag}"),
            a.full_info_violations == 0,
            format!("{} rounds with exploration or reweighting", a.full_info_violations),
        ));
    }
    Ok(out)
}

/// Exact and Monte-Carlo expectations of the importance weight at a fixed
/// round state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnbiasednessCheck {
    /// `sum_{y'} p'(y') v(y')`.
    pub exact: f64,
    pub monte_carlo: f64,
    /// Standard error of the Monte-Carlo mean.
    pub sigma: f64,
}

impl UnbiasednessCheck {
    pub fn passes(&self) -> bool {
        (self.exact - 1.0).abs() <= 1e-12 && (self.monte_carlo - 1.0).abs() <= 3.0 * self.sigma
    }
}

/// Builds a non-trivial round state on `kind` (a learner that has seen a few
/// examples), then checks `E[v] = 1` for every label with positive
/// observation probability.
pub fn unbiasedness_check(kind: GraphKind, samples: usize, seed: u64) -> Result<Vec<UnbiasednessCheck>> {
    let k = suite_classes(kind);
    let graph = FeedbackGraph::standard(kind, k)?;
    let cfg = SynthConfig::new(k, 2, 0.1)?;
    let (data_rng, mut learner_rng) = run_rngs(seed, 0);
    let mut env = SyntheticStream::new(cfg, data_rng);
    let loss = SurrogateLoss::smooth_hinge();
    let mut learner = Gappletron::new(graph.clone(), loss, 1.0, cfg.dim(), OcoMode::Unprojected)?;
    run_protocol(&mut env, &graph, &mut learner, &loss, 50, &mut learner_rng, &ProtocolOptions::default())?;

    use crate::env::Environment;
    let x = env.next_example().x;
    let p = learner.predict_distribution(x.view())?.p_prime;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut checks = Vec::new();
    for &y in graph.label_actions() {
        let prob = observation_probability(&p, &graph, y);
        if prob <= 0.0 {
            continue;
        }
        let weight = |a: usize| if graph.observes(a, y) { 1.0 / prob } else { 0.0 };
        let exact: f64 = p.iter().enumerate().map(|(a, &pa)| pa * weight(a)).sum();
        let total: f64 = (0..samples).map(|_| weight(sample_action(&p, &mut rng))).sum();
        let variance = 1.0 / prob - 1.0;
        checks.push(UnbiasednessCheck {
            exact,
            monte_carlo: total / samples as f64,
            sigma: (variance / samples as f64).sqrt(),
        });
    }
    Ok(checks)
}

pub fn unbiasedness(kind: GraphKind, samples: usize, seed: u64) -> Result<PropertyOutcome> {
    let checks = unbiasedness_check(kind, samples, seed)?;
    let ok = !checks.is_empty() && checks.iter().all(UnbiasednessCheck::passes);
    let worst = checks
        .iter()
        .map(|c| (c.monte_carlo - 1.0).abs() / c.sigma.max(f64::MIN_POSITIVE))
        .fold(0.0f64, f64::max);
    Ok(PropertyOutcome::asserted(
        format!("unbiased importance weights {kind}"),
        ok,
        format!("{} labels, worst Monte-Carlo deviation {worst:.2} sigma", checks.len()),
    ))
}

/// A random graph on at most `max_nodes` nodes, patched with self-loops so
/// that every node is observed.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> Result<FeedbackGraph> {
    let n = rng.random_range(1..=max_nodes);
    let density = rng.random_range(0.05..0.6);
    let mut out: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..n).filter(|_| rng.random::<f64>() < density).collect())
        .collect();
    for y in 0..n {
        if !out.iter().any(|targets| targets.contains(&y)) {
            out[y].push(y);
        }
    }
    FeedbackGraph::validate(RawGraph {
        n_actions: n,
        out,
        label_actions: None,
    })
}

pub fn dominating_set_property(n_graphs: usize, seed: u64) -> Result<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut failures = Vec::new();
    for i in 0..n_graphs {
        let g = random_graph(&mut rng, 12)?;
        let greedy = g.greedy_dominating_set();
        if !g.dominates(&greedy) || greedy.len() < exact_domination_number(&g)? {
            failures.push(i);
        }
    }
    for kind in GraphKind::ALL {
        let g = FeedbackGraph::standard(kind, suite_classes(kind))?;
        if g.greedy_dominating_set().len() != exact_domination_number(&g)? {
            failures.push(usize::MAX);
        }
    }
    Ok(PropertyOutcome::asserted(
        "dominating sets",
        failures.is_empty(),
        format!("{n_graphs} random graphs and 5 standard graphs, {} failures", failures.len()),
    ))
}

/// True when `p` is a probability vector within [`DISTRIBUTION_TOL`].
pub fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&v| v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= DISTRIBUTION_TOL
}
