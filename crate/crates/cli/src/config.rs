use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use graphtron_core::baselines::banditron_explore_rate;
use graphtron_core::{
    theory_gamma, Baseline, BaselineKind, ExploreRule, FeedbackGraph, Gappletron, GraphKind, Learner,
    OcoMode, SurrogateLoss, SynthConfig, TheoryInputs, Tuning,
};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerArg {
    Gappletron,
    Perceptron,
    Pa,
    Banditron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Logistic,
    SmoothHinge,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcoArg {
    Adaptive,
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningArg {
    Unit,
    TheoryExpectation,
    TheoryHp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExploreRuleArg {
    Min,
    Max,
}

macro_rules! display_as_value {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
            }
        }
    )*};
}
display_as_value!(LearnerArg, LossArg, OcoArg, TuningArg, ExploreRuleArg);

/// One run configuration. Shared by the `run` flags and the `[[run]]`
/// entries of a sweep file, so both accept the same keys.
#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Graph kind (full, bandit, apple, label-efficient, spam-filter) or a
    /// path to a graph file
    #[arg(long, default_value = "bandit")]
    pub graph: String,
    #[arg(long, value_enum, default_value_t = LearnerArg::Gappletron)]
    pub learner: LearnerArg,
    #[arg(long, value_enum, default_value_t = LossArg::SmoothHinge)]
    pub loss: LossArg,
    /// Gate of the hinge loss
    #[arg(long, default_value_t = 0.5)]
    pub kappa: f64,
    #[arg(long, value_enum, default_value_t = OcoArg::Adaptive)]
    pub oco: OcoArg,
    /// Comparator norm bound B: projection radius and theory-preset input
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Explicit exploration parameter; overrides --tuning
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = TuningArg::Unit)]
    pub tuning: TuningArg,
    /// Confidence level of the high-probability preset
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Bound on loss values for the high-probability preset [default: 1 + B G]
    #[arg(long)]
    pub ell_max: Option<f64>,
    /// Banditron exploration rate [default: from --explore-rule]
    #[arg(long)]
    pub explore: Option<f64>,
    #[arg(long, value_enum, default_value_t = ExploreRuleArg::Min)]
    pub explore_rule: ExploreRuleArg,
    /// Number of classes
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    /// Scale of the feature dimension d = 40 d'
    #[arg(long, default_value_t = 2)]
    pub dprime: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of log-spaced checkpoints
    #[arg(long, default_value_t = 50)]
    pub checkpoints: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            graph: "bandit".into(),
            learner: LearnerArg::Gappletron,
            loss: LossArg::SmoothHinge,
            kappa: 0.5,
            oco: OcoArg::Adaptive,
            radius: 1.0,
            gamma: None,
            tuning: TuningArg::Unit,
            delta: 0.05,
            ell_max: None,
            explore: None,
            explore_rule: ExploreRuleArg::Min,
            k: 6,
            dprime: 2,
            noise: 0.0,
            rounds: 10_000,
            reps: 1,
            seed: 0,
            checkpoints: 50,
        }
    }
}

/// A configuration with its graph, loss and stream checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub graph: FeedbackGraph,
    pub graph_name: String,
    pub loss: SurrogateLoss,
    pub synth: SynthConfig,
    /// `gamma` for the Gappletron, the exploration rate for the Banditron.
    pub gamma: Option<f64>,
    pub tuning_label: Option<String>,
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        if self.reps == 0 {
            bail!("--reps must be at least 1");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            bail!("--radius must be positive, got {}", self.radius);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("--delta must lie in (0, 1), got {}", self.delta);
        }
        let graph = load_graph(&self.graph, self.k)?;
        let graph_name = graph.name();
        let synth = SynthConfig::new(graph.n_classes(), self.dprime, self.noise)?;
        let loss = match self.loss {
            LossArg::Logistic => SurrogateLoss::logistic(),
            LossArg::SmoothHinge => SurrogateLoss::smooth_hinge(),
            LossArg::Hinge => SurrogateLoss::hinge(self.kappa)?,
        };
        let (gamma, tuning_label) = match self.learner {
            LearnerArg::Gappletron => {
                let gamma = match self.gamma {
                    Some(g) => g,
                    None => theory_gamma(self.core_tuning(), &self.theory_inputs(&graph, &loss, &synth)),
                };
                let label = if self.gamma.is_some() { "manual".to_string() } else { self.tuning.to_string() };
                (Some(gamma), Some(label))
            }
            LearnerArg::Banditron => {
                let rule = match self.explore_rule {
                    ExploreRuleArg::Min => ExploreRule::Min,
                    ExploreRuleArg::Max => ExploreRule::Max,
                };
                let rate = self
                    .explore
                    .unwrap_or_else(|| banditron_explore_rate(synth.max_sq_norm(), self.rounds, rule));
                (Some(rate), None)
            }
            LearnerArg::Perceptron | LearnerArg::Pa => (None, None),
        };
        let resolved = Resolved {
            config: self.clone(),
            graph,
            graph_name,
            loss,
            synth,
            gamma,
            tuning_label,
        };
        // Surface incompatible learner/graph pairs before any run starts.
        resolved.learner()?;
        Ok(resolved)
    }

    fn core_tuning(&self) -> Tuning {
        match self.tuning {
            TuningArg::Unit => Tuning::Unit,
            TuningArg::TheoryExpectation => Tuning::TheoryExpectation,
            TuningArg::TheoryHp => Tuning::TheoryHighProbability,
        }
    }

    fn theory_inputs(&self, graph: &FeedbackGraph, loss: &SurrogateLoss, synth: &SynthConfig) -> TheoryInputs {
        let max_sq = synth.max_sq_norm();
        let grad_bound = 2.0 * max_sq.sqrt();
        TheoryInputs {
            radius: self.radius,
            smoothness: loss.smoothness_for_norm(max_sq, graph.n_actions()),
            rho: graph.summary().rho,
            n_actions: graph.n_actions(),
            delta: self.delta,
            ell_max: self.ell_max.unwrap_or(1.0 + self.radius * grad_bound),
        }
    }
}

impl Resolved {
    pub fn oco_mode(&self) -> OcoMode {
        match self.config.oco {
            OcoArg::Adaptive => OcoMode::Unprojected,
            OcoArg::Projected => OcoMode::Projected {
                radius: self.config.radius,
            },
        }
    }

    /// A fresh learner for one repetition.
    pub fn learner(&self) -> Result<Box<dyn Learner>> {
        let dim = self.synth.dim();
        let graph = self.graph.clone();
        Ok(match self.config.learner {
            LearnerArg::Gappletron => Box::new(Gappletron::new(
                graph,
                self.loss,
                self.gamma.unwrap_or(1.0),
                dim,
                self.oco_mode(),
            )?),
            LearnerArg::Perceptron => Box::new(Baseline::new(BaselineKind::Perceptron, graph, dim, 1.0)?),
            LearnerArg::Pa => Box::new(Baseline::new(BaselineKind::PassiveAggressive, graph, dim, 1.0)?),
            LearnerArg::Banditron => Box::new(Baseline::new(
                BaselineKind::BanditronIw,
                graph,
                dim,
                self.gamma.unwrap_or(0.5),
            )?),
        })
    }

    /// True when the graph has actions that are not labels.
    pub fn counts_queries(&self) -> bool {
        self.graph.label_actions().len() < self.graph.n_actions()
    }
}

/// A standard graph by name, or a graph file.
pub fn load_graph(spec: &str, k: usize) -> Result<FeedbackGraph> {
    if let Ok(kind) = spec.parse::<GraphKind>() {
        return FeedbackGraph::standard(kind, k).with_context(|| format!("cannot build the {kind} graph with K = {k}"));
    }
    let path = Path::new(spec);
    if !path.exists() {
        let names: Vec<&str> = GraphKind::ALL.iter().map(|g| g.as_str()).collect();
        bail!("unknown graph '{spec}': expected one of {} or a graph file", names.join(", "));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    FeedbackGraph::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_expectation_on_label_efficient() {
        let cfg = RunConfig {
            graph: "label-efficient".into(),
            tuning: TuningArg::TheoryExpectation,
            ..Default::default()
        };
        let r = cfg.resolve().unwrap();
        // L = 4 * 20, seven actions, one revealing action.
        let want = 0.5 * (7.0f64 * 80.0).sqrt();
        assert!((r.gamma.unwrap() - want).abs() < 1e-12);
        assert_eq!(r.tuning_label.as_deref(), Some("theory-expectation"));
        assert!(r.counts_queries());
    }

    #[test]
    fn explicit_gamma_wins() {
        let cfg = RunConfig {
            gamma: Some(0.25),
            tuning: TuningArg::TheoryHp,
            ..Default::default()
        };
        let r = cfg.resolve().unwrap();
        assert_eq!(r.gamma, Some(0.25));
        assert_eq!(r.tuning_label.as_deref(), Some("manual"));
    }

    #[test]
    fn incompatible_pairs_fail_early() {
        let cfg = RunConfig {
            learner: LearnerArg::Perceptron,
            ..Default::default()
        };
        let err = cfg.resolve().unwrap_err();
        assert!(format!("{err:#}").contains("full-information"), "{err:#}");
        let cfg = RunConfig {
            graph: "apple".into(),
            ..Default::default()
        };
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn banditron_default_rate() {
        let cfg = RunConfig {
            learner: LearnerArg::Banditron,
            rounds: 100_000,
            ..Default::default()
        };
        let r = cfg.resolve().unwrap();
        let want = (20.0f64 / 100_000.0).cbrt();
        assert!((r.gamma.unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn unknown_graph_lists_kinds() {
        let err = load_graph("nope", 3).unwrap_err();
        assert!(err.to_string().contains("label-efficient"));
    }
}
