//! Online multiclass classification with feedback graphs.
//!
//! The crate provides the Gappletron learner together with everything needed
//! to benchmark it: directed feedback graphs ([`graph`]), surrogate losses
//! ([`loss`]), the adaptive OCO core ([`oco`]), baseline learners
//! ([`baselines`]), synthetic keyword streams and the interaction protocol
//! ([`env`]), an offline comparator for surrogate regret ([`comparator`]) and
//! a suite of per-round property checks ([`validate`]).

pub mod baselines;
pub mod comparator;
pub mod env;
pub mod error;
pub mod gappletron;
pub mod graph;
pub mod learner;
pub mod loss;
pub mod oco;
pub mod validate;

pub use baselines::{Baseline, BaselineKind, ExploreRule};
pub use comparator::{offline_comparator, Comparator, RegretReport};
pub use env::{
    log_checkpoints, run_protocol, run_rngs, Checkpoint, Environment, Example, ProtocolOptions,
    RoundRecord, RunResult, SynthConfig, SyntheticStream,
};
pub use error::{Error, Result};
pub use gappletron::{mistake_bound_factor, theory_gamma, Gappletron, TheoryInputs, Tuning};
pub use graph::{FeedbackGraph, GraphKind, GraphSummary, RawGraph};
pub use learner::{Decision, Feedback, Learner, PredictionOutcome, UpdateInfo};
pub use loss::{LossKind, SurrogateLoss};
pub use oco::{OcoMode, OcoState};
