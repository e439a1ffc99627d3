//! Simulated question-answering environment standing in for a language
//! model: world generation, a logistic when-to-search policy and the
//! rollout engine that turns a policy decision into a tagged trajectory.

mod features;
mod policy;
mod rollout;
pub mod seeding;
mod world;

use thiserror::Error;

pub use features::{
    entity_count, FeatureExtractor, BIAS, CONFIDENCE, ENTITY_COUNT, FEATURE_DIM, PROMPT_LENGTH,
};
pub use policy::{
    act, act_greedy, action_logprob, sigmoid, softplus, Action, Policy, PolicyParams,
    ScriptedPolicy,
};
pub use rollout::{build_trajectory, rollout, rollout_greedy, RolloutOutcome};
pub use world::{
    gen_world, Dataset, GeneratedWorld, InternalKnowledge, Question, SimConfig, World,
    DEFAULT_FAULT_RATE, DEFAULT_LABEL_NOISE,
};

use crate::retrieval::RetrievalError;
use crate::scoring::ScoringError;
use crate::trajectory::TrajectoryError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least one known and one unknown question (got {n_known}, {n_unknown})")]
    InvalidCount { n_known: usize, n_unknown: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("policy weights must be non-empty and finite")]
    InvalidParams,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("inconsistent world: {0}")]
    InvalidWorld(String),
    #[error("gold documents not retrievable for {count} question(s): {ids:?}", count = ids.len())]
    Unretrievable { ids: Vec<String> },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}
