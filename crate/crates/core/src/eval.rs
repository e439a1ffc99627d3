//! Greedy evaluation metrics and the answer-judge seam.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{best_f1, exact_match, ScoringError};
use crate::simenv::{rollout_greedy, Action, Policy, Question, SimError, World};
use crate::trajectory::{extract_answers, validate_structure};

pub const DEFAULT_JUDGE_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyDataset,
    #[error("unknown judge kind {0:?}")]
    UnknownJudgeKind(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub em: f64,
    pub mean_f1: f64,
    pub sr: f64,
    pub sr_known: f64,
    pub sr_unknown: f64,
    pub n: usize,
}

/// Per-question outcome of a greedy rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalItem {
    pub question_id: String,
    pub known: bool,
    pub action: Action,
    pub searched: bool,
    pub segments: usize,
    pub retrieved_gold: bool,
    pub final_answer: String,
    pub exact: bool,
    pub f1: f64,
}

pub fn evaluate_items<P: Policy + ?Sized>(
    policy: &P,
    questions: &[Question],
    world: &World,
) -> Result<Vec<EvalItem>, EvalError> {
    questions
        .iter()
        .map(|q| {
            let out = rollout_greedy(policy, q, world)?;
            let answers = extract_answers(&out.trajectory).map_err(SimError::from)?;
            let final_answer = answers.final_answer().to_string();
            Ok(EvalItem {
                question_id: q.id.clone(),
                known: q.known,
                action: out.action,
                searched: validate_structure(&out.trajectory).s,
                segments: out.trajectory.len(),
                retrieved_gold: out.retrieved_gold,
                exact: exact_match(&final_answer, &q.golds)?,
                f1: best_f1(&final_answer, &q.golds)?,
                final_answer,
            })
        })
        .collect()
}

pub fn metrics_from_items(items: &[EvalItem]) -> Result<Metrics, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let n = items.len();
    let frac = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let known: Vec<_> = items.iter().filter(|i| i.known).collect();
    let unknown: Vec<_> = items.iter().filter(|i| !i.known).collect();
    let searched = |xs: &[&EvalItem]| xs.iter().filter(|i| i.searched).count();
    Ok(Metrics {
        em: frac(items.iter().filter(|i| i.exact).count(), n),
        mean_f1: items.iter().map(|i| i.f1).sum::<f64>() / n as f64,
        sr: frac(items.iter().filter(|i| i.searched).count(), n),
        sr_known: frac(searched(&known), known.len()),
        sr_unknown: frac(searched(&unknown), unknown.len()),
        n,
    })
}

/// Greedy rollout on every question of `world`. Consumes no randomness.
pub fn evaluate<P: Policy + ?Sized>(policy: &P, world: &World) -> Result<Metrics, EvalError> {
    metrics_from_items(&evaluate_items(policy, world.questions(), world)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub correct: bool,
    pub rationale: Option<String>,
}

/// Decides whether a prediction answers the question. External judges
/// (for example an LLM grader) plug in through [`JudgeRegistry::register`].
pub trait Judge: Send + Sync {
    fn judge(&self, pred: &str, golds: &[String]) -> Result<JudgeVerdict, EvalError>;
}

/// Token-F1 proxy judge; not a substitute for a model-based grader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Judge {
    pub threshold: f64,
}

impl Default for F1Judge {
    fn default() -> Self {
        F1Judge {
            threshold: DEFAULT_JUDGE_THRESHOLD,
        }
    }
}

impl Judge for F1Judge {
    fn judge(&self, pred: &str, golds: &[String]) -> Result<JudgeVerdict, EvalError> {
        let f1 = best_f1(pred, golds)?;
        Ok(JudgeVerdict {
            correct: f1 >= self.threshold,
            rationale: Some(format!(
                "best token F1 {f1:.4} vs threshold {}",
                self.threshold
            )),
        })
    }
}

pub struct JudgeRegistry {
    judges: BTreeMap<String, Box<dyn Judge>>,
}

impl Default for JudgeRegistry {
    fn default() -> Self {
        let mut r = JudgeRegistry::empty();
        r.register("f1", Box::new(F1Judge::default()));
        r
    }
}

impl JudgeRegistry {
    pub fn empty() -> Self {
        JudgeRegistry {
            judges: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, kind: impl Into<String>, judge: Box<dyn Judge>) {
        self.judges.insert(kind.into(), judge);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.judges.keys().map(String::as_str)
    }

    pub fn judge(
        &self,
        pred: &str,
        golds: &[String],
        kind: &str,
    ) -> Result<JudgeVerdict, EvalError> {
        if golds.is_empty() {
            return Err(ScoringError::EmptyGoldSet.into());
        }
        self.judges
            .get(kind)
            .ok_or_else(|| EvalError::UnknownJudgeKind(kind.to_string()))?
            .judge(pred, golds)
    }
}

/// Judges with the built-in registry (only `"f1"`).
pub fn judge(pred: &str, golds: &[String], kind: &str) -> Result<JudgeVerdict, EvalError> {
    JudgeRegistry::default().judge(pred, golds, kind)
}
