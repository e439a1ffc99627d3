//! Gated search-aware reward.
//!
//! ```text
//! R = f * [ 1{F1(a1) >= tau && s = 0 && t = 1} * F1(a1)
//!         + 1{F1(a1) <  tau && u = 1}          * F1(a2) ]
//! ```
//!
//! A correct first answer only pays when no search was made; a search only
//! pays when the first answer was wrong. Malformed structure pays nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{best_f1, ScoringError};
use crate::trajectory::{extract_answers, validate_structure, StructureFlags, Trajectory};

pub const DEFAULT_TAU: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("confidence threshold must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("structurally valid trajectory without an answer")]
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    tau: f64,
}

impl RewardConfig {
    pub fn new(tau: f64) -> Result<Self, RewardError> {
        if tau > 0.0 && tau <= 1.0 {
            Ok(RewardConfig { tau })
        } else {
            Err(RewardError::InvalidTau(tau))
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { tau: DEFAULT_TAU }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardBranch {
    ZeroInvalid,
    DirectAnswer,
    SearchAnswer,
    ZeroNoBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub flags: StructureFlags,
    pub f1_a1: Option<f64>,
    pub f1_a2: Option<f64>,
    pub branch: RewardBranch,
}

pub fn compute_reward<S: AsRef<str>>(
    traj: &Trajectory,
    golds: &[S],
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    if golds.is_empty() {
        return Err(ScoringError::EmptyGoldSet.into());
    }
    let flags = validate_structure(traj);
    if !flags.f {
        return Ok(RewardBreakdown {
            reward: 0.0,
            flags,
            f1_a1: None,
            f1_a2: None,
            branch: RewardBranch::ZeroInvalid,
        });
    }

    let answers = extract_answers(traj).map_err(|_| RewardError::Internal)?;
    let f1_a1 = best_f1(&answers.first, golds)?;
    let f1_a2 = answers
        .last
        .as_deref()
        .map(|a| best_f1(a, golds))
        .transpose()?;

    let direct = f1_a1 >= cfg.tau && !flags.s && flags.t;
    let searched = f1_a1 < cfg.tau && flags.u && f1_a2.is_some();

    let (reward, branch) = if direct {
        (f1_a1, RewardBranch::DirectAnswer)
    } else if searched {
        (f1_a2.unwrap_or(0.0), RewardBranch::SearchAnswer)
    } else {
        (0.0, RewardBranch::ZeroNoBranch)
    };

    Ok(RewardBreakdown {
        reward,
        flags,
        f1_a1: Some(f1_a1),
        f1_a2,
        branch,
    })
}
