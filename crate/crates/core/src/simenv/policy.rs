use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{CONFIDENCE, FEATURE_DIM};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    AnswerDirect,
    SearchThenAnswer,
}

impl Action {
    pub fn is_search(self) -> bool {
        self == Action::SearchThenAnswer
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z == f64::INFINITY {
        z
    } else if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Log-probability of `action` under `p(search) = sigmoid(logit)`.
pub fn action_logprob(logit: f64, action: Action) -> f64 {
    match action {
        Action::SearchThenAnswer => -softplus(-logit),
        Action::AnswerDirect => -softplus(logit),
    }
}

/// A stochastic choice between answering directly and searching first,
/// expressed as the logit of `p(search)`.
pub trait Policy {
    fn search_logit(&self, features: &[f64]) -> Result<f64, SimError>;

    fn search_probability(&self, features: &[f64]) -> Result<f64, SimError> {
        Ok(sigmoid(self.search_logit(features)?))
    }
}

/// Logistic policy `p(search) = sigmoid(w . x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub weights: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(feature_dim: usize) -> Self {
        PolicyParams {
            weights: vec![0.0; feature_dim],
        }
    }

    pub fn new(weights: Vec<f64>) -> Result<Self, SimError> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(SimError::InvalidParams);
        }
        Ok(PolicyParams { weights })
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64, SimError> {
        if features.len() != self.weights.len() {
            return Err(SimError::DimensionMismatch {
                expected: self.weights.len(),
                got: features.len(),
            });
        }
        Ok(self.weights.iter().zip(features).map(|(w, x)| w * x).sum())
    }
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams::zeros(FEATURE_DIM)
    }
}

impl Policy for PolicyParams {
    fn search_logit(&self, features: &[f64]) -> Result<f64, SimError> {
        self.logit(features)
    }
}

/// Hand-written reference behaviours with probabilities of exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedPolicy {
    AlwaysDirect,
    AlwaysSearch,
    /// Search exactly when the confidence feature is 0.
    SearchIfUnsure,
}

impl Policy for ScriptedPolicy {
    fn search_logit(&self, features: &[f64]) -> Result<f64, SimError> {
        let search = match self {
            ScriptedPolicy::AlwaysDirect => false,
            ScriptedPolicy::AlwaysSearch => true,
            ScriptedPolicy::SearchIfUnsure => {
                let conf = features
                    .get(CONFIDENCE)
                    .ok_or(SimError::DimensionMismatch {
                        expected: FEATURE_DIM,
                        got: features.len(),
                    })?;
                *conf == 0.0
            }
        };
        Ok(if search {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        })
    }
}

/// Samples an action; returns it with its log-probability.
pub fn act<P: Policy + ?Sized, R: Rng + ?Sized>(
    policy: &P,
    features: &[f64],
    rng: &mut R,
) -> Result<(Action, f64), SimError> {
    let logit = policy.search_logit(features)?;
    let u: f64 = rng.random();
    let action = if u < sigmoid(logit) {
        Action::SearchThenAnswer
    } else {
        Action::AnswerDirect
    };
    Ok((action, action_logprob(logit, action)))
}

/// Most probable action; `p(search) == 0.5` resolves to answering directly.
pub fn act_greedy<P: Policy + ?Sized>(
    policy: &P,
    features: &[f64],
) -> Result<(Action, f64), SimError> {
    let logit = policy.search_logit(features)?;
    let action = if logit > 0.0 {
        Action::SearchThenAnswer
    } else {
        Action::AnswerDirect
    };
    Ok((action, action_logprob(logit, action)))
}
