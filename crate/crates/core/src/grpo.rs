//! Group Relative Policy Optimization for the logistic search policy.
//!
//! Each training step samples a batch of questions, rolls out a group of
//! `G` trajectories per question, turns rewards into group-normalized
//! advantages and takes one ascent step on the clipped surrogate
//! objective. Updates are strictly on-policy (one inner step per batch).

use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_kv, KvError};
use crate::reward::{compute_reward, RewardConfig, RewardError, DEFAULT_TAU};
use crate::scoring::best_f1;
use crate::simenv::seeding::{hash_str, rng_for, stream};
use crate::simenv::{
    action_logprob, rollout, sigmoid, softplus, Action, PolicyParams, SimError, World,
};
use crate::trajectory::extract_answers;

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("a group needs at least 2 samples, got {0}")]
    GroupTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("world has no questions")]
    EmptyWorld,
    #[error("training diverged: non-finite weights at step {0}")]
    Diverged(usize),
    #[error(transparent)]
    Config(#[from] KvError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("malformed curves file, line {line}: {message}")]
    MalformedCurves { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(r_i - mean) / (std_pop + eps)`.
pub fn group_advantages(rewards: &[f64], adv_epsilon: f64) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    // exact zeros, whatever rounding the mean picks up
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + adv_epsilon;
    Ok(rewards
        .iter()
        .map(|r| if denom > 0.0 { (r - mean) / denom } else { 0.0 })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub features: Vec<f64>,
    pub action: Action,
    /// Log-probability of `action` under the policy that sampled it.
    pub logprob: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub question_id: String,
    pub samples: Vec<GroupSample>,
}

impl RolloutGroup {
    pub fn rewards(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.reward).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSettings {
    pub clip_eps: f64,
    pub kl_coef: f64,
}

fn check_group(
    params: &PolicyParams,
    group: &RolloutGroup,
    advantages: &[f64],
    reference: &PolicyParams,
) -> Result<(), GrpoError> {
    let dim = params.feature_dim();
    if group.samples.len() < 2 {
        return Err(GrpoError::GroupTooSmall(group.samples.len()));
    }
    if advantages.len() != group.samples.len() {
        return Err(GrpoError::DimensionMismatch {
            expected: group.samples.len(),
            got: advantages.len(),
        });
    }
    if reference.feature_dim() != dim {
        return Err(GrpoError::DimensionMismatch {
            expected: dim,
            got: reference.feature_dim(),
        });
    }
    if let Some(s) = group.samples.iter().find(|s| s.features.len() != dim) {
        return Err(GrpoError::DimensionMismatch {
            expected: dim,
            got: s.features.len(),
        });
    }
    Ok(())
}

/// `KL(Bern(sigmoid(z)) || Bern(sigmoid(z_ref)))`.
pub fn bernoulli_kl(z: f64, z_ref: f64) -> f64 {
    let p = sigmoid(z);
    let (log_p, log_q) = (-softplus(-z), -softplus(-z_ref));
    let (log_1p, log_1q) = (-softplus(z), -softplus(z_ref));
    p * (log_p - log_q) + (1.0 - p) * (log_1p - log_1q)
}

/// Group mean of `min(r A, clip(r, 1-eps, 1+eps) A)` minus `kl_coef` times
/// the mean KL to the reference policy.
pub fn surrogate_objective(
    params: &PolicyParams,
    group: &RolloutGroup,
    advantages: &[f64],
    settings: SurrogateSettings,
    reference: &PolicyParams,
) -> Result<f64, GrpoError> {
    check_group(params, group, advantages, reference)?;
    let g = group.samples.len() as f64;
    let mut total = 0.0;
    for (s, &adv) in group.samples.iter().zip(advantages) {
        let z = params.logit(&s.features)?;
        let ratio = (action_logprob(z, s.action) - s.logprob).exp();
        let clipped = ratio.clamp(1.0 - settings.clip_eps, 1.0 + settings.clip_eps);
        total += (ratio * adv).min(clipped * adv);
        if settings.kl_coef != 0.0 {
            let z_ref = reference.logit(&s.features)?;
            total -= settings.kl_coef * bernoulli_kl(z, z_ref);
        }
    }
    Ok(total / g)
}

/// Closed-form ascent gradient of [`surrogate_objective`].
///
/// For `p = sigmoid(w . x)` the score is `(a - p) x` with `a = 1` for a
/// search, and `d KL / d w = p (1 - p) (z - z_ref) x`. A sample whose ratio
/// is clipped on the side favoured by its advantage contributes nothing.
pub fn surrogate_gradient(
    params: &PolicyParams,
    group: &RolloutGroup,
    advantages: &[f64],
    settings: SurrogateSettings,
    reference: &PolicyParams,
) -> Result<Vec<f64>, GrpoError> {
    check_group(params, group, advantages, reference)?;
    let g = group.samples.len() as f64;
    let mut grad = vec![0.0; params.feature_dim()];
    for (s, &adv) in group.samples.iter().zip(advantages) {
        let z = params.logit(&s.features)?;
        let p = sigmoid(z);
        let ratio = (action_logprob(z, s.action) - s.logprob).exp();
        let clipped_out = (adv > 0.0 && ratio > 1.0 + settings.clip_eps)
            || (adv < 0.0 && ratio < 1.0 - settings.clip_eps);
        let mut coef = 0.0;
        if !clipped_out {
            let a = if s.action.is_search() { 1.0 } else { 0.0 };
            coef += adv * ratio * (a - p);
        }
        if settings.kl_coef != 0.0 {
            let z_ref = reference.logit(&s.features)?;
            coef -= settings.kl_coef * p * (1.0 - p) * (z - z_ref);
        }
        for (gi, xi) in grad.iter_mut().zip(&s.features) {
            *gi += coef * xi;
        }
    }
    for gi in &mut grad {
        *gi /= g;
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub group_size: usize,
    pub questions_per_step: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub tau: f64,
    pub seed: u64,
    pub adv_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            group_size: 8,
            questions_per_step: 8,
            steps: 200,
            learning_rate: 1.0,
            clip_eps: 0.2,
            kl_coef: 0.0,
            tau: DEFAULT_TAU,
            seed: 0,
            adv_epsilon: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: String| Err(GrpoError::InvalidConfig(m));
        if self.group_size < 2 {
            return bad(format!("group_size must be >= 2, got {}", self.group_size));
        }
        if self.questions_per_step == 0 {
            return bad("questions_per_step must be >= 1".into());
        }
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.clip_eps.is_finite() && self.clip_eps > 0.0) {
            return bad(format!("clip_eps must be positive, got {}", self.clip_eps));
        }
        if !(self.kl_coef.is_finite() && self.kl_coef >= 0.0) {
            return bad(format!(
                "kl_coef must be non-negative, got {}",
                self.kl_coef
            ));
        }
        if !(self.adv_epsilon.is_finite() && self.adv_epsilon > 0.0) {
            return bad(format!(
                "adv_epsilon must be positive, got {}",
                self.adv_epsilon
            ));
        }
        RewardConfig::new(self.tau)?;
        Ok(())
    }

    /// Parses flat `key = value` text; missing keys keep their defaults.
    pub fn from_kv_text(text: &str) -> Result<Self, GrpoError> {
        let mut cfg = TrainConfig::default();
        for entry in parse_kv(text)? {
            let v = entry.value.as_str();
            match entry.key.as_str() {
                "group_size" => cfg.group_size = entry.parse(v)?,
                "questions_per_step" => cfg.questions_per_step = entry.parse(v)?,
                "steps" => cfg.steps = entry.parse(v)?,
                "learning_rate" => cfg.learning_rate = entry.parse(v)?,
                "clip_eps" => cfg.clip_eps = entry.parse(v)?,
                "kl_coef" => cfg.kl_coef = entry.parse(v)?,
                "tau" => cfg.tau = entry.parse(v)?,
                "seed" => cfg.seed = entry.parse(v)?,
                "adv_epsilon" => cfg.adv_epsilon = entry.parse(v)?,
                _ => return Err(entry.unknown_key().into()),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_text(&self) -> String {
        format!(
            "group_size = {}\nquestions_per_step = {}\nsteps = {}\nlearning_rate = {}\n\
             clip_eps = {}\nkl_coef = {}\ntau = {}\nseed = {}\nadv_epsilon = {}\n",
            self.group_size,
            self.questions_per_step,
            self.steps,
            self.learning_rate,
            self.clip_eps,
            self.kl_coef,
            self.tau,
            self.seed,
            self.adv_epsilon
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_f1: f64,
    pub sr_known: f64,
    pub sr_unknown: f64,
    pub weight_norm: f64,
}

pub const CURVES_HEADER: &str = "step,mean_reward,mean_f1,sr_known,sr_unknown,weight_norm";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub records: Vec<StepRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Means of `(mean_reward, sr_known, sr_unknown)` over the last `n` steps.
    pub fn tail_means(&self, n: usize) -> (f64, f64, f64) {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        let k = tail.len().max(1) as f64;
        let sum = |f: fn(&StepRecord) -> f64| tail.iter().map(f).sum::<f64>() / k;
        (
            sum(|r| r.mean_reward),
            sum(|r| r.sr_known),
            sum(|r| r.sr_unknown),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVES_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.step, r.mean_reward, r.mean_f1, r.sr_known, r.sr_unknown, r.weight_norm
            );
        }
        out
    }

    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self, GrpoError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let malformed = |message: String| GrpoError::MalformedCurves {
                line: i + 1,
                message,
            };
            if i == 0 {
                if line.trim() != CURVES_HEADER {
                    return Err(malformed(format!("expected header {CURVES_HEADER:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(malformed(format!("expected 6 columns, got {}", cols.len())));
            }
            let num = |j: usize| {
                cols[j]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("column {}: {e}", j + 1)))
            };
            records.push(StepRecord {
                step: cols[0]
                    .trim()
                    .parse()
                    .map_err(|e| malformed(format!("step: {e}")))?,
                mean_reward: num(1)?,
                mean_f1: num(2)?,
                sr_known: num(3)?,
                sr_unknown: num(4)?,
                weight_norm: num(5)?,
            });
        }
        Ok(TrainingHistory { records })
    }
}

/// Walks one question pool in shuffled passes; each pass is a fresh
/// permutation derived from `(seed, pool tag, pass number)`.
struct PoolCycler {
    pool: Vec<usize>,
    tag: u64,
    seed: u64,
    order: Vec<usize>,
    pass: u64,
    pos: usize,
}

impl PoolCycler {
    fn new(pool: Vec<usize>, tag: u64, seed: u64) -> Self {
        PoolCycler {
            pool,
            tag,
            seed,
            order: Vec::new(),
            pass: 0,
            pos: 0,
        }
    }

    fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order = self.pool.clone();
            let mut rng = rng_for(&[stream::BATCH, self.seed, self.tag, self.pass]);
            self.order.shuffle(&mut rng);
            self.pass += 1;
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Question indices for one step, alternating known and unknown.
fn next_batch(known: &mut PoolCycler, unknown: &mut PoolCycler, size: usize) -> Vec<usize> {
    (0..size)
        .map(|j| {
            let take_known = (j % 2 == 0 && !known.is_empty()) || unknown.is_empty();
            if take_known {
                known.next()
            } else {
                unknown.next()
            }
        })
        .collect()
}

/// Runs GRPO from zero weights. Deterministic in `(world, cfg)`.
pub fn train(
    world: &World,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, TrainingHistory), GrpoError> {
    train_from(world, cfg, PolicyParams::zeros(crate::simenv::FEATURE_DIM))
}

pub fn train_from(
    world: &World,
    cfg: &TrainConfig,
    initial: PolicyParams,
) -> Result<(PolicyParams, TrainingHistory), GrpoError> {
    cfg.validate()?;
    if world.questions().is_empty() {
        return Err(GrpoError::EmptyWorld);
    }
    let reward_cfg = RewardConfig::new(cfg.tau)?;
    let settings = SurrogateSettings {
        clip_eps: cfg.clip_eps,
        kl_coef: cfg.kl_coef,
    };
    let (known, unknown): (Vec<usize>, Vec<usize>) =
        (0..world.questions().len()).partition(|&i| world.questions()[i].known);
    let mut known = PoolCycler::new(known, 1, cfg.seed);
    let mut unknown = PoolCycler::new(unknown, 0, cfg.seed);

    let reference = initial.clone();
    let mut params = initial;
    let mut history = TrainingHistory::default();

    for step in 0..cfg.steps {
        let batch = next_batch(&mut known, &mut unknown, cfg.questions_per_step);

        let mut grad = vec![0.0; params.feature_dim()];
        let (mut reward_sum, mut f1_sum, mut n_samples) = (0.0, 0.0, 0usize);
        let (mut known_n, mut known_search, mut unknown_n, mut unknown_search) = (0, 0, 0, 0);

        for qi in batch {
            let q = &world.questions()[qi];
            let mut samples = Vec::with_capacity(cfg.group_size);
            for i in 0..cfg.group_size {
                let index = (step * cfg.group_size + i) as u64;
                let mut rng = rng_for(&[stream::ROLLOUT, cfg.seed, hash_str(&q.id), index]);
                let out = rollout(&params, q, world, &mut rng)?;
                let breakdown = compute_reward(&out.trajectory, &q.golds, &reward_cfg)?;

                let final_f1 = match extract_answers(&out.trajectory) {
                    Ok(a) => best_f1(a.final_answer(), &q.golds).map_err(SimError::from)?,
                    Err(_) => 0.0,
                };
                reward_sum += breakdown.reward;
                f1_sum += final_f1;
                n_samples += 1;
                let searched = usize::from(breakdown.flags.s);
                if q.known {
                    known_n += 1;
                    known_search += searched;
                } else {
                    unknown_n += 1;
                    unknown_search += searched;
                }

                samples.push(GroupSample {
                    features: q.features.clone(),
                    action: out.action,
                    logprob: out.logprob,
                    reward: breakdown.reward,
                });
            }
            let group = RolloutGroup {
                question_id: q.id.clone(),
                samples,
            };
            let adv = group_advantages(&group.rewards(), cfg.adv_epsilon)?;
            let g = surrogate_gradient(&params, &group, &adv, settings, &reference)?;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }

        let n_groups = cfg.questions_per_step as f64;
        for (w, gi) in params.weights.iter_mut().zip(&grad) {
            *w += cfg.learning_rate * gi / n_groups;
        }
        if params.weights.iter().any(|w| !w.is_finite()) {
            return Err(GrpoError::Diverged(step));
        }

        let frac = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        history.records.push(StepRecord {
            step,
            mean_reward: reward_sum / n_samples as f64,
            mean_f1: f1_sum / n_samples as f64,
            sr_known: frac(known_search, known_n),
            sr_unknown: frac(unknown_search, unknown_n),
            weight_norm: params.norm(),
        });
    }
    Ok((params, history))
}
