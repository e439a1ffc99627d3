use rand::Rng;

use super::policy::{act, act_greedy, Action, Policy};
use super::world::{Question, World};
use super::SimError;
use crate::trajectory::{Segment, SegmentKind, Trajectory};

const THINK_DIRECT: &str = "I can answer this from what I already know.";
const THINK_UNSURE: &str =
    "I am not sure about this; I will give an initial answer and then search.";
const THINK_UPDATED: &str = "Updating my answer using the retrieved documents.";

#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    pub trajectory: Trajectory,
    pub action: Action,
    pub logprob: f64,
    /// Two adjacent segments were swapped by fault injection.
    pub faulted: bool,
    /// The gold document was among the search hits.
    pub retrieved_gold: bool,
}

fn boxed(prefix: &str, answer: &str) -> String {
    format!("{prefix} \\boxed{{{answer}}}")
}

/// The trajectory the simulated model writes for `action`.
pub fn build_trajectory(
    q: &Question,
    world: &World,
    action: Action,
) -> Result<(Trajectory, bool), SimError> {
    let internal = world.knowledge().answer(&q.id);
    match action {
        Action::AnswerDirect => Ok((
            Trajectory::new(vec![
                Segment::new(SegmentKind::Think, THINK_DIRECT)?,
                Segment::new(SegmentKind::Answer, boxed("The answer is", internal))?,
            ]),
            false,
        )),
        Action::SearchThenAnswer => {
            let hits = world.index().search(&q.prompt, world.config().top_k);
            let retrieved_gold = q
                .gold_doc_id
                .as_deref()
                .is_some_and(|g| hits.iter().any(|h| h.doc_id == g));
            let final_answer = if retrieved_gold {
                q.golds[0].as_str()
            } else {
                internal
            };
            let segments = vec![
                Segment::new(SegmentKind::Think, THINK_UNSURE)?,
                Segment::new(
                    SegmentKind::Answer,
                    boxed("The initial answer is", internal),
                )?,
                Segment::new(SegmentKind::Search, q.prompt.as_str())?,
                Segment::new(SegmentKind::Result, world.index().format_result(&hits))?,
                Segment::new(SegmentKind::Think, THINK_UPDATED)?,
                Segment::new(
                    SegmentKind::Answer,
                    boxed("The final answer is", final_answer),
                )?,
            ];
            Ok((Trajectory::new(segments), retrieved_gold))
        }
    }
}

/// Sampled rollout. Consumes the action draw, then the fault draw, then (if
/// faulted) the swap position, in that order.
pub fn rollout<P: Policy + ?Sized, R: Rng + ?Sized>(
    policy: &P,
    q: &Question,
    world: &World,
    rng: &mut R,
) -> Result<RolloutOutcome, SimError> {
    let (action, logprob) = act(policy, &q.features, rng)?;
    let (mut trajectory, retrieved_gold) = build_trajectory(q, world, action)?;
    let faulted = rng.random::<f64>() < world.config().fault_rate;
    if faulted {
        let segs = trajectory.segments_mut();
        let i = rng.random_range(0..segs.len() - 1);
        segs.swap(i, i + 1);
    }
    Ok(RolloutOutcome {
        trajectory,
        action,
        logprob,
        faulted,
        retrieved_gold,
    })
}

/// Argmax rollout without fault injection; uses no randomness.
pub fn rollout_greedy<P: Policy + ?Sized>(
    policy: &P,
    q: &Question,
    world: &World,
) -> Result<RolloutOutcome, SimError> {
    let (action, logprob) = act_greedy(policy, &q.features)?;
    let (trajectory, retrieved_gold) = build_trajectory(q, world, action)?;
    Ok(RolloutOutcome {
        trajectory,
        action,
        logprob,
        faulted: false,
        retrieved_gold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{compute_reward, RewardBranch, RewardConfig};
    use crate::simenv::policy::ScriptedPolicy;
    use crate::simenv::seeding::rng_for;
    use crate::simenv::world::{gen_world, SimConfig};
    use crate::trajectory::{parse, render, validate_structure};

    fn world() -> World {
        gen_world(10, 10, 21)
            .unwrap()
            .into_world(SimConfig::noiseless())
            .unwrap()
    }

    #[test]
    fn scripted_outcomes_match_reward_cases() {
        let w = world();
        let cfg = RewardConfig::default();
        let mut rng = rng_for(&[0]);
        for q in w.questions() {
            let direct = rollout(&ScriptedPolicy::AlwaysDirect, q, &w, &mut rng).unwrap();
            let search = rollout(&ScriptedPolicy::AlwaysSearch, q, &w, &mut rng).unwrap();
            assert_eq!(direct.trajectory.len(), 2);
            assert_eq!(search.trajectory.len(), 6);
            let rd = compute_reward(&direct.trajectory, &q.golds, &cfg).unwrap();
            let rs = compute_reward(&search.trajectory, &q.golds, &cfg).unwrap();
            if q.known {
                assert_eq!((rd.reward, rd.branch), (1.0, RewardBranch::DirectAnswer));
                assert_eq!((rs.reward, rs.branch), (0.0, RewardBranch::ZeroNoBranch));
            } else {
                assert!(search.retrieved_gold);
                assert_eq!((rs.reward, rs.branch), (1.0, RewardBranch::SearchAnswer));
                assert_eq!((rd.reward, rd.branch), (0.0, RewardBranch::ZeroNoBranch));
            }
        }
    }

    #[test]
    fn emitted_trajectories_validate_and_round_trip() {
        let w = world();
        let mut rng = rng_for(&[1]);
        let p = crate::simenv::policy::PolicyParams::zeros(4);
        for q in w.questions() {
            for _ in 0..4 {
                let out = rollout(&p, q, &w, &mut rng).unwrap();
                assert!(!out.faulted);
                assert!(validate_structure(&out.trajectory).f);
                let text = render(&out.trajectory).unwrap();
                assert_eq!(parse(&text).unwrap(), out.trajectory);
            }
        }
    }

    #[test]
    fn fault_injection_breaks_structure() {
        let w = world()
            .with_config(SimConfig {
                fault_rate: 1.0,
                ..SimConfig::noiseless()
            })
            .unwrap();
        let mut rng = rng_for(&[2]);
        for q in w.questions() {
            let out = rollout(&ScriptedPolicy::AlwaysSearch, q, &w, &mut rng).unwrap();
            assert!(out.faulted);
            assert!(!validate_structure(&out.trajectory).f);
        }
    }

    #[test]
    fn greedy_is_repeatable() {
        let w = world();
        let p = crate::simenv::policy::PolicyParams::new(vec![0.5, -1.0, 0.2, 0.1]).unwrap();
        for q in w.questions() {
            let a = rollout_greedy(&p, q, &w).unwrap();
            let b = rollout_greedy(&p, q, &w).unwrap();
            assert_eq!(a.trajectory, b.trajectory);
            assert_eq!(a.action, b.action);
        }
    }
}
