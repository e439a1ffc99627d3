use rand::Rng;

use super::seeding::{hash_str, rng_for, stream};
use super::world::{Dataset, InternalKnowledge, Question};

pub const FEATURE_DIM: usize = 4;
pub const BIAS: usize = 0;
pub const CONFIDENCE: usize = 1;
pub const PROMPT_LENGTH: usize = 2;
pub const ENTITY_COUNT: usize = 3;

/// Maps a question to `[1, confidence, prompt-length z-score, entity count]`.
///
/// Confidence is 1 when the knowledge table holds a non-empty answer,
/// flipped with probability `label_noise`. The flip draw for a question
/// depends only on the dataset seed and question id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    seed: u64,
    label_noise: f64,
    length_mean: f64,
    length_std: f64,
}

fn prompt_length(prompt: &str) -> f64 {
    prompt.split_whitespace().count() as f64
}

/// Capitalized words after the first, plus numbers.
pub fn entity_count(prompt: &str) -> usize {
    prompt
        .split_whitespace()
        .enumerate()
        .filter(|(i, w)| {
            let w = w.trim_matches(|c: char| !c.is_alphanumeric());
            let numeric = !w.is_empty() && w.chars().all(|c| c.is_ascii_digit());
            let named = *i > 0 && w.chars().next().is_some_and(char::is_uppercase);
            numeric || named
        })
        .count()
}

impl FeatureExtractor {
    pub fn fit(dataset: &Dataset, label_noise: f64) -> Self {
        let lengths: Vec<f64> = dataset
            .questions
            .iter()
            .map(|q| prompt_length(&q.prompt))
            .collect();
        let n = lengths.len().max(1) as f64;
        let mean = lengths.iter().sum::<f64>() / n;
        let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        FeatureExtractor {
            seed: dataset.seed,
            label_noise,
            length_mean: mean,
            length_std: var.sqrt(),
        }
    }

    pub fn label_noise(&self) -> f64 {
        self.label_noise
    }

    /// True when this question's confidence feature is flipped.
    pub fn is_flipped(&self, question_id: &str) -> bool {
        let mut rng = rng_for(&[stream::FEATURES, self.seed, hash_str(question_id)]);
        rng.random::<f64>() < self.label_noise
    }

    pub fn extract(&self, q: &Question, knowledge: &InternalKnowledge) -> Vec<f64> {
        let confident = knowledge.has_answer(&q.id) != self.is_flipped(&q.id);
        let length_z = if self.length_std > 0.0 {
            (prompt_length(&q.prompt) - self.length_mean) / self.length_std
        } else {
            0.0
        };
        vec![
            1.0,
            if confident { 1.0 } else { 0.0 },
            length_z,
            entity_count(&q.prompt) as f64,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::world::gen_world;

    #[test]
    fn noiseless_confidence_matches_label() {
        let g = gen_world(30, 30, 11).unwrap();
        let fx = FeatureExtractor::fit(&g.dataset, 0.0);
        for q in &g.dataset.questions {
            let x = fx.extract(q, &g.knowledge);
            assert_eq!(x.len(), FEATURE_DIM);
            assert_eq!(x[BIAS], 1.0);
            assert_eq!(x[CONFIDENCE], if q.known { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn noise_rate_is_binomial() {
        let g = gen_world(500, 500, 2).unwrap();
        let fx = FeatureExtractor::fit(&g.dataset, 0.1);
        let disagree = g
            .dataset
            .questions
            .iter()
            .filter(|q| (fx.extract(q, &g.knowledge)[CONFIDENCE] == 1.0) != q.known)
            .count();
        let rate = disagree as f64 / 1000.0;
        assert!((rate - 0.1).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn length_feature_is_standardized() {
        let g = gen_world(100, 100, 5).unwrap();
        let fx = FeatureExtractor::fit(&g.dataset, 0.0);
        let zs: Vec<f64> = g
            .dataset
            .questions
            .iter()
            .map(|q| fx.extract(q, &g.knowledge)[PROMPT_LENGTH])
            .collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / zs.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn entity_counting() {
        assert_eq!(entity_count("What is 12 plus 30?"), 2);
        assert_eq!(entity_count("In which city was Zorva Quen born?"), 2);
        assert_eq!(entity_count("Which company did Ab Cd Ef found?"), 3);
    }
}
