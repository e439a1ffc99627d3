//! SQuAD-style answer normalization, token F1 and exact match.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("gold answer set is empty")]
    EmptyGoldSet,
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercased word tokens with ASCII punctuation and articles removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedAnswer {
    tokens: Vec<String>,
}

impl NormalizedAnswer {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn normalize(text: &str) -> NormalizedAnswer {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let tokens = cleaned
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .map(str::to_string)
        .collect();
    NormalizedAnswer { tokens }
}

fn f1_from_tokens(pred: &[String], gold: &[String]) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for w in gold {
        *gold_counts.entry(w).or_default() += 1;
    }
    let mut overlap = 0usize;
    for w in pred {
        if let Some(c) = gold_counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Multiset token F1 between normalized `pred` and `gold`.
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    f1_from_tokens(normalize(pred).tokens(), normalize(gold).tokens())
}

pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> Result<bool, ScoringError> {
    if golds.is_empty() {
        return Err(ScoringError::EmptyGoldSet);
    }
    let p = normalize(pred);
    Ok(golds.iter().any(|g| normalize(g.as_ref()) == p))
}

/// Maximum token F1 over the gold aliases.
pub fn best_f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> Result<f64, ScoringError> {
    if golds.is_empty() {
        return Err(ScoringError::EmptyGoldSet);
    }
    let p = normalize(pred);
    Ok(golds
        .iter()
        .map(|g| f1_from_tokens(p.tokens(), normalize(g.as_ref()).tokens()))
        .fold(0.0, f64::max))
}
