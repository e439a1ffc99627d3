//! Synthetic QA world: a balanced mix of questions the model "knows"
//! (arithmetic, answerable from the internal knowledge table) and questions
//! it does not (fact lookups about invented people, answerable only from a
//! generated corpus document).

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureExtractor;
use super::seeding::{rng_for, stream, SimRng};
use super::SimError;
use crate::retrieval::{Document, Index, DEFAULT_TOP_K};
use crate::scoring::best_f1;

pub const DEFAULT_LABEL_NOISE: f64 = 0.05;
pub const DEFAULT_FAULT_RATE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub prompt: String,
    pub golds: Vec<String>,
    #[serde(with = "known_flag")]
    pub known: bool,
    pub gold_doc_id: Option<String>,
    /// Policy input, filled in by [`World::new`].
    #[serde(skip)]
    pub features: Vec<f64>,
}

mod known_flag {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!(
                "known must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub questions: Vec<Question>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn count_known(&self) -> usize {
        self.questions.iter().filter(|q| q.known).count()
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.count_known() == self.len()
    }
}

/// What the simulated model answers without searching.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InternalKnowledge {
    pub answers: HashMap<String, String>,
}

impl InternalKnowledge {
    /// Stored answer, empty when the model has nothing to say.
    pub fn answer(&self, question_id: &str) -> &str {
        self.answers
            .get(question_id)
            .map(String::as_str)
            .unwrap_or("")
    }

    pub fn has_answer(&self, question_id: &str) -> bool {
        !self.answer(question_id).is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Probability that the confidence feature disagrees with the label.
    pub label_noise: f64,
    /// Probability that a sampled rollout has two adjacent segments swapped.
    pub fault_rate: f64,
    pub top_k: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            label_noise: DEFAULT_LABEL_NOISE,
            fault_rate: DEFAULT_FAULT_RATE,
            top_k: DEFAULT_TOP_K,
        }
    }
}

impl SimConfig {
    pub fn noiseless() -> Self {
        SimConfig {
            label_noise: 0.0,
            fault_rate: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {v}"
                )))
            }
        };
        unit("label_noise", self.label_noise)?;
        unit("fault_rate", self.fault_rate)?;
        if self.top_k == 0 {
            return Err(SimError::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dataset, corpus index and knowledge table, checked for consistency and
/// with features attached to every question. Immutable after construction.
#[derive(Debug, Clone)]
pub struct World {
    dataset: Dataset,
    index: Index,
    knowledge: InternalKnowledge,
    config: SimConfig,
    extractor: FeatureExtractor,
}

impl World {
    pub fn new(
        mut dataset: Dataset,
        corpus: Vec<Document>,
        knowledge: InternalKnowledge,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        config.validate()?;
        let index = Index::build(corpus)?;

        let mut ids = HashSet::new();
        for q in &dataset.questions {
            if !ids.insert(q.id.as_str()) {
                return Err(SimError::InvalidWorld(format!(
                    "duplicate question id {}",
                    q.id
                )));
            }
            if q.golds.is_empty() {
                return Err(SimError::InvalidWorld(format!(
                    "question {} has no golds",
                    q.id
                )));
            }
            let stored = knowledge.answer(&q.id);
            let f1 = best_f1(stored, &q.golds)?;
            if q.known && f1 != 1.0 {
                return Err(SimError::InvalidWorld(format!(
                    "known question {} is not answered correctly by internal knowledge",
                    q.id
                )));
            }
            if !q.known {
                if !stored.is_empty() && f1 != 0.0 {
                    return Err(SimError::InvalidWorld(format!(
                        "unknown question {} overlaps its gold in internal knowledge",
                        q.id
                    )));
                }
                match &q.gold_doc_id {
                    Some(d) if index.document(d).is_some() => {}
                    Some(d) => {
                        return Err(SimError::InvalidWorld(format!(
                            "question {} points at missing document {d}",
                            q.id
                        )))
                    }
                    None => {
                        return Err(SimError::InvalidWorld(format!(
                            "unknown question {} has no gold document",
                            q.id
                        )))
                    }
                }
            }
        }

        let extractor = FeatureExtractor::fit(&dataset, config.label_noise);
        for q in &mut dataset.questions {
            q.features = extractor.extract(q, &knowledge);
        }

        Ok(World {
            dataset,
            index,
            knowledge,
            config,
            extractor,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn questions(&self) -> &[Question] {
        &self.dataset.questions
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn knowledge(&self) -> &InternalKnowledge {
        &self.knowledge
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn feature_extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Same questions and corpus under a different noise configuration.
    /// Features are recomputed; per-question noise draws are shared, so a
    /// lower label noise only ever removes flips.
    pub fn with_config(&self, config: SimConfig) -> Result<World, SimError> {
        config.validate()?;
        let extractor = FeatureExtractor::fit(&self.dataset, config.label_noise);
        let mut dataset = self.dataset.clone();
        for q in &mut dataset.questions {
            q.features = extractor.extract(q, &self.knowledge);
        }
        Ok(World {
            dataset,
            index: self.index.clone(),
            knowledge: self.knowledge.clone(),
            config,
            extractor,
        })
    }

    /// Unknown questions whose gold document is not in the top-k results
    /// for their own prompt.
    pub fn unretrievable(&self) -> Vec<&str> {
        self.dataset
            .questions
            .iter()
            .filter(|q| !q.known)
            .filter(|q| {
                let hits = self.index.search(&q.prompt, self.config.top_k);
                !hits
                    .iter()
                    .any(|h| Some(h.doc_id.as_str()) == q.gold_doc_id.as_deref())
            })
            .map(|q| q.id.as_str())
            .collect()
    }
}

const ONSETS: &[&str] = &[
    "b", "br", "d", "dr", "f", "g", "gr", "h", "k", "kr", "l", "m", "n", "p", "qu", "r", "s", "st",
    "t", "tr", "v", "vr", "z", "zh",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ae", "ia", "ou"];
const CODAS: &[&str] = &["", "", "l", "n", "r", "s", "th", "x", "m", "nd"];

fn syllable(rng: &mut SimRng) -> String {
    let pick = |rng: &mut SimRng, xs: &[&str]| xs[rng.random_range(0..xs.len())].to_string();
    format!(
        "{}{}{}",
        pick(rng, ONSETS),
        pick(rng, VOWELS),
        pick(rng, CODAS)
    )
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// An invented capitalized word of two or three syllables.
fn invented_word(rng: &mut SimRng) -> String {
    let n = rng.random_range(2..=3);
    capitalize(&(0..n).map(|_| syllable(rng)).collect::<String>())
}

/// Draws invented words that have not been used anywhere in the world yet,
/// so that lookup prompts are lexically unambiguous.
struct Namer<'a> {
    rng: &'a mut SimRng,
    used: HashSet<String>,
}

impl Namer<'_> {
    fn fresh(&mut self) -> String {
        loop {
            let w = invented_word(self.rng);
            if self.used.insert(w.to_lowercase()) {
                return w;
            }
        }
    }

    fn person(&mut self) -> String {
        let parts = self.rng.random_range(2..=3);
        (0..parts)
            .map(|_| self.fresh())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

struct Fact {
    prompt: String,
    answer: String,
    title: String,
    body: String,
}

fn lookup_fact(namer: &mut Namer<'_>) -> Fact {
    let person = namer.person();
    let answer = namer.fresh();
    let (prompt, body) = match namer.rng.random_range(0..4) {
        0 => (
            format!("In which city was {person} born?"),
            format!("{person} was born in the city of {answer} and later moved abroad."),
        ),
        1 => (
            format!("Which company did {person} found?"),
            format!("{person} founded the company {answer} after years of study."),
        ),
        2 => (
            format!("What river flows past the hometown of {person}?"),
            format!("The hometown of {person} lies on the river {answer}."),
        ),
        _ => (
            format!("Which instrument did {person} play in the orchestra?"),
            format!("In the orchestra {person} played the {answer}, a rare regional instrument."),
        ),
    };
    Fact {
        prompt,
        answer,
        title: person,
        body,
    }
}

fn distractor(namer: &mut Namer<'_>) -> (String, String) {
    let person = namer.person();
    let place = namer.fresh();
    let body = match namer.rng.random_range(0..3) {
        0 => format!("{person} visited the city of {place} and wrote about its river."),
        1 => format!("{person} never played in an orchestra but admired {place}."),
        _ => format!("A company in {place} hired {person}, who was born abroad."),
    };
    (person, body)
}

/// Two or three numbers with equal probability, matching the two- or
/// three-part names of lookup questions so that entity counts carry no
/// label information.
fn arithmetic(rng: &mut SimRng) -> (String, String) {
    let a: i64 = rng.random_range(2..100);
    let b: i64 = rng.random_range(2..100);
    if rng.random_bool(0.5) {
        match rng.random_range(0..4) {
            0 => (format!("What is {a} plus {b}?"), (a + b).to_string()),
            1 => {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                (format!("What is {hi} minus {lo}?"), (hi - lo).to_string())
            }
            2 => (
                format!("How much is {a} times {b} in total?"),
                (a * b).to_string(),
            ),
            _ => (
                format!("A crate holds {a} boxes with {b} apples each; how many apples are there?"),
                (a * b).to_string(),
            ),
        }
    } else {
        // keeps a + b - c positive
        let c: i64 = rng.random_range(2..20.min(a + b));
        match rng.random_range(0..3) {
            0 => (
                format!("Compute the sum of {a}, {b} and {c}."),
                (a + b + c).to_string(),
            ),
            1 => (
                format!("What is {a} plus {b} minus {c}?"),
                (a + b - c).to_string(),
            ),
            _ => (
                format!("What is {a} times {b} plus {c}?"),
                (a * b + c).to_string(),
            ),
        }
    }
}

/// Everything `gen_world` produces, before features and indexing.
#[derive(Debug, Clone)]
pub struct GeneratedWorld {
    pub dataset: Dataset,
    pub corpus: Vec<Document>,
    pub knowledge: InternalKnowledge,
}

impl GeneratedWorld {
    pub fn into_world(self, config: SimConfig) -> Result<World, SimError> {
        World::new(self.dataset, self.corpus, self.knowledge, config)
    }
}

/// Deterministic in `seed`. Every unknown question is checked to retrieve
/// its gold document within the default top-k.
pub fn gen_world(n_known: usize, n_unknown: usize, seed: u64) -> Result<GeneratedWorld, SimError> {
    if n_known == 0 || n_unknown == 0 {
        return Err(SimError::InvalidCount { n_known, n_unknown });
    }
    let mut rng = rng_for(&[stream::WORLD, seed]);

    let mut questions = Vec::with_capacity(n_known + n_unknown);
    let mut corpus = Vec::new();
    let mut answers = HashMap::new();

    for _ in 0..n_known {
        let (prompt, answer) = arithmetic(&mut rng);
        questions.push((prompt, answer, true, None));
    }

    let mut namer = Namer {
        rng: &mut rng,
        used: HashSet::new(),
    };
    for i in 0..n_unknown {
        let fact = lookup_fact(&mut namer);
        let doc_id = format!("doc-{i:05}");
        corpus.push(Document::new(&doc_id, fact.title, fact.body));
        questions.push((fact.prompt, fact.answer, false, Some(doc_id)));
    }
    for i in 0..n_unknown.div_ceil(2) {
        let (title, body) = distractor(&mut namer);
        corpus.push(Document::new(format!("doc-x{i:05}"), title, body));
    }

    questions.shuffle(&mut rng);
    let questions: Vec<Question> = questions
        .into_iter()
        .enumerate()
        .map(|(i, (prompt, answer, known, gold_doc_id))| {
            let id = format!("q{i:05}");
            // the model has no internal answer for lookups
            answers.insert(
                id.clone(),
                if known { answer.clone() } else { String::new() },
            );
            Question {
                id,
                prompt,
                golds: vec![answer],
                known,
                gold_doc_id,
                features: Vec::new(),
            }
        })
        .collect();

    let generated = GeneratedWorld {
        dataset: Dataset { questions, seed },
        corpus,
        knowledge: InternalKnowledge { answers },
    };

    let world = generated.clone().into_world(SimConfig::noiseless())?;
    let missing = world.unretrievable();
    if !missing.is_empty() {
        return Err(SimError::Unretrievable {
            ids: missing.into_iter().map(str::to_string).collect(),
        });
    }
    Ok(generated)
}
