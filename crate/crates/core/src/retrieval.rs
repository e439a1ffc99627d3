//! In-memory inverted index with Okapi BM25 ranking.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::normalize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("empty document id")]
    EmptyId,
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            body: body.into(),
        }
    }
}

/// Title and body share one token stream.
pub fn document_tokens(doc: &Document) -> Vec<String> {
    normalize(&format!("{} {}", doc.title, doc.body))
        .tokens()
        .to_vec()
}

/// Query terms in first-occurrence order, duplicates dropped.
pub fn query_terms(query: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    normalize(query)
        .tokens()
        .iter()
        .filter(|t| seen.insert(t.as_str().to_owned()))
        .cloned()
        .collect()
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`, always positive.
pub fn bm25_idf(n_docs: usize, df: usize) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

pub fn bm25_term_score(idf: f64, tf: usize, doc_len: usize, avgdl: f64) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - BM25_B + BM25_B * doc_len as f64 / avgdl;
    idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Index {
    docs: Vec<Document>,
    by_id: HashMap<String, u32>,
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexStats {
    pub documents: usize,
    pub avgdl: f64,
    pub terms: usize,
}

impl Index {
    pub fn build(docs: Vec<Document>) -> Result<Self, RetrievalError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());

        for (i, doc) in docs.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(RetrievalError::EmptyId);
            }
            if by_id.insert(doc.id.clone(), i as u32).is_some() {
                return Err(RetrievalError::DuplicateId(doc.id.clone()));
            }
            let tokens = document_tokens(doc);
            doc_lengths.push(tokens.len());

            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: i as u32,
                    tf: count,
                });
            }
        }

        let total: usize = doc_lengths.iter().sum();
        let avgdl = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };

        Ok(Index {
            docs,
            by_id,
            postings,
            doc_lengths,
            avgdl,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i as usize])
    }

    pub fn doc_length(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).map(|&i| self.doc_lengths[i as usize])
    }

    /// Postings for `term` as `(doc id, term frequency)`.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings
            .get(term)
            .map(|ps| {
                ps.iter()
                    .map(|p| (self.docs[p.doc as usize].id.as_str(), p.tf))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            documents: self.docs.len(),
            avgdl: self.avgdl,
            terms: self.postings.len(),
        }
    }

    /// Top-`k` documents sharing at least one term with `query`. Ties go to
    /// the smaller document id. `k == 0` yields nothing.
    pub fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        if self.docs.is_empty() || k == 0 {
            return Vec::new();
        }
        let n = self.docs.len();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in query_terms(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = bm25_idf(n, list.len());
            for p in list {
                let s = bm25_term_score(
                    idf,
                    p.tf as usize,
                    self.doc_lengths[p.doc as usize],
                    self.avgdl,
                );
                *scores.entry(p.doc).or_insert(0.0) += s;
            }
        }

        let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0 as usize].id.cmp(&self.docs[b.0 as usize].id))
        });
        ranked.truncate(k);
        ranked
            .into_iter()
            .map(|(d, score)| Hit {
                doc_id: self.docs[d as usize].id.clone(),
                score,
            })
            .collect()
    }

    /// One `title: body` line per hit, in rank order.
    pub fn format_result(&self, hits: &[Hit]) -> String {
        hits.iter()
            .filter_map(|h| self.document(&h.doc_id))
            .map(|d| format!("{}: {}", d.title, d.body))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Reads a JSON-lines corpus (`id`, `title`, `text`). Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, RetrievalError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(&line).map_err(|e| RetrievalError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_index() {
        let idx = Index::build(vec![]).unwrap();
        assert_eq!(idx.len(), 0);
        assert!(idx.search("anything", 3).is_empty());
    }

    #[test]
    fn single_doc_postings() {
        let idx = Index::build(vec![Document::new("d", "", "a b a")]).unwrap();
        // "a" is an article and dropped by normalization
        assert_eq!(idx.doc_length("d"), Some(1));
        assert!(idx.postings("a").is_empty());

        let idx = Index::build(vec![Document::new("d", "", "x y x")]).unwrap();
        assert_eq!(idx.postings("x"), vec![("d", 2)]);
        assert_eq!(idx.postings("y"), vec![("d", 1)]);
        assert_eq!(idx.doc_length("d"), Some(3));
    }

    #[test]
    fn avgdl_is_mean() {
        let idx = Index::build(vec![
            Document::new("1", "t", "x y"),
            Document::new("2", "u", "x y z w v"),
        ])
        .unwrap();
        assert_eq!(idx.avgdl(), (3.0 + 6.0) / 2.0);
    }

    #[test]
    fn duplicate_and_empty_ids() {
        let err = Index::build(vec![
            Document::new("1", "", "x"),
            Document::new("1", "", "y"),
        ]);
        assert!(matches!(err, Err(RetrievalError::DuplicateId(id)) if id == "1"));
        assert!(matches!(
            Index::build(vec![Document::new("", "", "x")]),
            Err(RetrievalError::EmptyId)
        ));
    }

    #[test]
    fn unique_term_ranks_first() {
        let idx = Index::build(vec![
            Document::new("1", "alpha", "common words here"),
            Document::new("2", "beta", "common words zyxx"),
            Document::new("3", "gamma", "common words"),
        ])
        .unwrap();
        let hits = idx.search("zyxx", 3);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "2");
        assert!(idx.search("nothing matches", 3).is_empty());
    }

    #[test]
    fn ties_break_by_id() {
        let idx = Index::build(vec![
            Document::new("b", "", "same text"),
            Document::new("a", "", "same text"),
            Document::new("c", "", "same text"),
        ])
        .unwrap();
        let ids: Vec<_> = idx
            .search("same", 2)
            .into_iter()
            .map(|h| h.doc_id)
            .collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn format_result_lines() {
        let idx = Index::build(vec![
            Document::new("1", "T", "B"),
            Document::new("2", "U", "C"),
        ])
        .unwrap();
        assert_eq!(idx.format_result(&[]), "");
        let one = vec![Hit {
            doc_id: "1".into(),
            score: 1.0,
        }];
        assert_eq!(idx.format_result(&one), "T: B");
        let two = vec![
            Hit {
                doc_id: "2".into(),
                score: 2.0,
            },
            Hit {
                doc_id: "1".into(),
                score: 1.0,
            },
        ];
        assert_eq!(idx.format_result(&two), "U: C\nT: B");
    }

    #[test]
    fn corpus_reader() {
        let text = "{\"id\":\"1\",\"title\":\"T\",\"text\":\"B\"}\n\n{\"id\":\"2\",\"title\":\"U\",\"text\":\"C\"}\n";
        let docs = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].body, "C");
        let bad = "{\"id\":\"1\",\"title\":\"T\",\"text\":\"B\"}\nnot json\n";
        assert!(matches!(
            read_corpus(bad.as_bytes()),
            Err(RetrievalError::MalformedLine { line: 2, .. })
        ));
    }
}
