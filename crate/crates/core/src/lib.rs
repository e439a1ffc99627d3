//! Learning when to search: a tagged-trajectory grammar, a gated reward
//! that pays for correct direct answers and for necessary searches only,
//! a BM25 search tool, a simulated QA environment and a GRPO trainer.

pub mod cli;
pub mod config;
pub mod eval;
pub mod grpo;
pub mod report;
pub mod retrieval;
pub mod reward;
pub mod scoring;
pub mod simenv;
pub mod store;
pub mod trajectory;
