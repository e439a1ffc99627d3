//! Flat `key = value` text files. `#` starts a comment line; blank lines
//! are ignored; later duplicates override earlier ones.

use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl KvEntry {
    pub fn parse<T>(&self, value: &str) -> Result<T, KvError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e: T::Err| KvError::InvalidValue {
            line: self.line,
            key: self.key.clone(),
            value: value.to_string(),
            message: e.to_string(),
        })
    }

    pub fn unknown_key(&self) -> KvError {
        KvError::UnknownKey {
            line: self.line,
            key: self.key.clone(),
        }
    }
}

pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>, KvError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(KvError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::Syntax { line: i + 1 });
        }
        out.push(KvEntry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}
