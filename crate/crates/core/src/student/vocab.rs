use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

pub const UNK: u32 = 0;
pub const EOS: u32 = 1;

/// Closed vocabulary for the generation head. Ids are dense; 0 and 1 are reserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct GenerationVocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<Vec<String>> for GenerationVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }
}

impl From<GenerationVocab> for Vec<String> {
    fn from(v: GenerationVocab) -> Self {
        v.tokens
    }
}

impl GenerationVocab {
    /// Keeps the `max_tokens` most frequent tokens, ties broken alphabetically.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_tokens: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for t in tokenize(text) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = Vec::with_capacity(max_tokens + 2);
        tokens.push("<unk>".into());
        tokens.push("<eos>".into());
        tokens.extend(ranked.into_iter().take(max_tokens).map(|(t, _)| t));
        Self::from(tokens)
    }

    /// A vocabulary of `size` placeholder tokens, for synthetic tasks.
    pub fn synthetic(size: usize) -> Self {
        let mut tokens: Vec<String> = Vec::with_capacity(size.max(2));
        tokens.push("<unk>".into());
        tokens.push("<eos>".into());
        tokens.extend((2..size).map(|i| alloc::format!("t{i}")));
        Self::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Tokenizes `text`, keeps at most `max_len - 1` tokens and appends EOS.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = tokenize(text)
            .iter()
            .map(|t| self.id(t))
            .take(max_len.saturating_sub(1))
            .collect();
        ids.push(EOS);
        ids
    }

    /// Joins tokens with spaces, stopping at EOS.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == EOS {
                break;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or("<unk>"));
        }
        out
    }
}
