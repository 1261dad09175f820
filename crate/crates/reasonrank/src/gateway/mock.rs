//! Scripted stand-in for a teacher model.
//!
//! It reads the query and the `[i] passage` lines back out of the prompt, ranks
//! by query-term overlap, and writes the JSON a well-behaved teacher would,
//! with reasons matching the reasoning blocks present in the prompt. Defects
//! are injected from a hash of the prompt, so they do not depend on call order.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use reasonrank_core::prompt::{COMPARISON_TEMPLATE, EXPLICIT_TEMPLATE};
use reasonrank_core::text::{fnv1a, tokenize};
use reasonrank_core::usage::approx_tokens;
use serde_json::{json, Map, Value};

use super::{cache_key, CompletionRequest, TokenUsage, Transport, TransportError, TransportReply};
use crate::error::{Error, Result};
use crate::kv;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Most distinct query terms first.
    Overlap,
    /// Passages back in the order shown.
    Identity,
    /// Overlap order, reversed.
    Reverse,
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "overlap" => Ok(Policy::Overlap),
            "identity" => Ok(Policy::Identity),
            "reverse" => Ok(Policy::Reverse),
            _ => Err(format!("unknown policy {s:?}")),
        }
    }
}

/// Mock settings. Every `*_every = n` fires on prompts whose hash is divisible
/// by `n`; 0 disables it.
#[derive(Debug, Clone, PartialEq)]
pub struct MockScript {
    pub policy: Policy,
    /// Number of 429 replies before each distinct request succeeds.
    pub fail_first: u32,
    pub duplicate_every: u64,
    pub drop_every: u64,
    pub garbage_every: u64,
    /// Wrap the JSON in chatter and a fenced block.
    pub fence: bool,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            policy: Policy::Overlap,
            fail_first: 0,
            duplicate_every: 0,
            drop_every: 0,
            garbage_every: 0,
            fence: false,
        }
    }
}

impl MockScript {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut s = Self::default();
        for e in kv::parse(text, path)? {
            match e.key.as_str() {
                "policy" => {
                    s.policy = e
                        .value
                        .parse()
                        .map_err(|m: String| Error::parse(path, e.line, m))?
                }
                "fail_first" => s.fail_first = kv::parse_value(&e, path)?,
                "duplicate_every" => s.duplicate_every = kv::parse_value(&e, path)?,
                "drop_every" => s.drop_every = kv::parse_value(&e, path)?,
                "garbage_every" => s.garbage_every = kv::parse_value(&e, path)?,
                "fence" => s.fence = kv::parse_bool(&e, path)?,
                other => return Err(Error::parse(path, e.line, format!("unknown mock setting {other}"))),
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

pub struct MockTransport {
    script: MockScript,
    failures: Mutex<HashMap<String, u32>>,
    calls: AtomicU64,
}

impl MockTransport {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            failures: Mutex::new(HashMap::new()),
            calls: AtomicU64::new(0),
        }
    }

    /// Every `send`, 429s included.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &CompletionRequest) -> std::result::Result<TransportReply, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if self.script.fail_first > 0 {
            let mut f = self.failures.lock().unwrap();
            let n = f.entry(cache_key(req)).or_insert(0);
            if *n < self.script.fail_first {
                *n += 1;
                return Err(TransportError::RateLimited);
            }
        }
        let text = respond(&self.script, &req.prompt);
        Ok(TransportReply {
            usage: Some(TokenUsage {
                input_tokens: approx_tokens(&req.prompt),
                output_tokens: approx_tokens(&text),
            }),
            text,
        })
    }
}

fn first_line(block: &str) -> &str {
    block.lines().next().unwrap_or("")
}

struct PromptView {
    query: String,
    passages: Vec<(usize, String)>,
    explicit: bool,
    comparison: bool,
}

fn read_prompt(prompt: &str) -> PromptView {
    let mut query = String::new();
    let mut passages = Vec::new();
    for line in prompt.lines() {
        if let Some(q) = line.strip_prefix("Search Query: ") {
            query = q.strip_suffix('.').unwrap_or(q).to_string();
        } else if let Some(rest) = line.strip_prefix('[') {
            if let Some((num, text)) = rest.split_once("] ") {
                if let Ok(id) = num.parse::<usize>() {
                    passages.push((id, text.to_string()));
                }
            }
        }
    }
    PromptView {
        query,
        passages,
        explicit: prompt.contains(first_line(EXPLICIT_TEMPLATE)),
        comparison: prompt.contains(first_line(COMPARISON_TEMPLATE)),
    }
}

fn every(h: u64, n: u64) -> bool {
    n > 0 && h.is_multiple_of(n)
}

/// The full mock reply for a prompt.
pub fn respond(script: &MockScript, prompt: &str) -> String {
    let view = read_prompt(prompt);
    let h = fnv1a(prompt.as_bytes());
    if every(h >> 3, script.garbage_every) {
        return "I am unable to rank these passages.".into();
    }
    let q_terms: Vec<String> = {
        let mut seen = BTreeSet::new();
        tokenize(&view.query)
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect()
    };
    let matched: Vec<(usize, Vec<String>, usize)> = view
        .passages
        .iter()
        .map(|(id, text)| {
            let toks = tokenize(text);
            let set: BTreeSet<&str> = toks.iter().map(String::as_str).collect();
            let hits: Vec<String> = q_terms.iter().filter(|t| set.contains(t.as_str())).cloned().collect();
            let occurrences = toks.iter().filter(|t| q_terms.contains(t)).count();
            (*id, hits, occurrences)
        })
        .collect();

    let mut order: Vec<usize> = (0..matched.len()).collect();
    if script.policy != Policy::Identity {
        order.sort_by(|&a, &b| {
            let (ia, ha, oa) = &matched[a];
            let (ib, hb, ob) = &matched[b];
            hb.len().cmp(&ha.len()).then(ob.cmp(oa)).then(ia.cmp(ib))
        });
        if script.policy == Policy::Reverse {
            order.reverse();
        }
    }

    let mut reasons = Map::new();
    for (pos, &i) in order.iter().enumerate() {
        let (id, hits, _) = &matched[i];
        let mut r = Map::new();
        if view.explicit {
            let direct = if hits.is_empty() {
                format!("passage [{id}] does not mention the query terms")
            } else {
                format!("passage [{id}] directly mentions {}", hits.join(" and "))
            };
            r.insert("direct".into(), Value::String(direct));
        }
        if view.comparison {
            let listwise = match pos {
                0 => format!("passage [{id}] covers more of the query than the others"),
                _ => {
                    let prev = matched[order[pos - 1]].0;
                    format!("passage [{id}] is less complete than passage [{prev}]")
                }
            };
            r.insert("listwise".into(), Value::String(listwise));
        }
        if !r.is_empty() {
            reasons.insert(id.to_string(), Value::Object(r));
        }
    }

    let mut ranking: Vec<usize> = order.iter().map(|&i| matched[i].0).collect();
    if every(h, script.duplicate_every) && ranking.len() > 1 {
        ranking.insert(2.min(ranking.len()), ranking[0]);
    }
    if every(h >> 7, script.drop_every) && ranking.len() > 1 {
        ranking.pop();
    }
    let keywords: Vec<&String> = q_terms
        .iter()
        .filter(|t| matched.iter().any(|(_, hits, _)| hits.contains(t)))
        .collect();

    let mut body = Map::new();
    body.insert("ranking".into(), json!(ranking));
    if !reasons.is_empty() {
        body.insert("reasons".into(), Value::Object(reasons));
    }
    body.insert("keywords".into(), json!(keywords));
    let text = serde_json::to_string_pretty(&Value::Object(body)).expect("json serializes");
    if script.fence {
        format!("Here is my ranking.\n```json\n{text}\n```\n")
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use reasonrank_core::prompt::{PassageWindow, PromptBuilder, PromptMode};
    use reasonrank_core::response::parse_ranking_response;

    fn prompt(mode: PromptMode) -> String {
        let w = PassageWindow::from_slice(
            "q",
            0,
            &[
                ("a", "nothing relevant here"),
                ("b", "solar panels convert light"),
                ("c", "solar power from solar panels"),
            ],
        );
        PromptBuilder::default().build("how do solar panels work", &w, mode)
    }

    #[test]
    fn ranks_by_overlap_with_mode_specific_reasons() {
        let s = MockScript::default();
        let r = parse_ranking_response("q", &respond(&s, &prompt(PromptMode::Combined)), &[1, 2, 3]).unwrap();
        assert_eq!(r.ranking.order, vec![3, 2, 1]);
        assert!(r.ranking.direct_reasons[&3].contains("solar"));
        assert!(r.ranking.listwise_reasons[&2].contains("[3]"));
        assert_eq!(r.ranking.keywords, vec!["solar".to_string(), "panels".to_string()]);

        let basic = respond(&s, &prompt(PromptMode::Basic));
        assert!(!basic.contains("reasons"));
        let explicit = respond(&s, &prompt(PromptMode::Explicit));
        assert!(explicit.contains("direct") && !explicit.contains("listwise"));
        let comparison = respond(&s, &prompt(PromptMode::Comparison));
        assert!(!comparison.contains("direct") && comparison.contains("listwise"));
    }

    #[test]
    fn script_parsing() {
        let p = Path::new("m.conf");
        let s = MockScript::parse("policy = reverse\nfail_first = 2\nfence = true\n", p).unwrap();
        assert_eq!(s.policy, Policy::Reverse);
        assert_eq!(s.fail_first, 2);
        assert!(s.fence);
        assert!(MockScript::parse("colour = blue\n", p).is_err());
        assert!(MockScript::parse("policy = random\n", p).is_err());
    }

    #[test]
    fn injected_defects_are_detected() {
        let s = MockScript {
            duplicate_every: 1,
            drop_every: 1,
            fence: true,
            ..Default::default()
        };
        let r = parse_ranking_response("q", &respond(&s, &prompt(PromptMode::Basic)), &[1, 2, 3]).unwrap();
        assert_eq!(r.defects.duplicates.len(), 1);
        assert_eq!(r.defects.missing.len(), 1);
    }
}
