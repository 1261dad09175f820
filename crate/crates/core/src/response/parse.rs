use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::extract::extract_json;
use crate::Result;

/// Structured teacher output for one window.
///
/// `order` holds the in-range identifiers as emitted, duplicates included;
/// out-of-range identifiers are only recorded in the defects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonedRanking {
    pub query_id: String,
    pub order: Vec<usize>,
    pub direct_reasons: BTreeMap<usize, String>,
    pub listwise_reasons: BTreeMap<usize, String>,
    pub keywords: Vec<String>,
}

impl ReasonedRanking {
    /// Canonical JSON rendering in the accepted response schema.
    pub fn to_json(&self) -> Value {
        let mut reasons = Map::new();
        for id in self.direct_reasons.keys().chain(self.listwise_reasons.keys()) {
            let mut r = Map::new();
            r.insert(
                "direct".into(),
                Value::String(self.direct_reasons.get(id).cloned().unwrap_or_default()),
            );
            r.insert(
                "listwise".into(),
                Value::String(self.listwise_reasons.get(id).cloned().unwrap_or_default()),
            );
            reasons.insert(id.to_string(), Value::Object(r));
        }
        let mut obj = Map::new();
        obj.insert(
            "ranking".into(),
            Value::Array(self.order.iter().map(|&i| Value::from(i as u64)).collect()),
        );
        obj.insert("reasons".into(), Value::Object(reasons));
        obj.insert(
            "keywords".into(),
            Value::Array(self.keywords.iter().cloned().map(Value::String).collect()),
        );
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseDefects {
    /// One entry per surplus occurrence of an identifier.
    pub duplicates: Vec<usize>,
    pub missing: Vec<usize>,
    pub out_of_range: Vec<String>,
}

impl ResponseDefects {
    pub fn is_clean(&self) -> bool {
        self.duplicates.is_empty() && self.missing.is_empty() && self.out_of_range.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub ranking: ReasonedRanking,
    pub defects: ResponseDefects,
}

/// Parses a teacher response against the identifiers shown in its window.
///
/// Accepted schema: an object with a `"ranking"` array plus optional
/// `"reasons"` and `"keywords"`; unknown keys are ignored, and a bare array is
/// read as the ranking. Ranking items may be integers, strings such as `"[3]"`,
/// or objects carrying an `"id"` and inline reasons. Only a response with no
/// JSON value at all is an error.
pub fn parse_ranking_response(
    query_id: &str,
    text: &str,
    expected_ids: &[usize],
) -> Result<ParsedResponse> {
    let value = extract_json(text)?;
    let expected: BTreeSet<usize> = expected_ids.iter().copied().collect();
    let mut ranking = ReasonedRanking {
        query_id: query_id.into(),
        ..Default::default()
    };
    let mut defects = ResponseDefects::default();

    let (items, root) = match &value {
        Value::Array(a) => (a.as_slice(), None),
        Value::Object(o) => (
            o.get("ranking")
                .and_then(Value::as_array)
                .map(Vec::as_slice)
                .unwrap_or(&[]),
            Some(o),
        ),
        _ => (&[][..], None),
    };

    let mut seen = BTreeSet::new();
    for item in items {
        let raw = match item {
            Value::Object(o) => o
                .get("id")
                .or_else(|| o.get("identifier"))
                .or_else(|| o.get("passage")),
            other => Some(other),
        };
        let id = raw.and_then(identifier);
        match id {
            Some(id) if expected.contains(&id) => {
                if !seen.insert(id) {
                    defects.duplicates.push(id);
                }
                ranking.order.push(id);
                if let Value::Object(o) = item {
                    read_reason_object(o, id, &mut ranking);
                }
            }
            _ => defects
                .out_of_range
                .push(raw.map(render_raw).unwrap_or_else(|| render_raw(item))),
        }
    }
    defects.missing = expected.difference(&seen).copied().collect();

    if let Some(root) = root {
        if let Some(Value::Object(reasons)) = root.get("reasons") {
            for (k, v) in reasons {
                let Some(id) = identifier(&Value::String(k.clone())) else {
                    continue;
                };
                if !expected.contains(&id) {
                    continue;
                }
                match v {
                    Value::Object(o) => read_reason_object(o, id, &mut ranking),
                    Value::String(s) => {
                        ranking.direct_reasons.insert(id, s.clone());
                    }
                    _ => {}
                }
            }
        }
        if let Some(kw) = root.get("keywords") {
            collect_keywords(kw, &mut ranking.keywords);
        }
    }

    for &id in &ranking.order {
        ranking.direct_reasons.entry(id).or_default();
        ranking.listwise_reasons.entry(id).or_default();
    }
    Ok(ParsedResponse { ranking, defects })
}

fn identifier(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        Value::String(s) => s
            .trim()
            .trim_start_matches('[')
            .trim_end_matches(']')
            .trim()
            .parse()
            .ok(),
        _ => None,
    }
}

fn render_raw(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn read_reason_object(o: &Map<String, Value>, id: usize, ranking: &mut ReasonedRanking) {
    let pick = |keys: &[&str]| {
        keys.iter()
            .find_map(|k| o.get(*k).and_then(Value::as_str))
            .map(String::from)
    };
    if let Some(d) = pick(&["direct", "direct_reason", "direct_reasons"]) {
        ranking.direct_reasons.insert(id, d);
    }
    if let Some(l) = pick(&["listwise", "listwise_reason", "listwise_reasons"]) {
        ranking.listwise_reasons.insert(id, l);
    }
    if let Some(kw) = o.get("keywords") {
        collect_keywords(kw, &mut ranking.keywords);
    }
}

fn collect_keywords(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) => {
            if !out.iter().any(|k| k == s) {
                out.push(s.clone());
            }
        }
        Value::Array(a) => a.iter().for_each(|x| collect_keywords(x, out)),
        Value::Object(o) => o.values().for_each(|x| collect_keywords(x, out)),
        _ => {}
    }
}
