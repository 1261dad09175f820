//! `key = value` text: one pair per line, `#` starts a comment, blank lines
//! are ignored, values may be wrapped in double quotes.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find('#') {
            Some(p) if !raw[..p].contains('"') => &raw[..p],
            _ => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, format!("expected `key = value`, found {content:?}")))?;
        let key = k.trim().to_string();
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if key.is_empty() {
            return Err(Error::parse(path, line, "empty key"));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::parse(path, line, format!("key {key} set twice")));
        }
        out.push(Entry {
            line,
            key,
            value: value.to_string(),
        });
    }
    Ok(out)
}

pub fn parse_value<T: std::str::FromStr>(e: &Entry, path: &Path) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| Error::parse(path, e.line, format!("invalid value {:?} for {}", e.value, e.key)))
}

pub fn parse_bool(e: &Entry, path: &Path) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::parse(path, e.line, format!("expected true/false for {}", e.key))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_quotes_and_duplicates() {
        let p = Path::new("x.conf");
        let e = parse("# header\na = 1\n\nname = \"toy # run\"  \nb=two # trailing\n", p).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[1].value, "toy # run");
        assert_eq!(e[2].value, "two");
        assert_eq!(e[2].line, 5);
        assert!(parse("a = 1\na = 2\n", p).is_err());
        assert!(parse("nonsense\n", p).unwrap_err().to_string().contains(":1:"));
    }
}
