use serde_json::Value;

use crate::{Error, Result};

/// Pulls the first JSON value out of free-form model output.
///
/// Tried in order: the whole text, the first fenced code block, the first
/// balanced `{...}` that parses, then the first balanced `[...]` that parses.
/// Objects are preferred over arrays because prose such as "passage [2]" is
/// itself valid JSON.
pub fn extract_json(text: &str) -> Result<Value> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if v.is_object() || v.is_array() {
            return Ok(v);
        }
    }
    if let Some(block) = fenced_block(trimmed) {
        if let Ok(v) = serde_json::from_str::<Value>(block) {
            return Ok(v);
        }
    }
    for open in *b"{[" {
        for (start, _) in trimmed.bytes().enumerate().filter(|&(_, b)| b == open) {
            if let Some(end) = balanced_end(&trimmed.as_bytes()[start..]) {
                if let Ok(v) = serde_json::from_str::<Value>(&trimmed[start..start + end]) {
                    return Ok(v);
                }
            }
        }
    }
    Err(Error::NoJson)
}

fn fenced_block(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim())
}

/// Length of the balanced bracket expression at the start of `bytes`, respecting strings.
fn balanced_end(bytes: &[u8]) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_and_wrapped() {
        let bare = r#"{"ranking": [3, 1, 2]}"#;
        let fenced = "Sure! Here is the ranking:\n```json\n{\"ranking\": [3, 1, 2]}\n```\nHope it helps.";
        let prose = "Passage [2] is weak. {\"ranking\": [3, 1, 2]} done";
        let v = extract_json(bare).unwrap();
        assert_eq!(extract_json(fenced).unwrap(), v);
        assert_eq!(extract_json(prose).unwrap(), v);
    }

    #[test]
    fn braces_inside_strings() {
        let t = r#"note: {"ranking": [1], "reasons": {"1": {"direct": "uses } and ] chars"}}} trailing"#;
        let v = extract_json(t).unwrap();
        assert_eq!(v["ranking"][0], 1);
    }

    #[test]
    fn bare_array_fallback() {
        assert_eq!(extract_json("order: [2, 1]").unwrap()[0], 2);
    }

    #[test]
    fn nothing_found() {
        assert_eq!(extract_json("I cannot rank these."), Err(Error::NoJson));
        assert_eq!(extract_json("{broken"), Err(Error::NoJson));
    }
}
