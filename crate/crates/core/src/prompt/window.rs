use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPassage {
    /// 1-based identifier shown to the teacher as `[id]`.
    pub id: usize,
    pub doc_id: String,
    pub text: String,
}

/// A contiguous slice of a candidate list, renumbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageWindow {
    pub query_id: String,
    /// Offset of the first passage in the full list.
    pub start: usize,
    pub passages: Vec<WindowPassage>,
}

impl PassageWindow {
    pub fn from_slice<S: AsRef<str>, T: AsRef<str>>(
        query_id: &str,
        start: usize,
        docs: &[(S, T)],
    ) -> Self {
        Self {
            query_id: query_id.into(),
            start,
            passages: docs
                .iter()
                .enumerate()
                .map(|(i, (d, t))| WindowPassage {
                    id: i + 1,
                    doc_id: d.as_ref().into(),
                    text: t.as_ref().into(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.passages.iter().map(|p| p.doc_id.clone()).collect()
    }
}

/// Window ranges over a list of `len` items, emitted back to front.
///
/// The last window ends at `len`; each earlier one ends `stride` positions
/// before its successor, so neighbours overlap by `window_size - stride`.
pub fn window_spans(len: usize, window_size: usize, stride: usize) -> Result<Vec<Range<usize>>> {
    if window_size < 2 {
        return Err(Error::InvalidArgument("window size must be at least 2".into()));
    }
    if stride == 0 || stride > window_size {
        return Err(Error::InvalidArgument(
            "stride must be in 1..=window_size".into(),
        ));
    }
    let mut spans = Vec::new();
    if len == 0 {
        return Ok(spans);
    }
    let mut end = len;
    loop {
        let start = end.saturating_sub(window_size);
        spans.push(start..end);
        if start == 0 {
            break;
        }
        end -= stride;
    }
    Ok(spans)
}

/// Static windows over a first-stage list of `(doc_id, text)` pairs.
pub fn window_passages<S: AsRef<str>, T: AsRef<str>>(
    query_id: &str,
    docs: &[(S, T)],
    window_size: usize,
    stride: usize,
) -> Result<Vec<PassageWindow>> {
    Ok(window_spans(docs.len(), window_size, stride)?
        .into_iter()
        .map(|r| PassageWindow::from_slice(query_id, r.start, &docs[r]))
        .collect())
}
