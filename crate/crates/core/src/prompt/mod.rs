//! Teacher prompt templates and sliding-window decomposition of candidate lists.

mod window;

pub use window::{window_passages, window_spans, PassageWindow, WindowPassage};

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

pub const BASIC_TEMPLATE: &str = include_str!("../../templates/basic.txt");
pub const EXPLICIT_TEMPLATE: &str = include_str!("../../templates/explicit.txt");
pub const COMPARISON_TEMPLATE: &str = include_str!("../../templates/comparison.txt");
pub const RETURN_TEMPLATE: &str = include_str!("../../templates/return_type.txt");

/// Which instruction blocks a teacher prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    /// Ranking instructions only; the no-reasoning baseline.
    Basic,
    Explicit,
    Comparison,
    /// Basic, explicit and comparison blocks together.
    Combined,
}

impl PromptMode {
    pub const ALL: [PromptMode; 4] = [
        PromptMode::Basic,
        PromptMode::Explicit,
        PromptMode::Comparison,
        PromptMode::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Basic => "basic",
            PromptMode::Explicit => "explicit",
            PromptMode::Comparison => "comparison",
            PromptMode::Combined => "combined",
        }
    }

    pub fn has_explicit(self) -> bool {
        matches!(self, PromptMode::Explicit | PromptMode::Combined)
    }

    pub fn has_comparison(self) -> bool {
        matches!(self, PromptMode::Comparison | PromptMode::Combined)
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PromptMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown prompt mode {s:?}")))
    }
}

/// The four instruction blocks. Defaults are the bundled template files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub basic: String,
    pub explicit: String,
    pub comparison: String,
    pub return_type: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            basic: BASIC_TEMPLATE.into(),
            explicit: EXPLICIT_TEMPLATE.into(),
            comparison: COMPARISON_TEMPLATE.into(),
            return_type: RETURN_TEMPLATE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBuilder {
    pub templates: PromptTemplates,
    /// Whitespace-token budget per passage before templating.
    pub passage_tokens: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self {
            templates: PromptTemplates::default(),
            passage_tokens: 120,
        }
    }
}

impl PromptBuilder {
    pub fn new(templates: PromptTemplates, passage_tokens: usize) -> Self {
        Self {
            templates,
            passage_tokens,
        }
    }

    /// Renders the prompt: instruction blocks, a blank line, `[i] passage` lines,
    /// a blank line, then the return-type block.
    pub fn build(&self, query: &str, window: &PassageWindow, mode: PromptMode) -> String {
        let num = alloc::format!("{}", window.passages.len());
        let mut out = String::new();
        render(&mut out, &self.templates.basic, &num, query);
        if mode.has_explicit() {
            render(&mut out, &self.templates.explicit, &num, query);
        }
        if mode.has_comparison() {
            render(&mut out, &self.templates.comparison, &num, query);
        }
        out.push('\n');
        for p in &window.passages {
            out.push('[');
            out.push_str(&alloc::format!("{}", p.id));
            out.push_str("] ");
            out.push_str(&crate::text::truncate_whitespace(&p.text, self.passage_tokens));
            out.push('\n');
        }
        out.push('\n');
        render(&mut out, &self.templates.return_type, &num, query);
        out
    }
}

/// Single-pass placeholder substitution; inserted text is never rescanned.
fn render(out: &mut String, template: &str, num: &str, query: &str) {
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{num}") {
            out.push_str(num);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{query}") {
            out.push_str(query);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
}
