//! Prompt templates and label parsing.
//!
//! A template file is a small front-matter header followed by the body:
//!
//! ```text
//! ---
//! name: default
//! entailed: Entailed
//! neutral: Neutral
//! contradict: Contradict
//! ---
//! Premise: {premise}
//! Hypothesis: {hypothesis}
//! Answer:
//! ```
//!
//! Vocabulary keys are optional and default to the bare label words.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::NliExample;
use crate::label::Label;

const PREMISE: &str = "{premise}";
const HYPOTHESIS: &str = "{hypothesis}";

pub const DEFAULT_BODY: &str = "Classify the relationship between the premise and the hypothesis as Entailed, Neutral, or Contradict.\nPremise: {premise}\nHypothesis: {hypothesis}\nAnswer:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template body must contain {placeholder} exactly once (found {count})")]
    Placeholder { placeholder: &'static str, count: usize },
    #[error("vocabulary entry for {0} is empty")]
    EmptyCompletion(Label),
    #[error("vocabulary entries for {0} and {1} are not distinct")]
    DuplicateCompletion(Label, Label),
    #[error("vocabulary is missing {0}")]
    MissingCompletion(Label),
    #[error("template file: {0}")]
    Format(String),
}

/// A prompt body with `{premise}` / `{hypothesis}` placeholders and the
/// completion string for each label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub label_vocabulary: BTreeMap<Label, String>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            name: "default".into(),
            body: DEFAULT_BODY.into(),
            label_vocabulary: default_vocabulary(),
        }
    }
}

fn default_vocabulary() -> BTreeMap<Label, String> {
    Label::ALL.iter().map(|&l| (l, l.as_str().to_string())).collect()
}

impl PromptTemplate {
    /// Builds and validates a template.
    pub fn new(
        name: impl Into<String>,
        body: impl Into<String>,
        label_vocabulary: BTreeMap<Label, String>,
    ) -> Result<Self, TemplateError> {
        let t = PromptTemplate {
            name: name.into(),
            body: body.into(),
            label_vocabulary,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for placeholder in [PREMISE, HYPOTHESIS] {
            let count = self.body.matches(placeholder).count();
            if count != 1 {
                return Err(TemplateError::Placeholder { placeholder, count });
            }
        }
        for label in Label::ALL {
            match self.label_vocabulary.get(&label) {
                None => return Err(TemplateError::MissingCompletion(label)),
                Some(v) if v.trim().is_empty() => return Err(TemplateError::EmptyCompletion(label)),
                Some(_) => {}
            }
        }
        for (i, a) in Label::ALL.iter().enumerate() {
            for b in &Label::ALL[i + 1..] {
                let va = self.label_vocabulary[a].trim().to_lowercase();
                let vb = self.label_vocabulary[b].trim().to_lowercase();
                if va == vb {
                    return Err(TemplateError::DuplicateCompletion(*a, *b));
                }
            }
        }
        Ok(())
    }

    /// Parses the front-matter file format described in the module docs.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("---") {
            return Err(TemplateError::Format("expected a leading `---` line".into()));
        }
        let mut name = "custom".to_string();
        let mut vocabulary = default_vocabulary();
        let mut closed = false;
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "---" {
                closed = true;
                break;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| TemplateError::Format(format!("expected `key: value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            if key.eq_ignore_ascii_case("name") {
                name = value;
            } else if let Some(label) = Label::normalize(key) {
                vocabulary.insert(label, value);
            } else {
                return Err(TemplateError::Format(format!("unknown header key {key:?}")));
            }
        }
        if !closed {
            return Err(TemplateError::Format("front matter is not closed by `---`".into()));
        }
        let body = lines.collect::<Vec<_>>().join("\n");
        PromptTemplate::new(name, body.trim_end().to_string(), vocabulary)
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Format(format!("{}: {e}", path.display())))?;
        PromptTemplate::parse(&text)
    }

    /// Serializes back to the front-matter file format.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("---\nname: {}\n", self.name);
        for (label, value) in &self.label_vocabulary {
            out.push_str(&format!("{}: {value}\n", label.as_str().to_lowercase()));
        }
        out.push_str("---\n");
        out.push_str(&self.body);
        out.push('\n');
        out
    }
}

/// Substitutes the example's premise and hypothesis into the template body.
///
/// Substitution is single-pass, so placeholder text inside the inserted fields
/// is left alone. No truncation happens here.
pub fn render_prompt(e: &NliExample, t: &PromptTemplate) -> Result<String, TemplateError> {
    render_fields(&e.premise, &e.hypothesis, t)
}

pub fn render_fields(premise: &str, hypothesis: &str, t: &PromptTemplate) -> Result<String, TemplateError> {
    t.validate()?;
    let mut out = String::with_capacity(t.body.len() + premise.len() + hypothesis.len());
    let mut rest = t.body.as_str();
    loop {
        let next_p = rest.find(PREMISE).map(|i| (i, PREMISE, premise));
        let next_h = rest.find(HYPOTHESIS).map(|i| (i, HYPOTHESIS, hypothesis));
        let next = match (next_p, next_h) {
            (Some(p), Some(h)) => Some(if p.0 < h.0 { p } else { h }),
            (p, h) => p.or(h),
        };
        match next {
            Some((at, placeholder, value)) => {
                out.push_str(&rest[..at]);
                out.push_str(value);
                rest = &rest[at + placeholder.len()..];
            }
            None => {
                out.push_str(rest);
                return Ok(out);
            }
        }
    }
}

/// The completion string that stands for `label`.
pub fn canonical_completion(label: Label, t: &PromptTemplate) -> &str {
    t.label_vocabulary
        .get(&label)
        .map(String::as_str)
        .unwrap_or(label.as_str())
}

/// Which rule in the parse cascade produced the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchRule {
    ExactMatch,
    SubstringMatch,
    NoMatch,
}

/// Result of reading a label out of a model generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedLabel {
    pub label: Option<Label>,
    pub matched_span: Option<String>,
    pub confidence_rule: MatchRule,
}

impl ParsedLabel {
    fn no_match() -> Self {
        ParsedLabel {
            label: None,
            matched_span: None,
            confidence_rule: MatchRule::NoMatch,
        }
    }
}

/// Maps a free-form generation to a label.
///
/// 1. The trimmed generation equals a vocabulary entry (case-insensitive).
/// 2. Otherwise the earliest word-bounded, case-insensitive occurrence of any
///    entry wins; ties at the same offset go to the label that comes first in
///    `Label::ALL`.
/// 3. Otherwise no label.
pub fn parse_label(generation: &str, t: &PromptTemplate) -> ParsedLabel {
    let trimmed = generation.trim();
    for label in Label::ALL {
        let completion = canonical_completion(label, t).trim();
        if !completion.is_empty() && ci_prefix_len(trimmed, completion) == Some(trimmed.len()) {
            return ParsedLabel {
                label: Some(label),
                matched_span: Some(trimmed.to_string()),
                confidence_rule: MatchRule::ExactMatch,
            };
        }
    }

    let mut best: Option<(usize, Label, usize)> = None;
    for label in Label::ALL {
        let completion = canonical_completion(label, t).trim();
        if completion.is_empty() {
            continue;
        }
        if let Some((start, len)) = find_word_bounded(generation, completion) {
            if best.is_none_or(|(s, _, _)| start < s) {
                best = Some((start, label, len));
            }
        }
    }
    match best {
        Some((start, label, len)) => ParsedLabel {
            label: Some(label),
            matched_span: Some(generation[start..start + len].to_string()),
            confidence_rule: MatchRule::SubstringMatch,
        },
        None => ParsedLabel::no_match(),
    }
}

/// Byte length of the prefix of `hay` that case-insensitively equals `needle`.
fn ci_prefix_len(hay: &str, needle: &str) -> Option<usize> {
    let mut want = needle.chars().flat_map(char::to_lowercase).peekable();
    let mut end = 0;
    for (i, hc) in hay.char_indices() {
        if want.peek().is_none() {
            return Some(end);
        }
        for lc in hc.to_lowercase() {
            if want.next() != Some(lc) {
                return None;
            }
        }
        end = i + hc.len_utf8();
    }
    want.peek().is_none().then_some(end)
}

fn find_word_bounded(hay: &str, needle: &str) -> Option<(usize, usize)> {
    for (start, _) in hay.char_indices() {
        if start > 0 {
            let prev = hay[..start].chars().next_back().expect("non-empty prefix");
            if prev.is_alphanumeric() {
                continue;
            }
        }
        if let Some(len) = ci_prefix_len(&hay[start..], needle) {
            let after = hay[start + len..].chars().next();
            if after.is_none_or(|c| !c.is_alphanumeric()) {
                return Some((start, len));
            }
        }
    }
    None
}
