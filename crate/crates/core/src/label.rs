//! The three NLI classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// NLI relation between a premise and a hypothesis.
///
/// Declaration order is the canonical order used everywhere a label index is
/// needed: confusion matrix axes, tie-breaking, sorting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Entailed,
    Neutral,
    Contradict,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailed, Label::Neutral, Label::Contradict];

    pub fn index(self) -> usize {
        match self {
            Label::Entailed => 0,
            Label::Neutral => 1,
            Label::Contradict => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailed => "Entailed",
            Label::Neutral => "Neutral",
            Label::Contradict => "Contradict",
        }
    }

    /// The two labels other than `self`, in canonical order.
    pub fn others(self) -> [Label; 2] {
        match self {
            Label::Entailed => [Label::Neutral, Label::Contradict],
            Label::Neutral => [Label::Entailed, Label::Contradict],
            Label::Contradict => [Label::Entailed, Label::Neutral],
        }
    }

    /// Case-insensitive normalization of a raw label string.
    ///
    /// Accepts the task's own spellings plus the SNLI spellings
    /// (`entailment`, `contradiction`).
    pub fn normalize(raw: &str) -> Option<Label> {
        match raw.trim().to_lowercase().as_str() {
            "entailed" | "entailment" | "entail" => Some(Label::Entailed),
            "neutral" => Some(Label::Neutral),
            "contradict" | "contradiction" | "contradicted" => Some(Label::Contradict),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::normalize(s).ok_or_else(|| UnknownLabel(s.to_string()))
    }
}
