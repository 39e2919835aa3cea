//! Scoring predictions against gold labels.
//!
//! Conventions:
//! - confusion matrix rows are gold labels, columns are predictions, both in
//!   `Label::ALL` order
//! - any 0/0 ratio resolves to 0
//! - macro scores are unweighted means of the per-class scores; macro F1 is the
//!   mean of per-class F1, not the harmonic mean of macro P and macro R
//! - Type-1 errors confuse Entailed with Contradict; Type-2 errors are every
//!   other mistake (one side is Neutral)

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Dataset};
use crate::exec::{self, Execution};
use crate::label::Label;
use crate::prompt::{parse_label, MatchRule, PromptTemplate};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("gold and predicted sequences differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to score")]
    Empty,
    #[error("no prediction for gold id {0:?}")]
    MissingPrediction(String),
    #[error("prediction for unknown id {0:?}")]
    UnknownId(String),
    #[error("duplicate prediction for id {0:?}")]
    DuplicatePrediction(String),
    #[error("predictions row {row}: {message}")]
    Format { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] CorpusError),
}

/// 3×3 count matrix indexed `[gold][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: Label, pred: Label) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, gold: Label) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn col_sum(&self, pred: Label) -> u64 {
        self.counts.iter().map(|row| row[pred.index()]).sum()
    }

    pub fn add(&mut self, gold: Label, pred: Label) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn error_counts(&self) -> ErrorCounts {
        let mut out = ErrorCounts::default();
        for gold in Label::ALL {
            for pred in Label::ALL {
                let n = self.get(gold, pred);
                match classify_error(gold, pred) {
                    ErrorType::Correct => out.correct += n,
                    ErrorType::Type1 => out.type1 += n,
                    ErrorType::Type2 => out.type2 += n,
                }
            }
        }
        out
    }
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        m.add(g, p);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy plus per-class, macro and support-weighted scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub support: u64,
    pub accuracy: f64,
    pub per_class: BTreeMap<Label, ClassScores>,
    #[serde(rename = "macro")]
    pub macro_avg: ClassScores,
    pub weighted: ClassScores,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(m: &ConfusionMatrix) -> MetricBlock {
    let total = m.total();
    let per_class: BTreeMap<Label, ClassScores> = Label::ALL
        .iter()
        .map(|&l| {
            let tp = m.get(l, l);
            let precision = ratio(tp, m.col_sum(l));
            let recall = ratio(tp, m.row_sum(l));
            (
                l,
                ClassScores {
                    precision,
                    recall,
                    f1: harmonic(precision, recall),
                },
            )
        })
        .collect();
    let mean = |f: fn(&ClassScores) -> f64| per_class.values().map(f).sum::<f64>() / 3.0;
    let weighted = |f: fn(&ClassScores) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|(&l, s)| f(s) * m.row_sum(l) as f64)
                .sum::<f64>()
                / total as f64
        }
    };
    MetricBlock {
        support: total,
        accuracy: ratio(m.trace(), total),
        macro_avg: ClassScores {
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1: mean(|s| s.f1),
        },
        weighted: ClassScores {
            precision: weighted(|s| s.precision),
            recall: weighted(|s| s.recall),
            f1: weighted(|s| s.f1),
        },
        per_class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorType {
    Correct,
    /// Entailed ↔ Contradict.
    Type1,
    /// Neutral ↔ anything else.
    Type2,
}

pub fn classify_error(gold: Label, pred: Label) -> ErrorType {
    match (gold, pred) {
        _ if gold == pred => ErrorType::Correct,
        (Label::Entailed, Label::Contradict) | (Label::Contradict, Label::Entailed) => ErrorType::Type1,
        _ => ErrorType::Type2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub type1: u64,
    pub type2: u64,
    pub correct: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSlice {
    pub matrix: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: MetricBlock,
}

/// Metrics per domain tag, keyed in lexicographic order. Untagged examples are
/// left out.
pub fn domain_breakdown(
    gold: &[Label],
    pred: &[Label],
    domains: &[Option<String>],
) -> Result<BTreeMap<String, DomainSlice>, EvalError> {
    domain_breakdown_with(Execution::default(), gold, pred, domains)
}

pub fn domain_breakdown_with(
    mode: Execution,
    gold: &[Label],
    pred: &[Label],
    domains: &[Option<String>],
) -> Result<BTreeMap<String, DomainSlice>, EvalError> {
    if gold.len() != pred.len() || gold.len() != domains.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len().min(domains.len()),
        });
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in domains.iter().enumerate() {
        if let Some(d) = d {
            groups.entry(d.as_str()).or_default().push(i);
        }
    }
    let groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    let slices = exec::map(mode, &groups, |(name, idx)| {
        let mut m = ConfusionMatrix::default();
        for &i in idx {
            m.add(gold[i], pred[i]);
        }
        (
            name.to_string(),
            DomainSlice {
                metrics: metrics(&m),
                matrix: m,
            },
        )
    });
    Ok(slices.into_iter().collect())
}

/// Full scoring output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub matrix: ConfusionMatrix,
    #[serde(flatten)]
    pub overall: MetricBlock,
    pub error_counts: ErrorCounts,
    pub nomatch_count: u64,
    pub fallback_label: Label,
    pub domain_slices: BTreeMap<String, DomainSlice>,
}

impl EvaluationReport {
    pub fn macro_f1(&self) -> f64 {
        self.overall.macro_avg.f1
    }
}

pub fn evaluate(
    gold: &[Label],
    pred: &[Label],
    domains: &[Option<String>],
    nomatch_count: u64,
    fallback_label: Label,
) -> Result<EvaluationReport, EvalError> {
    let matrix = confusion(gold, pred)?;
    Ok(EvaluationReport {
        overall: metrics(&matrix),
        error_counts: matrix.error_counts(),
        domain_slices: domain_breakdown(gold, pred, domains)?,
        matrix,
        nomatch_count,
        fallback_label,
    })
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub predicted_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_generation: Option<String>,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    if !path.exists() {
        return Err(CorpusError::FileNotFound(path.to_path_buf()).into());
    }
    let io = |source| {
        EvalError::Io(CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let row = out.len();
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| EvalError::Format { row, message: e.to_string() })?;
        let id = match value.get("id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => {
                return Err(EvalError::Format {
                    row,
                    message: "missing string `id`".into(),
                })
            }
        };
        let text = |k: &str| value.get(k).and_then(|v| v.as_str()).map(str::to_string);
        out.push(PredictionRecord {
            id,
            predicted_label: text("predicted_label"),
            raw_generation: text("raw_generation"),
        });
    }
    Ok(out)
}

/// Joins predictions to the gold dataset by id and scores them.
///
/// A record's label is read from `predicted_label`, or parsed out of
/// `raw_generation` when that is absent or unrecognized. Records with no
/// recoverable label count toward `nomatch_count` and score as
/// `fallback_label`. Every gold id needs exactly one prediction.
pub fn score_predictions(
    gold: &Dataset,
    predictions: &[PredictionRecord],
    template: &PromptTemplate,
    fallback_label: Label,
) -> Result<EvaluationReport, EvalError> {
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if gold.get(&p.id).is_none() {
            return Err(EvalError::UnknownId(p.id.clone()));
        }
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }
    let mut gold_labels = Vec::with_capacity(gold.len());
    let mut pred_labels = Vec::with_capacity(gold.len());
    let mut domains = Vec::with_capacity(gold.len());
    let mut nomatch = 0;
    for e in gold {
        let p = by_id
            .get(e.id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(e.id.clone()))?;
        let label = p
            .predicted_label
            .as_deref()
            .and_then(Label::normalize)
            .or_else(|| {
                let parsed = p.raw_generation.as_deref().map(|g| parse_label(g, template));
                parsed.filter(|x| x.confidence_rule != MatchRule::NoMatch).and_then(|x| x.label)
            });
        let label = label.unwrap_or_else(|| {
            nomatch += 1;
            fallback_label
        });
        gold_labels.push(e.label);
        pred_labels.push(label);
        domains.push(e.domain.clone());
    }
    evaluate(&gold_labels, &pred_labels, &domains, nomatch, fallback_label)
}
