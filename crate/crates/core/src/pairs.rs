//! ORPO preference pairs.
//!
//! Each pair holds a rendered prompt, the gold label's completion as `chosen`
//! and one non-gold completion as `rejected`. Three rejection strategies:
//!
//! - random: one of the two non-gold labels, uniformly
//! - preferred: Neutral whenever gold is Entailed or Contradict; for Neutral
//!   gold, one of Entailed/Contradict uniformly
//! - multiple: both non-gold labels, as two separate pairs
//!
//! Randomness comes from a per-example stream seeded by `seed ^ hash(id)`, so
//! reordering a dataset never changes which label an example is paired with.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusError, Dataset, NliExample};
use crate::exec::{self, Execution};
use crate::hashing::{fnv64, sha256_hex};
use crate::label::Label;
use crate::prompt::{canonical_completion, parse_label, render_prompt, MatchRule, PromptTemplate, TemplateError};

#[derive(Debug, thiserror::Error)]
pub enum PairError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Io(#[from] CorpusError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("pair file row {row}: {message}")]
    Format { row: usize, message: String },
}

/// Rule for picking the rejected completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    RandomRejection,
    PreferredRejection,
    MultipleRejections,
}

impl Strategy {
    pub fn pairs_per_example(self) -> usize {
        match self {
            Strategy::MultipleRejections => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "randomrejection" => Ok(Strategy::RandomRejection),
            "preferred" | "preferredrejection" => Ok(Strategy::PreferredRejection),
            "multiple" | "multiplerejections" => Ok(Strategy::MultipleRejections),
            other => Err(format!("unknown strategy {other:?} (expected random, preferred or multiple)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub example_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub strategy: Strategy,
    #[serde(skip)]
    chosen_label: Option<Label>,
    #[serde(skip)]
    rejected_label: Option<Label>,
}

impl PreferencePair {
    fn build(e: &NliExample, rejected: Label, strategy: Strategy, t: &PromptTemplate) -> Result<Self, TemplateError> {
        debug_assert_ne!(rejected, e.label);
        Ok(PreferencePair {
            example_id: e.id.clone(),
            prompt: render_prompt(e, t)?,
            chosen: canonical_completion(e.label, t).to_string(),
            rejected: canonical_completion(rejected, t).to_string(),
            strategy,
            chosen_label: Some(e.label),
            rejected_label: Some(rejected),
        })
    }

    /// Gold label. Known for pairs built in-process or read with a template.
    pub fn chosen_label(&self) -> Option<Label> {
        self.chosen_label
    }

    pub fn rejected_label(&self) -> Option<Label> {
        self.rejected_label
    }
}

/// Deterministic generator for one example under one seed.
pub fn example_rng(seed: u64, example_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv64(example_id.as_bytes()))
}

fn pick_one<R: Rng + ?Sized>(options: [Label; 2], rng: &mut R) -> Label {
    options[rng.gen_range(0..2)]
}

pub fn build_random_rejection<R: Rng + ?Sized>(
    e: &NliExample,
    rng: &mut R,
    t: &PromptTemplate,
) -> Result<PreferencePair, TemplateError> {
    let rejected = pick_one(e.label.others(), rng);
    PreferencePair::build(e, rejected, Strategy::RandomRejection, t)
}

pub fn build_preferred_rejection<R: Rng + ?Sized>(
    e: &NliExample,
    rng: &mut R,
    t: &PromptTemplate,
) -> Result<PreferencePair, TemplateError> {
    let rejected = match e.label {
        Label::Entailed | Label::Contradict => Label::Neutral,
        Label::Neutral => pick_one([Label::Entailed, Label::Contradict], rng),
    };
    PreferencePair::build(e, rejected, Strategy::PreferredRejection, t)
}

/// One pair per non-gold label, in canonical label order.
pub fn build_multiple_rejections(e: &NliExample, t: &PromptTemplate) -> Result<Vec<PreferencePair>, TemplateError> {
    e.label
        .others()
        .into_iter()
        .map(|rejected| PreferencePair::build(e, rejected, Strategy::MultipleRejections, t))
        .collect()
}

/// The pairs for a whole dataset under one strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pairs: Vec<PreferencePair>,
    strategy: Strategy,
    seed: Option<u64>,
}

impl PairSet {
    /// Builds a set, sorting pairs into canonical `(example_id, rejected)` order.
    ///
    /// Panics if a pair's strategy differs from `strategy`.
    pub fn new(mut pairs: Vec<PreferencePair>, strategy: Strategy, seed: Option<u64>) -> Self {
        assert!(
            pairs.iter().all(|p| p.strategy == strategy),
            "pair strategy differs from set strategy"
        );
        pairs.sort_by(|a, b| {
            (&a.example_id, a.rejected_label, &a.rejected).cmp(&(&b.example_id, b.rejected_label, &b.rejected))
        });
        PairSet { pairs, strategy, seed }
    }

    pub fn pairs(&self) -> &[PreferencePair] {
        &self.pairs
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Consecutive runs of pairs sharing an example id.
    pub fn groups(&self) -> Vec<&[PreferencePair]> {
        self.pairs
            .chunk_by(|a, b| a.example_id == b.example_id)
            .collect()
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&serde_json::to_string(p).expect("pair serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), PairError> {
        Ok(corpus::write_file(path, self.to_jsonl_string().as_bytes())?)
    }

    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_jsonl_string().as_bytes())
    }

    /// Reads a pair file. Labels are recovered by exact-matching `chosen` and
    /// `rejected` against the template vocabulary.
    pub fn read_jsonl(path: &Path, t: &PromptTemplate) -> Result<PairSet, PairError> {
        let io = |source| {
            PairError::Io(CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })
        };
        if !path.exists() {
            return Err(PairError::Io(CorpusError::FileNotFound(path.to_path_buf())));
        }
        let reader = BufReader::new(fs::File::open(path).map_err(io)?);
        let mut pairs = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let row = pairs.len();
            let mut pair: PreferencePair =
                serde_json::from_str(&line).map_err(|e| PairError::Format { row, message: e.to_string() })?;
            let exact = |text: &str| {
                let parsed = parse_label(text, t);
                (parsed.confidence_rule == MatchRule::ExactMatch)
                    .then_some(parsed.label)
                    .flatten()
            };
            pair.chosen_label = exact(&pair.chosen);
            pair.rejected_label = exact(&pair.rejected);
            match (pair.chosen_label, pair.rejected_label) {
                (Some(c), Some(r)) if c != r => {}
                _ => {
                    return Err(PairError::Format {
                        row,
                        message: "chosen/rejected must be distinct template completions".into(),
                    })
                }
            }
            pairs.push(pair);
        }
        let strategy = pairs.first().map(|p| p.strategy).ok_or(PairError::EmptyDataset)?;
        if let Some(row) = pairs.iter().position(|p| p.strategy != strategy) {
            return Err(PairError::Format {
                row,
                message: "mixed strategies in one pair file".into(),
            });
        }
        Ok(PairSet::new(pairs, strategy, None))
    }
}

/// Builds pairs for every example with the default execution mode.
pub fn build_corpus_pairs(d: &Dataset, strategy: Strategy, seed: u64, t: &PromptTemplate) -> Result<PairSet, PairError> {
    build_corpus_pairs_with(Execution::default(), d, strategy, seed, t)
}

pub fn build_corpus_pairs_with(
    mode: Execution,
    d: &Dataset,
    strategy: Strategy,
    seed: u64,
    t: &PromptTemplate,
) -> Result<PairSet, PairError> {
    if d.is_empty() {
        return Err(PairError::EmptyDataset);
    }
    t.validate()?;
    let per_example = exec::try_map(mode, d.examples(), |e| -> Result<Vec<PreferencePair>, TemplateError> {
        let mut rng = example_rng(seed, &e.id);
        match strategy {
            Strategy::RandomRejection => Ok(vec![build_random_rejection(e, &mut rng, t)?]),
            Strategy::PreferredRejection => Ok(vec![build_preferred_rejection(e, &mut rng, t)?]),
            Strategy::MultipleRejections => build_multiple_rejections(e, t),
        }
    })?;
    Ok(PairSet::new(per_example.into_iter().flatten().collect(), strategy, Some(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(id: &str, label: Label) -> NliExample {
        NliExample::new(id, format!("premise {id}"), format!("hypothesis {id}"), label)
    }

    #[test]
    fn random_rejection_never_picks_gold() {
        let t = PromptTemplate::default();
        for label in Label::ALL {
            for seed in 0..50 {
                let p = build_random_rejection(&example("x", label), &mut example_rng(seed, "x"), &t).unwrap();
                assert_ne!(p.rejected_label(), Some(label));
                assert_eq!(p.chosen, label.as_str());
                assert_ne!(p.chosen, p.rejected);
            }
        }
    }

    #[test]
    fn random_rejection_is_deterministic_per_seed() {
        let t = PromptTemplate::default();
        let e = example("abc", Label::Entailed);
        let a = build_random_rejection(&e, &mut example_rng(1024, "abc"), &t).unwrap();
        let b = build_random_rejection(&e, &mut example_rng(1024, "abc"), &t).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preferred_rejection_rule() {
        let t = PromptTemplate::default();
        let mut rng = example_rng(1, "x");
        for gold in [Label::Entailed, Label::Contradict] {
            let p = build_preferred_rejection(&example("x", gold), &mut rng, &t).unwrap();
            assert_eq!(p.rejected_label(), Some(Label::Neutral));
        }
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let p = build_preferred_rejection(&example("x", Label::Neutral), &mut example_rng(seed, "x"), &t).unwrap();
            seen.insert(p.rejected_label().unwrap());
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![Label::Entailed, Label::Contradict]);
    }

    #[test]
    fn multiple_rejections_cover_complement() {
        let t = PromptTemplate::default();
        let pairs = build_multiple_rejections(&example("x", Label::Neutral), &t).unwrap();
        let rejected: Vec<_> = pairs.iter().map(|p| p.rejected_label().unwrap()).collect();
        assert_eq!(rejected, vec![Label::Entailed, Label::Contradict]);
    }

    #[test]
    fn corpus_pairs_ignore_input_order() {
        let t = PromptTemplate::default();
        let examples: Vec<_> = (0..40).map(|i| example(&format!("e{i:02}"), Label::ALL[i % 3])).collect();
        let mut reversed = examples.clone();
        reversed.reverse();
        let a = Dataset::new("a", examples).unwrap();
        let b = Dataset::new("b", reversed).unwrap();
        for strategy in [Strategy::RandomRejection, Strategy::PreferredRejection, Strategy::MultipleRejections] {
            let pa = build_corpus_pairs(&a, strategy, 1024, &t).unwrap();
            let pb = build_corpus_pairs(&b, strategy, 1024, &t).unwrap();
            assert_eq!(pa.to_jsonl_string(), pb.to_jsonl_string());
            assert_eq!(pa.len(), 40 * strategy.pairs_per_example());
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let t = PromptTemplate::default();
        assert!(matches!(
            build_corpus_pairs(&Dataset::empty("e"), Strategy::RandomRejection, 1, &t),
            Err(PairError::EmptyDataset)
        ));
    }

    #[test]
    fn bad_template_propagates() {
        let t = PromptTemplate { body: "{premise} only".into(), ..Default::default() };
        let d = Dataset::new("d", vec![example("a", Label::Neutral)]).unwrap();
        assert!(matches!(
            build_corpus_pairs(&d, Strategy::MultipleRejections, 1, &t),
            Err(PairError::Template(_))
        ));
    }

    #[test]
    fn jsonl_round_trip_recovers_labels() {
        let t = PromptTemplate::default();
        let d = Dataset::new("d", (0..6).map(|i| example(&i.to_string(), Label::ALL[i % 3])).collect()).unwrap();
        let set = build_corpus_pairs(&d, Strategy::MultipleRejections, 7, &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        set.write_jsonl(&path).unwrap();
        let line = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["chosen", "example_id", "prompt", "rejected", "strategy"]);
        let back = PairSet::read_jsonl(&path, &t).unwrap();
        assert_eq!(back.pairs(), set.pairs());
        assert_eq!(back.groups().len(), 6);
    }
}
