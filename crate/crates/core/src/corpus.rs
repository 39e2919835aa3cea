//! NLI datasets: loading, validation, aggregation and subsetting.
//!
//! Two on-disk formats are read, CSV (RFC 4180, header row) and JSONL (one
//! UTF-8 object per line), both with the columns
//! `id,premise,hypothesis,label,legal_act,domain`. Only `premise`,
//! `hypothesis` and `label` are required. Datasets are always written back out
//! as JSONL.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::hashing::sha256_hex;
use crate::label::Label;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },
    #[error("label error at row {row}: cannot map {value:?} to Entailed/Neutral/Contradict")]
    Label { row: usize, value: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("label conflict between {first_id:?} ({first_label}) and {second_id:?} ({second_label}) for the same premise/hypothesis")]
    Conflict {
        first_id: String,
        first_label: Label,
        second_id: String,
        second_label: Label,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("requested {requested} examples but only {available} are available")]
    Size { requested: usize, available: usize },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "NLLP")]
    Nllp,
    #[serde(rename = "NLLP_AGGREGATED")]
    NllpAggregated,
    #[serde(rename = "SNLI")]
    Snli,
    #[serde(rename = "OTHER")]
    Other,
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "NLLP" => Ok(Source::Nllp),
            "NLLP_AGGREGATED" => Ok(Source::NllpAggregated),
            "SNLI" => Ok(Source::Snli),
            "OTHER" => Ok(Source::Other),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// On-disk dataset format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// One premise/hypothesis/label record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NliExample {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_act: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(skip_serializing, default = "default_source")]
    pub source: Source,
}

fn default_source() -> Source {
    Source::Other
}

impl NliExample {
    pub fn new(
        id: impl Into<String>,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
        label: Label,
    ) -> Self {
        NliExample {
            id: id.into(),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label,
            legal_act: None,
            domain: None,
            source: Source::Other,
        }
    }

    pub fn with_domain(mut self, legal_act: Option<&str>, domain: Option<&str>) -> Self {
        self.legal_act = legal_act.map(str::to_string);
        self.domain = domain.map(str::to_string);
        self
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    /// Key under which two records count as the same example.
    fn dedup_key(&self) -> (String, String) {
        (normalize_text(&self.premise), normalize_text(&self.hypothesis))
    }
}

/// Trim, collapse internal whitespace runs to one space, and case-fold.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Content-derived id for records that carry none.
pub fn content_id(premise: &str, hypothesis: &str, label: Label) -> String {
    let digest = sha256_hex(format!("{premise}\u{1f}{hypothesis}\u{1f}{label}").as_bytes());
    digest[..16].to_string()
}

/// An ordered collection of examples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    examples: Vec<NliExample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<NliExample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for e in &examples {
            if !seen.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            examples,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Dataset {
            name: name.into(),
            examples: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn examples(&self) -> &[NliExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NliExample> {
        self.examples.iter()
    }

    pub fn get(&self, id: &str) -> Option<&NliExample> {
        self.examples.iter().find(|e| e.id == id)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Returns a copy with every example's source replaced.
    pub fn with_source(mut self, source: Source) -> Self {
        for e in &mut self.examples {
            e.source = source;
        }
        self
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_jsonl_string().as_bytes())
    }

    /// SHA-256 of the JSONL serialization.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_jsonl_string().as_bytes())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a NliExample;
    type IntoIter = std::slice::Iter<'a, NliExample>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)
}

/// Fields of one record before validation.
struct RawRecord {
    id: Option<String>,
    premise: Option<String>,
    hypothesis: Option<String>,
    label: Option<String>,
    legal_act: Option<String>,
    domain: Option<String>,
}

/// Loads a dataset from disk. Malformed records are errors, never skipped.
pub fn load_dataset(path: &Path, format: Format, source: Source) -> Result<Dataset> {
    if !path.exists() {
        return Err(CorpusError::FileNotFound(path.to_path_buf()));
    }
    let records = match format {
        Format::Jsonl => read_jsonl_records(path)?,
        Format::Csv => read_csv_records(path)?,
    };
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    build_dataset(name, records, source)
}

fn build_dataset(name: String, records: Vec<RawRecord>, source: Source) -> Result<Dataset> {
    let mut examples = Vec::with_capacity(records.len());
    let mut auto_ids: HashMap<String, usize> = HashMap::new();
    for (row, rec) in records.into_iter().enumerate() {
        let premise = required_text(rec.premise, row, "premise")?;
        let hypothesis = required_text(rec.hypothesis, row, "hypothesis")?;
        let raw_label = rec.label.ok_or_else(|| CorpusError::Schema {
            row,
            message: "missing field `label`".into(),
        })?;
        let label = Label::normalize(&raw_label).ok_or(CorpusError::Label {
            row,
            value: raw_label,
        })?;
        let id = match rec.id.filter(|s| !s.trim().is_empty()) {
            Some(id) => id.trim().to_string(),
            None => {
                // identical rows without ids would hash to the same id
                let base = content_id(&premise, &hypothesis, label);
                let seen = auto_ids.entry(base.clone()).or_insert(0);
                *seen += 1;
                if *seen == 1 {
                    base
                } else {
                    format!("{base}-{seen}")
                }
            }
        };
        examples.push(NliExample {
            id,
            premise,
            hypothesis,
            label,
            legal_act: optional_text(rec.legal_act),
            domain: optional_text(rec.domain),
            source,
        });
    }
    Dataset::new(name, examples)
}

fn required_text(value: Option<String>, row: usize, field: &str) -> Result<String> {
    match value {
        Some(v) if !v.trim().is_empty() => Ok(v),
        Some(_) => Err(CorpusError::Schema {
            row,
            message: format!("field `{field}` is empty"),
        }),
        None => Err(CorpusError::Schema {
            row,
            message: format!("missing field `{field}`"),
        }),
    }
}

fn optional_text(value: Option<String>) -> Option<String> {
    value
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
}

fn read_jsonl_records(path: &Path) -> Result<Vec<RawRecord>> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let row = records.len();
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
            row,
            message: format!("invalid JSON: {e}"),
        })?;
        let Value::Object(map) = value else {
            return Err(CorpusError::Schema {
                row,
                message: "record is not a JSON object".into(),
            });
        };
        let field = |name: &str| -> Result<Option<String>> {
            match map.get(name) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(Value::Number(n)) if name == "id" || name == "label" => Ok(Some(n.to_string())),
                Some(other) => Err(CorpusError::Schema {
                    row,
                    message: format!("field `{name}` has unexpected type: {other}"),
                }),
            }
        };
        records.push(RawRecord {
            id: field("id")?,
            premise: field("premise")?,
            hypothesis: field("hypothesis")?,
            label: field("label")?,
            legal_act: field("legal_act")?,
            domain: field("domain")?,
        });
    }
    Ok(records)
}

fn read_csv_records(path: &Path) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, 0, e))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let cols = [
        column("id"),
        column("premise"),
        column("hypothesis"),
        column("label"),
        column("legal_act"),
        column("domain"),
    ];
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.map_err(|e| csv_error(path, row, e))?;
        let get = |i: usize| cols[i].and_then(|c| rec.get(c)).map(str::to_string);
        records.push(RawRecord {
            id: get(0),
            premise: get(1),
            hypothesis: get(2),
            label: get(3),
            legal_act: get(4),
            domain: get(5),
        });
    }
    Ok(records)
}

fn csv_error(path: &Path, row: usize, err: csv::Error) -> CorpusError {
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(source) => CorpusError::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        CorpusError::Schema {
            row,
            message: err.to_string(),
        }
    }
}

/// Bookkeeping from an aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub input_a: usize,
    pub input_b: usize,
    pub duplicates: usize,
    pub output: usize,
}

/// Union of two datasets with duplicates removed. See [`aggregate_with_stats`].
pub fn aggregate(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    aggregate_with_stats(a, b).map(|(d, _)| d)
}

/// Union of two datasets with duplicates removed, plus counts.
///
/// Records are duplicates when their normalized premise and hypothesis match
/// (see [`normalize_text`]) and they carry the same label. The survivor of a
/// duplicate group is the record with the smallest id. Matching text with
/// different labels is a [`CorpusError::Conflict`]. If two surviving records
/// share an id, both get a content-hash suffix. Output is sorted by id.
pub fn aggregate_with_stats(a: &Dataset, b: &Dataset) -> Result<(Dataset, AggregateStats)> {
    let mut groups: BTreeMap<(String, String), Vec<&NliExample>> = BTreeMap::new();
    for e in a.iter().chain(b.iter()) {
        groups.entry(e.dedup_key()).or_default().push(e);
    }

    let mut survivors = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let mut by_label: BTreeMap<Label, &NliExample> = BTreeMap::new();
        for &m in members {
            by_label
                .entry(m.label)
                .and_modify(|cur| {
                    if m.id < cur.id {
                        *cur = m;
                    }
                })
                .or_insert(m);
        }
        let mut reps = by_label.values();
        let first = reps.next().expect("non-empty group");
        if let Some(second) = reps.next() {
            return Err(CorpusError::Conflict {
                first_id: first.id.clone(),
                first_label: first.label,
                second_id: second.id.clone(),
                second_label: second.label,
            });
        }
        let rep = members
            .iter()
            .filter(|m| m.id == first.id)
            .min_by(|x, y| {
                (&x.premise, &x.hypothesis, &x.legal_act, &x.domain)
                    .cmp(&(&y.premise, &y.hypothesis, &y.legal_act, &y.domain))
            })
            .expect("representative present");
        survivors.push((*rep).clone());
    }

    let mut id_counts: HashMap<String, usize> = HashMap::new();
    for e in &survivors {
        *id_counts.entry(e.id.clone()).or_insert(0) += 1;
    }
    for e in &mut survivors {
        if id_counts[&e.id] > 1 {
            let (p, h) = e.dedup_key();
            let tag = content_id(&p, &h, e.label);
            e.id = format!("{}~{}", e.id, &tag[..8]);
        }
    }
    survivors.sort_by(|x, y| x.id.cmp(&y.id));

    let stats = AggregateStats {
        input_a: a.len(),
        input_b: b.len(),
        duplicates: a.len() + b.len() - survivors.len(),
        output: survivors.len(),
    };
    let name = if b.name().is_empty() {
        a.name().to_string()
    } else {
        format!("{}+{}", a.name(), b.name())
    };
    Ok((Dataset::new(name, survivors)?, stats))
}

/// Per-label counts and fractions. Every label appears in both maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub counts: BTreeMap<Label, u64>,
    pub fractions: BTreeMap<Label, f64>,
}

impl DistributionSummary {
    /// An expected distribution given only fractions (counts are zero).
    pub fn from_fractions(entailed: f64, neutral: f64, contradict: f64) -> Self {
        DistributionSummary {
            counts: Label::ALL.iter().map(|&l| (l, 0)).collect(),
            fractions: [
                (Label::Entailed, entailed),
                (Label::Neutral, neutral),
                (Label::Contradict, contradict),
            ]
            .into_iter()
            .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn fraction(&self, label: Label) -> f64 {
        self.fractions.get(&label).copied().unwrap_or(0.0)
    }

    pub fn count(&self, label: Label) -> u64 {
        self.counts.get(&label).copied().unwrap_or(0)
    }
}

/// Published class distributions of the three splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PublishedSplit {
    /// 20k-row SNLI subset used for generic NLI adaptation.
    Train1Snli,
    /// The NLLP shared-task training set.
    Train2Nllp,
    /// The 84-row shared-task test set.
    Test,
}

impl PublishedSplit {
    pub fn distribution(self) -> DistributionSummary {
        match self {
            PublishedSplit::Train1Snli => DistributionSummary::from_fractions(0.340, 0.331, 0.329),
            PublishedSplit::Train2Nllp => DistributionSummary::from_fractions(0.327, 0.339, 0.333),
            PublishedSplit::Test => DistributionSummary::from_fractions(0.476, 0.345, 0.179),
        }
    }
}

impl std::str::FromStr for PublishedSplit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train1" | "train-1" | "snli" => Ok(PublishedSplit::Train1Snli),
            "train2" | "train-2" | "nllp" => Ok(PublishedSplit::Train2Nllp),
            "test" => Ok(PublishedSplit::Test),
            other => Err(format!("unknown split {other:?} (expected train1, train2 or test)")),
        }
    }
}

pub fn class_distribution(d: &Dataset) -> Result<DistributionSummary> {
    if d.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut counts: BTreeMap<Label, u64> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    for e in d {
        *counts.get_mut(&e.label).expect("all labels present") += 1;
    }
    let total = d.len() as f64;
    let fractions = counts.iter().map(|(&l, &c)| (l, c as f64 / total)).collect();
    Ok(DistributionSummary { counts, fractions })
}

/// Deterministic sample of `n` examples without replacement.
///
/// The sample keeps the input's relative order, so `n == d.len()` returns `d`
/// unchanged.
pub fn sample_subset(d: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n > d.len() {
        return Err(CorpusError::Size {
            requested: n,
            available: d.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, d.len(), n).into_vec();
    picked.sort_unstable();
    let examples = picked.into_iter().map(|i| d.examples[i].clone()).collect();
    Dataset::new(format!("{}-sample{n}", d.name()), examples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDeviation {
    pub label: Label,
    pub observed: f64,
    pub expected: f64,
    pub deviation: f64,
    pub within_tolerance: bool,
}

/// Outcome of comparing a dataset's class distribution to an expected one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitValidation {
    pub dataset: String,
    pub total: u64,
    pub tolerance: f64,
    pub passed: bool,
    pub labels: Vec<LabelDeviation>,
}

impl SplitValidation {
    pub fn failing_labels(&self) -> Vec<Label> {
        self.labels
            .iter()
            .filter(|l| !l.within_tolerance)
            .map(|l| l.label)
            .collect()
    }
}

/// Checks every label's observed fraction against `expected` within `tolerance`.
///
/// An empty dataset fails every label rather than erroring.
pub fn validate_split(d: &Dataset, expected: &DistributionSummary, tolerance: f64) -> SplitValidation {
    let observed = class_distribution(d).ok();
    let labels: Vec<LabelDeviation> = Label::ALL
        .iter()
        .map(|&label| {
            let exp = expected.fraction(label);
            match &observed {
                Some(obs) => {
                    let o = obs.fraction(label);
                    let deviation = (o - exp).abs();
                    LabelDeviation {
                        label,
                        observed: o,
                        expected: exp,
                        deviation,
                        within_tolerance: deviation <= tolerance,
                    }
                }
                None => LabelDeviation {
                    label,
                    observed: 0.0,
                    expected: exp,
                    deviation: exp,
                    within_tolerance: false,
                },
            }
        })
        .collect();
    SplitValidation {
        dataset: d.name().to_string(),
        total: d.len() as u64,
        tolerance,
        passed: labels.iter().all(|l| l.within_tolerance),
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str, p: &str, h: &str, l: Label) -> NliExample {
        NliExample::new(id, p, h, l)
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn loads_jsonl_with_case_insensitive_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.jsonl",
            "{\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"entailed\"}\n\n{\"id\":7,\"premise\":\"P2\",\"hypothesis\":\"H2\",\"label\":\"NEUTRAL\",\"domain\":\"BIPA\"}\n",
        );
        let d = load_dataset(&path, Format::Jsonl, Source::Nllp).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.examples()[0].label, Label::Entailed);
        assert_eq!(d.examples()[0].id, content_id("P", "H", Label::Entailed));
        assert_eq!(d.examples()[1].id, "7");
        assert_eq!(d.examples()[1].domain.as_deref(), Some("BIPA"));
        assert_eq!(d.examples()[1].source, Source::Nllp);
    }

    #[test]
    fn unmappable_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "d.jsonl", "{\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"maybe\"}\n");
        match load_dataset(&path, Format::Jsonl, Source::Other) {
            Err(CorpusError::Label { row: 0, value }) => assert_eq!(value, "maybe"),
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.csv",
            "id,premise,hypothesis,label\n1,P,H,Neutral\n2,P2,,Neutral\n",
        );
        match load_dataset(&path, Format::Csv, Source::Other) {
            Err(CorpusError::Schema { row: 1, message }) => assert!(message.contains("hypothesis")),
            other => panic!("expected schema error, got {other:?}"),
        }
        let path = write(&dir, "e.csv", "premise,label\nP,Neutral\n");
        assert!(matches!(
            load_dataset(&path, Format::Csv, Source::Other),
            Err(CorpusError::Schema { row: 0, .. })
        ));
    }

    #[test]
    fn csv_quoting_and_trailing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.csv",
            "id,premise,hypothesis,label,legal_act,domain\na,\"P, with \"\"quotes\"\"\",H,contradict,Privacy,BIPA\nb,P2,H2,entailed\n",
        );
        let d = load_dataset(&path, Format::Csv, Source::Nllp).unwrap();
        assert_eq!(d.examples()[0].premise, "P, with \"quotes\"");
        assert_eq!(d.examples()[0].legal_act.as_deref(), Some("Privacy"));
        assert_eq!(d.examples()[1].domain, None);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.jsonl"), Format::Jsonl, Source::Other),
            Err(CorpusError::FileNotFound(_))
        ));
    }

    #[test]
    fn duplicate_explicit_ids_are_rejected() {
        let r = Dataset::new(
            "d",
            vec![ex("1", "a", "b", Label::Neutral), ex("1", "c", "d", Label::Neutral)],
        );
        assert!(matches!(r, Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn identical_rows_without_ids_get_distinct_ids() {
        let dir = tempfile::tempdir().unwrap();
        let row = "{\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"Neutral\"}\n";
        let path = write(&dir, "d.jsonl", &row.repeat(2));
        let d = load_dataset(&path, Format::Jsonl, Source::Other).unwrap();
        assert_ne!(d.examples()[0].id, d.examples()[1].id);
    }

    #[test]
    fn aggregate_removes_normalized_duplicates() {
        let a = Dataset::new(
            "a",
            vec![ex("a1", "The  Premise", "hyp", Label::Entailed), ex("a2", "x", "y", Label::Neutral)],
        )
        .unwrap();
        let b = Dataset::new(
            "b",
            vec![ex("b1", " the premise ", "HYP", Label::Entailed), ex("b2", "z", "w", Label::Contradict)],
        )
        .unwrap();
        let (merged, stats) = aggregate_with_stats(&a, &b).unwrap();
        assert_eq!(merged.len(), 3);
        assert_eq!(stats.duplicates, 1);
        let ids: Vec<_> = merged.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["a1", "a2", "b2"]);
    }

    #[test]
    fn aggregate_disjoint() {
        let a = Dataset::new("a", vec![ex("1", "a", "b", Label::Entailed), ex("2", "c", "d", Label::Neutral)]).unwrap();
        let b = Dataset::new("b", vec![ex("3", "e", "f", Label::Entailed), ex("4", "g", "h", Label::Neutral)]).unwrap();
        assert_eq!(aggregate(&a, &b).unwrap().len(), 4);
    }

    #[test]
    fn aggregate_conflict_is_an_error() {
        let a = Dataset::new("a", vec![ex("a1", "p", "h", Label::Entailed)]).unwrap();
        let b = Dataset::new("b", vec![ex("b1", "P", "H", Label::Contradict)]).unwrap();
        match aggregate(&a, &b) {
            Err(CorpusError::Conflict { first_id, second_id, .. }) => {
                assert_eq!((first_id.as_str(), second_id.as_str()), ("a1", "b1"));
            }
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_disambiguates_colliding_ids() {
        let a = Dataset::new("a", vec![ex("0", "p1", "h1", Label::Entailed)]).unwrap();
        let b = Dataset::new("b", vec![ex("0", "p2", "h2", Label::Entailed)]).unwrap();
        let merged = aggregate(&a, &b).unwrap();
        assert_eq!(merged.len(), 2);
        assert!(merged.iter().all(|e| e.id.starts_with("0~")));
        assert_ne!(merged.examples()[0].id, merged.examples()[1].id);
    }

    #[test]
    fn aggregate_self_equals_dedup() {
        let d = Dataset::new(
            "d",
            vec![ex("2", "a", "b", Label::Entailed), ex("1", "c", "d", Label::Neutral)],
        )
        .unwrap();
        let twice = aggregate(&d, &d).unwrap();
        let once = aggregate(&d, &Dataset::empty("")).unwrap();
        assert_eq!(twice.examples(), once.examples());
    }

    #[test]
    fn distribution_uniform() {
        let d = Dataset::new(
            "d",
            vec![
                ex("1", "a", "b", Label::Entailed),
                ex("2", "a", "c", Label::Neutral),
                ex("3", "a", "d", Label::Contradict),
            ],
        )
        .unwrap();
        let s = class_distribution(&d).unwrap();
        for l in Label::ALL {
            assert_eq!(s.count(l), 1);
            assert!((s.fraction(l) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(matches!(class_distribution(&Dataset::empty("e")), Err(CorpusError::EmptyDataset)));
    }

    #[test]
    fn uniform_dataset_fails_test_split_on_contradict() {
        let d = Dataset::new(
            "d",
            vec![
                ex("1", "a", "b", Label::Entailed),
                ex("2", "a", "c", Label::Neutral),
                ex("3", "a", "d", Label::Contradict),
            ],
        )
        .unwrap();
        let report = validate_split(&d, &PublishedSplit::Test.distribution(), 0.001);
        assert!(!report.passed);
        assert!(report.failing_labels().contains(&Label::Contradict));
        let own = class_distribution(&d).unwrap();
        assert!(validate_split(&d, &own, 0.0).passed);
    }

    #[test]
    fn sample_subset_errors_and_full_sample() {
        let d = Dataset::new(
            "d",
            (0..10).map(|i| ex(&i.to_string(), "p", &format!("h{i}"), Label::Neutral)).collect(),
        )
        .unwrap();
        assert!(matches!(sample_subset(&d, 11, 1), Err(CorpusError::Size { .. })));
        assert!(matches!(sample_subset(&d, 0, 1), Err(CorpusError::Size { .. })));
        assert_eq!(sample_subset(&d, 10, 99).unwrap().examples(), d.examples());
        let s = sample_subset(&d, 4, 1024).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s, sample_subset(&d, 4, 1024).unwrap());
    }

    #[test]
    fn normalize_text_collapses_whitespace_and_case() {
        assert_eq!(normalize_text("  A\tb \n  C "), "a b c");
    }
}
