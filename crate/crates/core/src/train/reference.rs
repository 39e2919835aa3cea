//! Hashed bag-of-n-grams softmax classifier used as the desk-scale backend.
//!
//! The prompt is lowercased, split on non-alphanumeric characters, truncated
//! to the stage's `max_length_tokens`, and hashed into a fixed number of
//! buckets (unigrams, plus bigrams when enabled). The L2-normalized bucket counts feed a linear layer
//! with one row per label. `P(completion | prompt)` is the softmax over the
//! three label completions; any other completion is an error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, Capabilities, TrainerBackend};
use super::config::StageConfig;
use crate::hashing::fnv64;
use crate::label::Label;
use crate::prompt::PromptTemplate;

const STATE_MAGIC: &[u8; 4] = b"LNRM";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub hash_buckets: usize,
    /// Off by default: with short training runs, bigrams of unrelated words
    /// mostly add noise.
    pub use_bigrams: bool,
    /// Completion string per label, matched case-insensitively after trimming.
    pub vocabulary: BTreeMap<Label, String>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            hash_buckets: 4096,
            use_bigrams: false,
            vocabulary: PromptTemplate::default().label_vocabulary,
        }
    }
}

impl ReferenceConfig {
    pub fn for_template(t: &PromptTemplate) -> Self {
        ReferenceConfig {
            vocabulary: t.label_vocabulary.clone(),
            ..ReferenceConfig::default()
        }
    }
}

/// Adapter settings seen by the model, kept for provenance only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageNote {
    pub stage: String,
    pub lora_alpha: f64,
    pub lora_dropout: f64,
    pub load_precision_note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTinyModel {
    config: ReferenceConfig,
    params: Vec<f64>,
    max_length_tokens: usize,
    stage_notes: Vec<StageNote>,
}

impl ReferenceTinyModel {
    /// A zero-initialized model. With all logits equal the first prediction is
    /// uniform, and training is fully determined by the data order.
    pub fn new(config: ReferenceConfig) -> Self {
        let n = 3 * config.hash_buckets + 3;
        ReferenceTinyModel {
            config,
            params: vec![0.0; n],
            max_length_tokens: usize::MAX,
            stage_notes: Vec::new(),
        }
    }

    pub fn config(&self) -> &ReferenceConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), BackendError> {
        if params.len() != self.params.len() {
            return Err(BackendError::GradientShape {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn stage_notes(&self) -> &[StageNote] {
        &self.stage_notes
    }

    /// Sparse, L2-normalized feature vector as sorted `(bucket, value)` pairs.
    pub fn features(&self, prompt: &str) -> Vec<(usize, f64)> {
        let tokens: Vec<String> = prompt
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .take(self.max_length_tokens)
            .map(str::to_lowercase)
            .collect();
        let buckets = self.config.hash_buckets as u64;
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            *counts.entry((fnv64(tok.as_bytes()) % buckets) as usize).or_insert(0.0) += 1.0;
            if self.config.use_bigrams && i + 1 < tokens.len() {
                let bigram = format!("{tok} {}", tokens[i + 1]);
                *counts.entry((fnv64(bigram.as_bytes()) % buckets) as usize).or_insert(0.0) += 1.0;
            }
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Vec::new();
        }
        counts.into_iter().map(|(k, v)| (k, v / norm)).collect()
    }

    fn logits(&self, features: &[(usize, f64)]) -> [f64; 3] {
        let d = self.config.hash_buckets;
        let mut z = [0.0; 3];
        for (l, zl) in z.iter_mut().enumerate() {
            let row = &self.params[l * d..(l + 1) * d];
            *zl = self.params[3 * d + l] + features.iter().map(|&(f, x)| row[f] * x).sum::<f64>();
        }
        z
    }

    fn log_softmax(z: [f64; 3]) -> [f64; 3] {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        [z[0] - lse, z[1] - lse, z[2] - lse]
    }

    /// Label log-probabilities in `Label::ALL` order.
    pub fn label_log_probs(&self, prompt: &str) -> [f64; 3] {
        Self::log_softmax(self.logits(&self.features(prompt)))
    }

    pub fn predict_label(&self, prompt: &str) -> Label {
        let lp = self.label_log_probs(prompt);
        let mut best = 0;
        for i in 1..3 {
            if lp[i] > lp[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }

    fn completion_label(&self, completion: &str) -> Result<Label, BackendError> {
        let wanted = completion.trim().to_lowercase();
        self.config
            .vocabulary
            .iter()
            .find(|(_, v)| v.trim().to_lowercase() == wanted)
            .map(|(&l, _)| l)
            .ok_or_else(|| BackendError::UnknownCompletion(completion.to_string()))
    }
}

impl TrainerBackend for ReferenceTinyModel {
    fn name(&self) -> &str {
        "reference-tiny"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_sft: true,
            supports_orpo: true,
        }
    }

    fn begin_stage(&mut self, config: &StageConfig) -> Result<(), BackendError> {
        self.max_length_tokens = config.max_length_tokens;
        self.stage_notes.push(StageNote {
            stage: config.stage_name.as_str().to_string(),
            lora_alpha: config.lora_alpha,
            lora_dropout: config.lora_dropout,
            load_precision_note: config.load_precision_note.clone(),
        });
        Ok(())
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn log_prob(&self, prompt: &str, completion: &str) -> Result<f64, BackendError> {
        let label = self.completion_label(completion)?;
        Ok(self.label_log_probs(prompt)[label.index()])
    }

    fn log_prob_and_grad(&self, prompt: &str, completion: &str) -> Result<(f64, Vec<f64>), BackendError> {
        let target = self.completion_label(completion)?.index();
        let features = self.features(prompt);
        let lp = Self::log_softmax(self.logits(&features));
        let d = self.config.hash_buckets;
        let mut grad = vec![0.0; self.params.len()];
        for l in 0..3 {
            // d log p_target / d z_l = 1[l == target] - p_l
            let dz = f64::from(u8::from(l == target)) - lp[l].exp();
            for &(f, x) in &features {
                grad[l * d + f] = dz * x;
            }
            grad[3 * d + l] = dz;
        }
        Ok((lp[target], grad))
    }

    fn step(&mut self, gradient: &[f64], learning_rate: f64) -> Result<(), BackendError> {
        if gradient.len() != self.params.len() {
            return Err(BackendError::GradientShape {
                expected: self.params.len(),
                got: gradient.len(),
            });
        }
        for (p, g) in self.params.iter_mut().zip(gradient) {
            *p -= learning_rate * g;
        }
        Ok(())
    }

    fn predict(&self, prompt: &str) -> Result<String, BackendError> {
        let label = self.predict_label(prompt);
        Ok(self.config.vocabulary[&label].clone())
    }

    fn save_state(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.params.len());
        out.extend_from_slice(STATE_MAGIC);
        out.extend_from_slice(&(self.config.hash_buckets as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    fn load_state(&mut self, bytes: &[u8]) -> Result<(), BackendError> {
        if bytes.len() < 12 || &bytes[..4] != STATE_MAGIC {
            return Err(BackendError::State("missing reference-model header".into()));
        }
        let buckets = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        if buckets != self.config.hash_buckets {
            return Err(BackendError::State(format!(
                "state has {buckets} buckets, model has {}",
                self.config.hash_buckets
            )));
        }
        let body = &bytes[12..];
        if body.len() != 8 * self.params.len() {
            return Err(BackendError::State(format!(
                "expected {} parameter bytes, got {}",
                8 * self.params.len(),
                body.len()
            )));
        }
        for (p, chunk) in self.params.iter_mut().zip(body.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ReferenceTinyModel {
        ReferenceTinyModel::new(ReferenceConfig {
            hash_buckets: 64,
            ..ReferenceConfig::default()
        })
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = small();
        for l in Label::ALL {
            let lp = m.log_prob("any prompt", l.as_str()).unwrap();
            assert!((lp + 3f64.ln()).abs() < 1e-15);
        }
        assert_eq!(m.predict("x").unwrap(), "Entailed");
    }

    #[test]
    fn unknown_completion_is_an_error() {
        assert!(matches!(
            small().log_prob("p", "maybe"),
            Err(BackendError::UnknownCompletion(_))
        ));
    }

    #[test]
    fn features_are_unit_norm() {
        let f = small().features("The quick brown fox, the quick dog");
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(small().features("  ,, ").is_empty());
    }

    #[test]
    fn log_softmax_matches_naive_formula() {
        let mut m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = (0..m.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        m.set_params(params).unwrap();
        let prompt = "premise text hypothesis text";
        let z = m.logits(&m.features(prompt));
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        for l in Label::ALL {
            let naive = (z[l.index()].exp() / denom).ln();
            assert!((m.log_prob(prompt, l.as_str()).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn state_round_trips() {
        let mut m = small();
        let grad = vec![0.5; m.num_params()];
        m.step(&grad, 0.1).unwrap();
        let bytes = m.save_state();
        let mut other = small();
        other.load_state(&bytes).unwrap();
        assert_eq!(other.params(), m.params());
        assert!(other.load_state(&bytes[..20]).is_err());
        let mut wrong = ReferenceTinyModel::new(ReferenceConfig::default());
        assert!(wrong.load_state(&bytes).is_err());
    }

    #[test]
    fn truncation_follows_stage_max_length() {
        let mut m = small();
        let mut cfg = StageConfig::default_for(super::super::StageName::Stage2Legal);
        cfg.max_length_tokens = 2;
        m.begin_stage(&cfg).unwrap();
        assert_eq!(m.features("a b"), m.features("a b c d"));
        assert_eq!(m.stage_notes().len(), 1);
    }
}
