use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid stage config: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageName {
    /// Generic NLI adaptation on an SNLI subset.
    #[serde(rename = "Stage1_GenericNLI")]
    Stage1GenericNli,
    /// Legal-domain fine-tuning.
    #[serde(rename = "Stage2_Legal")]
    Stage2Legal,
}

impl StageName {
    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Stage1GenericNli => "Stage1_GenericNLI",
            StageName::Stage2Legal => "Stage2_Legal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Objective {
    Sft,
    Orpo,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sft" => Ok(Objective::Sft),
            "orpo" => Ok(Objective::Orpo),
            other => Err(format!("unknown objective {other:?}")),
        }
    }
}

/// Hyperparameters for one training stage.
///
/// `lora_alpha`, `lora_dropout` and `load_precision_note` are carried for
/// backends that apply adapters; the reference backend only records them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage_name: StageName,
    pub learning_rate: f64,
    pub max_length_tokens: usize,
    pub lora_alpha: f64,
    pub lora_dropout: f64,
    /// Weight of the odds-ratio term in the ORPO objective.
    pub orpo_beta: f64,
    pub random_state: u64,
    pub epochs: usize,
    pub load_precision_note: String,
    pub objective: Objective,
    /// Examples per optimizer step.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_batch_size() -> usize {
    1
}

impl StageConfig {
    /// Published per-stage hyperparameters. Stage 1 runs SFT, stage 2 ORPO.
    pub fn default_for(stage: StageName) -> Self {
        match stage {
            StageName::Stage1GenericNli => StageConfig {
                stage_name: stage,
                learning_rate: 2e-6,
                max_length_tokens: 1024,
                lora_alpha: 32.0,
                lora_dropout: 0.0,
                orpo_beta: 0.1,
                random_state: 1024,
                epochs: 1,
                load_precision_note: "fp4".into(),
                objective: Objective::Sft,
                batch_size: 1,
            },
            StageName::Stage2Legal => StageConfig {
                stage_name: stage,
                learning_rate: 2e-5,
                max_length_tokens: 2048,
                lora_alpha: 16.0,
                lora_dropout: 0.0,
                orpo_beta: 0.1,
                random_state: 1024,
                epochs: 3,
                load_precision_note: "fp32".into(),
                objective: Objective::Orpo,
                batch_size: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.max_length_tokens == 0 {
            return fail("max_length_tokens must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.lora_dropout) {
            return fail(format!("lora_dropout must be in [0, 1], got {}", self.lora_dropout));
        }
        if !(self.orpo_beta >= 0.0 && self.orpo_beta.is_finite()) {
            return fail(format!("orpo_beta must be >= 0, got {}", self.orpo_beta));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        Ok(())
    }
}

/// Free function form of [`StageConfig::default_for`].
pub fn default_stage_config(stage: StageName) -> StageConfig {
    StageConfig::default_for(stage)
}
