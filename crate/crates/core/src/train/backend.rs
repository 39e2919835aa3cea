use super::config::StageConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("completion {0:?} is not in the backend's vocabulary")]
    UnknownCompletion(String),
    #[error("gradient has {got} entries, model has {expected} parameters")]
    GradientShape { expected: usize, got: usize },
    #[error("invalid model state: {0}")]
    State(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub supports_sft: bool,
    pub supports_orpo: bool,
}

/// A trainable model the stage runner can drive.
///
/// Objectives are computed outside the backend from sequence log-probabilities
/// and their parameter gradients. The backend applies the combined gradient in
/// [`TrainerBackend::step`].
pub trait TrainerBackend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    /// Called once before a stage starts.
    fn begin_stage(&mut self, _config: &StageConfig) -> Result<(), BackendError> {
        Ok(())
    }

    /// Settings needed to rebuild an equivalent backend from a checkpoint.
    fn describe(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn num_params(&self) -> usize;

    /// `log P(completion | prompt)`.
    fn log_prob(&self, prompt: &str, completion: &str) -> Result<f64, BackendError>;

    /// `log P(completion | prompt)` and its gradient with respect to every
    /// parameter.
    fn log_prob_and_grad(&self, prompt: &str, completion: &str) -> Result<(f64, Vec<f64>), BackendError>;

    /// One optimizer step along `-gradient` (the gradient of the loss).
    fn step(&mut self, gradient: &[f64], learning_rate: f64) -> Result<(), BackendError>;

    /// Greedy completion for `prompt`.
    fn predict(&self, prompt: &str) -> Result<String, BackendError>;

    fn save_state(&self) -> Vec<u8>;

    fn load_state(&mut self, bytes: &[u8]) -> Result<(), BackendError>;
}
