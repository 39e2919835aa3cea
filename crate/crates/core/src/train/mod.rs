//! Two-stage fine-tuning: stage configs, objectives, orchestration, and a
//! small reference backend.

mod backend;
mod config;
mod loss;
mod pipeline;
mod reference;

pub use backend::{BackendError, Capabilities, TrainerBackend};
pub use config::{default_stage_config, ConfigError, Objective, StageConfig, StageName};
pub use loss::{
    orpo_components, orpo_loss, orpo_loss_and_grad, sft_loss, sft_loss_and_grad, LossError, OrpoComponents,
    PROB_CLAMP,
};
pub use pipeline::{
    run_pipeline, run_stage, Checkpoint, CheckpointManifest, EpochStats, PipelineReport, PlanStage, StageData,
    StageReport, TrainError, TrainingPlan, CHECKPOINT_SCHEMA_VERSION,
};
pub use reference::{ReferenceConfig, ReferenceTinyModel, StageNote};
