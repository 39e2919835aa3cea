//! Stage execution, the multi-stage plan and checkpoints.
//!
//! A checkpoint is a directory `stage<N>-<StageName>/` holding
//! `params.bin` (the backend's saved state), `stage_report.json` and
//! `manifest.json`. The manifest is written last; a directory without one is
//! not a checkpoint.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, TrainerBackend};
use super::config::{ConfigError, Objective, StageConfig, StageName};
use super::loss::{orpo_loss_and_grad, sft_loss_and_grad, LossError};
use crate::corpus::{self, CorpusError, Dataset};
use crate::exec::{self, Execution};
use crate::hashing::sha256_hex;
use crate::pairs::{PairSet, PreferencePair};
use crate::prompt::{canonical_completion, render_prompt, PromptTemplate, TemplateError};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] CorpusError),
}

/// Training data for one stage: examples for SFT, pairs for ORPO.
#[derive(Debug, Clone)]
pub enum StageData {
    Examples(Dataset),
    Pairs(PairSet),
}

impl StageData {
    pub fn len(&self) -> usize {
        match self {
            StageData::Examples(d) => d.len(),
            StageData::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fingerprint(&self) -> String {
        match self {
            StageData::Examples(d) => d.fingerprint(),
            StageData::Pairs(p) => p.fingerprint(),
        }
    }

    fn objective(&self) -> Objective {
        match self {
            StageData::Examples(_) => Objective::Sft,
            StageData::Pairs(_) => Objective::Orpo,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanStage {
    pub config: StageConfig,
    pub data: StageData,
}

/// Ordered stages; each starts from the model state the previous one left.
#[derive(Debug, Clone)]
pub struct TrainingPlan {
    stages: Vec<PlanStage>,
    template: PromptTemplate,
    output_dir: PathBuf,
    resume: bool,
}

impl TrainingPlan {
    pub fn new(stages: Vec<PlanStage>, template: PromptTemplate, output_dir: impl Into<PathBuf>) -> Result<Self, TrainError> {
        if stages.is_empty() {
            return Err(TrainError::Data("a plan needs at least one stage".into()));
        }
        template.validate()?;
        for s in &stages {
            s.config.validate()?;
            if s.data.objective() != s.config.objective {
                return Err(TrainError::Data(format!(
                    "{} uses {:?} but its data is for {:?}",
                    s.config.stage_name.as_str(),
                    s.config.objective,
                    s.data.objective()
                )));
            }
        }
        Ok(TrainingPlan {
            stages,
            template,
            output_dir: output_dir.into(),
            resume: false,
        })
    }

    /// Reuse matching checkpoints already under `output_dir`.
    pub fn with_resume(mut self, resume: bool) -> Self {
        self.resume = resume;
        self
    }

    pub fn stages(&self) -> &[PlanStage] {
        &self.stages
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn output_dir(&self) -> &Path {
        &self.output_dir
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub loss_evaluations: usize,
    pub optimizer_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage_name: StageName,
    pub config: StageConfig,
    pub data_fingerprint: String,
    pub data_items: usize,
    pub epochs: Vec<EpochStats>,
    pub loss_evaluations: usize,
    pub optimizer_steps: usize,
}

/// One unit of shuffling: an SFT example, or every pair of one example.
enum Unit<'a> {
    Sft { key: &'a str, prompt: String, target: &'a str },
    Orpo { key: &'a str, pairs: &'a [PreferencePair] },
}

impl Unit<'_> {
    fn key(&self) -> &str {
        match self {
            Unit::Sft { key, .. } | Unit::Orpo { key, .. } => key,
        }
    }

    fn evaluations(&self) -> usize {
        match self {
            Unit::Sft { .. } => 1,
            Unit::Orpo { pairs, .. } => pairs.len(),
        }
    }

    /// Loss and gradient, averaged over the unit's pairs.
    fn loss_and_grad<B: TrainerBackend + ?Sized>(&self, backend: &B, beta: f64) -> Result<(f64, Vec<f64>), LossError> {
        match self {
            Unit::Sft { prompt, target, .. } => sft_loss_and_grad(backend, prompt, target),
            Unit::Orpo { pairs, .. } => {
                let mut total = 0.0;
                let mut grad = vec![0.0; backend.num_params()];
                for p in *pairs {
                    let (l, g) = orpo_loss_and_grad(backend, p, beta)?;
                    total += l;
                    grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                let n = pairs.len() as f64;
                grad.iter_mut().for_each(|g| *g /= n);
                Ok((total / n, grad))
            }
        }
    }
}

fn build_units<'a>(data: &'a StageData, template: &'a PromptTemplate) -> Result<Vec<Unit<'a>>, TrainError> {
    match data {
        StageData::Examples(d) => d
            .iter()
            .map(|e| {
                Ok(Unit::Sft {
                    key: &e.id,
                    prompt: render_prompt(e, template)?,
                    target: canonical_completion(e.label, template),
                })
            })
            .collect(),
        StageData::Pairs(p) => Ok(p
            .groups()
            .into_iter()
            .map(|g| Unit::Orpo {
                key: &g[0].example_id,
                pairs: g,
            })
            .collect()),
    }
}

/// Runs one stage over `data`, updating `backend` in place.
///
/// Each epoch visits the data in a fresh shuffle drawn from
/// `config.random_state`. ORPO pairs sharing an example id are one unit and
/// their losses are averaged. Batch members are evaluated in parallel and
/// reduced in example-id order.
pub fn run_stage<B: TrainerBackend + ?Sized>(
    backend: &mut B,
    data: &StageData,
    config: &StageConfig,
    template: &PromptTemplate,
) -> Result<StageReport, TrainError> {
    config.validate()?;
    if data.is_empty() {
        return Err(TrainError::Data(format!("{} has no training data", config.stage_name.as_str())));
    }
    if data.objective() != config.objective {
        return Err(TrainError::Data(format!(
            "objective {:?} needs {} data",
            config.objective,
            match config.objective {
                Objective::Sft => "example",
                Objective::Orpo => "pair",
            }
        )));
    }
    let caps = backend.capabilities();
    match config.objective {
        Objective::Sft if !caps.supports_sft => return Err(BackendError::Unsupported("SFT").into()),
        Objective::Orpo if !caps.supports_orpo => return Err(BackendError::Unsupported("ORPO").into()),
        _ => {}
    }
    backend.begin_stage(config)?;

    let units = build_units(data, template)?;
    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_state);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut evaluations = 0;
        let mut steps = 0;
        for batch in order.chunks(config.batch_size) {
            let mut members: Vec<&Unit> = batch.iter().map(|&i| &units[i]).collect();
            members.sort_by(|a, b| a.key().cmp(b.key()));
            let shared: &B = backend;
            let results = exec::try_map(Execution::default(), &members, |u| {
                u.loss_and_grad(shared, config.orpo_beta)
            })?;
            let n = results.len() as f64;
            let mut grad = vec![0.0; backend.num_params()];
            for (u, (loss, g)) in members.iter().zip(&results) {
                loss_sum += loss;
                evaluations += u.evaluations();
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b / n);
            }
            backend.step(&grad, config.learning_rate)?;
            steps += 1;
        }
        epochs.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: loss_sum / units.len() as f64,
            loss_evaluations: evaluations,
            optimizer_steps: steps,
        });
    }
    Ok(StageReport {
        stage_name: config.stage_name,
        config: config.clone(),
        data_fingerprint: data.fingerprint(),
        data_items: data.len(),
        loss_evaluations: epochs.iter().map(|e| e.loss_evaluations).sum(),
        optimizer_steps: epochs.iter().map(|e| e.optimizer_steps).sum(),
        epochs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema_version: u32,
    pub stage_index: usize,
    pub stage_name: StageName,
    pub backend: String,
    pub backend_config: serde_json::Value,
    pub config: StageConfig,
    pub data_fingerprint: String,
    /// Where the stage's starting weights came from.
    pub init_from: String,
    pub params_file: String,
    pub params_sha256: String,
    pub template: PromptTemplate,
}

/// A checkpoint directory on disk.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub dir: PathBuf,
    pub manifest: CheckpointManifest,
}

impl Checkpoint {
    pub fn dir_name(stage_index: usize, stage: StageName) -> String {
        format!("stage{}-{}", stage_index + 1, stage.as_str())
    }

    pub fn load(dir: &Path) -> Result<Checkpoint, TrainError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
        let manifest: CheckpointManifest =
            serde_json::from_str(&text).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
        if manifest.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(TrainError::Checkpoint(format!(
                "unsupported checkpoint schema {} (expected {CHECKPOINT_SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        Ok(Checkpoint {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn read_params(&self) -> Result<Vec<u8>, TrainError> {
        let path = self.dir.join(&self.manifest.params_file);
        let bytes = fs::read(&path).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
        if sha256_hex(&bytes) != self.manifest.params_sha256 {
            return Err(TrainError::Checkpoint(format!("{} does not match its manifest hash", path.display())));
        }
        Ok(bytes)
    }

    pub fn restore_into<B: TrainerBackend + ?Sized>(&self, backend: &mut B) -> Result<(), TrainError> {
        if backend.name() != self.manifest.backend {
            return Err(TrainError::Checkpoint(format!(
                "checkpoint was written by {:?}, not {:?}",
                self.manifest.backend,
                backend.name()
            )));
        }
        backend.load_state(&self.read_params()?)?;
        Ok(())
    }

    pub fn stage_report(&self) -> Result<StageReport, TrainError> {
        let path = self.dir.join("stage_report.json");
        let text = fs::read_to_string(&path).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))
    }
}

fn write_checkpoint<B: TrainerBackend + ?Sized>(
    dir: &Path,
    backend: &B,
    manifest_base: CheckpointManifest,
    report: &StageReport,
) -> Result<CheckpointManifest, TrainError> {
    let state = backend.save_state();
    let manifest = CheckpointManifest {
        params_sha256: sha256_hex(&state),
        ..manifest_base
    };
    corpus::write_file(&dir.join(&manifest.params_file), &state)?;
    corpus::write_file(&dir.join("stage_report.json"), to_json(report).as_bytes())?;
    corpus::write_file(&dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
    Ok(manifest)
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub backend: String,
    pub template: String,
    pub stages: Vec<StageReport>,
    /// Checkpoint directories relative to the plan's output directory.
    pub checkpoints: Vec<String>,
    pub resumed_stages: Vec<usize>,
    pub final_params_sha256: String,
}

/// Runs every stage in order, checkpointing after each.
///
/// With resume enabled, a leading run of stages whose checkpoints match the
/// plan (same config, data fingerprint and backend) is restored instead of
/// retrained.
pub fn run_pipeline<B: TrainerBackend + ?Sized>(plan: &TrainingPlan, backend: &mut B) -> Result<PipelineReport, TrainError> {
    let mut stages = Vec::with_capacity(plan.stages.len());
    let mut checkpoints = Vec::with_capacity(plan.stages.len());
    let mut resumed = Vec::new();
    let mut reusable = plan.resume;
    let mut init_from = "fresh".to_string();
    for (index, stage) in plan.stages.iter().enumerate() {
        let dir_name = Checkpoint::dir_name(index, stage.config.stage_name);
        let dir = plan.output_dir.join(&dir_name);
        let fingerprint = stage.data.fingerprint();
        let expected = CheckpointManifest {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            stage_index: index,
            stage_name: stage.config.stage_name,
            backend: backend.name().to_string(),
            backend_config: backend.describe(),
            config: stage.config.clone(),
            data_fingerprint: fingerprint,
            init_from: init_from.clone(),
            params_file: "params.bin".into(),
            params_sha256: String::new(),
            template: plan.template.clone(),
        };

        let restored = if reusable {
            match Checkpoint::load(&dir) {
                Ok(cp) if CheckpointManifest { params_sha256: String::new(), ..cp.manifest.clone() } == expected => {
                    backend.begin_stage(&stage.config)?;
                    cp.restore_into(backend)?;
                    Some(cp.stage_report()?)
                }
                _ => None,
            }
        } else {
            None
        };
        let report = match restored {
            Some(report) => {
                resumed.push(index);
                report
            }
            None => {
                reusable = false;
                let report = run_stage(backend, &stage.data, &stage.config, &plan.template)?;
                write_checkpoint(&dir, backend, expected, &report)?;
                report
            }
        };
        stages.push(report);
        checkpoints.push(dir_name.clone());
        init_from = format!("previous_stage:{dir_name}");
    }
    Ok(PipelineReport {
        backend: backend.name().to_string(),
        template: plan.template.name.clone(),
        stages,
        checkpoints,
        resumed_stages: resumed,
        final_params_sha256: sha256_hex(&backend.save_state()),
    })
}
