//! Command-line interface.
//!
//! Each subcommand wraps one library operation and writes a
//! `run_manifest.<command>.json` next to its outputs. Settings resolve as
//! built-in defaults, then the `--config` TOML file, then flags.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{self, aggregate_with_stats, class_distribution, load_dataset, validate_split};
use crate::corpus::{Dataset, DistributionSummary, Format, PublishedSplit, Source};
use crate::eval::{read_predictions, score_predictions, EvaluationReport, PredictionRecord};
use crate::exec::{self, Execution};
use crate::label::Label;
use crate::pairs::{build_corpus_pairs, Strategy};
use crate::prompt::{parse_label, render_prompt, PromptTemplate};
use crate::report::{self, RunLabel, RunManifest, TableFormat};
use crate::train::{
    run_pipeline, Checkpoint, Objective, PipelineReport, PlanStage, ReferenceConfig, ReferenceTinyModel,
    StageConfig, StageData, StageName, TrainerBackend, TrainingPlan,
};

pub const DEFAULT_SEED: u64 = 1024;
/// Root for checkpoints when `train` gets no output directory.
pub const HOME_ENV: &str = "LEGALNLI_HOME";

#[derive(Debug, Parser)]
#[command(name = "legalnli", version, about = "Legal NLI experiment pipeline")]
struct Cli {
    /// TOML file with [corpus], [pairs], [train.stage1], [train.stage2] and [eval] sections
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice [default: 1024]
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge two datasets, dropping normalized duplicates
    Aggregate(AggregateArgs),
    /// Compare a dataset's class distribution with a published split
    ValidateSplit(ValidateArgs),
    /// Build ORPO preference pairs
    BuildPairs(BuildPairsArgs),
    /// Run the two-stage training plan on the reference backend
    Train(TrainArgs),
    /// Predict labels with a trained checkpoint
    Predict(PredictArgs),
    /// Score predictions against gold labels
    Evaluate(EvaluateArgs),
    /// Render domain tables and a confusion plot from an evaluation report
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct AggregateArgs {
    a: PathBuf,
    b: PathBuf,
    /// Output JSONL file
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    data: PathBuf,
    /// Published split to compare against: train1, train2 or test
    #[arg(long, conflicts_with = "expected")]
    split: Option<String>,
    /// Expected Entailed,Neutral,Contradict fractions, e.g. 0.476,0.345,0.179
    #[arg(long, value_delimiter = ',')]
    expected: Option<Vec<f64>>,
    /// Maximum absolute deviation per class [default: 0.001]
    #[arg(long)]
    tolerance: Option<f64>,
    /// Also write the validation result as JSON
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildPairsArgs {
    data: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// random, preferred or multiple [default: preferred]
    #[arg(long)]
    strategy: Option<String>,
    /// Prompt template file
    #[arg(long)]
    template: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Generic NLI data for stage 1 (required unless stage 1 is skipped)
    #[arg(long)]
    stage1: Option<PathBuf>,
    /// Legal NLI data for stage 2
    #[arg(long)]
    stage2: PathBuf,
    /// Rejection strategy for ORPO stages [default: preferred]
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    template: Option<PathBuf>,
    /// Checkpoint directory [default: $LEGALNLI_HOME/checkpoints or ./legalnli-checkpoints]
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    /// Reuse matching checkpoints already in the output directory
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    skip_stage1: bool,
    /// Feature buckets of the reference backend [default: 4096]
    #[arg(long)]
    hash_buckets: Option<usize>,
    #[arg(long)]
    stage1_epochs: Option<usize>,
    #[arg(long)]
    stage2_epochs: Option<usize>,
    #[arg(long)]
    stage1_lr: Option<f64>,
    #[arg(long)]
    stage2_lr: Option<f64>,
    /// ORPO odds-ratio weight for both stages
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// A stage checkpoint directory, or a training output directory (uses its last stage)
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output predictions JSONL
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Label used for generations no rule can parse [default: Neutral]
    #[arg(long)]
    fallback: Option<String>,
    /// Template whose vocabulary parses raw generations
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(short, long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write the LaTeX table
    #[arg(long)]
    latex: bool,
    #[command(flatten)]
    label: RunLabelArgs,
}

#[derive(Debug, Args)]
struct RunLabelArgs {
    /// "LLM Used" column
    #[arg(long, default_value = "reference-tiny")]
    model: String,
    /// "Trained on" column
    #[arg(long, default_value = "-")]
    trained_on: String,
    /// "Alignment approach" column
    #[arg(long, default_value = "None")]
    alignment: String,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json written by `evaluate`
    #[arg(long)]
    report: PathBuf,
    /// Output directory [default: the report's directory]
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    /// Plot file name; .svg or .png
    #[arg(long, default_value = "confusion.svg")]
    plot: String,
    #[arg(long)]
    latex: bool,
}

/// Bad flags or configuration; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    #[serde(default)]
    corpus: CorpusSection,
    #[serde(default)]
    pairs: PairsSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    eval: EvalSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusSection {
    split: Option<String>,
    tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairsSection {
    strategy: Option<String>,
    template: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    output_dir: Option<PathBuf>,
    hash_buckets: Option<usize>,
    skip_stage1: Option<bool>,
    #[serde(default)]
    stage1: StageOverrides,
    #[serde(default)]
    stage2: StageOverrides,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageOverrides {
    learning_rate: Option<f64>,
    max_length_tokens: Option<usize>,
    lora_alpha: Option<f64>,
    lora_dropout: Option<f64>,
    orpo_beta: Option<f64>,
    random_state: Option<u64>,
    epochs: Option<usize>,
    load_precision_note: Option<String>,
    objective: Option<String>,
    batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSection {
    fallback: Option<String>,
    latex: Option<bool>,
}

impl StageOverrides {
    fn apply(&self, c: &mut StageConfig) -> anyhow::Result<()> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(learning_rate, max_length_tokens, lora_alpha, lora_dropout, orpo_beta, random_state, epochs,
            load_precision_note, batch_size);
        if let Some(o) = &self.objective {
            c.objective = o.parse::<Objective>().map_err(usage)?;
        }
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit status: 0 success, 1 validation or runtime failure, 2 usage.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n\n{}", Cli::command().render_usage());
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

struct Settings {
    config: FileConfig,
    seed_flag: Option<u64>,
}

impl Settings {
    fn seed(&self) -> u64 {
        self.seed_flag.or(self.config.seed).unwrap_or(DEFAULT_SEED)
    }

    fn template(&self, flag: Option<&PathBuf>) -> anyhow::Result<PromptTemplate> {
        match flag.or(self.config.pairs.template.as_ref()) {
            Some(path) => PromptTemplate::load(path).with_context(|| format!("loading template {}", path.display())),
            None => Ok(PromptTemplate::default()),
        }
    }

    fn strategy(&self, flag: Option<&String>) -> anyhow::Result<Strategy> {
        flag.or(self.config.pairs.strategy.as_ref())
            .map_or(Ok(Strategy::PreferredRejection), |s| s.parse().map_err(usage))
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    let ctx = Settings {
        config: load_config(cli.config.as_deref())?,
        seed_flag: cli.seed,
    };
    match cli.command {
        Command::Aggregate(a) => aggregate_cmd(&ctx, a),
        Command::ValidateSplit(a) => validate_cmd(&ctx, a),
        Command::BuildPairs(a) => build_pairs_cmd(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Predict(a) => predict_cmd(&ctx, a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Report(a) => report_cmd(&ctx, a),
    }
}

fn load(path: &Path, source: Source) -> anyhow::Result<Dataset> {
    Ok(load_dataset(path, Format::from_path(path), source)?)
}

fn dir_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn aggregate_cmd(ctx: &Settings, a: AggregateArgs) -> anyhow::Result<i32> {
    let left = load(&a.a, Source::Nllp)?;
    let right = load(&a.b, Source::Nllp)?;
    let (merged, stats) = aggregate_with_stats(&left, &right)?;
    merged.write_jsonl(&a.output)?;

    let mut manifest = RunManifest::new("aggregate", &serde_json::json!({ "seed": ctx.seed() }));
    manifest.add_input("a", &a.a)?;
    manifest.add_input("b", &a.b)?;
    manifest.add_artifact(file_name(&a.output));
    manifest.write(&dir_of(&a.output))?;
    println!(
        "aggregated {} + {} rows: {} duplicates removed, {} unique rows -> {}",
        stats.input_a,
        stats.input_b,
        stats.duplicates,
        stats.output,
        a.output.display()
    );
    Ok(0)
}

#[derive(Serialize)]
struct ValidationSettings {
    expected: DistributionSummary,
    tolerance: f64,
}

fn validate_cmd(ctx: &Settings, a: ValidateArgs) -> anyhow::Result<i32> {
    let expected = match (&a.expected, a.split.as_ref().or(ctx.config.corpus.split.as_ref())) {
        (Some(f), _) if f.len() == 3 => DistributionSummary::from_fractions(f[0], f[1], f[2]),
        (Some(f), _) => return Err(usage(format!("--expected needs 3 fractions, got {}", f.len()))),
        (None, Some(split)) => split.parse::<PublishedSplit>().map_err(usage)?.distribution(),
        (None, None) => return Err(usage("give --split or --expected")),
    };
    let tolerance = a.tolerance.or(ctx.config.corpus.tolerance).unwrap_or(0.001);
    let d = load(&a.data, Source::Other)?;
    let dist = class_distribution(&d)?;
    let result = validate_split(&d, &expected, tolerance);
    for dev in &result.labels {
        println!(
            "{:<10} count {:>6}  observed {:.4}  expected {:.4}  deviation {:.4}  {}",
            dev.label.as_str(),
            dist.count(dev.label),
            dev.observed,
            dev.expected,
            dev.deviation,
            if dev.within_tolerance { "ok" } else { "FAIL" }
        );
    }
    println!("total {}  tolerance {}  {}", result.total, tolerance, if result.passed { "PASS" } else { "FAIL" });
    if let Some(out) = &a.output {
        let mut manifest = RunManifest::new("validate-split", &ValidationSettings { expected, tolerance });
        manifest.add_input("data", &a.data)?;
        manifest.add_artifact(file_name(out));
        let dir = dir_of(out);
        report::write_json_artifact(out, &manifest.file_name(), &result)?;
        manifest.write(&dir)?;
    }
    Ok(if result.passed { 0 } else { 1 })
}

fn build_pairs_cmd(ctx: &Settings, a: BuildPairsArgs) -> anyhow::Result<i32> {
    let template = ctx.template(a.template.as_ref())?;
    let strategy = ctx.strategy(a.strategy.as_ref())?;
    let seed = ctx.seed();
    let d = load(&a.data, Source::Nllp)?;
    let pairs = build_corpus_pairs(&d, strategy, seed, &template)?;
    pairs.write_jsonl(&a.output)?;

    let settings = serde_json::json!({ "seed": seed, "strategy": strategy, "template": template });
    let mut manifest = RunManifest::new("build-pairs", &settings);
    manifest.add_input("data", &a.data)?;
    manifest.add_artifact(file_name(&a.output));
    manifest.write(&dir_of(&a.output))?;
    println!("{} pairs from {} examples -> {}", pairs.len(), d.len(), a.output.display());
    Ok(0)
}

#[derive(Debug, Serialize)]
struct TrainSettings {
    seed: u64,
    strategy: Strategy,
    hash_buckets: usize,
    template: PromptTemplate,
    stages: Vec<StageConfig>,
}

fn stage_config(ctx: &Settings, a: &TrainArgs, stage: StageName) -> anyhow::Result<StageConfig> {
    let mut c = StageConfig::default_for(stage);
    c.random_state = ctx.config.seed.unwrap_or(DEFAULT_SEED);
    let (overrides, epochs, lr) = match stage {
        StageName::Stage1GenericNli => (&ctx.config.train.stage1, a.stage1_epochs, a.stage1_lr),
        StageName::Stage2Legal => (&ctx.config.train.stage2, a.stage2_epochs, a.stage2_lr),
    };
    overrides.apply(&mut c)?;
    if let Some(seed) = ctx.seed_flag {
        c.random_state = seed;
    }
    if let Some(e) = epochs {
        c.epochs = e;
    }
    if let Some(lr) = lr {
        c.learning_rate = lr;
    }
    if let Some(b) = a.beta {
        c.orpo_beta = b;
    }
    if let Some(b) = a.batch_size {
        c.batch_size = b;
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn train_cmd(ctx: &Settings, a: TrainArgs) -> anyhow::Result<i32> {
    let template = ctx.template(a.template.as_ref())?;
    let strategy = ctx.strategy(a.strategy.as_ref())?;
    let seed = ctx.seed();
    let skip_stage1 = a.skip_stage1 || ctx.config.train.skip_stage1.unwrap_or(false);
    let hash_buckets = a.hash_buckets.or(ctx.config.train.hash_buckets).unwrap_or(4096);
    if hash_buckets == 0 {
        return Err(usage("hash_buckets must be >= 1"));
    }
    let out_dir = a
        .out_dir
        .clone()
        .or_else(|| ctx.config.train.output_dir.clone())
        .or_else(|| std::env::var_os(HOME_ENV).map(|h| PathBuf::from(h).join("checkpoints")))
        .unwrap_or_else(|| PathBuf::from("legalnli-checkpoints"));

    let mut inputs = Vec::new();
    if !skip_stage1 {
        let path = a.stage1.clone().ok_or_else(|| usage("--stage1 is required unless --skip-stage1"))?;
        inputs.push(("stage1", path, StageName::Stage1GenericNli, Source::Snli));
    }
    inputs.push(("stage2", a.stage2.clone(), StageName::Stage2Legal, Source::Nllp));

    let mut stages = Vec::new();
    for (_, path, name, source) in &inputs {
        let config = stage_config(ctx, &a, *name)?;
        let d = load(path, *source)?;
        let data = match config.objective {
            Objective::Sft => StageData::Examples(d),
            Objective::Orpo => StageData::Pairs(build_corpus_pairs(&d, strategy, seed, &template)?),
        };
        stages.push(PlanStage { config, data });
    }
    let settings = TrainSettings {
        seed,
        strategy,
        hash_buckets,
        template: template.clone(),
        stages: stages.iter().map(|s| s.config.clone()).collect(),
    };
    let plan = TrainingPlan::new(stages, template.clone(), &out_dir)?.with_resume(a.resume);
    let mut model = ReferenceTinyModel::new(ReferenceConfig {
        hash_buckets,
        ..ReferenceConfig::for_template(&template)
    });
    let result = run_pipeline(&plan, &mut model)?;

    let mut manifest = RunManifest::new("train", &settings);
    for (name, path, _, _) in &inputs {
        manifest.add_input(name, path)?;
    }
    for cp in &result.checkpoints {
        manifest.add_artifact(cp.clone());
    }
    manifest.add_artifact("pipeline_report.json");
    report::write_json_artifact(&out_dir.join("pipeline_report.json"), &manifest.file_name(), &result)?;
    manifest.write(&out_dir)?;

    for (i, (stage, dir)) in result.stages.iter().zip(&result.checkpoints).enumerate() {
        let last = stage.epochs.last().map_or(f64::NAN, |e| e.mean_loss);
        let resumed = if result.resumed_stages.contains(&i) {
            " (resumed)"
        } else {
            ""
        };
        println!(
            "{}: {} items, {} epochs, final mean loss {:.6}{} -> {}",
            stage.stage_name.as_str(),
            stage.data_items,
            stage.epochs.len(),
            last,
            resumed,
            out_dir.join(dir).display()
        );
    }
    println!("final params sha256 {}", result.final_params_sha256);
    Ok(0)
}

/// Finds the checkpoint a `--checkpoint` path points at.
fn resolve_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    if path.join("manifest.json").exists() {
        return Ok(Checkpoint::load(path)?);
    }
    let report_path = path.join("pipeline_report.json");
    let text = std::fs::read_to_string(&report_path)
        .with_context(|| format!("{} is neither a checkpoint nor a training directory", path.display()))?;
    let report: PipelineReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", report_path.display()))?;
    let last = report.checkpoints.last().context("training report lists no checkpoints")?;
    Ok(Checkpoint::load(&path.join(last))?)
}

/// Rebuilds the reference model stored in a checkpoint.
pub fn load_reference_model(cp: &Checkpoint) -> anyhow::Result<ReferenceTinyModel> {
    let m = &cp.manifest;
    let mut model = ReferenceTinyModel::new(ReferenceConfig::default());
    if m.backend != model.name() {
        bail!("checkpoint was written by backend {:?}, only {:?} is available", m.backend, model.name());
    }
    let config: ReferenceConfig =
        serde_json::from_value(m.backend_config.clone()).context("reading backend_config from checkpoint")?;
    model = ReferenceTinyModel::new(config);
    model.begin_stage(&m.config)?;
    cp.restore_into(&mut model)?;
    Ok(model)
}

fn predict_cmd(_ctx: &Settings, a: PredictArgs) -> anyhow::Result<i32> {
    let cp = resolve_checkpoint(&a.checkpoint)?;
    let model = load_reference_model(&cp)?;
    let template = cp.manifest.template.clone();
    let d = load(&a.data, Source::Other)?;
    let records = exec::try_map(Execution::default(), d.examples(), |e| -> anyhow::Result<PredictionRecord> {
        let generation = model.predict(&render_prompt(e, &template)?)?;
        Ok(PredictionRecord {
            id: e.id.clone(),
            predicted_label: parse_label(&generation, &template).label.map(|l| l.as_str().to_string()),
            raw_generation: Some(generation),
        })
    })?;
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    corpus::write_file(&a.output, out.as_bytes())?;

    let settings = serde_json::json!({
        "checkpoint_stage": cp.manifest.stage_name,
        "params_sha256": cp.manifest.params_sha256,
    });
    let mut manifest = RunManifest::new("predict", &settings);
    manifest.add_input("data", &a.data)?;
    manifest.add_input("params", &cp.dir.join(&cp.manifest.params_file))?;
    manifest.add_artifact(file_name(&a.output));
    manifest.write(&dir_of(&a.output))?;
    println!("{} predictions -> {}", records.len(), a.output.display());
    Ok(0)
}

fn fallback_label(ctx: &Settings, flag: Option<&String>) -> anyhow::Result<Label> {
    flag.or(ctx.config.eval.fallback.as_ref())
        .map_or(Ok(Label::Neutral), |s| s.parse::<Label>().map_err(|e| usage(e.to_string())))
}

fn evaluate_cmd(ctx: &Settings, a: EvaluateArgs) -> anyhow::Result<i32> {
    let template = ctx.template(a.template.as_ref())?;
    let fallback = fallback_label(ctx, a.fallback.as_ref())?;
    let latex = a.latex || ctx.config.eval.latex.unwrap_or(false);
    let gold = load(&a.gold, Source::Nllp)?;
    let preds = read_predictions(&a.pred)?;
    let result = score_predictions(&gold, &preds, &template, fallback)?;
    let run = RunLabel {
        model: a.label.model,
        trained_on: a.label.trained_on,
        alignment: a.label.alignment,
    };

    let settings = serde_json::json!({ "fallback": fallback, "template": template, "run": run });
    let mut manifest = RunManifest::new("evaluate", &settings);
    manifest.add_input("gold", &a.gold)?;
    manifest.add_input("pred", &a.pred)?;
    let mref = manifest.file_name();
    report::write_json_artifact(&a.out_dir.join("report.json"), &mref, &result)?;
    manifest.add_artifact("report.json");
    let table = report::metrics_table(&result, &run, TableFormat::Markdown, &mref);
    corpus::write_file(&a.out_dir.join("metrics.md"), table.as_bytes())?;
    manifest.add_artifact("metrics.md");
    if latex {
        let tex = report::metrics_table(&result, &run, TableFormat::Latex, &mref);
        corpus::write_file(&a.out_dir.join("metrics.tex"), tex.as_bytes())?;
        manifest.add_artifact("metrics.tex");
    }
    manifest.write(&a.out_dir)?;
    print!("{table}");
    Ok(0)
}

fn report_cmd(ctx: &Settings, a: ReportArgs) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let result: EvaluationReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.report.display()))?;
    let out_dir = a.out_dir.clone().unwrap_or_else(|| dir_of(&a.report));
    let latex = a.latex || ctx.config.eval.latex.unwrap_or(false);

    let mut manifest = RunManifest::new("report", &serde_json::json!({ "plot": a.plot, "latex": latex }));
    manifest.add_input("report", &a.report)?;
    let mref = manifest.file_name();
    report::emit_domain_table(&result, &out_dir.join("domain_table.md"), TableFormat::Markdown, &mref)?;
    manifest.add_artifact("domain_table.md");
    if latex {
        report::emit_domain_table(&result, &out_dir.join("domain_table.tex"), TableFormat::Latex, &mref)?;
        manifest.add_artifact("domain_table.tex");
    }
    let plot = out_dir.join(&a.plot);
    report::emit_confusion_plot(&result.matrix, &plot, &mref).map_err(|e| match e {
        report::ReportError::Extension(_) => usage(e.to_string()),
        other => other.into(),
    })?;
    manifest.add_artifact(a.plot.clone());
    manifest.add_artifact(file_name(&report::sidecar_path(&plot)));
    manifest.write(&out_dir)?;
    print!("{}", report::domain_table(&result, TableFormat::Markdown, &mref));
    Ok(0)
}
