//! Legal natural language inference pipeline.
//!
//! The crate covers the full experiment loop for three-way NLI over legal
//! premise/hypothesis pairs:
//!
//! - [`corpus`]: loading, validating, aggregating and subsetting datasets
//! - [`prompt`]: prompt rendering and parsing generations back into labels
//! - [`pairs`]: ORPO preference pairs under the three rejection strategies
//! - [`train`]: stage configs, SFT/ORPO objectives, the staged pipeline and a
//!   small reference backend
//! - [`eval`]: confusion matrices, macro metrics, error typology, domain slices
//! - [`report`]: run manifests, markdown/LaTeX tables and confusion plots
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod exec;
pub mod label;
pub mod pairs;
pub mod prompt;
pub mod report;
pub mod synthetic;
pub mod train;

mod hashing;

pub use corpus::{Dataset, DistributionSummary, NliExample, Source};
pub use eval::{ConfusionMatrix, ErrorType, EvaluationReport};
pub use label::Label;
pub use pairs::{PairSet, PreferencePair, Strategy};
pub use prompt::{ParsedLabel, PromptTemplate};
pub use train::{StageConfig, TrainerBackend};
