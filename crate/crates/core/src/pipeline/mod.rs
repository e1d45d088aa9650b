//! The generation loop: unary proposals, sampled binary, high-order and
//! extractor candidates, function generation, the drop heuristic and
//! feature selection.

mod candidate;
mod report;
mod run;

pub use candidate::{feature_name, unique_name, CandidateFeature, CandidateSpec, ExtractorKind};
pub use report::{
    AcceptedFeature, KindErrors, PipelineReport, PreviewRow, Rejection, RowCompletionDecision, SamplingStats,
    SourceSuggestionRecord,
};
pub use run::{drop_originals, generate, run_pipeline, PipelineOutcome};

use serde::{Deserialize, Serialize};

use crate::agenda::AgendaError;
use crate::dsl::OperatorKind;
use crate::llm::Confidence;
use crate::select::SelectionThresholds;
use crate::table::TableError;

/// Sampling budget per sampled operator kind. Zero skips the kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub binary: usize,
    pub high_order: usize,
    pub extractor: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self::uniform(10)
    }
}

impl Budgets {
    pub fn uniform(n: usize) -> Self {
        Self {
            binary: n,
            high_order: n,
            extractor: n,
        }
    }

    pub fn for_kind(&self, kind: OperatorKind) -> usize {
        match kind {
            OperatorKind::Unary => 0,
            OperatorKind::Binary => self.binary,
            OperatorKind::HighOrder => self.high_order,
            OperatorKind::Extractor => self.extractor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub budget: Budgets,
    /// Consecutive generation errors that end sampling for a kind.
    pub error_threshold: usize,
    /// Lowest confidence at which a unary proposal is kept.
    pub confidence_cutoff: Confidence,
    /// Rows shown to the approval source before a row completion.
    pub preview_examples: usize,
    /// "Current year" for date arithmetic.
    pub reference_year: i32,
    pub thresholds: SelectionThresholds,
    /// Concurrent unary-proposal calls.
    pub parallelism: usize,
    /// Repeats of the sampled phases.
    pub sweeps: usize,
    /// Wall-clock timings in the report; off keeps reports byte-stable.
    pub record_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            budget: Budgets::default(),
            error_threshold: 5,
            confidence_cutoff: Confidence::High,
            preview_examples: 3,
            reference_year: 2023,
            thresholds: SelectionThresholds::default(),
            parallelism: 4,
            sweeps: 1,
            record_timings: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.error_threshold == 0 {
            return bad("error_threshold must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        self.thresholds.validate().map_err(PipelineError::Config)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Agenda(#[from] AgendaError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Information shown before a row completion is run.
#[derive(Debug, Clone)]
pub struct RowCompletionRequest<'a> {
    pub feature: &'a str,
    pub description: &'a str,
    pub preview: &'a [(String, String)],
    pub estimated_calls: usize,
}

/// Decides whether costly row-level completions run.
pub trait Approval {
    /// When false, row completions are skipped without preview calls.
    fn enabled(&self) -> bool {
        true
    }

    fn approve(&self, request: &RowCompletionRequest<'_>) -> bool;
}

pub struct AutoApprove;

impl Approval for AutoApprove {
    fn approve(&self, _: &RowCompletionRequest<'_>) -> bool {
        true
    }
}

/// Shows previews (the calls are made) and then declines.
pub struct AutoDeny;

impl Approval for AutoDeny {
    fn approve(&self, _: &RowCompletionRequest<'_>) -> bool {
        false
    }
}

/// Skips row completions entirely.
pub struct NoCompletions;

impl Approval for NoCompletions {
    fn enabled(&self) -> bool {
        false
    }

    fn approve(&self, _: &RowCompletionRequest<'_>) -> bool {
        false
    }
}
