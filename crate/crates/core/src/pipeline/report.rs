use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsl::OperatorKind;
use crate::llm::GenerationError;
use crate::select::SelectionReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedFeature {
    pub name: String,
    pub kind: OperatorKind,
    pub description: String,
    pub relevant_columns: Vec<String>,
    /// Table columns the feature produced (several for dummies).
    pub columns: Vec<String>,
}

/// A parsed candidate that did not become a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub name: String,
    pub kind: OperatorKind,
    pub category: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KindErrors {
    pub total: usize,
    pub by_category: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SamplingStats {
    pub budget: usize,
    pub attempts: usize,
    pub candidates: usize,
    /// Sampling ended because of consecutive errors.
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewRow {
    pub row: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCompletionDecision {
    pub feature: String,
    pub approved: bool,
    pub estimated_calls: usize,
    pub preview: Vec<PreviewRow>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSuggestionRecord {
    pub feature: String,
    pub suggestion: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub accepted: Vec<AcceptedFeature>,
    pub rejected: Vec<Rejection>,
    pub errors: BTreeMap<OperatorKind, KindErrors>,
    /// Unary proposals naming operators outside the vocabulary.
    pub proposal_warnings: usize,
    /// Unary proposals under the confidence cutoff.
    pub below_cutoff: usize,
    pub sampling: BTreeMap<OperatorKind, SamplingStats>,
    pub row_completions: Vec<RowCompletionDecision>,
    pub source_suggestions: Vec<SourceSuggestionRecord>,
    pub dropped_originals: Vec<String>,
    pub selection: Option<SelectionReport>,
    pub fm_calls: usize,
    /// Set when a provider failure ended the run early.
    pub aborted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

impl PipelineReport {
    pub fn count_error(&mut self, kind: OperatorKind, error: &GenerationError) {
        let e = self.errors.entry(kind).or_default();
        e.total += 1;
        *e.by_category.entry(error.category().to_string()).or_default() += 1;
    }

    pub fn error_total(&self, kind: OperatorKind) -> usize {
        self.errors.get(&kind).map_or(0, |e| e.total)
    }

    pub fn accepted_names(&self) -> Vec<&str> {
        self.accepted.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
