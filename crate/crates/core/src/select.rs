//! Post-generation verification: removes derived columns that are highly
//! null, single-valued, or dummies of a high-cardinality attribute.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dsl::TransformPlan;
use crate::table::{ColumnProfile, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionThresholds {
    /// τ: derived columns with a larger null fraction are removed.
    pub max_null_fraction: f64,
    /// κ: dummies of attributes with more distinct values are removed.
    pub high_cardinality: usize,
}

impl Default for SelectionThresholds {
    fn default() -> Self {
        Self {
            max_null_fraction: 0.5,
            high_cardinality: 25,
        }
    }
}

impl SelectionThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_null_fraction > 0.0 && self.max_null_fraction <= 1.0) {
            return Err(format!("max_null_fraction must be in (0, 1], got {}", self.max_null_fraction));
        }
        if self.high_cardinality < 2 {
            return Err(format!("high_cardinality must be at least 2, got {}", self.high_cardinality));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    HighlyNull,
    SingleValued,
    HighCardinalityDummy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub name: String,
    pub reason: RemovalReason,
    pub null_fraction: f64,
    pub cardinality: usize,
    /// Distinct values of the dummy source, for `HighCardinalityDummy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_cardinality: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionReport {
    pub kept: Vec<String>,
    pub removed: Vec<Removal>,
}

impl SelectionReport {
    pub fn removed_names(&self) -> Vec<String> {
        self.removed.iter().map(|r| r.name.clone()).collect()
    }
}

/// Distinct values behind a dummy group: the source column's cardinality
/// when it is still present, otherwise the number of dummies in the table.
fn dummy_source_cardinality(table: &Table, plan: &TransformPlan, column: &str) -> Option<usize> {
    let source = plan.dummy_source(column)?;
    if let Some(c) = table.column(source) {
        return Some(ColumnProfile::of(c).cardinality);
    }
    let (node_index, _) = plan.node_for_column(column)?;
    Some(
        table
            .names()
            .filter(|n| plan.node_for_column(n).map(|(i, _)| i) == Some(node_index))
            .count(),
    )
}

/// Checks every derived column (one the plan produces) and removes the
/// failures. Originals and the target are never touched. The first matching
/// reason is reported, in the order HighlyNull, SingleValued,
/// HighCardinalityDummy.
pub fn select_features(table: &Table, plan: &TransformPlan, thresholds: &SelectionThresholds) -> (Table, SelectionReport) {
    let mut report = SelectionReport::default();
    let mut cache: HashMap<String, Option<usize>> = HashMap::new();
    for (meta, column) in table.iter() {
        let name = &meta.name;
        if Some(name.as_str()) == table.target() || !plan.is_derived(name) {
            continue;
        }
        let p = ColumnProfile::of(column);
        let source_cardinality = *cache
            .entry(plan.node_for_column(name).map(|(_, n)| n.name.clone()).unwrap_or_default())
            .or_insert_with(|| dummy_source_cardinality(table, plan, name));
        let reason = if p.null_fraction > thresholds.max_null_fraction {
            Some(RemovalReason::HighlyNull)
        } else if p.cardinality <= 1 {
            Some(RemovalReason::SingleValued)
        } else if source_cardinality.is_some_and(|c| c > thresholds.high_cardinality) {
            Some(RemovalReason::HighCardinalityDummy)
        } else {
            None
        };
        match reason {
            Some(reason) => report.removed.push(Removal {
                name: name.clone(),
                reason,
                null_fraction: p.null_fraction,
                cardinality: p.cardinality,
                source_cardinality,
            }),
            None => report.kept.push(name.clone()),
        }
    }
    let out = table.drop_columns(&report.removed_names());
    (out, report)
}
