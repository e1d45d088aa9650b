use serde::{Deserialize, Serialize};

use crate::dsl::{canonical_key, OperatorKind, TransformExpr, UnaryKind};
use crate::llm::Confidence;

/// Extractor families the selector may ask for. `External` marks features
/// whose values need knowledge outside the table (population of a city).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    WeightedSum,
    Ratio,
    Lookup,
    Conditional,
    External,
}

impl ExtractorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorKind::WeightedSum => "weighted_sum",
            ExtractorKind::Ratio => "ratio",
            ExtractorKind::Lookup => "lookup",
            ExtractorKind::Conditional => "conditional",
            ExtractorKind::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<ExtractorKind> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        Some(match key.as_str() {
            "weightedsum" | "weightedaverage" | "linearcombination" | "score" => ExtractorKind::WeightedSum,
            "ratio" | "rate" | "proportion" => ExtractorKind::Ratio,
            "lookup" | "lookupmap" | "mapping" | "map" => ExtractorKind::Lookup,
            "conditional" | "condition" | "flag" | "indicator" | "threshold" => ExtractorKind::Conditional,
            "external" | "rowcompletion" | "knowledge" | "worldknowledge" => ExtractorKind::External,
            _ => return None,
        })
    }
}

/// What the selector decided, before a function exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CandidateSpec {
    Unary {
        op: UnaryKind,
        confidence: Confidence,
    },
    /// Binary and high-order candidates are fully specified by the selector.
    Expr {
        #[serde(with = "expr_serde")]
        expr: TransformExpr,
    },
    Extractor {
        extractor: ExtractorKind,
    },
}

mod expr_serde {
    use crate::dsl::{expr_from_value, expr_to_value, TransformExpr};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &TransformExpr, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&expr_to_value(e), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TransformExpr, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        expr_from_value(&v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeature {
    pub name: String,
    pub relevant_columns: Vec<String>,
    pub description: String,
    pub kind: OperatorKind,
    pub spec: CandidateSpec,
}

impl CandidateFeature {
    /// Identity used to reject repeated candidates.
    pub fn canonical_key(&self) -> String {
        match &self.spec {
            CandidateSpec::Expr { expr } => canonical_key(expr),
            CandidateSpec::Unary { op, .. } => format!("unary:{}:{}", op.label(), self.relevant_columns.join("\u{1f}")),
            CandidateSpec::Extractor { extractor } => {
                let mut cols = self.relevant_columns.clone();
                cols.sort();
                format!("extractor:{}:{}", extractor.as_str(), cols.join("\u{1f}"))
            }
        }
    }
}

/// Builds a feature name from its parts: `Op_Attr`, `Op_Lhs_Rhs`,
/// `GroupBy_{gcols}_{fn}_{acol}` or `Ex_{kind}_{cols}`. Runs of spaces and
/// punctuation other than `.` and `-` become one underscore.
pub fn feature_name(kind: OperatorKind, parts: &[&str]) -> String {
    let mut all: Vec<&str> = Vec::with_capacity(parts.len() + 1);
    match kind {
        OperatorKind::HighOrder => all.push("GroupBy"),
        OperatorKind::Extractor => all.push("Ex"),
        OperatorKind::Unary | OperatorKind::Binary => {}
    }
    all.extend_from_slice(parts);
    all.iter()
        .map(|p| {
            p.split(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '.' | '-')))
                .filter(|w| !w.is_empty())
                .collect::<Vec<_>>()
                .join("_")
        })
        .collect::<Vec<_>>()
        .join("_")
}

/// `base`, or `base_2`, `base_3`, ... whichever is first free.
pub fn unique_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_string();
    }
    (2..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken(n))
        .expect("unbounded suffixes")
}
