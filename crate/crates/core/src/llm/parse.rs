//! Parsers for model answers. None of them panic; every failure is a
//! [`GenerationError`] the pipeline counts.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agenda::DataAgenda;
use crate::dsl::{self, lenient, AggFn, BinaryOp, OperatorKind, Operand, TransformExpr, UnaryKind};
use crate::pipeline::{feature_name, CandidateFeature, CandidateSpec, ExtractorKind};
use crate::table::parse_number;

/// Confidence levels, ordered `Low < Medium < High < Certain`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Low,
    Medium,
    High,
    Certain,
}

impl Confidence {
    pub fn parse(s: &str) -> Option<Confidence> {
        match s.trim().to_ascii_lowercase().as_str() {
            "certain" => Some(Confidence::Certain),
            "high" => Some(Confidence::High),
            "medium" => Some(Confidence::Medium),
            "low" => Some(Confidence::Low),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::Certain => "certain",
            Confidence::High => "high",
            Confidence::Medium => "medium",
            Confidence::Low => "low",
        }
    }
}

impl std::str::FromStr for Confidence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Confidence::parse(s).ok_or_else(|| format!("unknown confidence `{s}` (certain/high/medium/low)"))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum GenerationError {
    #[error("no operator proposals for `{0}`")]
    EmptyProposal(String),
    #[error("malformed answer: {0}")]
    Malformed(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unknown aggregation `{0}`")]
    UnknownAggregation(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("answer carries no FUNCTION, ROW_COMPLETION or SOURCE marker")]
    Unlabeled,
    #[error("answer carries several markers: {}", .0.join(", "))]
    Ambiguous(Vec<String>),
    #[error("invalid expression: {0}")]
    InvalidExpr(String),
    #[error("repeated feature: {0}")]
    Duplicate(String),
    #[error("feature `{0}` evaluates to nulls only")]
    AllNull(String),
    #[error("provider: {0}")]
    Provider(String),
    #[error("prompt: {0}")]
    Prompt(String),
}

impl GenerationError {
    /// Short label used for error counts in reports.
    pub fn category(&self) -> &'static str {
        match self {
            GenerationError::EmptyProposal(_) => "empty_proposal",
            GenerationError::Malformed(_) => "malformed",
            GenerationError::UnknownColumn(_) => "unknown_column",
            GenerationError::UnknownAggregation(_) => "unknown_aggregation",
            GenerationError::UnknownOperator(_) => "unknown_operator",
            GenerationError::Unlabeled => "unlabeled",
            GenerationError::Ambiguous(_) => "ambiguous",
            GenerationError::InvalidExpr(_) => "invalid_expression",
            GenerationError::Duplicate(_) => "duplicate",
            GenerationError::AllNull(_) => "all_null",
            GenerationError::Provider(_) => "provider",
            GenerationError::Prompt(_) => "prompt",
        }
    }
}

impl From<dsl::DslError> for GenerationError {
    fn from(e: dsl::DslError) -> Self {
        GenerationError::InvalidExpr(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnaryProposal {
    pub op: UnaryKind,
    pub confidence: Confidence,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProposalSet {
    pub proposals: Vec<UnaryProposal>,
    /// Lines naming operators outside the vocabulary.
    pub warnings: usize,
}

fn proposal_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*(?:[-*•]|\d+[.)])?\s*\**\s*(?P<op>[^():*]+?)\s*\**\s*\(\(?\s*(?P<conf>certain|high|medium|low)\s*\)?\)\s*\**\s*(?:[:\-–]\s*)?(?P<desc>.*)$",
        )
        .expect("valid regex")
    })
}

fn match_unary(name: &str, focus: &str) -> Option<UnaryKind> {
    if let Some(k) = UnaryKind::from_name(name) {
        return Some(k);
    }
    // "Bucketization of Age", "Age normalization"
    let lower = name.to_lowercase();
    let stripped = lower.replace(&focus.to_lowercase(), " ");
    let words: Vec<&str> = stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "of" | "on" | "the" | "for" | "to" | "apply" | "applying"))
        .collect();
    UnaryKind::from_name(&words.join(" "))
}

/// Extracts `Operator (confidence): description` lines. Lines in another
/// shape are prose and ignored; well-formed lines naming an operator outside
/// the vocabulary are dropped and counted in `warnings`. Repeated operators
/// keep their highest confidence.
pub fn parse_unary_proposals(response: &str, focus: &str) -> Result<ProposalSet, GenerationError> {
    let mut set = ProposalSet::default();
    let mut parsed = 0usize;
    for line in response.lines() {
        let Some(caps) = proposal_line().captures(line) else {
            continue;
        };
        parsed += 1;
        let confidence = Confidence::parse(&caps["conf"]).expect("regex admits only known levels");
        let description = caps["desc"].trim().to_string();
        match match_unary(caps["op"].trim(), focus) {
            None => set.warnings += 1,
            Some(op) => match set.proposals.iter_mut().find(|p| p.op == op) {
                Some(existing) => existing.confidence = existing.confidence.max(confidence),
                None => set.proposals.push(UnaryProposal {
                    op,
                    confidence,
                    description,
                }),
            },
        }
    }
    if parsed == 0 {
        return Err(GenerationError::EmptyProposal(focus.to_string()));
    }
    Ok(set)
}

fn object(response: &str) -> Result<serde_json::Map<String, Value>, GenerationError> {
    match lenient::extract_object(response) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(GenerationError::Malformed("expected an object".into())),
        Err(e) => Err(GenerationError::Malformed(e.to_string())),
    }
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k)).filter(|v| !v.is_null())
}

fn text_field(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Result<String, GenerationError> {
    match field(obj, keys) {
        Some(Value::String(s)) => Ok(s.trim().to_string()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(other) => Err(GenerationError::Malformed(format!("`{}` must be text, found {other}", keys[0]))),
        None => Err(GenerationError::Malformed(format!("missing `{}`", keys[0]))),
    }
}

/// A string or a list of strings.
fn list_field(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Result<Vec<String>, GenerationError> {
    let bad = || GenerationError::Malformed(format!("`{}` must be a column or a list of columns", keys[0]));
    match field(obj, keys) {
        Some(Value::String(s)) => Ok(vec![s.trim().to_string()]),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(|s| s.trim().to_string()).ok_or_else(bad))
            .collect(),
        Some(_) => Err(bad()),
        None => Err(GenerationError::Malformed(format!("missing `{}`", keys[0]))),
    }
}

fn known_column(agenda: &DataAgenda, col: &str) -> Result<(), GenerationError> {
    if agenda.feature(col).is_some() {
        Ok(())
    } else {
        Err(GenerationError::UnknownColumn(col.to_string()))
    }
}

fn operand(agenda: &DataAgenda, v: &Value) -> Result<Operand, GenerationError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Operand::Lit)
            .ok_or_else(|| GenerationError::Malformed(format!("bad literal {n}"))),
        Value::String(s) => {
            let s = s.trim();
            if agenda.feature(s).is_some() {
                Ok(Operand::Col(s.to_string()))
            } else if let Some(x) = parse_number(s) {
                Ok(Operand::Lit(x))
            } else {
                Err(GenerationError::UnknownColumn(s.to_string()))
            }
        }
        other => Err(GenerationError::Malformed(format!("operand must be a column or a number, found {other}"))),
    }
}

fn symbol(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::Add => "+",
        BinaryOp::Sub => "-",
        BinaryOp::Mul => "*",
        BinaryOp::Div => "/",
    }
}

/// Parses one sampled candidate. The name follows the naming convention but
/// is not yet made unique.
pub fn parse_sampled_candidate(
    response: &str,
    kind: OperatorKind,
    agenda: &DataAgenda,
) -> Result<CandidateFeature, GenerationError> {
    let obj = object(response)?;
    let description = field(&obj, &["description", "desc"])
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string());
    match kind {
        OperatorKind::Unary => Err(GenerationError::Malformed("unary operators are proposed, not sampled".into())),
        OperatorKind::Binary => {
            let op_text = text_field(&obj, &["op", "operator", "operation"])?;
            let op = BinaryOp::parse(&op_text).ok_or(GenerationError::UnknownOperator(op_text))?;
            let lhs = operand(agenda, field(&obj, &["lhs", "left"]).ok_or(GenerationError::Malformed("missing `lhs`".into()))?)?;
            let rhs = operand(agenda, field(&obj, &["rhs", "right"]).ok_or(GenerationError::Malformed("missing `rhs`".into()))?)?;
            let expr = TransformExpr::Binary {
                op,
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            };
            let relevant: Vec<String> = expr.columns().into_iter().map(str::to_string).collect();
            if relevant.is_empty() {
                return Err(GenerationError::Malformed("binary operator needs at least one column".into()));
            }
            Ok(CandidateFeature {
                name: feature_name(kind, &[op.label(), &lhs.label(), &rhs.label()]),
                relevant_columns: relevant,
                description: description
                    .unwrap_or_else(|| format!("{} {} {}", lhs.label(), symbol(op), rhs.label())),
                kind,
                spec: CandidateSpec::Expr { expr },
            })
        }
        OperatorKind::HighOrder => {
            let group_cols = list_field(&obj, &["groupby_col", "groupby_cols", "group_cols", "groupby"])?;
            if group_cols.is_empty() {
                return Err(GenerationError::Malformed("empty `groupby_col`".into()));
            }
            for (i, g) in group_cols.iter().enumerate() {
                known_column(agenda, g)?;
                if group_cols[..i].contains(g) {
                    return Err(GenerationError::Malformed(format!("`{g}` repeated in groupby_col")));
                }
            }
            let agg_col = text_field(&obj, &["agg_col", "aggregate_col", "agg_column"])?;
            known_column(agenda, &agg_col)?;
            let fn_text = text_field(&obj, &["function", "agg_func", "aggregation", "func"])?;
            let func = AggFn::parse(&fn_text).ok_or(GenerationError::UnknownAggregation(fn_text))?;
            let mut parts: Vec<&str> = group_cols.iter().map(String::as_str).collect();
            parts.push(func.as_str());
            parts.push(&agg_col);
            let name = feature_name(kind, &parts);
            let mut relevant = group_cols.clone();
            relevant.push(agg_col.clone());
            let description = format!(
                "groupby([{}])[{}].transform({})",
                group_cols.join(", "),
                agg_col,
                func.as_str()
            );
            Ok(CandidateFeature {
                name,
                relevant_columns: relevant,
                description,
                kind,
                spec: CandidateSpec::Expr {
                    expr: TransformExpr::GroupbyAgg {
                        group_cols,
                        agg_col,
                        func,
                    },
                },
            })
        }
        OperatorKind::Extractor => {
            let kind_text = text_field(&obj, &["kind", "type", "extractor"])?;
            let extractor = ExtractorKind::parse(&kind_text).ok_or(GenerationError::UnknownOperator(kind_text))?;
            let columns = list_field(&obj, &["columns", "relevant_columns", "cols"])?;
            if columns.is_empty() {
                return Err(GenerationError::Malformed("empty `columns`".into()));
            }
            for c in &columns {
                known_column(agenda, c)?;
            }
            let mut parts: Vec<&str> = vec![extractor.as_str()];
            parts.extend(columns.iter().map(String::as_str));
            Ok(CandidateFeature {
                name: feature_name(kind, &parts),
                description: description.unwrap_or_else(|| format!("{} of {}", extractor.as_str(), columns.join(", "))),
                relevant_columns: columns,
                kind,
                spec: CandidateSpec::Extractor { extractor },
            })
        }
    }
}

/// What the function generator produced for a candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum GenerationOutcome {
    Function(TransformExpr),
    /// Values must be completed row by row. `preview` pairs serialized rows
    /// with the model's answers; parsing leaves it empty.
    RowCompletion {
        preview: Vec<(String, String)>,
        estimated_calls: usize,
    },
    SourceSuggestion(String),
}

const MARKERS: [&str; 3] = ["FUNCTION", "ROW_COMPLETION", "SOURCE"];

/// Marker at the start of a line, ignoring markdown decoration.
fn line_marker(line: &str) -> Option<(&'static str, &str)> {
    let t = line.trim_start().trim_start_matches(['*', '#', '`', '>', ' ']);
    MARKERS.iter().find_map(|m| {
        let rest = t.strip_prefix(m)?;
        let boundary = rest.chars().next().is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
        boundary.then(|| (*m, rest.trim_start_matches(['*', '`', ':', ' ', '\t'])))
    })
}

/// Classifies a generator answer by its marker.
pub fn parse_function_output(response: &str) -> Result<GenerationOutcome, GenerationError> {
    let lines: Vec<&str> = response.lines().collect();
    let found: Vec<(usize, &'static str, &str)> = lines
        .iter()
        .enumerate()
        .filter_map(|(i, l)| line_marker(l).map(|(m, rest)| (i, m, rest)))
        .collect();
    let (i, marker, rest) = match found.as_slice() {
        [] => return Err(GenerationError::Unlabeled),
        [one] => *one,
        many => return Err(GenerationError::Ambiguous(many.iter().map(|(_, m, _)| m.to_string()).collect())),
    };
    let mut body = rest.to_string();
    for l in &lines[i + 1..] {
        body.push('\n');
        body.push_str(l);
    }
    match marker {
        "FUNCTION" => {
            let v = lenient::extract_object(&body).map_err(|e| GenerationError::Malformed(e.to_string()))?;
            Ok(GenerationOutcome::Function(dsl::expr_from_value(&v)?))
        }
        "ROW_COMPLETION" => Ok(GenerationOutcome::RowCompletion {
            preview: Vec::new(),
            estimated_calls: 0,
        }),
        _ => {
            let text = body.trim().trim_matches('`').trim();
            if text.is_empty() {
                Err(GenerationError::Malformed("SOURCE without a suggestion".into()))
            } else {
                Ok(GenerationOutcome::SourceSuggestion(text.to_string()))
            }
        }
    }
}

/// First number in a row-completion answer (`"about 6,700 per km²"` gives 6700).
pub fn parse_row_value(response: &str) -> Option<f64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d[\d,]*(?:\.\d+)?(?:[eE][-+]?\d+)?").expect("valid regex"));
    let m = re.find(response)?;
    parse_number(&m.as_str().replace(',', ""))
}
