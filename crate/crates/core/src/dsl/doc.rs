//! On-disk form of expressions and plans: `{kind, ...params}` nodes.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ast::*;
use super::lenient;
use super::plan::{PlanNode, TransformPlan};
use super::DslError;

/// Every `kind` string the plan format accepts.
pub const EXPR_KINDS: &[&str] = &[
    "col",
    "min_max",
    "zscore",
    "log1p",
    "abs",
    "bucketize",
    "date_part",
    "text_split",
    "get_dummies",
    "add",
    "sub",
    "mul",
    "div",
    "groupby_agg",
    "weighted_sum",
    "ratio",
    "lookup_map",
    "conditional",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ExprDoc {
    Col {
        col: String,
    },
    MinMax {
        col: String,
    },
    #[serde(rename = "zscore")]
    ZScore {
        col: String,
    },
    Log1p {
        col: String,
    },
    Abs {
        col: String,
    },
    Bucketize {
        col: String,
        boundaries: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    DatePart {
        col: String,
        part: DatePart,
    },
    TextSplit {
        col: String,
        delimiter: String,
        index: usize,
    },
    GetDummies {
        col: String,
    },
    Add {
        lhs: Operand,
        rhs: Operand,
    },
    Sub {
        lhs: Operand,
        rhs: Operand,
    },
    Mul {
        lhs: Operand,
        rhs: Operand,
    },
    Div {
        lhs: Operand,
        rhs: Operand,
    },
    GroupbyAgg {
        group_cols: Vec<String>,
        agg_col: String,
        function: AggFn,
    },
    WeightedSum {
        weights: BTreeMap<String, f64>,
    },
    Ratio {
        numerator: String,
        denominator: String,
    },
    LookupMap {
        key_col: String,
        map: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<f64>,
    },
    Conditional {
        col: String,
        op: CmpOp,
        value: Scalar,
        then: f64,
        #[serde(rename = "else")]
        otherwise: f64,
    },
}

impl From<&TransformExpr> for ExprDoc {
    fn from(e: &TransformExpr) -> Self {
        match e.clone() {
            TransformExpr::Col(col) => ExprDoc::Col { col },
            TransformExpr::Unary { op, col } => match op {
                UnaryOp::MinMax => ExprDoc::MinMax { col },
                UnaryOp::ZScore => ExprDoc::ZScore { col },
                UnaryOp::Log1p => ExprDoc::Log1p { col },
                UnaryOp::Abs => ExprDoc::Abs { col },
                UnaryOp::Bucketize { boundaries, labels } => ExprDoc::Bucketize { col, boundaries, labels },
                UnaryOp::DatePart(part) => ExprDoc::DatePart { col, part },
                UnaryOp::TextSplit { delimiter, index } => ExprDoc::TextSplit { col, delimiter, index },
                UnaryOp::GetDummies => ExprDoc::GetDummies { col },
            },
            TransformExpr::Binary { op, lhs, rhs } => match op {
                BinaryOp::Add => ExprDoc::Add { lhs, rhs },
                BinaryOp::Sub => ExprDoc::Sub { lhs, rhs },
                BinaryOp::Mul => ExprDoc::Mul { lhs, rhs },
                BinaryOp::Div => ExprDoc::Div { lhs, rhs },
            },
            TransformExpr::GroupbyAgg { group_cols, agg_col, func } => ExprDoc::GroupbyAgg {
                group_cols,
                agg_col,
                function: func,
            },
            TransformExpr::Extractor(ex) => match ex {
                Extractor::WeightedSum { weights } => ExprDoc::WeightedSum { weights },
                Extractor::Ratio { numerator, denominator } => ExprDoc::Ratio { numerator, denominator },
                Extractor::LookupMap { key_col, map, default } => ExprDoc::LookupMap { key_col, map, default },
                Extractor::Conditional {
                    col,
                    op,
                    value,
                    then,
                    otherwise,
                } => ExprDoc::Conditional {
                    col,
                    op,
                    value,
                    then,
                    otherwise,
                },
            },
        }
    }
}

fn invalid(msg: impl Into<String>) -> DslError {
    DslError::InvalidNode(msg.into())
}

impl TryFrom<ExprDoc> for TransformExpr {
    type Error = DslError;

    fn try_from(d: ExprDoc) -> Result<Self, DslError> {
        let unary = |op, col| Ok(TransformExpr::Unary { op, col });
        let binary = |op, lhs: Operand, rhs: Operand| {
            if lhs.column().is_none() && rhs.column().is_none() {
                return Err(invalid("binary node must reference at least one column"));
            }
            for side in [&lhs, &rhs] {
                if let Operand::Lit(x) = side {
                    if !x.is_finite() {
                        return Err(invalid("binary literal must be finite"));
                    }
                }
            }
            Ok(TransformExpr::Binary { op, lhs, rhs })
        };
        match d {
            ExprDoc::Col { col } => Ok(TransformExpr::Col(col)),
            ExprDoc::MinMax { col } => unary(UnaryOp::MinMax, col),
            ExprDoc::ZScore { col } => unary(UnaryOp::ZScore, col),
            ExprDoc::Log1p { col } => unary(UnaryOp::Log1p, col),
            ExprDoc::Abs { col } => unary(UnaryOp::Abs, col),
            ExprDoc::Bucketize { col, boundaries, labels } => {
                if boundaries.len() < 2 {
                    return Err(DslError::BadBoundaries("need at least two boundaries".into()));
                }
                if boundaries.iter().any(|b| !b.is_finite()) {
                    return Err(DslError::BadBoundaries("boundaries must be finite".into()));
                }
                if boundaries.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(DslError::BadBoundaries(format!(
                        "boundaries must be strictly increasing: {boundaries:?}"
                    )));
                }
                if let Some(l) = &labels {
                    if l.len() != boundaries.len() - 1 {
                        return Err(DslError::BadBoundaries(format!(
                            "{} boundaries define {} buckets but {} labels were given",
                            boundaries.len(),
                            boundaries.len() - 1,
                            l.len()
                        )));
                    }
                }
                unary(UnaryOp::Bucketize { boundaries, labels }, col)
            }
            ExprDoc::DatePart { col, part } => unary(UnaryOp::DatePart(part), col),
            ExprDoc::TextSplit { col, delimiter, index } => {
                if delimiter.is_empty() {
                    return Err(invalid("text_split delimiter must be non-empty"));
                }
                unary(UnaryOp::TextSplit { delimiter, index }, col)
            }
            ExprDoc::GetDummies { col } => unary(UnaryOp::GetDummies, col),
            ExprDoc::Add { lhs, rhs } => binary(BinaryOp::Add, lhs, rhs),
            ExprDoc::Sub { lhs, rhs } => binary(BinaryOp::Sub, lhs, rhs),
            ExprDoc::Mul { lhs, rhs } => binary(BinaryOp::Mul, lhs, rhs),
            ExprDoc::Div { lhs, rhs } => binary(BinaryOp::Div, lhs, rhs),
            ExprDoc::GroupbyAgg {
                group_cols,
                agg_col,
                function,
            } => {
                if group_cols.is_empty() {
                    return Err(invalid("groupby_agg needs at least one group column"));
                }
                let unique: HashSet<&String> = group_cols.iter().collect();
                if unique.len() != group_cols.len() {
                    return Err(invalid("groupby_agg group columns must be distinct"));
                }
                Ok(TransformExpr::GroupbyAgg {
                    group_cols,
                    agg_col,
                    func: function,
                })
            }
            ExprDoc::WeightedSum { weights } => {
                if weights.len() < 2 {
                    return Err(invalid("weighted_sum needs at least two columns"));
                }
                if weights.values().any(|w| !w.is_finite()) {
                    return Err(invalid("weighted_sum weights must be finite"));
                }
                Ok(TransformExpr::Extractor(Extractor::WeightedSum { weights }))
            }
            ExprDoc::Ratio { numerator, denominator } => {
                Ok(TransformExpr::Extractor(Extractor::Ratio { numerator, denominator }))
            }
            ExprDoc::LookupMap { key_col, map, default } => {
                Ok(TransformExpr::Extractor(Extractor::LookupMap { key_col, map, default }))
            }
            ExprDoc::Conditional {
                col,
                op,
                value,
                then,
                otherwise,
            } => {
                if matches!(value, Scalar::Str(_)) && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(invalid("string comparisons support only == and !="));
                }
                Ok(TransformExpr::Extractor(Extractor::Conditional {
                    col,
                    op,
                    value,
                    then,
                    otherwise,
                }))
            }
        }
    }
}

/// Builds an expression from an already-parsed node object.
/// Accepts `unary: "<kind>"` as an alias for `kind`.
pub fn expr_from_value(v: &Value) -> Result<TransformExpr, DslError> {
    let obj = v
        .as_object()
        .ok_or_else(|| invalid(format!("expression must be an object, found {v}")))?;
    let mut obj = obj.clone();
    if !obj.contains_key("kind") {
        if let Some(kind) = obj.remove("unary") {
            obj.insert("kind".into(), kind);
        }
    }
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("expression node is missing `kind`"))?
        .to_string();
    if !EXPR_KINDS.contains(&kind.as_str()) {
        return Err(DslError::UnknownKind(kind));
    }
    let doc: ExprDoc = serde_json::from_value(Value::Object(obj)).map_err(|e| invalid(format!("{kind}: {e}")))?;
    TransformExpr::try_from(doc)
}

/// Parses a single expression from text in relaxed object notation.
pub fn parse_expr(text: &str) -> Result<TransformExpr, DslError> {
    let v = lenient::parse(text).map_err(DslError::Syntax)?;
    expr_from_value(&v)
}

pub fn expr_to_value(e: &TransformExpr) -> Value {
    serde_json::to_value(ExprDoc::from(e)).expect("expression serializes")
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    relevant_columns: Vec<String>,
    #[serde(default)]
    operator_kind: Option<OperatorKind>,
    expr: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanDoc {
    features: Vec<NodeDoc>,
    #[serde(default)]
    dropped_columns: Vec<String>,
}

/// Parses a plan document. Besides the canonical `{features: [...]}` shape,
/// a bare feature object or a bare array of features is accepted.
pub fn parse_plan(text: &str) -> Result<TransformPlan, DslError> {
    let v = lenient::parse(text).map_err(DslError::Syntax)?;
    let doc: PlanDoc = match v {
        Value::Object(ref o) if o.contains_key("features") => {
            serde_json::from_value(v).map_err(|e| invalid(format!("plan: {e}")))?
        }
        Value::Object(_) => PlanDoc {
            features: vec![serde_json::from_value(v).map_err(|e| invalid(format!("feature: {e}")))?],
            dropped_columns: Vec::new(),
        },
        Value::Array(_) => PlanDoc {
            features: serde_json::from_value(v).map_err(|e| invalid(format!("features: {e}")))?,
            dropped_columns: Vec::new(),
        },
        other => return Err(invalid(format!("plan must be an object or array, found {other}"))),
    };

    let mut nodes = Vec::with_capacity(doc.features.len());
    for (i, f) in doc.features.into_iter().enumerate() {
        let expr = expr_from_value(&f.expr).map_err(|e| e.in_node(i, &f.name))?;
        let operator_kind = f.operator_kind.unwrap_or_else(|| expr.operator_kind());
        let relevant_columns = if f.relevant_columns.is_empty() {
            expr.columns().into_iter().map(str::to_string).collect()
        } else {
            f.relevant_columns
        };
        nodes.push(PlanNode {
            name: f.name,
            description: f.description,
            relevant_columns,
            operator_kind,
            expr,
        });
    }
    TransformPlan::from_nodes(nodes, doc.dropped_columns)
}

/// Pretty JSON with a trailing newline; byte-stable for equal plans.
pub fn plan_to_string(plan: &TransformPlan) -> String {
    let doc = PlanDoc {
        features: plan
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                name: n.name.clone(),
                description: n.description.clone(),
                relevant_columns: n.relevant_columns.clone(),
                operator_kind: Some(n.operator_kind),
                expr: expr_to_value(&n.expr),
            })
            .collect(),
        dropped_columns: plan.dropped().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plan serializes");
    s.push('\n');
    s
}
