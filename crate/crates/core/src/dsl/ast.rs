use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The four operator families a candidate feature can come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Unary,
    Binary,
    HighOrder,
    Extractor,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 4] = [
        OperatorKind::Unary,
        OperatorKind::Binary,
        OperatorKind::HighOrder,
        OperatorKind::Extractor,
    ];

    pub const SAMPLED: [OperatorKind; 3] = [
        OperatorKind::Binary,
        OperatorKind::HighOrder,
        OperatorKind::Extractor,
    ];

    /// Unary operators are proposed in one shot; the others are sampled one at a time.
    pub fn uses_sampling(self) -> bool {
        !matches!(self, OperatorKind::Unary)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Unary => "unary",
            OperatorKind::Binary => "binary",
            OperatorKind::HighOrder => "high_order",
            OperatorKind::Extractor => "extractor",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    Mean,
    Max,
    Min,
    Sum,
    Count,
    Std,
}

impl AggFn {
    pub const ALL: [AggFn; 6] = [AggFn::Mean, AggFn::Max, AggFn::Min, AggFn::Sum, AggFn::Count, AggFn::Std];

    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Mean => "mean",
            AggFn::Max => "max",
            AggFn::Min => "min",
            AggFn::Sum => "sum",
            AggFn::Count => "count",
            AggFn::Std => "std",
        }
    }

    pub fn parse(s: &str) -> Option<AggFn> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" | "avg" | "average" => Some(AggFn::Mean),
            "max" | "maximum" => Some(AggFn::Max),
            "min" | "minimum" => Some(AggFn::Min),
            "sum" | "total" => Some(AggFn::Sum),
            "count" | "size" => Some(AggFn::Count),
            "std" | "stddev" | "std_dev" => Some(AggFn::Std),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    /// Accepts symbols and words (`-`, `sub`, `subtract`, `minus`).
    pub fn parse(s: &str) -> Option<BinaryOp> {
        match s.trim().to_ascii_lowercase().as_str() {
            "+" | "add" | "plus" | "addition" | "sum" => Some(BinaryOp::Add),
            "-" | "sub" | "subtract" | "minus" | "subtraction" | "difference" => Some(BinaryOp::Sub),
            "*" | "x" | "×" | "mul" | "multiply" | "times" | "multiplication" | "product" => Some(BinaryOp::Mul),
            "/" | "÷" | "div" | "divide" | "division" | "ratio" => Some(BinaryOp::Div),
            _ => None,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }

    pub fn label(self) -> &'static str {
        match self {
            BinaryOp::Add => "Add",
            BinaryOp::Sub => "Sub",
            BinaryOp::Mul => "Mul",
            BinaryOp::Div => "Div",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatePart {
    Year,
    Month,
    Day,
    Weekday,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CmpOp {
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
        }
    }
}

/// Binary operand: a column reference or a numeric literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Lit(f64),
    Col(String),
}

impl Operand {
    pub fn column(&self) -> Option<&str> {
        match self {
            Operand::Col(c) => Some(c),
            Operand::Lit(_) => None,
        }
    }

    /// Text form used in feature names (`2023`, `Age_of_car`).
    pub fn label(&self) -> String {
        match self {
            Operand::Col(c) => c.clone(),
            Operand::Lit(x) => crate::table::format_number(*x),
        }
    }

    pub(crate) fn sort_key(&self) -> String {
        match self {
            Operand::Col(c) => format!("col:{c}"),
            Operand::Lit(x) => format!("lit:{}", crate::table::format_number(*x)),
        }
    }
}

/// Comparison right-hand side for `Conditional`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Str(String),
}

/// Unary operator kinds without parameters; the vocabulary the proposal
/// prompt talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryKind {
    MinMax,
    ZScore,
    Log1p,
    Abs,
    Bucketize,
    DatePart,
    TextSplit,
    GetDummies,
}

impl UnaryKind {
    pub const ALL: [UnaryKind; 8] = [
        UnaryKind::MinMax,
        UnaryKind::ZScore,
        UnaryKind::Log1p,
        UnaryKind::Abs,
        UnaryKind::Bucketize,
        UnaryKind::DatePart,
        UnaryKind::TextSplit,
        UnaryKind::GetDummies,
    ];

    /// Name used in generated feature names (`Bucketize_Age`).
    pub fn label(self) -> &'static str {
        match self {
            UnaryKind::MinMax => "MinMax",
            UnaryKind::ZScore => "ZScore",
            UnaryKind::Log1p => "Log1p",
            UnaryKind::Abs => "Abs",
            UnaryKind::Bucketize => "Bucketize",
            UnaryKind::DatePart => "DatePart",
            UnaryKind::TextSplit => "TextSplit",
            UnaryKind::GetDummies => "GetDummies",
        }
    }

    /// Matches free-form operator names from model answers, case-insensitively.
    pub fn from_name(name: &str) -> Option<UnaryKind> {
        let key: String = name
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        let kind = match key.as_str() {
            "bucketize" | "bucketization" | "bucketizing" | "binning" | "bin" | "discretize"
            | "discretization" => UnaryKind::Bucketize,
            "normalization" | "normalize" | "minmax" | "minmaxscaling" | "minmaxnormalization"
            | "minmaxscaler" | "scaling" => UnaryKind::MinMax,
            "standardization" | "standardize" | "zscore" | "zscorenormalization" | "standardscaling"
            | "standardscaler" => UnaryKind::ZScore,
            "log" | "log1p" | "logtransform" | "logtransformation" | "logarithm" | "logarithmic"
            | "logarithmictransformation" => UnaryKind::Log1p,
            "abs" | "absolute" | "absolutevalue" => UnaryKind::Abs,
            "getdummies" | "dummies" | "onehot" | "onehotencoding" | "dummyencoding"
            | "dummyvariables" => UnaryKind::GetDummies,
            "datepart" | "datesplit" | "datesplitting" | "dateextraction" | "datecomponents" => {
                UnaryKind::DatePart
            }
            "split" | "textsplit" | "stringsplit" | "splitting" => UnaryKind::TextSplit,
            _ => return None,
        };
        Some(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnaryOp {
    MinMax,
    ZScore,
    Log1p,
    Abs,
    /// Bucket index per value; `labels`, when given, name the buckets.
    Bucketize {
        boundaries: Vec<f64>,
        labels: Option<Vec<String>>,
    },
    DatePart(DatePart),
    TextSplit {
        delimiter: String,
        index: usize,
    },
    GetDummies,
}

impl UnaryOp {
    pub fn kind(&self) -> UnaryKind {
        match self {
            UnaryOp::MinMax => UnaryKind::MinMax,
            UnaryOp::ZScore => UnaryKind::ZScore,
            UnaryOp::Log1p => UnaryKind::Log1p,
            UnaryOp::Abs => UnaryKind::Abs,
            UnaryOp::Bucketize { .. } => UnaryKind::Bucketize,
            UnaryOp::DatePart(_) => UnaryKind::DatePart,
            UnaryOp::TextSplit { .. } => UnaryKind::TextSplit,
            UnaryOp::GetDummies => UnaryKind::GetDummies,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extractor {
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
        default: Option<f64>,
    },
    Conditional {
        col: String,
        op: CmpOp,
        value: Scalar,
        then: f64,
        otherwise: f64,
    },
}

impl Extractor {
    pub fn label(&self) -> &'static str {
        match self {
            Extractor::WeightedSum { .. } => "weighted_sum",
            Extractor::Ratio { .. } => "ratio",
            Extractor::LookupMap { .. } => "lookup_map",
            Extractor::Conditional { .. } => "conditional",
        }
    }
}

/// A transformation from existing columns to one (or, for dummies, several) new columns.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformExpr {
    Col(String),
    Unary {
        op: UnaryOp,
        col: String,
    },
    Binary {
        op: BinaryOp,
        lhs: Operand,
        rhs: Operand,
    },
    GroupbyAgg {
        group_cols: Vec<String>,
        agg_col: String,
        func: AggFn,
    },
    Extractor(Extractor),
}

impl TransformExpr {
    /// Every column name the expression reads, in first-mention order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        fn push<'a>(c: &'a str, out: &mut Vec<&'a str>) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        match self {
            TransformExpr::Col(c) | TransformExpr::Unary { col: c, .. } => push(c, &mut out),
            TransformExpr::Binary { lhs, rhs, .. } => {
                for c in [lhs.column(), rhs.column()].into_iter().flatten() {
                    push(c, &mut out);
                }
            }
            TransformExpr::GroupbyAgg { group_cols, agg_col, .. } => {
                for c in group_cols {
                    push(c, &mut out);
                }
                push(agg_col, &mut out);
            }
            TransformExpr::Extractor(ex) => match ex {
                Extractor::WeightedSum { weights } => {
                    for c in weights.keys() {
                        push(c, &mut out);
                    }
                }
                Extractor::Ratio { numerator, denominator } => {
                    push(numerator, &mut out);
                    push(denominator, &mut out);
                }
                Extractor::LookupMap { key_col, .. } => push(key_col, &mut out),
                Extractor::Conditional { col, .. } => push(col, &mut out),
            },
        }
        out
    }

    /// Operator family this node belongs to.
    pub fn operator_kind(&self) -> OperatorKind {
        match self {
            TransformExpr::Col(_) | TransformExpr::Unary { .. } => OperatorKind::Unary,
            TransformExpr::Binary { .. } => OperatorKind::Binary,
            TransformExpr::GroupbyAgg { .. } => OperatorKind::HighOrder,
            TransformExpr::Extractor(_) => OperatorKind::Extractor,
        }
    }

    pub fn is_multi_output(&self) -> bool {
        matches!(
            self,
            TransformExpr::Unary {
                op: UnaryOp::GetDummies,
                ..
            }
        )
    }
}
