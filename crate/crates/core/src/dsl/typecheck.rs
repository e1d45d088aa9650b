use super::ast::*;
use super::DslError;
use crate::table::{DType, Schema};

/// Output type of an expression. `multi` marks dummy expansion: one Boolean
/// column per distinct value, known only at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeSig {
    pub dtype: DType,
    pub multi: bool,
}

impl TypeSig {
    fn single(dtype: DType) -> Self {
        Self { dtype, multi: false }
    }
}

fn lookup(schema: &Schema, col: &str) -> Result<DType, DslError> {
    schema
        .dtype_of(col)
        .ok_or_else(|| DslError::UnknownColumn(col.to_string()))
}

fn expect(schema: &Schema, col: &str, expected: &'static str, ok: impl Fn(DType) -> bool) -> Result<DType, DslError> {
    let found = lookup(schema, col)?;
    if ok(found) {
        Ok(found)
    } else {
        Err(DslError::TypeMismatch {
            column: col.to_string(),
            expected,
            found,
        })
    }
}

fn numeric(schema: &Schema, col: &str) -> Result<DType, DslError> {
    expect(schema, col, "numeric", DType::is_numeric_like)
}

pub fn typecheck(expr: &TransformExpr, schema: &Schema) -> Result<TypeSig, DslError> {
    match expr {
        TransformExpr::Col(c) => lookup(schema, c).map(TypeSig::single),
        TransformExpr::Unary { op, col } => match op {
            UnaryOp::MinMax | UnaryOp::ZScore | UnaryOp::Log1p | UnaryOp::Abs => {
                numeric(schema, col)?;
                Ok(TypeSig::single(DType::Numeric))
            }
            UnaryOp::Bucketize { labels, .. } => {
                numeric(schema, col)?;
                Ok(TypeSig::single(if labels.is_some() {
                    DType::Categorical
                } else {
                    DType::Numeric
                }))
            }
            UnaryOp::DatePart(_) => {
                expect(schema, col, "datetime", |d| d == DType::DateTime)?;
                Ok(TypeSig::single(DType::Numeric))
            }
            UnaryOp::TextSplit { .. } => {
                expect(schema, col, "categorical or text", |d| {
                    matches!(d, DType::Categorical | DType::Text)
                })?;
                Ok(TypeSig::single(DType::Categorical))
            }
            UnaryOp::GetDummies => {
                expect(schema, col, "categorical or boolean", |d| {
                    matches!(d, DType::Categorical | DType::Boolean)
                })?;
                Ok(TypeSig {
                    dtype: DType::Boolean,
                    multi: true,
                })
            }
        },
        TransformExpr::Binary { lhs, rhs, .. } => {
            for c in [lhs.column(), rhs.column()].into_iter().flatten() {
                numeric(schema, c)?;
            }
            Ok(TypeSig::single(DType::Numeric))
        }
        TransformExpr::GroupbyAgg {
            group_cols,
            agg_col,
            func,
        } => {
            for g in group_cols {
                expect(schema, g, "categorical or boolean", |d| {
                    matches!(d, DType::Categorical | DType::Boolean)
                })?;
            }
            if *func == AggFn::Count {
                lookup(schema, agg_col)?;
            } else {
                numeric(schema, agg_col)?;
            }
            Ok(TypeSig::single(DType::Numeric))
        }
        TransformExpr::Extractor(ex) => {
            match ex {
                Extractor::WeightedSum { weights } => {
                    for c in weights.keys() {
                        numeric(schema, c)?;
                    }
                }
                Extractor::Ratio { numerator, denominator } => {
                    numeric(schema, numerator)?;
                    numeric(schema, denominator)?;
                }
                Extractor::LookupMap { key_col, .. } => {
                    lookup(schema, key_col)?;
                }
                Extractor::Conditional { col, value, .. } => match value {
                    Scalar::Num(_) => {
                        numeric(schema, col)?;
                    }
                    Scalar::Str(_) => {
                        expect(schema, col, "categorical, text or boolean", |d| {
                            matches!(d, DType::Categorical | DType::Text | DType::Boolean)
                        })?;
                    }
                },
            }
            Ok(TypeSig::single(DType::Numeric))
        }
    }
}
