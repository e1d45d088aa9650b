//! Expression evaluation. Undefined cells (null input, division by zero,
//! log of values <= -1, non-finite results) become nulls; evaluation never
//! fails on data.

use std::collections::{HashMap, HashSet};

use chrono::Datelike;

use super::ast::*;
use super::typecheck::typecheck;
use super::DslError;
use crate::table::{Column, ColumnMeta, DType, Table};

/// Column name for an evaluated output; dummy outputs get `={value}`.
pub fn output_name(feature: &str, suffix: &str) -> String {
    if suffix.is_empty() {
        feature.to_string()
    } else {
        format!("{feature}={suffix}")
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn column<'t>(table: &'t Table, name: &str) -> Result<&'t Column, DslError> {
    table
        .column(name)
        .ok_or_else(|| DslError::UnknownColumn(name.to_string()))
}

/// Evaluates `expr` over `table`. Returns `(suffix, column)` pairs: one pair
/// with an empty suffix, or one per distinct value for dummy expansion.
pub fn evaluate(expr: &TransformExpr, table: &Table) -> Result<Vec<(String, Column)>, DslError> {
    typecheck(expr, &table.schema())?;
    let single = |c: Column| Ok(vec![(String::new(), c)]);
    match expr {
        TransformExpr::Col(c) => single(column(table, c)?.clone()),
        TransformExpr::Unary {
            op: UnaryOp::GetDummies,
            col,
        } => {
            let meta = table.meta(col).expect("typechecked");
            Ok(apply_onehot(column(table, col)?, meta))
        }
        TransformExpr::Unary { op, col } => single(apply_unary(op, column(table, col)?)),
        TransformExpr::Binary { op, lhs, rhs } => {
            let n = table.n_rows();
            let side = |o: &Operand| -> Result<Vec<Option<f64>>, DslError> {
                Ok(match o {
                    Operand::Lit(x) => vec![Some(*x); n],
                    Operand::Col(c) => column(table, c)?.to_f64(),
                })
            };
            let (a, b) = (side(lhs)?, side(rhs)?);
            single(Column::Numeric(
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => apply_binary(*op, *x, *y),
                        _ => None,
                    })
                    .collect(),
            ))
        }
        TransformExpr::GroupbyAgg {
            group_cols,
            agg_col,
            func,
        } => single(apply_groupby(group_cols, agg_col, *func, table)?),
        TransformExpr::Extractor(ex) => single(apply_extractor(ex, table)?),
    }
}

pub fn apply_binary(op: BinaryOp, x: f64, y: f64) -> Option<f64> {
    match op {
        BinaryOp::Add => finite(x + y),
        BinaryOp::Sub => finite(x - y),
        BinaryOp::Mul => finite(x * y),
        BinaryOp::Div => {
            if y == 0.0 {
                None
            } else {
                finite(x / y)
            }
        }
    }
}

fn mean_std(values: &[Option<f64>]) -> Option<(f64, f64)> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Bucket index of `x`: intervals are left-closed/right-open except the last,
/// which is closed; values outside the boundaries clamp to the edge buckets.
pub fn bucket_index(boundaries: &[f64], x: f64) -> usize {
    let interior = &boundaries[1..boundaries.len() - 1];
    interior.partition_point(|b| *b <= x)
}

/// Single-output unary transforms. Dummy expansion goes through [`apply_onehot`].
pub fn apply_unary(op: &UnaryOp, col: &Column) -> Column {
    match op {
        UnaryOp::MinMax => {
            let v = col.to_f64();
            let present = v.iter().flatten().copied();
            let lo = present.clone().fold(f64::INFINITY, f64::min);
            let hi = present.fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            Column::Numeric(
                v.iter()
                    .map(|x| {
                        x.map(|x| {
                            if range > 0.0 {
                                ((x - lo) / range).clamp(0.0, 1.0)
                            } else {
                                0.0
                            }
                        })
                    })
                    .collect(),
            )
        }
        UnaryOp::ZScore => {
            let v = col.to_f64();
            let stats = mean_std(&v);
            Column::Numeric(
                v.iter()
                    .map(|x| {
                        let (mean, std) = stats?;
                        x.map(|x| if std > 0.0 { (x - mean) / std } else { 0.0 })
                    })
                    .collect(),
            )
        }
        UnaryOp::Log1p => Column::Numeric(
            col.to_f64()
                .iter()
                .map(|x| x.filter(|&x| x > -1.0).and_then(|x| finite(x.ln_1p())))
                .collect(),
        ),
        UnaryOp::Abs => Column::Numeric(col.to_f64().iter().map(|x| x.map(f64::abs)).collect()),
        UnaryOp::Bucketize { boundaries, labels } => {
            let idx: Vec<Option<usize>> = col
                .to_f64()
                .iter()
                .map(|x| x.map(|x| bucket_index(boundaries, x)))
                .collect();
            match labels {
                None => Column::Numeric(idx.iter().map(|i| i.map(|i| i as f64)).collect()),
                Some(labels) => {
                    Column::Categorical(idx.iter().map(|i| i.map(|i| labels[i].clone())).collect())
                }
            }
        }
        UnaryOp::DatePart(part) => match col {
            Column::DateTime(v) => Column::Numeric(
                v.iter()
                    .map(|d| {
                        d.map(|d| match part {
                            DatePart::Year => d.year() as f64,
                            DatePart::Month => d.month() as f64,
                            DatePart::Day => d.day() as f64,
                            DatePart::Weekday => d.weekday().num_days_from_monday() as f64,
                        })
                    })
                    .collect(),
            ),
            other => Column::all_null(DType::Numeric, other.len()),
        },
        UnaryOp::TextSplit { delimiter, index } => Column::Categorical(
            col.keys()
                .into_iter()
                .map(|k| {
                    let part = k?.split(delimiter.as_str()).nth(*index)?.trim().to_string();
                    (!part.is_empty()).then_some(part)
                })
                .collect(),
        ),
        UnaryOp::GetDummies => {
            // Single-column callers get the first dummy; multi-output goes through apply_onehot.
            let meta = ColumnMeta::new("", col.dtype());
            apply_onehot(col, &meta)
                .into_iter()
                .next()
                .map(|(_, c)| c)
                .unwrap_or_else(|| Column::Boolean(vec![Some(false); col.len()]))
        }
    }
}

/// One Boolean column per distinct non-null value, in first-appearance order.
/// Null rows are all-zero.
pub fn apply_onehot(col: &Column, _meta: &ColumnMeta) -> Vec<(String, Column)> {
    let keys = col.keys();
    let mut seen = HashSet::new();
    let values: Vec<String> = keys
        .iter()
        .flatten()
        .filter(|k| seen.insert((*k).clone()))
        .cloned()
        .collect();
    values
        .into_iter()
        .map(|v| {
            let cells = keys.iter().map(|k| Some(k.as_deref() == Some(v.as_str()))).collect();
            (v, Column::Boolean(cells))
        })
        .collect()
}

/// Aggregate of the non-null values in `values`. `Count` counts them; the
/// rest are null when nothing is left.
pub fn aggregate(func: AggFn, values: &[f64]) -> Option<f64> {
    if func == AggFn::Count {
        return Some(values.len() as f64);
    }
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let out = match func {
        AggFn::Sum => values.iter().sum(),
        AggFn::Mean => values.iter().sum::<f64>() / n,
        AggFn::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        AggFn::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        AggFn::Std => {
            let mean = values.iter().sum::<f64>() / n;
            (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
        }
        AggFn::Count => unreachable!(),
    };
    finite(out)
}

/// Broadcast group-by: each row receives the aggregate of its group. A null
/// group value is a key of its own.
pub fn apply_groupby(group_cols: &[String], agg_col: &str, func: AggFn, table: &Table) -> Result<Column, DslError> {
    let keys: Vec<Vec<Option<String>>> = group_cols
        .iter()
        .map(|g| column(table, g).map(Column::keys))
        .collect::<Result<_, _>>()?;
    let agg = column(table, agg_col)?;
    // Count accepts any dtype: it only looks at nullness.
    let values: Vec<Option<f64>> = if func == AggFn::Count {
        (0..agg.len()).map(|i| (!agg.is_null(i)).then_some(1.0)).collect()
    } else {
        agg.to_f64()
    };

    let n = table.n_rows();
    let mut group_of = Vec::with_capacity(n);
    let mut index: HashMap<Vec<Option<&str>>, usize> = HashMap::new();
    let mut members: Vec<Vec<f64>> = Vec::new();
    for row in 0..n {
        let key: Vec<Option<&str>> = keys.iter().map(|k| k[row].as_deref()).collect();
        let g = *index.entry(key).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        if let Some(x) = values[row] {
            members[g].push(x);
        }
        group_of.push(g);
    }
    let results: Vec<Option<f64>> = members.iter().map(|m| aggregate(func, m)).collect();
    Ok(Column::Numeric(group_of.iter().map(|&g| results[g]).collect()))
}

pub fn apply_extractor(ex: &Extractor, table: &Table) -> Result<Column, DslError> {
    let n = table.n_rows();
    let out: Vec<Option<f64>> = match ex {
        Extractor::WeightedSum { weights } => {
            let cols: Vec<(f64, Vec<Option<f64>>)> = weights
                .iter()
                .map(|(c, w)| column(table, c).map(|col| (*w, col.to_f64())))
                .collect::<Result<_, _>>()?;
            (0..n)
                .map(|row| {
                    let mut acc = 0.0;
                    for (w, v) in &cols {
                        acc += w * v[row]?;
                    }
                    finite(acc)
                })
                .collect()
        }
        Extractor::Ratio { numerator, denominator } => {
            let a = column(table, numerator)?.to_f64();
            let b = column(table, denominator)?.to_f64();
            a.iter()
                .zip(&b)
                .map(|(x, y)| apply_binary(BinaryOp::Div, (*x)?, (*y)?))
                .collect()
        }
        Extractor::LookupMap { key_col, map, default } => column(table, key_col)?
            .keys()
            .into_iter()
            .map(|k| match k {
                Some(k) => map.get(&k).copied().or(*default),
                None => *default,
            })
            .collect(),
        Extractor::Conditional {
            col,
            op,
            value,
            then,
            otherwise,
        } => {
            let c = column(table, col)?;
            let pick = |holds: bool| Some(if holds { *then } else { *otherwise });
            match value {
                Scalar::Num(v) => c
                    .to_f64()
                    .iter()
                    .map(|x| x.and_then(|x| x.partial_cmp(v)).and_then(|o| pick(op.holds(o))))
                    .collect(),
                Scalar::Str(s) => c
                    .keys()
                    .into_iter()
                    .map(|k| k.and_then(|k| pick(op.holds(k.as_str().cmp(s.as_str())))))
                    .collect(),
            }
        }
    };
    Ok(Column::Numeric(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::fixtures::table1;
    use crate::table::ColumnMeta;

    fn num(v: &[f64]) -> Column {
        Column::Numeric(v.iter().map(|x| Some(*x)).collect())
    }

    fn eval1(e: &TransformExpr, t: &Table) -> Column {
        let mut out = evaluate(e, t).unwrap();
        assert_eq!(out.len(), 1);
        out.remove(0).1
    }

    #[test]
    fn groupby_city_mean_claim() {
        let e = TransformExpr::GroupbyAgg {
            group_cols: vec!["City".into()],
            agg_col: "Claim in last 6 month".into(),
            func: AggFn::Mean,
        };
        assert_eq!(eval1(&e, &table1()), num(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn manufacturing_year() {
        let e = TransformExpr::Binary {
            op: BinaryOp::Sub,
            lhs: Operand::Lit(2023.0),
            rhs: Operand::Col("Age of car".into()),
        };
        assert_eq!(eval1(&e, &table1()), num(&[2017.0, 2021.0, 2015.0, 2009.0, 2020.0, 2018.0]));
    }

    #[test]
    fn bucketize_ages() {
        let e = TransformExpr::Unary {
            op: UnaryOp::Bucketize {
                boundaries: vec![0.0, 21.0, 40.0, 60.0, 120.0],
                labels: None,
            },
            col: "Age".into(),
        };
        assert_eq!(eval1(&e, &table1()), num(&[1.0, 1.0, 2.0, 1.0, 2.0, 2.0]));
    }

    #[test]
    fn bucket_edges_clamp() {
        let b = [0.0, 21.0, 40.0];
        assert_eq!(bucket_index(&b, -5.0), 0);
        assert_eq!(bucket_index(&b, 0.0), 0);
        assert_eq!(bucket_index(&b, 20.999), 0);
        assert_eq!(bucket_index(&b, 21.0), 1);
        assert_eq!(bucket_index(&b, 40.0), 1);
        assert_eq!(bucket_index(&b, 1e9), 1);
    }

    #[test]
    fn division_by_zero_is_null() {
        let t = Table::new(vec![
            (ColumnMeta::new("a", DType::Numeric), num(&[1.0, 2.0])),
            (ColumnMeta::new("b", DType::Numeric), num(&[2.0, 0.0])),
        ])
        .unwrap();
        let e = TransformExpr::Binary {
            op: BinaryOp::Div,
            lhs: Operand::Col("a".into()),
            rhs: Operand::Col("b".into()),
        };
        assert_eq!(eval1(&e, &t), Column::Numeric(vec![Some(0.5), None]));
    }

    #[test]
    fn unary_examples() {
        assert_eq!(apply_unary(&UnaryOp::MinMax, &num(&[2.0, 4.0, 6.0])), num(&[0.0, 0.5, 1.0]));
        assert_eq!(apply_unary(&UnaryOp::MinMax, &num(&[3.0, 3.0])), num(&[0.0, 0.0]));
        assert_eq!(apply_unary(&UnaryOp::ZScore, &num(&[7.0, 7.0])), num(&[0.0, 0.0]));
        let Column::Numeric(z) = apply_unary(&UnaryOp::ZScore, &num(&[1.0, 2.0, 3.0])) else {
            unreachable!()
        };
        // population std of [1,2,3] is sqrt(2/3)
        let expected = [-1.224745, 0.0, 1.224745];
        for (got, want) in z.iter().zip(expected) {
            assert!((got.unwrap() - want).abs() < 1e-6);
        }
        assert_eq!(
            apply_unary(&UnaryOp::Log1p, &Column::Numeric(vec![Some(0.0), Some(-1.0), Some(-3.0), None])),
            Column::Numeric(vec![Some(0.0), None, None, None])
        );
        assert_eq!(
            apply_unary(&UnaryOp::Abs, &Column::Numeric(vec![Some(-2.0), None])),
            Column::Numeric(vec![Some(2.0), None])
        );
        assert_eq!(
            apply_unary(&UnaryOp::MinMax, &Column::Numeric(vec![Some(1.0), None, Some(3.0)])),
            Column::Numeric(vec![Some(0.0), None, Some(1.0)])
        );
    }

    #[test]
    fn text_split_and_date_part() {
        let make = apply_unary(
            &UnaryOp::TextSplit {
                delimiter: ",".into(),
                index: 1,
            },
            table1().column("Make, Model").unwrap(),
        );
        assert_eq!(make.get(0).unwrap().render(), "Civic");
        let missing = apply_unary(
            &UnaryOp::TextSplit {
                delimiter: ",".into(),
                index: 5,
            },
            table1().column("Make, Model").unwrap(),
        );
        assert_eq!(missing.null_count(), 6);

        let d = crate::table::parse_datetime("2024-03-15").unwrap();
        let col = Column::DateTime(vec![Some(d), None]);
        assert_eq!(
            apply_unary(&UnaryOp::DatePart(DatePart::Month), &col),
            Column::Numeric(vec![Some(3.0), None])
        );
        assert_eq!(
            apply_unary(&UnaryOp::DatePart(DatePart::Weekday), &col),
            Column::Numeric(vec![Some(4.0), None])
        );
    }

    #[test]
    fn onehot_sex() {
        let t = table1();
        let out = apply_onehot(t.column("Sex").unwrap(), t.meta("Sex").unwrap());
        let b = |v: &[u8]| Column::Boolean(v.iter().map(|x| Some(*x == 1)).collect());
        assert_eq!(
            out,
            vec![
                ("M".to_string(), b(&[1, 0, 1, 0, 1, 0])),
                ("F".to_string(), b(&[0, 1, 0, 1, 0, 1]))
            ]
        );
    }

    #[test]
    fn onehot_single_value_and_null_rows() {
        let c = Column::Categorical(vec![Some("a".into()), None, Some("a".into())]);
        let out = apply_onehot(&c, &ColumnMeta::new("c", DType::Categorical));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, Column::Boolean(vec![Some(true), Some(false), Some(true)]));
    }

    #[test]
    fn groupby_make_model_is_identity_on_claims() {
        let t = table1();
        let out = apply_groupby(
            &["Make, Model".to_string()],
            "Claim in last 6 month",
            AggFn::Mean,
            &t,
        )
        .unwrap();
        assert_eq!(out, num(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn groupby_count_of_all_null_group_is_zero() {
        let t = Table::new(vec![
            (
                ColumnMeta::new("g", DType::Categorical),
                Column::Categorical(vec![Some("a".into()), Some("a".into()), Some("b".into())]),
            ),
            (
                ColumnMeta::new("x", DType::Numeric),
                Column::Numeric(vec![None, None, Some(1.0)]),
            ),
        ])
        .unwrap();
        let count = apply_groupby(&["g".into()], "x", AggFn::Count, &t).unwrap();
        assert_eq!(count, num(&[0.0, 0.0, 1.0]));
        let mean = apply_groupby(&["g".into()], "x", AggFn::Mean, &t).unwrap();
        assert_eq!(mean, Column::Numeric(vec![None, None, Some(1.0)]));
    }

    #[test]
    fn extractor_examples() {
        let t = Table::new(vec![
            (ColumnMeta::new("a", DType::Numeric), num(&[2.0])),
            (ColumnMeta::new("b", DType::Numeric), num(&[4.0])),
        ])
        .unwrap();
        let ws = Extractor::WeightedSum {
            weights: [("a".to_string(), 0.5), ("b".to_string(), 0.5)].into(),
        };
        assert_eq!(apply_extractor(&ws, &t).unwrap(), num(&[3.0]));

        let t1 = table1();
        let lookup = Extractor::LookupMap {
            key_col: "City".into(),
            map: [("SF".to_string(), 10.0), ("LA".to_string(), 20.0)].into(),
            default: None,
        };
        assert_eq!(
            apply_extractor(&lookup, &t1).unwrap(),
            Column::Numeric(vec![Some(10.0), Some(20.0), None, Some(10.0), None, Some(20.0)])
        );

        let cond = Extractor::Conditional {
            col: "Age".into(),
            op: CmpOp::Ge,
            value: Scalar::Num(21.0),
            then: 1.0,
            otherwise: 0.0,
        };
        assert_eq!(apply_extractor(&cond, &t1).unwrap(), num(&[1.0; 6]));

        let is_sf = Extractor::Conditional {
            col: "City".into(),
            op: CmpOp::Eq,
            value: Scalar::Str("SF".into()),
            then: 1.0,
            otherwise: 0.0,
        };
        assert_eq!(apply_extractor(&is_sf, &t1).unwrap(), num(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));

        let ratio = Extractor::Ratio {
            numerator: "Age".into(),
            denominator: "Age of car".into(),
        };
        assert_eq!(apply_extractor(&ratio, &t1).unwrap().get(0).unwrap().as_f64(), Some(3.5));
    }

    #[test]
    fn evaluate_rejects_ill_typed() {
        let e = TransformExpr::Unary {
            op: UnaryOp::MinMax,
            col: "City".into(),
        };
        assert!(evaluate(&e, &table1()).is_err());
    }
}
