//! Canonical form of expressions, used to detect duplicate candidates.

use super::ast::*;
use super::doc::expr_to_value;

/// Orders operands of commutative binary ops and group-by keys so that
/// semantically equal expressions compare equal.
pub fn canonicalize(expr: &TransformExpr) -> TransformExpr {
    match expr {
        TransformExpr::Binary { op, lhs, rhs } if op.is_commutative() && lhs.sort_key() > rhs.sort_key() => {
            TransformExpr::Binary {
                op: *op,
                lhs: rhs.clone(),
                rhs: lhs.clone(),
            }
        }
        TransformExpr::GroupbyAgg {
            group_cols,
            agg_col,
            func,
        } => {
            let mut group_cols = group_cols.clone();
            group_cols.sort();
            TransformExpr::GroupbyAgg {
                group_cols,
                agg_col: agg_col.clone(),
                func: *func,
            }
        }
        other => other.clone(),
    }
}

/// Stable string key of the canonical form.
pub fn canonical_key(expr: &TransformExpr) -> String {
    expr_to_value(&canonicalize(expr)).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::doc::{parse_plan, plan_to_string};
    use crate::dsl::eval::{apply_groupby, apply_unary, bucket_index};
    use crate::dsl::plan::{PlanNode, TransformPlan};
    use crate::table::{Column, ColumnMeta, DType, Table};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn commutative_operands_collapse() {
        let a = TransformExpr::Binary {
            op: BinaryOp::Add,
            lhs: Operand::Col("b".into()),
            rhs: Operand::Col("a".into()),
        };
        let b = TransformExpr::Binary {
            op: BinaryOp::Add,
            lhs: Operand::Col("a".into()),
            rhs: Operand::Col("b".into()),
        };
        assert_eq!(canonical_key(&a), canonical_key(&b));
        let s1 = TransformExpr::Binary {
            op: BinaryOp::Sub,
            lhs: Operand::Col("a".into()),
            rhs: Operand::Col("b".into()),
        };
        let s2 = TransformExpr::Binary {
            op: BinaryOp::Sub,
            lhs: Operand::Col("b".into()),
            rhs: Operand::Col("a".into()),
        };
        assert_ne!(canonical_key(&s1), canonical_key(&s2));
    }

    const COLS: [&str; 4] = ["a", "b", "c", "d"];

    fn col() -> impl Strategy<Value = String> {
        prop::sample::select(&COLS[..]).prop_map(str::to_string)
    }

    fn lit() -> impl Strategy<Value = f64> {
        (-1000i32..1000).prop_map(|x| x as f64 / 4.0)
    }

    fn boundaries() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::btree_set(-50i32..50, 2..6).prop_map(|s| s.into_iter().map(f64::from).collect())
    }

    fn unary_op() -> impl Strategy<Value = UnaryOp> {
        prop_oneof![
            Just(UnaryOp::MinMax),
            Just(UnaryOp::ZScore),
            Just(UnaryOp::Log1p),
            Just(UnaryOp::Abs),
            Just(UnaryOp::GetDummies),
            Just(UnaryOp::DatePart(DatePart::Weekday)),
            (boundaries(), any::<bool>()).prop_map(|(b, l)| {
                let labels = l.then(|| (1..b.len()).map(|i| format!("b{i}")).collect());
                UnaryOp::Bucketize { boundaries: b, labels }
            }),
            ("[,;|]", 0usize..3).prop_map(|(d, i)| UnaryOp::TextSplit {
                delimiter: d,
                index: i
            }),
        ]
    }

    fn operand() -> impl Strategy<Value = Operand> {
        prop_oneof![col().prop_map(Operand::Col), lit().prop_map(Operand::Lit)]
    }

    fn expr() -> impl Strategy<Value = TransformExpr> {
        let binop = prop::sample::select(vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]);
        let agg = prop::sample::select(AggFn::ALL.to_vec());
        let cmp = prop::sample::select(vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne]);
        prop_oneof![
            col().prop_map(TransformExpr::Col),
            (unary_op(), col()).prop_map(|(op, col)| TransformExpr::Unary { op, col }),
            (binop, col().prop_map(Operand::Col), operand()).prop_map(|(op, lhs, rhs)| TransformExpr::Binary {
                op,
                lhs,
                rhs
            }),
            (prop::sample::subsequence(COLS.to_vec(), 1..3), col(), agg).prop_map(|(g, a, f)| {
                TransformExpr::GroupbyAgg {
                    group_cols: g.into_iter().map(str::to_string).collect(),
                    agg_col: a,
                    func: f,
                }
            }),
            prop::collection::btree_map(col(), lit(), 2..4)
                .prop_map(|weights| TransformExpr::Extractor(Extractor::WeightedSum { weights })),
            (col(), col()).prop_map(|(n, d)| TransformExpr::Extractor(Extractor::Ratio {
                numerator: n,
                denominator: d
            })),
            (col(), prop::collection::btree_map("[a-z]{1,3}", lit(), 0..3), prop::option::of(lit())).prop_map(
                |(k, map, default)| TransformExpr::Extractor(Extractor::LookupMap {
                    key_col: k,
                    map,
                    default
                })
            ),
            (col(), cmp, lit(), lit(), lit()).prop_map(|(c, op, v, t, o)| TransformExpr::Extractor(
                Extractor::Conditional {
                    col: c,
                    op,
                    value: Scalar::Num(v),
                    then: t,
                    otherwise: o
                }
            )),
        ]
    }

    fn values() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::of(-1e6f64..1e6), 1..40)
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(e in expr()) {
            let once = canonicalize(&e);
            prop_assert_eq!(canonicalize(&once), once.clone());
            prop_assert_eq!(canonical_key(&e), canonical_key(&once));
        }

        #[test]
        fn plan_text_round_trips(exprs in prop::collection::vec(expr(), 1..6)) {
            let nodes = exprs
                .into_iter()
                .enumerate()
                .map(|(i, e)| PlanNode {
                    name: format!("f{i}"),
                    description: format!("feature {i}"),
                    relevant_columns: e.columns().into_iter().map(str::to_string).collect(),
                    operator_kind: e.operator_kind(),
                    expr: e,
                })
                .collect();
            let plan = TransformPlan::from_nodes(nodes, vec!["a".into()]).unwrap();
            let text = plan_to_string(&plan);
            let back = parse_plan(&text).unwrap();
            prop_assert_eq!(&back, &plan);
            prop_assert_eq!(plan_to_string(&back), text);
        }

        #[test]
        fn minmax_in_unit_interval(v in values()) {
            let Column::Numeric(out) = apply_unary(&UnaryOp::MinMax, &Column::Numeric(v.clone())) else {
                unreachable!()
            };
            for (x, y) in v.iter().zip(&out) {
                prop_assert_eq!(x.is_some(), y.is_some());
                if let Some(y) = y {
                    prop_assert!((0.0..=1.0).contains(y));
                }
            }
        }

        #[test]
        fn zscore_has_zero_mean(v in values()) {
            let Column::Numeric(out) = apply_unary(&UnaryOp::ZScore, &Column::Numeric(v)) else {
                unreachable!()
            };
            let present: Vec<f64> = out.into_iter().flatten().collect();
            if !present.is_empty() {
                let mean = present.iter().sum::<f64>() / present.len() as f64;
                prop_assert!(mean.abs() < 1e-6);
            }
        }

        #[test]
        fn minmax_and_bucketize_are_monotone(v in values(), b in boundaries()) {
            let mm = apply_unary(&UnaryOp::MinMax, &Column::Numeric(v.clone())).to_f64();
            let present: Vec<(f64, f64)> = v.iter().zip(&mm).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
            for p in &present {
                for q in &present {
                    if p.0 <= q.0 {
                        prop_assert!(p.1 <= q.1);
                        prop_assert!(bucket_index(&b, p.0) <= bucket_index(&b, q.0));
                    }
                }
            }
        }

        #[test]
        fn groupby_matches_naive_oracle(
            rows in prop::collection::vec((prop::option::of(0u8..4), prop::option::of(-100i32..100)), 1..30),
            func in prop::sample::select(AggFn::ALL.to_vec()),
        ) {
            let g: Vec<Option<String>> = rows.iter().map(|(k, _)| k.map(|k| format!("g{k}"))).collect();
            let x: Vec<Option<f64>> = rows.iter().map(|(_, v)| v.map(f64::from)).collect();
            let table = Table::new(vec![
                (ColumnMeta::new("g", DType::Categorical), Column::Categorical(g.clone())),
                (ColumnMeta::new("x", DType::Numeric), Column::Numeric(x.clone())),
            ])
            .unwrap();
            let got = apply_groupby(&["g".into()], "x", func, &table).unwrap().to_f64();

            // Oracle: quadratic scan per row with its own arithmetic.
            for i in 0..rows.len() {
                let members: Vec<f64> = (0..rows.len()).filter(|&j| g[j] == g[i]).filter_map(|j| x[j]).collect();
                let n = members.len() as f64;
                let want = match func {
                    AggFn::Count => Some(n),
                    _ if members.is_empty() => None,
                    AggFn::Sum => Some(members.iter().sum()),
                    AggFn::Mean => Some(members.iter().sum::<f64>() / n),
                    AggFn::Max => members.iter().copied().reduce(f64::max),
                    AggFn::Min => members.iter().copied().reduce(f64::min),
                    AggFn::Std => {
                        let m = members.iter().sum::<f64>() / n;
                        Some((members.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
                    }
                };
                match (got[i], want) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs())),
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn weights_are_key_ordered() {
        let w: BTreeMap<String, f64> = [("b".to_string(), 1.0), ("a".to_string(), 2.0)].into();
        let e = TransformExpr::Extractor(Extractor::WeightedSum { weights: w });
        assert!(canonical_key(&e).find("\"a\"").unwrap() < canonical_key(&e).find("\"b\"").unwrap());
    }
}
