//! Ten-fold cross-validated AUC of logistic regression, Gaussian naive Bayes
//! and kNN on the diabetes-shaped fixture, before and after adding a few
//! hand-written features.
//!
//!     cargo run --example evaluate_models

use featforge::dsl::parse_plan;
use featforge::eval::{evaluate_suite, ModelKind};
use featforge::table::{load_csv, CsvOptions};

const PLAN: &str = r#"[
  {name: Glucose_x_BMI, expr: {kind: mul, lhs: Glucose, rhs: BMI}},
  {name: Age_group, expr: {kind: bucketize, col: Age, boundaries: [21, 30, 40, 50, 81],
                          labels: ["21-29", "30-39", "40-49", "50+"]}},
  {name: GroupBy_Age_group_mean_Glucose,
   expr: {kind: groupby_agg, group_cols: [Age_group], agg_col: Glucose, function: mean}},
]"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/diabetes.csv");
    let table = load_csv(path, None, &CsvOptions::default())?.with_target("Outcome")?;
    let models = ModelKind::default_suite();

    let before = evaluate_suite(&table, &models, 10, 7)?;
    println!("original features\n{}", before.to_text());

    let enriched = parse_plan(PLAN)?.apply(&table)?;
    let after = evaluate_suite(&enriched, &models, 10, 7)?;
    println!("with derived features\n{}", after.to_text());
    Ok(())
}
