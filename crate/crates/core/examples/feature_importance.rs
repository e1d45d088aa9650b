//! Rank features by mutual information with the target and report the share
//! of derived features among the top k.
//!
//!     cargo run --example feature_importance [-- k]

use featforge::dsl::parse_plan;
use featforge::eval::feature_importance;
use featforge::table::{load_csv, CsvOptions};

const PLAN: &str = r#"[
  {name: Glucose_x_BMI, expr: {kind: mul, lhs: Glucose, rhs: BMI}},
  {name: ZScore_Insulin, expr: {kind: zscore, col: Insulin}},
  {name: High_glucose, expr: {kind: conditional, col: Glucose, op: ">=", value: 140, then: 1, else: 0}},
]"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/diabetes.csv");
    let table = load_csv(path, None, &CsvOptions::default())?.with_target("Outcome")?;
    let plan = parse_plan(PLAN)?;
    let enriched = plan.apply(&table)?;
    print!("{}", feature_importance(&enriched, &plan, k)?.to_text());
    Ok(())
}
