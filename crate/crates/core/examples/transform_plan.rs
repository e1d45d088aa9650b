//! Parse a plan written by hand, type-check it against the insurance table,
//! apply it and print the enriched table and the canonical plan document.
//!
//!     cargo run --example transform_plan

use featforge::demo;
use featforge::dsl::{parse_plan, plan_to_string};
use featforge::table::write_csv_string;

const PLAN: &str = r#"{
  features: [
    {name: Bucketize_Age, description: "age group",
     expr: {unary: bucketize, col: Age, boundaries: [0, 21, 40, 60, 120]}},
    {name: Sub_2023_Age_of_car, description: "manufacturing year",
     expr: {kind: sub, lhs: 2023, rhs: "Age of car"}},
    {name: GroupBy_City_mean_Claim_in_last_6_month, description: "claim rate per city",
     expr: {kind: groupby_agg, group_cols: [City], agg_col: "Claim in last 6 month", function: mean}},
    {name: GetDummies_City, description: "one column per city", expr: {kind: get_dummies, col: City}},
  ],
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = demo::insurance_table().with_target("Safe")?;
    let plan = parse_plan(PLAN)?;
    let out_schema = plan.typecheck(&table.schema())?;
    println!("plan has {} nodes and yields {} columns", plan.len(), out_schema.len());

    let enriched = plan.apply(&table)?;
    print!("{}", write_csv_string(&enriched));

    println!("\ncanonical plan document:\n{}", plan_to_string(&plan));
    let reparsed = parse_plan(&plan_to_string(&plan))?;
    assert_eq!(reparsed, plan);

    // a plan that reads a column the data lacks fails with the column named
    let broken = parse_plan(r#"{name: x, expr: {kind: log1p, col: Income}}"#)?;
    if let Err(e) = broken.apply(&table) {
        println!("expected failure: {e}");
    }
    Ok(())
}
