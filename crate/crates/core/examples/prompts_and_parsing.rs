//! Render the operator-selector and function-generator prompts for the
//! insurance agenda, and parse typical model answers.
//!
//!     cargo run --example prompts_and_parsing

use featforge::demo;
use featforge::dsl::OperatorKind;
use featforge::llm::{
    parse_function_output, parse_sampled_candidate, parse_unary_proposals, render_function_prompt, render_prompt,
    PromptContext,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let agenda = demo::insurance_agenda();
    let unary = render_prompt(&PromptContext {
        agenda: &agenda,
        kind: OperatorKind::Unary,
        focus: Some("Age"),
        reference_year: Some(2023),
    })?;
    println!("--- unary proposal prompt ---\n{unary}");

    let answer = "1. Bucketization (certain): age groups\n2. **Normalization** (low): scaled age\n3. Fourier (high): nonsense";
    let set = parse_unary_proposals(answer, "Age")?;
    for p in &set.proposals {
        println!("proposal {:?} at {}", p.op, p.confidence.as_str());
    }
    println!("{} answer line(s) named an operator outside the vocabulary\n", set.warnings);

    let sampled = r#"Sure! {"groupby_col": ["City"], "agg_col": "Claim in last 6 month", "function": "mean"}"#;
    let candidate = parse_sampled_candidate(sampled, OperatorKind::HighOrder, &agenda)?;
    println!("high-order candidate {} = {}", candidate.name, candidate.description);

    let binary = parse_sampled_candidate(r#"{op: "-", lhs: 2023, rhs: "Age of car"}"#, OperatorKind::Binary, &agenda)?;
    println!("--- function prompt ---\n{}", render_function_prompt(&agenda, &binary, Some(2023)));

    for reply in [
        "FUNCTION\n```json\n{\"kind\": \"sub\", \"lhs\": 2023, \"rhs\": \"Age of car\"}\n```",
        "ROW_COMPLETION: needs population figures",
        "SOURCE: census population tables by city",
        "I think you should subtract.",
    ] {
        match parse_function_output(reply) {
            Ok(outcome) => println!("{outcome:?}"),
            Err(e) => println!("error [{}]: {e}", e.category()),
        }
    }
    Ok(())
}
