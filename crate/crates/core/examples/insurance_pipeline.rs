//! The full generation loop on the six-row insurance table with the scripted
//! model: unary proposals, sampled binary / high-order / extractor
//! candidates, the drop heuristic and feature selection.
//!
//!     cargo run --example insurance_pipeline [-- --deny]

use featforge::demo;
use featforge::dsl::plan_to_string;
use featforge::pipeline::{generate, Approval, AutoApprove, AutoDeny, PipelineConfig};
use featforge::table::write_csv_string;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let deny = std::env::args().any(|a| a == "--deny");
    let approval: &dyn Approval = if deny { &AutoDeny } else { &AutoApprove };
    let provider = demo::insurance_provider();
    let out = generate(
        &demo::insurance_table(),
        &demo::insurance_agenda(),
        &PipelineConfig::default(),
        &provider,
        approval,
    )?;
    let r = &out.report;
    println!("accepted:");
    for a in &r.accepted {
        println!("  {:<42} {:<10} {}", a.name, a.kind.as_str(), a.description);
    }
    println!("rejected: {}", r.rejected.len());
    for rej in r.rejected.iter().filter(|x| x.category != "duplicate") {
        println!("  {} [{}] {}", rej.name, rej.category, rej.reason);
    }
    for d in &r.row_completions {
        println!("row completion {}: approved={} ({} calls) {}", d.feature, d.approved, d.estimated_calls, d.note);
    }
    println!("dropped originals: {:?}", r.dropped_originals);
    println!("model calls: {}\n", r.fm_calls);
    print!("{}", write_csv_string(&out.table));
    println!("\n{}", plan_to_string(&out.plan));
    Ok(())
}
