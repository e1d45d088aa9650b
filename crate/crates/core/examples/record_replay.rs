//! Record pipeline runs against the scripted insurance model into one
//! cassette, then replay it and check the plans are identical. Two runs are
//! recorded, with row completions approved and disabled, so the cassette
//! serves `generate --yes` and `generate --no-completions` alike.
//!
//!     cargo run --example record_replay [-- cassette.json]

use featforge::demo;
use featforge::dsl::plan_to_string;
use featforge::llm::{Cassette, Models, Recorder, ReplayProvider};
use featforge::pipeline::{generate, Approval, AutoApprove, NoCompletions, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("featforge_insurance_cassette.json"));
    let (table, agenda, config) = (demo::insurance_table(), demo::insurance_agenda(), PipelineConfig::default());
    let models = Models::same("gpt-4");
    let approvals: [(&str, &dyn Approval); 2] = [("approved", &AutoApprove), ("no completions", &NoCompletions)];

    let mut cassette = Cassette::default();
    let mut plans = Vec::new();
    for (_, approval) in approvals {
        let recorder = Recorder::new(demo::insurance_provider(), models.clone());
        let live = generate(&table, &agenda, &config, &recorder, approval)?;
        cassette.merge(&recorder.cassette())?;
        plans.push(plan_to_string(&live.plan));
    }
    cassette.save(&path)?;
    println!("recorded {} exchanges to {}", cassette.entries.len(), path.display());

    for ((label, approval), plan) in approvals.into_iter().zip(plans) {
        let replay = ReplayProvider::new(Cassette::load(&path)?, models.clone());
        let again = generate(&table, &agenda, &config, &replay, approval)?;
        assert_eq!(plan, plan_to_string(&again.plan));
        println!("{label}: replayed plan matches: {}", again.report.accepted_names().join(", "));
    }
    Ok(())
}
