//! Generate features for the diabetes-shaped fixture with a live
//! chat-completion endpoint. Needs FEATFORGE_API_KEY; FEATFORGE_API_BASE and
//! FEATFORGE_MODEL are optional. Row completions are skipped.
//!
//!     FEATFORGE_API_KEY=... cargo run --example live_generate [-- cassette.json]

use featforge::agenda::DataAgenda;
use featforge::llm::{ProviderConfig, ProviderMode, ENV_API_KEY};
use featforge::pipeline::{generate, Budgets, NoCompletions, PipelineConfig};
use featforge::table::{load_csv, write_csv_string, CsvOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::var(ENV_API_KEY).is_err() {
        eprintln!("{ENV_API_KEY} is not set; nothing to do");
        return Ok(());
    }
    let _ = env_logger::try_init();
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let table = load_csv(format!("{dir}/diabetes.csv"), None, &CsvOptions::default())?;
    let agenda = DataAgenda::load(format!("{dir}/diabetes.yaml"))?;

    let mut provider = ProviderConfig::default().with_env();
    match std::env::args().nth(1) {
        Some(path) => {
            provider.mode = ProviderMode::Record;
            provider.cassette = Some(path.into());
        }
        None => provider.mode = ProviderMode::Live,
    }
    let provider = provider.build()?;
    let config = PipelineConfig {
        budget: Budgets::uniform(3),
        ..Default::default()
    };
    let out = generate(&table, &agenda, &config, provider.as_ref(), &NoCompletions)?;
    provider.finish()?;
    println!("{}", out.report.to_json());
    print!("{}", write_csv_string(&out.table.take_rows(&[0, 1, 2, 3, 4])));
    Ok(())
}
