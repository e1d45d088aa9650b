#![allow(dead_code)]

use std::path::{Path, PathBuf};

use featforge::table::{Column, ColumnMeta, DType, Table};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Runs the CLI in-process and returns its exit code.
pub fn cli(args: &[&str]) -> i32 {
    let mut all = vec!["featforge"];
    all.extend_from_slice(args);
    featforge::cli::run(all)
}

/// Replays the shipped insurance cassette into `out`.
pub fn generate_insurance(out: &Path, approve: bool) -> i32 {
    let (data, agenda, cassette) = (fixture("table1.csv"), fixture("table1.yaml"), fixture("insurance_cassette.json"));
    cli(&[
        "generate",
        "--data",
        &s(&data),
        "--agenda",
        &s(&agenda),
        "--provider",
        "replay",
        "--cassette",
        &s(&cassette),
        if approve { "--yes" } else { "--no-completions" },
        "--out",
        &s(out),
    ])
}

/// Numeric columns c0..c{n_num}, categorical g0..g{n_cat} and a boolean
/// target `y`, values drawn from `rng`.
pub fn random_table(rng: &mut ChaCha8Rng, n_rows: usize, n_num: usize, n_cat: usize) -> Table {
    let mut cols = Vec::new();
    for j in 0..n_num {
        let v = (0..n_rows).map(|_| Some(rng.random_range(1..10) as f64)).collect();
        cols.push((ColumnMeta::new(format!("c{j}"), DType::Numeric), Column::Numeric(v)));
    }
    for j in 0..n_cat {
        let card = rng.random_range(2..5);
        let v = (0..n_rows).map(|_| Some(format!("v{}", rng.random_range(0..card)))).collect();
        cols.push((ColumnMeta::new(format!("g{j}"), DType::Categorical), Column::Categorical(v)));
    }
    let y = (0..n_rows).map(|i| Some(i % 2 == 0)).collect();
    cols.push((ColumnMeta::new("y", DType::Boolean), Column::Boolean(y)));
    Table::new(cols).unwrap()
}
