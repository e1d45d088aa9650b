//! Load a CSV, show the inferred schema and column profiles, and serialize a
//! row the way row-completion prompts do.
//!
//!     cargo run --example load_and_profile [-- path/to/data.csv]

use featforge::demo;
use featforge::table::{load_csv, read_csv, ColumnProfile, CsvOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = match std::env::args().nth(1) {
        Some(path) => load_csv(path, None, &CsvOptions::default())?,
        None => read_csv(demo::INSURANCE_CSV.as_bytes(), None, &CsvOptions::default())?.with_target("Safe")?,
    };
    println!("{} rows, {} columns\n", table.n_rows(), table.n_cols());
    println!("{:<24} {:<12} {:>6} {:>6} {:>10} {:>10}", "column", "dtype", "nulls", "card", "min", "max");
    for (meta, col) in table.iter() {
        let p = ColumnProfile::of(col);
        let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v}"));
        println!(
            "{:<24} {:<12} {:>6} {:>6} {:>10} {:>10}",
            meta.name,
            meta.dtype.as_str(),
            p.null_count,
            p.cardinality,
            num(p.min),
            num(p.max)
        );
    }
    if table.n_rows() > 0 {
        println!("\n{}", table.serialize_row(0, "Population density")?);
    }
    Ok(())
}
