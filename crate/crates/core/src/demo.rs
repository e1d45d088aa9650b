//! The six-row car insurance table with a matching data agenda and a
//! scripted model that answers the pipeline's prompts for it. Used by the
//! examples, the tests and the shipped cassette.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::agenda::DataAgenda;
use crate::llm::{CompletionRequest, FnProvider, ProviderError, Role};
use crate::table::{read_csv, CsvOptions, Table};

pub const INSURANCE_CSV: &str = "\
Sex,Age,Age of car,\"Make, Model\",Claim in last 6 month,City,Safe
M,21,6,\"Honda, Civic\",1,SF,0
F,35,2,\"Toyota, Corolla\",0,LA,1
M,42,8,\"Ford, Mustang\",0,SEA,1
F,22,14,\"Chevrolet, Cruze\",1,SF,0
M,45,3,\"BMW, X5\",0,SEA,1
F,56,5,\"Volkswagen, Golf\",0,LA,1
";

pub const INSURANCE_AGENDA: &str = "\
dataset_description: Car insurance policy holders and whether they are considered safe drivers.
prediction_class:
  name: Safe
  description: 1 when the policy holder is a safe driver, 0 otherwise.
downstream_model: Logistic regression
features:
  - name: Sex
    dtype: categorical
    description: Sex of the policy holder.
    domain: [M, F]
  - name: Age
    dtype: numeric
    description: Age of the policy holder in years.
  - name: Age of car
    dtype: numeric
    description: Age of the insured car in years.
  - name: Make, Model
    dtype: categorical
    description: Manufacturer and model of the car.
  - name: Claim in last 6 month
    dtype: boolean
    description: Whether the holder made a claim in the last six months.
  - name: City
    dtype: categorical
    description: City the holder lives in.
    domain: [SF, LA, SEA]
";

pub fn insurance_table() -> Table {
    read_csv(INSURANCE_CSV.as_bytes(), None, &CsvOptions::default()).expect("demo table parses")
}

pub fn insurance_agenda() -> DataAgenda {
    DataAgenda::from_yaml(INSURANCE_AGENDA).expect("demo agenda parses")
}

const UNARY: &[(&str, &str)] = &[
    ("Sex", "GetDummies (medium): one indicator column per sex"),
    (
        "Age",
        "Bucketization (high): age groups such as young, adult, middle-aged and senior drivers\n\
         Normalization (low): age scaled to [0, 1]",
    ),
    ("Age of car", "MinMax (medium): car age scaled to [0, 1]"),
    ("Make, Model", "TextSplit (low): the manufacturer part of the make and model"),
    ("Claim in last 6 month", "Fourier transform (high): periodic claim pattern"),
    ("City", "GetDummies (medium): one indicator column per city"),
];

const BINARY: &str =
    r#"{"op": "sub", "lhs": 2023, "rhs": "Age of car", "description": "Manufacturing year of the car"}"#;
const HIGH_ORDER: &str =
    r#"{"groupby_col": ["City"], "agg_col": "Claim in last 6 month", "function": "mean"}"#;
const EXTRACTORS: [&str; 2] = [
    r#"{"kind": "external", "columns": ["City"], "description": "Population density of the city (people per square km)"}"#,
    r#"{"kind": "lookup", "columns": ["Make, Model"], "description": "Crash-test safety rating of the car model"}"#,
];

const FUNCTIONS: &[(&str, &str)] = &[
    (
        "Bucketize_Age",
        "FUNCTION\n{\"kind\": \"bucketize\", \"col\": \"Age\", \"boundaries\": [0, 21, 40, 60, 120]}",
    ),
    (
        "Sub_2023_Age_of_car",
        "FUNCTION\n{\"kind\": \"sub\", \"lhs\": 2023, \"rhs\": \"Age of car\"}",
    ),
    (
        "Ex_external_City",
        "ROW_COMPLETION\nPopulation density is not in the table; it has to be filled in per city.",
    ),
    (
        "Ex_lookup_Make_Model",
        "SOURCE: published crash-test ratings (for example NHTSA five-star ratings) joined on make and model",
    ),
];

const DENSITY: &[(&str, &str)] = &[("SF", "About 7,200"), ("LA", "3200"), ("SEA", "roughly 3,600 people")];

static EXTRACTOR_TURN: AtomicUsize = AtomicUsize::new(0);

/// Answers a pipeline prompt about the insurance table. Unknown prompts get
/// an answer that parses to nothing.
pub fn insurance_response(request: &CompletionRequest) -> Result<String, ProviderError> {
    insurance_response_with(request, &EXTRACTOR_TURN)
}

fn insurance_response_with(request: &CompletionRequest, turn: &AtomicUsize) -> Result<String, ProviderError> {
    let p = request.prompt.as_str();
    let answer = match request.role {
        Role::Selector => {
            if let Some((_, a)) = UNARY
                .iter()
                .find(|(col, _)| p.contains(&format!("operators on the attribute {col} that")))
            {
                a.to_string()
            } else if p.contains("Sample one binary") {
                BINARY.to_string()
            } else if p.contains("Sample one high-order") {
                HIGH_ORDER.to_string()
            } else if p.contains("Sample one extractor") {
                EXTRACTORS[turn.fetch_add(1, Ordering::Relaxed) % 2].to_string()
            } else {
                "No suggestion.".to_string()
            }
        }
        Role::Generator => {
            if let Some((_, f)) = FUNCTIONS
                .iter()
                .find(|(name, _)| p.contains(&format!("New feature: {name}\n")))
            {
                f.to_string()
            } else if let Some((_, v)) = DENSITY.iter().find(|(city, _)| p.contains(&format!("City: {city},"))) {
                v.to_string()
            } else {
                "SOURCE: unknown".to_string()
            }
        }
    };
    Ok(answer)
}

/// A fresh scripted provider for the insurance table. Extractor samples
/// alternate between an external and a lookup candidate.
pub fn insurance_provider() -> FnProvider<impl Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync> {
    let turn = AtomicUsize::new(0);
    FnProvider(move |r: &CompletionRequest| insurance_response_with(r, &turn))
}
