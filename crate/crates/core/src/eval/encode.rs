use std::collections::HashMap;

use super::EvalError;
use crate::table::{Column, Table};

/// Binary labels from the target column. Booleans map directly, numbers must
/// be 0/1, and a two-valued categorical column takes `1`/`true`/`yes` (or
/// else the lexicographically larger value) as the positive class.
pub fn target_labels(table: &Table) -> Result<Vec<bool>, EvalError> {
    let name = table.target().ok_or(EvalError::NoTarget)?;
    let col = table.require(name).map_err(|_| EvalError::NoTarget)?;
    if col.null_count() > 0 {
        return Err(EvalError::NotBinary(format!("target `{name}` has null cells")));
    }
    match col {
        Column::Boolean(v) => Ok(v.iter().map(|b| b.unwrap_or(false)).collect()),
        Column::Numeric(v) => v
            .iter()
            .map(|x| match x {
                Some(x) if *x == 1.0 => Ok(true),
                Some(x) if *x == 0.0 => Ok(false),
                other => Err(EvalError::NotBinary(format!("target `{name}` has value {other:?}"))),
            })
            .collect(),
        other => {
            let keys: Vec<String> = other.keys().into_iter().flatten().collect();
            let mut distinct = keys.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() > 2 {
                return Err(EvalError::NotBinary(format!(
                    "target `{name}` has {} distinct values",
                    distinct.len()
                )));
            }
            let positive = distinct
                .iter()
                .find(|v| matches!(v.to_ascii_lowercase().as_str(), "1" | "true" | "yes"))
                .or(distinct.last())
                .cloned()
                .unwrap_or_default();
            Ok(keys.iter().map(|k| *k == positive).collect())
        }
    }
}

#[derive(Debug, Clone)]
enum Encoding {
    /// Numbers, booleans as 0/1, date-times as Unix seconds; nulls take the train mean.
    Numeric { fill: f64 },
    /// Factor codes in train first-appearance order; nulls and unseen values take the train mode.
    Codes { codes: HashMap<String, f64>, fill: f64 },
}

fn numeric_view(col: &Column) -> Vec<Option<f64>> {
    match col {
        Column::DateTime(v) => v.iter().map(|d| d.map(|d| d.and_utc().timestamp() as f64)).collect(),
        other => other.to_f64(),
    }
}

/// Turns the non-target columns into a dense matrix with imputation fitted
/// on the training rows only.
#[derive(Debug, Clone)]
pub struct Encoder {
    names: Vec<String>,
    encodings: Vec<Encoding>,
}

impl Encoder {
    pub fn fit(table: &Table, train: &[usize]) -> Encoder {
        let mut names = Vec::new();
        let mut encodings = Vec::new();
        for (meta, col) in table.iter() {
            if Some(meta.name.as_str()) == table.target() {
                continue;
            }
            names.push(meta.name.clone());
            let enc = match col {
                Column::Numeric(_) | Column::Boolean(_) | Column::DateTime(_) => {
                    let view = numeric_view(col);
                    let present: Vec<f64> = train.iter().filter_map(|&i| view[i]).collect();
                    let fill = if present.is_empty() {
                        0.0
                    } else {
                        present.iter().sum::<f64>() / present.len() as f64
                    };
                    Encoding::Numeric { fill }
                }
                Column::Categorical(_) | Column::Text(_) => {
                    let keys = col.keys();
                    let mut codes: HashMap<String, f64> = HashMap::new();
                    let mut counts: Vec<usize> = Vec::new();
                    for &i in train {
                        if let Some(k) = &keys[i] {
                            let next = codes.len() as f64;
                            let code = *codes.entry(k.clone()).or_insert(next) as usize;
                            if code == counts.len() {
                                counts.push(0);
                            }
                            counts[code] += 1;
                        }
                    }
                    // mode, lowest code on ties
                    let fill = counts
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                        .map_or(0.0, |(c, _)| c as f64);
                    Encoding::Codes { codes, fill }
                }
            };
            encodings.push(enc);
        }
        Encoder { names, encodings }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn transform(&self, table: &Table, rows: &[usize]) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::with_capacity(self.names.len()); rows.len()];
        for (name, enc) in self.names.iter().zip(&self.encodings) {
            let col = table.column(name).expect("encoder fitted on this table");
            match enc {
                Encoding::Numeric { fill } => {
                    let view = numeric_view(col);
                    for (r, &i) in rows.iter().enumerate() {
                        out[r].push(view[i].unwrap_or(*fill));
                    }
                }
                Encoding::Codes { codes, fill } => {
                    let keys = col.keys();
                    for (r, &i) in rows.iter().enumerate() {
                        let code = keys[i].as_ref().and_then(|k| codes.get(k)).copied();
                        out[r].push(code.unwrap_or(*fill));
                    }
                }
            }
        }
        out
    }
}
