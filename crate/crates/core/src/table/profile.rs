use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Column, Table, TableError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub null_count: usize,
    pub null_fraction: f64,
    /// Distinct non-null values.
    pub cardinality: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub is_constant: bool,
}

impl ColumnProfile {
    pub fn of(column: &Column) -> Self {
        let n = column.len();
        let null_count = column.null_count();
        let cardinality = match column {
            Column::Numeric(v) => v
                .iter()
                .flatten()
                .map(|x| x.to_bits())
                .collect::<HashSet<_>>()
                .len(),
            other => other.keys().into_iter().flatten().collect::<HashSet<_>>().len(),
        };
        let (min, max) = match column {
            Column::Numeric(v) => {
                let present = v.iter().flatten().copied();
                (
                    present.clone().reduce(f64::min),
                    present.reduce(f64::max),
                )
            }
            _ => (None, None),
        };
        ColumnProfile {
            null_count,
            null_fraction: if n == 0 { 0.0 } else { null_count as f64 / n as f64 },
            cardinality,
            min,
            max,
            is_constant: cardinality <= 1,
        }
    }
}

pub fn column_profile(table: &Table, col: &str) -> Result<ColumnProfile, TableError> {
    Ok(ColumnProfile::of(table.require(col)?))
}
