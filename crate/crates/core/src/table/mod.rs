//! Immutable columnar tables: typed columns, schema inference, CSV IO,
//! profiling and row serialization for prompts.

mod csvio;
mod infer;
mod profile;

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::OperatorKind;

pub use csvio::{load_csv, read_csv, write_csv, write_csv_string, CsvOptions};
pub use infer::{infer_schema, parse_bool, parse_datetime, parse_number, DEFAULT_HIGH_CARDINALITY};
pub use profile::{column_profile, ColumnProfile};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{name}` has {found} rows, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("column `{name}` declared {declared} but holds {actual} cells")]
    DTypeMismatch {
        name: String,
        declared: DType,
        actual: DType,
    },
    #[error("header does not match schema: {0}")]
    SchemaMismatch(String),
    #[error("target column `{name}` must be boolean or categorical, found {dtype}")]
    BadTarget { name: String, dtype: DType },
    #[error("row {row} out of range for table with {n_rows} rows")]
    RowOutOfRange { row: usize, n_rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Numeric,
    Categorical,
    Boolean,
    Text,
    #[serde(rename = "datetime")]
    DateTime,
}

impl DType {
    /// Numeric and Boolean columns can both be read as numbers (0/1 for booleans).
    pub fn is_numeric_like(self) -> bool {
        matches!(self, DType::Numeric | DType::Boolean)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DType::Numeric => "numeric",
            DType::Categorical => "categorical",
            DType::Boolean => "boolean",
            DType::Text => "text",
            DType::DateTime => "datetime",
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "origin")]
pub enum Origin {
    #[default]
    Original,
    Derived { operator: OperatorKind, node: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub name: String,
    pub dtype: DType,
    pub description: String,
    pub origin: Origin,
    pub domain: Option<Vec<String>>,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, dtype: DType) -> Self {
        Self {
            name: name.into(),
            dtype,
            description: String::new(),
            origin: Origin::Original,
            domain: None,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn is_derived(&self) -> bool {
        matches!(self.origin, Origin::Derived { .. })
    }
}

/// A single cell value, used where code has to be generic over dtypes.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    DateTime(NaiveDateTime),
}

impl Value {
    /// Text rendering used by CSV output, row serialization and lookup keys.
    pub fn render(&self) -> String {
        match self {
            Value::Number(x) => format_number(*x),
            Value::Bool(b) => if *b { "1" } else { "0" }.to_string(),
            Value::Str(s) => s.clone(),
            Value::DateTime(dt) => format_datetime(dt),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }
}

pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // normalizes -0.0
        return "0".to_string();
    }
    format!("{x}")
}

pub fn format_datetime(dt: &NaiveDateTime) -> String {
    if dt.time() == chrono::NaiveTime::MIN {
        dt.format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
    }
}

/// Typed column storage. Every cell is optional; `None` is a null.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
    Boolean(Vec<Option<bool>>),
    Text(Vec<Option<String>>),
    DateTime(Vec<Option<NaiveDateTime>>),
}

impl Column {
    pub fn dtype(&self) -> DType {
        match self {
            Column::Numeric(_) => DType::Numeric,
            Column::Categorical(_) => DType::Categorical,
            Column::Boolean(_) => DType::Boolean,
            Column::Text(_) => DType::Text,
            Column::DateTime(_) => DType::DateTime,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) | Column::Text(v) => v.len(),
            Column::Boolean(v) => v.len(),
            Column::DateTime(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_null(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical(v) | Column::Text(v) => v[row].is_none(),
            Column::Boolean(v) => v[row].is_none(),
            Column::DateTime(v) => v[row].is_none(),
        }
    }

    pub fn null_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_null(i)).count()
    }

    pub fn get(&self, row: usize) -> Option<Value> {
        match self {
            Column::Numeric(v) => v[row].map(Value::Number),
            Column::Categorical(v) | Column::Text(v) => v[row].clone().map(Value::Str),
            Column::Boolean(v) => v[row].map(Value::Bool),
            Column::DateTime(v) => v[row].map(Value::DateTime),
        }
    }

    /// Numeric view of the column: numbers as-is, booleans as 0/1, other dtypes all null.
    pub fn to_f64(&self) -> Vec<Option<f64>> {
        match self {
            Column::Numeric(v) => v.clone(),
            Column::Boolean(v) => v.iter().map(|b| b.map(|b| if b { 1.0 } else { 0.0 })).collect(),
            other => vec![None; other.len()],
        }
    }

    /// Rendered cell keys, used for grouping, lookup and one-hot expansion.
    pub fn keys(&self) -> Vec<Option<String>> {
        (0..self.len()).map(|i| self.get(i).map(|v| v.render())).collect()
    }

    pub fn all_null(dtype: DType, len: usize) -> Column {
        match dtype {
            DType::Numeric => Column::Numeric(vec![None; len]),
            DType::Categorical => Column::Categorical(vec![None; len]),
            DType::Boolean => Column::Boolean(vec![None; len]),
            DType::Text => Column::Text(vec![None; len]),
            DType::DateTime => Column::DateTime(vec![None; len]),
        }
    }

    /// Keeps only the listed rows, in the listed order.
    pub fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
            Column::Text(v) => Column::Text(rows.iter().map(|&i| v[i].clone()).collect()),
            Column::Boolean(v) => Column::Boolean(rows.iter().map(|&i| v[i]).collect()),
            Column::DateTime(v) => Column::DateTime(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub dtype: DType,
}

/// Ordered list of (name, dtype) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: impl IntoIterator<Item = (String, DType)>) -> Self {
        Self {
            fields: fields
                .into_iter()
                .map(|(name, dtype)| Field { name, dtype })
                .collect(),
        }
    }

    pub fn dtype_of(&self, name: &str) -> Option<DType> {
        self.fields.iter().find(|f| f.name == name).map(|f| f.dtype)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.dtype_of(name).is_some()
    }

    pub fn push(&mut self, name: impl Into<String>, dtype: DType) {
        self.fields.push(Field {
            name: name.into(),
            dtype,
        });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Immutable columnar snapshot. Operations that change the table return a new one.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    metas: Vec<ColumnMeta>,
    columns: Vec<Column>,
    n_rows: usize,
    target: Option<String>,
}

impl Table {
    pub fn new(items: Vec<(ColumnMeta, Column)>) -> Result<Self, TableError> {
        let n_rows = items.first().map(|(_, c)| c.len()).unwrap_or(0);
        let empty = Table {
            metas: Vec::new(),
            columns: Vec::new(),
            n_rows,
            target: None,
        };
        empty.add_columns(items)
    }

    pub fn empty(n_rows: usize) -> Self {
        Table {
            metas: Vec::new(),
            columns: Vec::new(),
            n_rows,
            target: None,
        }
    }

    pub fn with_target(mut self, name: &str) -> Result<Self, TableError> {
        let meta = self.meta(name).ok_or_else(|| TableError::UnknownColumn(name.to_string()))?;
        if !matches!(meta.dtype, DType::Boolean | DType::Categorical) {
            return Err(TableError::BadTarget {
                name: name.to_string(),
                dtype: meta.dtype,
            });
        }
        self.target = Some(name.to_string());
        Ok(self)
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.metas.iter().map(|m| m.name.as_str())
    }

    pub fn metas(&self) -> &[ColumnMeta] {
        &self.metas
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ColumnMeta, &Column)> {
        self.metas.iter().zip(self.columns.iter())
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.metas.iter().position(|m| m.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn meta(&self, name: &str) -> Option<&ColumnMeta> {
        self.index_of(name).map(|i| &self.metas[i])
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.index_of(name).map(|i| &self.columns[i])
    }

    pub fn require(&self, name: &str) -> Result<&Column, TableError> {
        self.column(name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn schema(&self) -> Schema {
        Schema::new(self.metas.iter().map(|m| (m.name.clone(), m.dtype)))
    }

    /// Returns a new snapshot with `items` appended; `self` is untouched.
    pub fn add_columns(&self, items: Vec<(ColumnMeta, Column)>) -> Result<Table, TableError> {
        let mut seen: BTreeSet<&str> = self.names().collect();
        for (meta, column) in &items {
            if !seen.insert(meta.name.as_str()) {
                return Err(TableError::DuplicateColumn(meta.name.clone()));
            }
            if column.len() != self.n_rows {
                return Err(TableError::LengthMismatch {
                    name: meta.name.clone(),
                    expected: self.n_rows,
                    found: column.len(),
                });
            }
            if column.dtype() != meta.dtype {
                return Err(TableError::DTypeMismatch {
                    name: meta.name.clone(),
                    declared: meta.dtype,
                    actual: column.dtype(),
                });
            }
        }
        let mut out = self.clone();
        for (meta, column) in items {
            out.metas.push(meta);
            out.columns.push(column);
        }
        Ok(out)
    }

    /// Returns a new snapshot without the named columns. Unknown names are ignored.
    /// Dropping the target clears it.
    pub fn drop_columns(&self, names: &[String]) -> Table {
        let mut out = Table::empty(self.n_rows);
        for (meta, column) in self.iter() {
            if !names.contains(&meta.name) {
                out.metas.push(meta.clone());
                out.columns.push(column.clone());
            }
        }
        out.target = self.target.clone().filter(|t| !names.contains(t));
        out
    }

    /// Row subset in the given order (used for train/test splits).
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            metas: self.metas.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            n_rows: rows.len(),
            target: self.target.clone(),
        }
    }

    /// Renders one row as `A_1: v_1, ..., A_k: v_k, new_feature: ?`.
    /// The target column is left out so the prompt never leaks the label.
    pub fn serialize_row(&self, row: usize, new_feature: &str) -> Result<String, TableError> {
        if row >= self.n_rows {
            return Err(TableError::RowOutOfRange {
                row,
                n_rows: self.n_rows,
            });
        }
        let mut parts: Vec<String> = self
            .iter()
            .filter(|(m, _)| Some(m.name.as_str()) != self.target())
            .map(|(m, c)| {
                let value = c.get(row).map(|v| v.render()).unwrap_or_default();
                format!("{}: {}", m.name, value)
            })
            .collect();
        parts.push(format!("{new_feature}: ?"));
        Ok(parts.join(", "))
    }
}
