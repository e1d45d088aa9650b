use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::infer::{infer_schema, parse_bool, parse_datetime, parse_number, DEFAULT_HIGH_CARDINALITY};
use super::{Column, ColumnMeta, DType, Schema, Table, TableError};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Number of data rows inspected by schema inference.
    pub infer_rows: usize,
    pub high_cardinality: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            infer_rows: 1000,
            high_cardinality: DEFAULT_HIGH_CARDINALITY,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: Option<&Schema>, opts: &CsvOptions) -> Result<Table, TableError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema, opts)
}

pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>, opts: &CsvOptions) -> Result<Table, TableError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| TableError::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    let Some(header) = rows.first().cloned() else {
        return Err(TableError::Parse {
            row: 1,
            message: "missing header row".into(),
        });
    };

    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(TableError::DuplicateColumn(name.clone()));
        }
    }
    for (i, row) in rows.iter().enumerate().skip(1) {
        if row.len() != header.len() {
            return Err(TableError::Parse {
                row: i + 1,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
    }

    let schema = match schema {
        Some(s) => {
            let names: Vec<&str> = s.names().collect();
            if names != header.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(TableError::SchemaMismatch(format!(
                    "header {header:?} vs schema {names:?}"
                )));
            }
            s.clone()
        }
        None => {
            let sample_end = rows.len().min(opts.infer_rows.saturating_add(1));
            infer_schema(&rows[..sample_end], opts.high_cardinality)
        }
    };

    let body = &rows[1..];
    let mut items = Vec::with_capacity(header.len());
    for (j, field) in schema.fields.iter().enumerate() {
        let cells = body.iter().map(|r| r[j].as_str());
        let column = parse_column(field.dtype, cells);
        let mut meta = ColumnMeta::new(field.name.clone(), field.dtype);
        if field.dtype == DType::Categorical {
            meta.domain = Some(first_appearance(&column));
        }
        items.push((meta, column));
    }
    let mut table = Table::empty(body.len());
    table = table.add_columns(items)?;
    Ok(table)
}

fn first_appearance(column: &Column) -> Vec<String> {
    let mut seen = HashSet::new();
    column
        .keys()
        .into_iter()
        .flatten()
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

fn non_empty(s: &str) -> Option<&str> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

/// Unparseable cells become nulls.
fn parse_column<'a>(dtype: DType, cells: impl Iterator<Item = &'a str>) -> Column {
    match dtype {
        DType::Numeric => Column::Numeric(cells.map(parse_number).collect()),
        DType::Boolean => Column::Boolean(cells.map(parse_bool).collect()),
        DType::DateTime => Column::DateTime(cells.map(parse_datetime).collect()),
        DType::Categorical => Column::Categorical(cells.map(|c| non_empty(c).map(str::to_string)).collect()),
        DType::Text => Column::Text(cells.map(|c| non_empty(c).map(str::to_string)).collect()),
    }
}

pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<(), TableError> {
    let io_err = |e: csv::Error| TableError::Io {
        path: "<csv writer>".into(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(table.names()).map_err(io_err)?;
    let columns: Vec<&Column> = table.iter().map(|(_, c)| c).collect();
    for row in 0..table.n_rows() {
        let record: Vec<String> = columns
            .iter()
            .map(|c| c.get(row).map(|v| v.render()).unwrap_or_default())
            .collect();
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush().map_err(|source| TableError::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_csv_string(table: &Table) -> String {
    let mut buf = Vec::new();
    write_csv(table, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}
