use std::collections::HashSet;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{DType, Schema};

/// Default distinct-value bound separating categorical from free-text columns.
pub const DEFAULT_HIGH_CARDINALITY: usize = 25;

pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// ISO-8601 date or date-time. Offsets are converted to UTC and dropped.
pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|dt| dt.naive_utc())
}

fn infer_column<'a>(cells: impl Iterator<Item = &'a str> + Clone, high_cardinality: usize) -> DType {
    let mut present = cells.filter(|c| !c.trim().is_empty()).peekable();
    if present.peek().is_none() {
        return DType::Text;
    }
    if present.clone().all(|c| parse_bool(c).is_some()) {
        return DType::Boolean;
    }
    if present.clone().all(|c| parse_number(c).is_some()) {
        return DType::Numeric;
    }
    if present.clone().all(|c| parse_datetime(c).is_some()) {
        return DType::DateTime;
    }
    let distinct: HashSet<&str> = present.collect();
    if distinct.len() <= high_cardinality {
        DType::Categorical
    } else {
        DType::Text
    }
}

/// Infers one dtype per header column from a grid of raw cells.
/// `rows[0]` is the header. Short rows are treated as empty cells.
pub fn infer_schema(rows: &[Vec<String>], high_cardinality: usize) -> Schema {
    let Some(header) = rows.first() else {
        return Schema::default();
    };
    let body = &rows[1..];
    Schema::new(header.iter().enumerate().map(|(j, name)| {
        let cells = body.iter().map(move |r| r.get(j).map(String::as_str).unwrap_or(""));
        (name.clone(), infer_column(cells, high_cardinality))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(header: &str, values: &[&str]) -> Vec<Vec<String>> {
        let mut rows = vec![vec![header.to_string()]];
        rows.extend(values.iter().map(|v| vec![v.to_string()]));
        rows
    }

    fn infer1(values: &[&str]) -> DType {
        infer_schema(&grid("c", values), DEFAULT_HIGH_CARDINALITY).fields[0].dtype
    }

    #[test]
    fn precedence_order() {
        assert_eq!(infer1(&["21", "35", "42"]), DType::Numeric);
        assert_eq!(infer1(&["SF", "LA", "SEA"]), DType::Categorical);
        assert_eq!(infer1(&["0", "1", "1"]), DType::Boolean);
        assert_eq!(infer1(&["true", "False", ""]), DType::Boolean);
        assert_eq!(infer1(&["2023-01-02", "2020-12-31T10:00:00"]), DType::DateTime);
        assert_eq!(infer1(&["1.5", "", "2"]), DType::Numeric);
        assert_eq!(infer1(&[]), DType::Text);
        assert_eq!(infer1(&["", ""]), DType::Text);
    }

    #[test]
    fn high_cardinality_strings_are_text() {
        let values: Vec<String> = (0..10_000).map(|i| format!("free text {i}")).collect();
        let refs: Vec<&str> = values.iter().map(String::as_str).collect();
        assert_eq!(infer1(&refs), DType::Text);
        // exactly at the bound stays categorical
        let at: Vec<String> = (0..25).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = at.iter().map(String::as_str).collect();
        assert_eq!(infer1(&refs), DType::Categorical);
    }

    #[test]
    fn deterministic() {
        let g = grid("c", &["a", "b", "3"]);
        assert_eq!(infer_schema(&g, 25), infer_schema(&g, 25));
    }

    #[test]
    fn number_parsing_rejects_non_finite() {
        assert_eq!(parse_number(" 2.5 "), Some(2.5));
        assert_eq!(parse_number("NaN"), None);
        assert_eq!(parse_number("inf"), None);
        assert_eq!(parse_number("abc"), None);
    }
}
