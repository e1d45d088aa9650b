//! Prompt templates. Every template embeds the agenda verbatim and asks for
//! machine-readable output in the DSL's closed vocabulary.

use std::fmt::Write;

use crate::agenda::DataAgenda;
use crate::dsl::OperatorKind;
use crate::pipeline::CandidateFeature;

#[derive(Debug, Clone, Copy)]
pub struct PromptContext<'a> {
    pub agenda: &'a DataAgenda,
    pub kind: OperatorKind,
    /// Attribute under consideration; required for unary proposals.
    pub focus: Option<&'a str>,
    /// Year used for date arithmetic ("current year").
    pub reference_year: Option<i32>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PromptError {
    #[error("the agenda lists no features")]
    EmptyAgenda,
    #[error("unary proposals need a focus column")]
    MissingFocus,
    #[error("focus column `{0}` is not an agenda feature")]
    UnknownFocus(String),
}

fn agenda_block(agenda: &DataAgenda, reference_year: Option<i32>) -> String {
    let mut s = String::new();
    if !agenda.dataset_description.trim().is_empty() {
        let _ = writeln!(s, "Dataset description: {}", agenda.dataset_description.trim());
    }
    s.push_str("Features:\n");
    for f in &agenda.features {
        let _ = write!(s, "- {} ({})", f.name, f.dtype);
        if !f.description.trim().is_empty() {
            let _ = write!(s, ": {}", f.description.trim());
        }
        if let Some(domain) = &f.domain {
            let _ = write!(s, " [values: {}]", domain.join(", "));
        }
        s.push('\n');
    }
    let pc = &agenda.prediction_class;
    let _ = write!(s, "Prediction class: {}", pc.name);
    if !pc.description.trim().is_empty() {
        let _ = write!(s, ": {}", pc.description.trim());
    }
    s.push('\n');
    let _ = writeln!(s, "Downstream model: {}", agenda.downstream_model);
    if let Some(y) = reference_year {
        let _ = writeln!(s, "Current year: {y}");
    }
    s
}

const UNARY_VOCABULARY: &str = "\
Bucketize (group values into ranges), MinMax (scale to [0, 1]), ZScore (standardize), \
Log1p (log(1 + x)), Abs (absolute value), DatePart (year, month, day or weekday of a date), \
TextSplit (take one part of delimited text), GetDummies (one-hot encode a categorical attribute)";

const EXPR_GRAMMAR: &str = "\
Expression objects (attribute names as strings, numbers as numbers):
  {kind: \"bucketize\", col, boundaries: [b0, b1, ...], labels?: [...]}   boundaries strictly increasing
  {kind: \"min_max\", col} | {kind: \"zscore\", col} | {kind: \"log1p\", col} | {kind: \"abs\", col}
  {kind: \"date_part\", col, part: \"year\"|\"month\"|\"day\"|\"weekday\"}
  {kind: \"text_split\", col, delimiter, index}
  {kind: \"get_dummies\", col}
  {kind: \"add\"|\"sub\"|\"mul\"|\"div\", lhs, rhs}   lhs/rhs: attribute name or number
  {kind: \"groupby_agg\", group_cols: [...], agg_col, function: \"mean\"|\"max\"|\"min\"|\"sum\"|\"count\"|\"std\"}
  {kind: \"weighted_sum\", weights: {attribute: weight, ...}}
  {kind: \"ratio\", numerator, denominator}
  {kind: \"lookup_map\", key_col, map: {value: number, ...}, default?: number}
  {kind: \"conditional\", col, op: \"<\"|\"<=\"|\">\"|\">=\"|\"==\"|\"!=\", value, then: number, else: number}";

/// Operator-selector prompt for `ctx.kind`.
pub fn render_prompt(ctx: &PromptContext<'_>) -> Result<String, PromptError> {
    let agenda = ctx.agenda;
    if agenda.features.is_empty() {
        return Err(PromptError::EmptyAgenda);
    }
    let y = agenda.target();
    let mut s = agenda_block(agenda, ctx.reference_year);
    s.push('\n');
    match ctx.kind {
        OperatorKind::Unary => {
            let col = ctx.focus.ok_or(PromptError::MissingFocus)?;
            if agenda.feature(col).is_none() {
                return Err(PromptError::UnknownFocus(col.to_string()));
            }
            let _ = write!(
                s,
                "Consider the unary operators on the attribute {col} that can generate helpful features to predict {y}.\n\
                 Available unary operators: {UNARY_VOCABULARY}.\n\
                 List all possible appropriate operators, and your confidence levels (certain/high/medium/low).\n\
                 Answer with one operator per line, exactly in the form:\n\
                 Operator (confidence): description of the new feature\n"
            );
        }
        OperatorKind::Binary => {
            let _ = write!(
                s,
                "Sample one binary operator (add, sub, mul, div) over two attributes, or over an attribute and a numeric constant, \
                 that generates a helpful feature to predict {y} with the {model}.\n\
                 Answer with one object:\n\
                 {{op: \"add\"|\"sub\"|\"mul\"|\"div\", lhs: attribute or number, rhs: attribute or number, description: \"...\"}}\n",
                model = agenda.downstream_model
            );
        }
        OperatorKind::HighOrder => {
            let _ = write!(
                s,
                "Sample one high-order operator: group the rows by one or more categorical attributes and aggregate another attribute within each group, \
                 to generate a helpful feature to predict {y}.\n\
                 Specify the groupby_col, agg_col, and the aggregation function (mean, max, min, sum, count, std).\n\
                 Answer with one object:\n\
                 {{groupby_col: [attributes], agg_col: attribute, function: aggregation}}\n"
            );
        }
        OperatorKind::Extractor => {
            let _ = write!(
                s,
                "Sample one extractor: a composite feature that helps predict {y}, built as a weighted_sum of attributes, \
                 a ratio of two attributes, a lookup mapping attribute values to numbers, a conditional indicator, \
                 or external (values need knowledge that is not in the table, for example facts about a city).\n\
                 Answer with one object:\n\
                 {{kind: \"weighted_sum\"|\"ratio\"|\"lookup\"|\"conditional\"|\"external\", columns: [attributes], description: \"...\"}}\n"
            );
        }
    }
    Ok(s)
}

/// Function-generator prompt for an accepted candidate.
pub fn render_function_prompt(agenda: &DataAgenda, candidate: &CandidateFeature, reference_year: Option<i32>) -> String {
    let mut s = agenda_block(agenda, reference_year);
    let _ = write!(
        s,
        "\nNew feature: {}\nDescription: {}\nRelevant columns: {}\n\n\
         Write the transformation that computes the new feature from the relevant columns.\n\
         Start the answer with exactly one marker:\n\
         FUNCTION followed by one expression object, when the feature can be computed from the table;\n\
         ROW_COMPLETION, when each value must be filled in row by row from knowledge not in the table;\n\
         SOURCE followed by a short suggestion of a data source, when neither is possible.\n\
         {EXPR_GRAMMAR}\n",
        candidate.name,
        candidate.description,
        candidate.relevant_columns.join(", "),
    );
    s
}

/// Row-completion prompt over a serialized row ending in `feature: ?`.
pub fn render_row_prompt(serialized_row: &str, feature: &str, description: &str) -> String {
    format!(
        "{serialized_row}\n\nFill in the value of {feature} ({description}). Answer with a single number only.\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::fixtures::table1;

    fn agenda() -> DataAgenda {
        let mut a = DataAgenda::skeleton(&table1());
        a.downstream_model = "Logistic regression".into();
        a
    }

    #[test]
    fn unary_template() {
        let a = agenda();
        let ctx = PromptContext {
            agenda: &a,
            kind: OperatorKind::Unary,
            focus: Some("Age"),
            reference_year: None,
        };
        let p = render_prompt(&ctx).unwrap();
        assert!(p.contains("unary operators on the attribute Age"));
        assert!(p.contains("to predict Safe"));
        assert!(p.contains("List all possible appropriate operators, and your confidence levels (certain/high/medium/low)"));
        assert!(p.contains("Downstream model: Logistic regression"));
        assert_eq!(p, render_prompt(&ctx).unwrap());
    }

    #[test]
    fn high_order_template() {
        let a = agenda();
        let p = render_prompt(&PromptContext {
            agenda: &a,
            kind: OperatorKind::HighOrder,
            focus: None,
            reference_year: Some(2023),
        })
        .unwrap();
        assert!(p.contains("Specify the groupby_col, agg_col, and the aggregation function"));
        assert!(p.contains("Current year: 2023"));
    }

    #[test]
    fn unary_needs_known_focus() {
        let a = agenda();
        let mut ctx = PromptContext {
            agenda: &a,
            kind: OperatorKind::Unary,
            focus: None,
            reference_year: None,
        };
        assert_eq!(render_prompt(&ctx), Err(PromptError::MissingFocus));
        ctx.focus = Some("Safe");
        assert_eq!(render_prompt(&ctx), Err(PromptError::UnknownFocus("Safe".into())));
        let empty = DataAgenda::default();
        ctx.agenda = &empty;
        assert_eq!(render_prompt(&ctx), Err(PromptError::EmptyAgenda));
    }
}
