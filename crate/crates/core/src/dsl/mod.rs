//! Typed transformation expressions, their text form and evaluation.

mod ast;
mod canon;
mod doc;
mod eval;
pub mod lenient;
mod plan;
mod typecheck;

pub use ast::*;
pub use canon::{canonical_key, canonicalize};
pub use doc::{expr_from_value, expr_to_value, parse_expr, parse_plan, plan_to_string, EXPR_KINDS};
pub use eval::{aggregate, apply_binary, apply_extractor, apply_groupby, apply_onehot, apply_unary, bucket_index, evaluate, output_name};
pub use lenient::SyntaxError;
pub use plan::{apply_node, PlanNode, TransformPlan};
pub use typecheck::{typecheck, TypeSig};

use crate::table::{DType, TableError};

#[derive(Debug, thiserror::Error)]
pub enum DslError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("unknown expression kind `{0}`")]
    UnknownKind(String),
    #[error("invalid node: {0}")]
    InvalidNode(String),
    #[error("bad bucket boundaries: {0}")]
    BadBoundaries(String),
    #[error("node `{node}` reads `{column}`, which is not produced before it")]
    ForwardReference { node: String, column: String },
    #[error("duplicate feature name `{0}`")]
    DuplicateName(String),
    #[error("column `{column}` has type {found:?}, expected {expected}")]
    TypeMismatch {
        column: String,
        expected: &'static str,
        found: DType,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("node {index} (`{name}`): {source}")]
    InNode {
        index: usize,
        name: String,
        #[source]
        source: Box<DslError>,
    },
}

impl DslError {
    /// Wraps the error with the position of the offending plan node.
    pub fn in_node(self, index: usize, name: &str) -> DslError {
        match self {
            e @ DslError::InNode { .. } => e,
            e => DslError::InNode {
                index,
                name: name.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// The underlying error without node context.
    pub fn root(&self) -> &DslError {
        match self {
            DslError::InNode { source, .. } => source.root(),
            e => e,
        }
    }
}
