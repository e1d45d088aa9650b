use std::collections::{HashMap, HashSet};

use super::ast::{OperatorKind, TransformExpr, UnaryOp};
use super::eval::{evaluate, output_name};
use super::typecheck::typecheck;
use super::DslError;
use crate::table::{ColumnMeta, Origin, Schema, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub name: String,
    pub description: String,
    pub relevant_columns: Vec<String>,
    pub operator_kind: OperatorKind,
    pub expr: TransformExpr,
}

/// Ordered feature definitions. A node may read columns produced by earlier
/// nodes, never by later ones. `dropped` lists columns removed from the output
/// after every node has been evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformPlan {
    nodes: Vec<PlanNode>,
    dropped: Vec<String>,
}

impl TransformPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_nodes(nodes: Vec<PlanNode>, dropped: Vec<String>) -> Result<Self, DslError> {
        let mut plan = TransformPlan::new();
        let all_names: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        for (i, node) in nodes.iter().enumerate() {
            for col in node.expr.columns() {
                if let Some(&j) = all_names.get(col) {
                    if j >= i {
                        return Err(DslError::ForwardReference {
                            node: node.name.clone(),
                            column: col.to_string(),
                        });
                    }
                }
            }
        }
        for node in nodes {
            plan.push(node)?;
        }
        plan.dropped = dropped;
        Ok(plan)
    }

    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn push(&mut self, node: PlanNode) -> Result<usize, DslError> {
        if self.nodes.iter().any(|n| n.name == node.name) {
            return Err(DslError::DuplicateName(node.name));
        }
        if node.expr.columns().contains(&node.name.as_str()) {
            return Err(DslError::ForwardReference {
                node: node.name.clone(),
                column: node.name,
            });
        }
        self.nodes.push(node);
        Ok(self.nodes.len() - 1)
    }

    pub fn add_dropped(&mut self, names: impl IntoIterator<Item = String>) {
        for n in names {
            if !self.dropped.contains(&n) {
                self.dropped.push(n);
            }
        }
    }

    /// The plan node that produces `column`, if any. Dummy outputs are named
    /// `{feature}={value}` and trace back to their feature.
    pub fn node_for_column(&self, column: &str) -> Option<(usize, &PlanNode)> {
        self.nodes.iter().enumerate().find(|(_, n)| {
            n.name == column
                || (n.expr.is_multi_output()
                    && column.len() > n.name.len()
                    && column.starts_with(&n.name)
                    && column.as_bytes()[n.name.len()] == b'=')
        })
    }

    pub fn is_derived(&self, column: &str) -> bool {
        self.node_for_column(column).is_some()
    }

    /// Source column of a dummy-expansion output column.
    pub fn dummy_source(&self, column: &str) -> Option<&str> {
        let (_, node) = self.node_for_column(column)?;
        match &node.expr {
            TransformExpr::Unary {
                op: UnaryOp::GetDummies,
                col,
            } => Some(col.as_str()),
            _ => None,
        }
    }

    /// Checks every node in order against `schema`, extending it with each
    /// single-output node. Returns the extended schema.
    pub fn typecheck(&self, schema: &Schema) -> Result<Schema, DslError> {
        let mut schema = schema.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            let sig = typecheck(&node.expr, &schema).map_err(|e| e.in_node(i, &node.name))?;
            if !sig.multi {
                schema.push(node.name.clone(), sig.dtype);
            }
        }
        Ok(schema)
    }

    /// Evaluates every node against `table` in order and removes `dropped`.
    /// Statistics (min/max, mean/std, group aggregates) come from `table`.
    pub fn apply(&self, table: &Table) -> Result<Table, DslError> {
        let mut t = table.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            t = apply_node(&t, node, i).map_err(|e| e.in_node(i, &node.name))?;
        }
        Ok(t.drop_columns(&self.dropped))
    }

    /// Column names the plan reads that it does not produce itself.
    pub fn input_columns(&self) -> Vec<String> {
        let produced: HashSet<&str> = self.nodes.iter().map(|n| n.name.as_str()).collect();
        let mut out: Vec<String> = Vec::new();
        for n in &self.nodes {
            for c in n.expr.columns() {
                if !produced.contains(c) && !out.iter().any(|o| o == c) {
                    out.push(c.to_string());
                }
            }
        }
        out
    }
}

/// Typechecks and evaluates one node, appending its outputs.
pub fn apply_node(table: &Table, node: &PlanNode, index: usize) -> Result<Table, DslError> {
    let sig = typecheck(&node.expr, &table.schema())?;
    let outputs = evaluate(&node.expr, table)?;
    let items = outputs
        .into_iter()
        .map(|(suffix, column)| {
            let dtype = if sig.multi { column.dtype() } else { sig.dtype };
            debug_assert_eq!(dtype, column.dtype());
            let meta = ColumnMeta::new(output_name(&node.name, &suffix), dtype)
                .with_description(node.description.clone())
                .with_origin(Origin::Derived {
                    operator: node.operator_kind,
                    node: index,
                });
            (meta, column)
        })
        .collect();
    Ok(table.add_columns(items)?)
}
