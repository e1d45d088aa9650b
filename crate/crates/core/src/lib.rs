//! Feature construction for tabular data guided by a foundation model.
//!
//! The model proposes operators and writes transformation expressions in a
//! closed DSL; the library checks, evaluates and records them as a plan that
//! can be re-applied to fresh data without any model access.

pub mod agenda;
pub mod cli;
pub mod demo;
pub mod dsl;
pub mod eval;
pub mod llm;
pub mod pipeline;
pub mod select;
pub mod table;
