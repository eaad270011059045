// SPDX-License-Identifier: Apache-2.0

//! FIRRTL subset frontend: parse, normalize `when`s, flatten, lower.

pub mod ast;
pub mod flatten;
pub mod lexer;
pub mod lower;
pub mod normalize;
pub mod parser;

pub use lower::LowerOptions;

use crate::graph::RtlGraph;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontendError {
    #[error("syntax error: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("unsupported construct: {construct}")]
    Unsupported { line: u32, col: u32, construct: String },
    #[error("recursive instantiation: {}", .chain.join(" -> "))]
    RecursiveInstance { line: u32, col: u32, chain: Vec<String> },
    #[error("instance `{instance}` of undeclared module `{module}`")]
    UndeclaredModule {
        line: u32,
        col: u32,
        instance: String,
        module: String,
    },
    #[error("undeclared identifier `{name}`")]
    Undeclared { line: u32, col: u32, name: String },
    #[error("`{name}` is declared more than once")]
    Duplicate { line: u32, col: u32, name: String },
    #[error("`{name}` is never connected")]
    Unconnected { line: u32, col: u32, name: String },
    #[error("`{name}` is not connected on every path")]
    PartiallyConnected { line: u32, col: u32, name: String },
    #[error("type error: {msg}")]
    Type { line: u32, col: u32, msg: String },
    #[error("`{name}` is {width} bits wide, above the {limit}-bit limit")]
    WidthLimit {
        line: u32,
        col: u32,
        name: String,
        width: u32,
        limit: u32,
    },
    #[error("combinational loop through: {}", .names.join(" -> "))]
    CombinationalLoop { line: u32, col: u32, names: Vec<String> },
}

impl FrontendError {
    pub fn syntax(line: u32, col: u32, msg: impl Into<String>) -> Self {
        FrontendError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    pub fn location(&self) -> Option<(u32, u32)> {
        use FrontendError::*;
        match self {
            Syntax { line, col, .. }
            | Unsupported { line, col, .. }
            | RecursiveInstance { line, col, .. }
            | UndeclaredModule { line, col, .. }
            | Undeclared { line, col, .. }
            | Duplicate { line, col, .. }
            | Unconnected { line, col, .. }
            | PartiallyConnected { line, col, .. }
            | Type { line, col, .. }
            | WidthLimit { line, col, .. }
            | CombinationalLoop { line, col, .. } => Some((*line, *col)),
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        let (line, col) = self.location().unwrap_or((0, 0));
        Diagnostic {
            line,
            col,
            severity: Severity::Error,
            message: self.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(line: u32, col: u32, message: impl Into<String>) -> Self {
        Self {
            line,
            col,
            severity: Severity::Warning,
            message: message.into(),
        }
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}: {}", self.line, self.col, self.severity, self.message)
    }
}

/// Parses FIRRTL text and normalizes every `when` into muxes.
pub fn parse(src: &str) -> Result<ast::Circuit, FrontendError> {
    parse_with_warnings(src).map(|(c, _)| c)
}

pub fn parse_with_warnings(src: &str) -> Result<(ast::Circuit, Vec<Diagnostic>), FrontendError> {
    let (raw, warnings) = parser::parse_raw(src)?;
    Ok((normalize::normalize(&raw)?, warnings))
}

pub use flatten::flatten;
pub use lower::lower;

/// Runs the whole frontend, returning the graph and any warnings.
pub fn load(src: &str, opts: &LowerOptions) -> Result<(RtlGraph, Vec<Diagnostic>), FrontendError> {
    let (ast, warnings) = parse_with_warnings(src)?;
    let flat = flatten(&ast)?;
    Ok((lower(&flat, opts)?, warnings))
}

/// [`load`] with default options, discarding warnings.
pub fn load_graph(src: &str) -> Result<RtlGraph, FrontendError> {
    load(src, &LowerOptions::default()).map(|(g, _)| g)
}
