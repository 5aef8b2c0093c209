//! Ariel: guarded-action scripts for adaptation strategies, and the tools
//! around them. `art` compiles scripts to a-code triplets, `rcodenv` bundles
//! one a-code set per scenario.

mod acode;
mod ast;
mod bundle;
mod compile;
mod opcode;
mod parser;

pub use acode::{
    clause_spans, disassemble, read_acode, valid_name, verify, write_acode, ACodeProgram, ClauseSpan, FormatError,
    Triplet, VerifyError,
};
pub use ast::{
    format_milli, render_guard, Action, ArielAst, GuardExpr, GuardedAction, Quantifier, RelOp, Scope, Selector,
    StatusTest, Stmt,
};
pub use bundle::{Bundle, BundleEntry, BundleError, OTHERWISE};
pub use compile::{compile, compile_guard, CompileError, POOL_CAP};
pub use opcode::{join_const, split_const, Opcode};
pub use parser::{parse, parse_guard, parse_with, ParseError, Vocabulary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Parse and compile in one step.
pub fn compile_source(source: &str, name: &str, vocab: &Vocabulary) -> Result<ACodeProgram, ArtError> {
    let ast = parse_with(source, vocab)?;
    Ok(compile(&ast, name)?)
}
