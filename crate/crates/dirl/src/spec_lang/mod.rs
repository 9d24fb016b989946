//! The specification language: syntax, parsing, and trajectory semantics.

mod ast;
mod parser;
mod semantics;

pub use ast::{AtomKind, AtomicPredicate, Predicate, Spec};
pub use parser::{parse_spec, AtomResolver, ParseError};
pub use semantics::{always, eventually, satisfies_spec, Trajectory};
