//! Compiled program format: loading, validation, serialization and a
//! programmatic builder.
//!
//! The supported subset covers header types and instances (including
//! metadata), one parser, one deparser, actions, exact-match tables,
//! conditionals, register arrays and enums. Everything else in the format
//! is rejected with [`LoadError::UnsupportedConstruct`].

mod builder;
mod error;
pub mod ir;
mod load;
mod serialize;
pub mod target;
mod validate;

pub use builder::{ActionBuilder, ProgramBuilder, StateBuilder, TableBuilder};
pub use error::LoadError;
pub use ir::{PipelineProgram, Target};
pub use load::{load_program, load_value};
pub use serialize::{serialize_program, to_value};
pub use validate::validate;
