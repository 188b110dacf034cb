//! Compiler and runtime for a Constraint Handling Rules dialect.
//!
//! The pipeline is: [`surface`] parses and validates a program,
//! [`analysis`] infers functional dependencies, set semantics, symmetry and
//! storage points, [`joinorder`] picks partner orders, [`indexsel`] chooses
//! store indexes, [`plancompile`] emits per-occurrence plans and [`runtime`]
//! executes them.

pub mod analysis;
pub mod indexsel;
pub mod joinorder;
pub mod plancompile;
pub mod runtime;
pub mod surface;
pub mod value;

pub use value::Value;
