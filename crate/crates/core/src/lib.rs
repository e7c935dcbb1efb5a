//! Gradient-descent SAT sampling over circuits recovered from CNF.
//!
//! The pipeline: [`cnf`] parses DIMACS, [`extract`] turns the clause list into
//! definitions and constrained outputs, [`circuit`] lowers those to a 2-input
//! gate DAG, [`autodiff`] relaxes the DAG to probabilities and differentiates
//! it, and [`sampler`] drives batched gradient descent, hardening and
//! verification.

pub mod autodiff;
pub mod boolexpr;
pub mod circuit;
pub mod cnf;
pub mod exec;
pub mod extract;
pub mod generate;
pub mod sampler;

pub use boolexpr::BoolExpr;
pub use circuit::Circuit;
pub use cnf::{parse_dimacs, write_dimacs, Assignment, Clause, CnfFormula, Literal};
pub use extract::{extract, ExtractionResult, ExtractorConfig};
pub use sampler::{run, SampleOutcome, SamplerConfig};
