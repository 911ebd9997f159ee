//! Modular Stan: programs with holes and swappable module implementations.
//!
//! A modular program is a base Stan program whose expressions may call holes,
//! plus named implementations for each hole. This crate parses and checks
//! such programs, expands collection and index macros, enumerates the graph
//! of concrete models, writes out the Stan program for any selection, and
//! searches the model graph with a pluggable scorer.
//!
//! ```
//! use modstan::compile::compile;
//!
//! let c = compile(r#"
//! data { int N; vector[N] x; }
//! model { x ~ normal(Mean(), 1); }
//! module "zero" Mean() { return 0; }
//! module "free" Mean() { parameters { real mu; } return mu; }
//! "#).unwrap();
//! assert_eq!(c.graph(false, 100).unwrap().nodes.len(), 2);
//! assert!(c.concretize("Mean:free").unwrap().contains("x ~ normal(mu, 1);"));
//! ```

pub mod api;
pub mod checks;
pub mod compile;
pub mod concretize;
pub mod graph;
pub mod macros;
pub mod program;
pub mod search;
pub mod service;
pub mod syntax;

#[cfg(test)]
mod testutil;
