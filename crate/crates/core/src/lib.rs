//! Core library of vmpforge: a self-contained toolkit that compiles
//! plate-notation Bayesian network definitions into message passing graphs
//! and runs variational message passing (VMP) inference over them.
//!
//! The pipeline is:
//!
//! 1. [`dsl`] — tokenize, parse and type-check a textual model definition.
//! 2. [`bn`] — lower the typed model into a plate-tree template, bind
//!    parameter values and observed data, and lay out vertex IDs.
//! 3. [`mpg`] — unroll the network into a message passing graph and assign
//!    its edges to logical partitions under one of five strategies.
//! 4. [`engine`] — run scheduled VMP updates, track the evidence lower
//!    bound, and expose the approximate posteriors.
//! 5. [`oracle`] — exact-inference oracles (closed forms and collapsed
//!    enumeration) used to anchor the engine at desk scale.

pub mod bn;
pub mod dsl;
pub mod engine;
pub mod expfam;
pub mod mpg;
pub mod oracle;

#[cfg(test)]
pub(crate) mod testkit;

pub use bn::{GroundNetwork, NetworkBuilder, ObsData, PlateTree};
pub use mpg::{build_graph, MessagePassingGraph, PartitionAssignment, PartitionStrategy};
pub use dsl::{check_types, parse_model, ModelAst, TypedModel};
pub use engine::{infer, InferOptions, PosteriorSet, VmpEngine};
pub use expfam::{CategoricalPosterior, DirichletParams, ElboAccumulator};
