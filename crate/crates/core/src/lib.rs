//! Deadline-aware scheduling of cut quantum circuits on heterogeneous
//! QPU fleets connected by classical communication only.
//!
//! The pipeline: a compiler model cuts each requested circuit into
//! subcircuits with shot budgets and (for LOCC wire cuts) measure->prepare
//! precedence; solvers place shot fragments on QPUs under qubit, depth,
//! deadline, exclusivity, and precedence constraints, maximizing served
//! requests with an earliness bonus; a Monte Carlo harness runs paired
//! experiments across scheduling variants.
//!
//! Modules follow the pipeline: [`model`] holds the domain types and
//! instance documents, [`cutter`] the compiler model, [`timeline`] the
//! time arithmetic, [`feasibility`] the constraint validator and
//! objective, [`solvers`] the annealer, oracle, and baselines, and
//! [`bench`] workload generation and sweeps. Everything is deterministic
//! given explicit seeds.

pub mod bench;
pub mod cutter;
pub mod feasibility;
pub mod model;
pub mod rational;
pub mod seed;
pub mod solvers;
#[cfg(test)]
pub(crate) mod testutil;
pub mod timeline;
