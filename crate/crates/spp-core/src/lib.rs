//! Exact solver toolkit for the secret protection problem (SPP) on finite
//! automata.
//!
//! An SPP instance is a nondeterministic finite automaton whose events may be
//! protectable (with a clearance value and an installation cost) and whose
//! states carry security levels. A protecting policy is a set of protectable
//! events; it is valid when every path from an initial state to a secret
//! state accumulates enough clearance, and χ-valid when the same holds
//! counting each distinct protected event only once. The solver finds
//! minimum-cost valid (or χ-valid) policies by lazy constraint generation
//! over an exact 0/1 integer program, with shortest-path separation.
//!
//! Modules:
//! - [`instance`]: domain types, structural validation, the `spp` file format
//! - [`analysis`]: validity / χ-validity checking with witness paths
//! - [`ilp`]: the cut-generation solver and its built-in 0/1 ILP backend
//! - [`oracle`]: brute-force ground truth (policy enumeration, SAT, 2-QBF)
//! - [`reductions`]: satisfiability gadget constructions as instance generators
//! - [`generate`]: random (Tabakov-Vardi) and converted instances
//!
//! ```
//! use spp_core::{parse_instance, solve_spp, SolveStatus, SolverConfig};
//!
//! let inst = parse_instance(
//!     "spp 1\n\
//!      state f secret 1\n\
//!      state q0\n\
//!      initial q0\n\
//!      event a protectable clearance 1 cost 1\n\
//!      trans q0 a f\n",
//! )?;
//! let report = solve_spp(&inst, &SolverConfig::default());
//! assert_eq!(report.status, SolveStatus::Optimal);
//! assert_eq!(report.cost, Some(1));
//! # Ok::<(), spp_core::instance::ParseError>(())
//! ```

pub mod analysis;
pub mod generate;
mod hash;
pub mod ilp;
pub mod instance;
pub mod oracle;
pub mod reductions;

#[cfg(test)]
pub(crate) mod testutil;

pub use analysis::{
    check_chi_valid, check_valid, is_solvable, min_clearance, ChiValidity, Path, Validity,
    Violation,
};
pub use ilp::{decide_budget, solve_spp, BudgetDecision, SolveReport, SolveStatus, SolverConfig};
pub use instance::{parse_instance, serialize_instance, Event, Policy, SppInstance, State};
