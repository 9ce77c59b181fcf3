//! Permutation flow-shop scheduling.
//!
//! `n` jobs visit `m` machines in the same machine order; the job order is
//! the only decision. This crate holds the ground-truth makespan semantics
//! and everything that treats them as such:
//!
//! * [`schedule`]: completion times, makespan, incremental fronts, gaps;
//! * [`heuristics`]: NEH, random search, insertion local search, iterated
//!   local search and iterated greedy;
//! * [`exact`] and [`mip`]: exhaustive enumeration and the mixed-integer
//!   model with an LP exporter and a solution checker;
//! * [`io`]: instance generation, Taillard/VRF readers and the dataset file;
//! * [`mdp`]: the masked job-selection process and expert traces.

pub mod error;
pub mod exact;
pub mod heuristics;
pub mod instance;
pub mod io;
pub mod mdp;
pub mod mip;
pub mod schedule;

pub use error::{PfssError, Result};
pub use heuristics::{HeuristicBudget, IgParams, Solution};
pub use instance::{validate_permutation, Instance, Metadata, Permutation};
pub use schedule::{completion_times, front_advance, gap_percent, makespan, CompletionMatrix};
