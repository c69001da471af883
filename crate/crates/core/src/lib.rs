//! Risk-taking and momentary-happiness workbench.
//!
//! The crate administers the 90-trial gambling task with intermittent
//! happiness probes to pluggable agents, fits the choice models (cM1-cM4)
//! and affect models (mM1-mM2) by bounded multi-start maximum likelihood,
//! compares model spaces by BIC and runs the group-level statistics.
//!
//! Data-parallel loops (multi-start fits, agent batches, bootstrap
//! iterations) go through [`par::Exec`]; with the `parallel` feature
//! disabled every loop runs sequentially and produces identical output.

pub mod affect;
pub mod agents;
pub mod choice;
pub mod error;
pub mod estimation;
pub mod io;
pub mod optim;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod task;

pub use error::{AgentError, Error, Result};
pub use par::Exec;
