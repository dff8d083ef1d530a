//! Bayesian networks with decision-tree CPTs.
//!
//! The crate covers tree-structured arc reversal ([`reversal`]), evidence
//! integration for two-slice dynamic networks ([`dpn`]), detection of
//! context-dependent irrelevance and the resulting sample schedules
//! ([`irrelevance`]), and likelihood-weighted simulation that honours those
//! schedules ([`simulate`]). [`exact`] holds the enumeration oracles used to
//! check all of the above.

mod compiled;
pub mod dpn;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod io;
pub mod irrelevance;
pub mod network;
pub mod reversal;
pub mod simulate;
pub mod trees;

pub use error::{Error, Result};
pub use network::{BayesNet, Conditional, Cpt};
pub use trees::{Context, CptTree, Distribution, TabularCpt, Variable};

/// Absolute tolerance for every probability comparison.
pub const TOLERANCE: f64 = 1e-9;
