//! Cluster expansions for Gibbs point processes with non-negative pair
//! interactions, each checked against an independent brute-force or
//! closed-form oracle.

pub mod branching;
pub mod cli;
pub mod combinat;
pub mod converge;
pub mod cumulants;
pub mod error;
pub mod expansion;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod ursell;
pub mod verify;

pub use error::{Error, Result};
