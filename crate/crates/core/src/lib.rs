//! Constraint-sampling reinforcement learning: an upper-confidence meta-learner
//! that picks among base learners, each restricted to a different set of
//! allowed actions, and permanently drops restricted learners that have
//! converged to a worse return than some looser alternative.

pub mod constraints;
pub mod error;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod meta;
pub mod recsys;
pub mod synthetic;

pub use error::{CsrlError, Result};
