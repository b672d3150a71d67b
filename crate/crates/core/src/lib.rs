//! Scenario optimization with structured uncertainty.
//!
//! Sample sizes for scenario programs follow from a bound on the Helly
//! dimension (the largest possible number of support constraints). This
//! crate computes those sizes, catalogs structured bounds that depend on how
//! the constraint depends on the uncertainty, assembles and solves the
//! sampled linear programs, checks the bounds empirically by leave-one-out
//! re-solving, and runs randomized MPC experiments on an inventory model.

pub mod error;
pub mod helly_bounds;
pub mod lp;
pub mod rmpc;
pub mod rng;
pub mod sample_complexity;
pub mod scenario;
pub mod support;
pub mod table;
pub mod validation;

pub use error::{Error, Result};
