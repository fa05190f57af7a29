//! Algebraic multigrid interpolation by energy minimization.

pub mod coarsening;
pub mod energymin;
pub mod error;
pub mod experiments;
pub mod hierarchy;
pub mod problems;
pub mod smoothing;
pub mod sparse;
pub mod sylvester;
pub mod theory;

pub use error::{Error, Result};
