pub mod cli;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hj_solver;
pub mod limit;
pub mod metric;

pub use error::{Error, Result};
