pub mod abp;
pub mod barriers;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod field;
pub mod geometry;
pub mod kernel;
pub mod lattice_io;
pub mod quadrature;
pub mod regularity;
pub mod solver;

pub use error::{Error, Result};
