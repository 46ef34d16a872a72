pub mod cases;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod hermite;
pub mod linalg;
pub mod quadrature;
pub mod runner;
pub mod scheme;

pub use error::{Error, Result};
