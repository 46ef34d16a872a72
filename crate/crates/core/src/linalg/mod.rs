//! Sparse assembly and the direct solvers used by the field and step solves.

pub mod banded;
pub mod sparse;
pub mod tridiag;

pub use banded::{folded_cell_order, BandLu, BorderedBandSolver};
pub use sparse::{CsrMatrix, TripletBuilder};
pub use tridiag::TridiagLu;
