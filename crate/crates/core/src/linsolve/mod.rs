//! Sparse linear algebra: CSR matrices, ILU(0)-preconditioned restarted
//! GMRES, and a dense elimination oracle.

mod dense;
mod gmres;
mod sparse;

pub use dense::{dense_solve, DenseMatrix, DENSE_SOLVE_CAP};
pub use gmres::{gmres_solve, GmresConfig, Ilu0, SolveReport};
pub use sparse::{CsrMatrix, TripletBuilder};
