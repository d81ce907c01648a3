//! Dense linear algebra, deterministic random streams, and the matrix
//! solvers the rest of the workbench builds on.

mod c2d;
mod dare;
mod eig;
mod matrix;
mod ou;
mod rng;

pub use c2d::{c2d, expm};
pub use dare::{dare_residual, dare_solve, lqr_gain};
pub use eig::{eigenvalues, spectral_radius};
pub use matrix::Matrix;
pub use ou::OuProcess;
pub use rng::SeededRng;
