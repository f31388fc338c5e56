//! Dense small-matrix linear algebra.

mod eigen;
mod expm;
mod lu;
mod matrix;
mod vector;

pub use eigen::{eigenvalues, spectral_radius, Eigenvalue};
pub use expm::mat_exp;
pub use lu::{inverse, solve_linear, Lu};
pub use matrix::Matrix;
pub use vector::{inf_norm, Vector};
