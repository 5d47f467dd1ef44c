//! Direct spectral computations for magnetic Laplacians on a Dirichlet box.
//!
//! The discrete operator uses Peierls link phases `exp(-(i/hbar) int A.dl)` so that
//! `(i hbar d + A)^* (i hbar d + A)` keeps its gauge covariance on the lattice.

mod banded;
mod error;
mod fit;
mod lanczos;
mod lattice;
mod sweep;

pub use banded::BandLdl;
pub use error::{OracleError, Result};
pub use fit::{fit_expansion, Fit};
pub use lanczos::{lowest_eigenvalues, EigenResult, SolverOptions};
pub use lattice::{build_operator, DiscretizationSpec, LinkRule, Operator, SparseHermitian};
pub use sweep::{count_below, spectrum, grid_points_for, hbar_sweep, CountResult, GridRule, OracleSpectrum};
