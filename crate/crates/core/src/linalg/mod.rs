//! Dense linear-algebra kernels used by every estimator.
//!
//! Eigenvalues from [`sym_eigen`] are ascending; singular values from
//! [`svd`] are nonincreasing. Both conventions are kept throughout the crate.

mod eigen;
mod matrix;
mod qr;
mod solve;
mod svd;

pub use eigen::{sym_eigen, SymEigenResult};
pub use matrix::{Block, Matrix};
pub use qr::{qr_decompose, QrResult};
pub(crate) use solve::solve_upper_triangular;
pub use solve::{condition_number, solve_linear, SINGULAR_TOL};
pub use svd::{
    null_space_basis, numerical_rank, rank_split, singular_values, svd, RankSplit, SvdResult, DEFAULT_RANK_TOL,
};
