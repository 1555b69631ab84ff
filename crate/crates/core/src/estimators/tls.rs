use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Matrix};

use super::{gap_check, solution_from_basis, Diagnostics, EstimateResult};

/// Classical total least squares.
///
/// Takes the `ℓ` smallest eigenpairs of `F = CᵀC`, `C = [A B]`, and returns
/// `X = -Z_upper Z_lower⁻¹`. `σ̂²` is the mean of those eigenvalues over `m`.
pub fn tls_solve(a: &Matrix, b: &Matrix) -> Result<EstimateResult> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows, B has {}",
            a.rows(),
            b.rows()
        )));
    }
    a.check_finite()?;
    b.check_finite()?;
    let (m, n) = a.shape();
    let ell = b.cols();

    let f = a.hstack(b).gram();
    let eig = sym_eigen(&f)?;
    let z = eig.leading_vectors(ell);
    let (x_hat, z_min) = solution_from_basis(&z, n)?;

    let smallest: Vec<f64> = eig.values[..ell].to_vec();
    let (eig_gap, warning) = gap_check(&eig.values, ell, f.frobenius_norm());
    let sigma2_hat = (smallest.iter().sum::<f64>() / ell as f64 / m as f64).max(0.0);

    Ok(EstimateResult {
        x_hat,
        mu: None,
        sigma2_hat,
        smallest_eigs: smallest,
        m,
        diagnostics: Diagnostics {
            z_lower_min_sv: z_min,
            eig_gap,
            warnings: warning.into_iter().collect(),
            ..Diagnostics::default()
        },
    })
}
