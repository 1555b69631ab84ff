use crate::error::Result;
use crate::linalg::{null_space_basis, sym_eigen, Block};
use crate::model::ObservedData;

use super::{
    build_blocks, check_upper_rows, constraint_residual, gap_check, reduced_gram, require_noisy_columns,
    solution_from_basis, Diagnostics, EstimateResult, EstimatorOptions, RankDecision,
};

/// Orthogonal-projection (Rayleigh–Ritz) estimator.
pub fn projection_estimator(data: &ObservedData) -> Result<EstimateResult> {
    projection_estimator_with(data, &EstimatorOptions::default())
}

/// [`projection_estimator`] with explicit options.
///
/// 1. `G` is the Schur complement of the fixed columns in the noisy-row Gram
///    matrix; `μ` is picked from its `ℓ` smallest eigenvalues.
/// 2. `F = [C₂₁ C₂₂]ᵀ[C₂₁ C₂₂] - μ·blockdiag(0_k, I)`.
/// 3. `P` spans `null([C₁₁ C₁₂])` (`P = I` without fixed rows).
/// 4. The `ℓ` smallest Ritz vectors of `PᵀFP` give `Z = PZ̃` and
///    `X̂ = -Z_upper Z_lower⁻¹`; `σ̂² = μ/m`.
pub fn projection_estimator_with(data: &ObservedData, opts: &EstimatorOptions) -> Result<EstimateResult> {
    let p = data.partition;
    require_noisy_columns(data)?;
    let mut diag = Diagnostics::default();
    check_upper_rows(data, opts.rank_tol, &mut diag)?;

    let blocks = build_blocks(data);
    let total = p.n + p.ell;

    // G only depends on the noisy rows, so the fixed rows are dropped here.
    let mut lower_only = blocks.clone();
    lower_only.c11 = Block::Empty { rows: 0, cols: p.k };
    lower_only.c12 = Block::Empty {
        rows: 0,
        cols: p.noisy_cols(),
    };
    let rg = reduced_gram(&lower_only, opts.rank_tol)?;
    diag.rank_decisions.extend(rg.rank_decisions.iter().cloned());
    diag.gram_condition = rg.gram_condition;

    let g_eig = sym_eigen(&rg.g)?;
    let smallest = g_eig.values[..p.ell].to_vec();
    let mu = opts.mu.pick(&smallest);

    let mut f = blocks.lower().gram();
    for i in p.k..total {
        f[(i, i)] -= mu;
    }

    let proj = match blocks.upper() {
        None => None,
        Some(upper) => Some(null_space_basis(&upper, opts.rank_tol)?),
    };
    let (ritz, z) = match &proj {
        None => {
            let eig = sym_eigen(&f)?;
            let z = eig.leading_vectors(p.ell);
            (eig.values, z)
        }
        Some(basis) => {
            let eig = sym_eigen(&basis.t_matmul(&f.matmul(basis)))?;
            let z = basis.matmul(&eig.leading_vectors(p.ell));
            diag.rank_decisions.push(RankDecision {
                what: "projection basis P",
                rank: total - basis.cols(),
                singular_values: Vec::new(),
            });
            (eig.values, z)
        }
    };
    let (x_hat, z_min) = solution_from_basis(&z, p.n)?;

    let (eig_gap, warning) = gap_check(&ritz, p.ell, f.frobenius_norm());
    diag.z_lower_min_sv = z_min;
    diag.eig_gap = eig_gap;
    diag.warnings.extend(warning);
    diag.ritz_values = ritz;
    diag.constraint_residual = constraint_residual(data, &x_hat);

    Ok(EstimateResult {
        x_hat,
        mu: Some(mu),
        sigma2_hat: (mu / p.m as f64).max(0.0),
        smallest_eigs: smallest,
        m: p.m,
        diagnostics: diag,
    })
}
