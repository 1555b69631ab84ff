use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, qr_decompose, singular_values, solve_upper_triangular, sym_eigen};
use crate::model::ObservedData;

use super::{gap_check, solution_from_basis, Diagnostics, EstimateResult, EstimatorOptions, RankDecision};

/// Total least squares with the first `k` columns of `A` exact (`j = 0`).
pub fn ctls_columns(data: &ObservedData) -> Result<EstimateResult> {
    ctls_columns_with(data, &EstimatorOptions::default())
}

/// [`ctls_columns`] with explicit options.
///
/// With `A₁ = Q₁R₁`, the noisy part `[Q₂ᵀA₂ Q₂ᵀB]` is solved by plain TLS
/// for `X₂`, then `R₁X₁ = Q₁ᵀB - Q₁ᵀA₂X₂`. The TLS correction of the reduced
/// problem lives in `range(Q₂)`, so `Q₁ᵀ` of the corrected data equals
/// `Q₁ᵀ` of the observed data and the recovery uses the latter directly.
pub fn ctls_columns_with(data: &ObservedData, opts: &EstimatorOptions) -> Result<EstimateResult> {
    let p = data.partition;
    if p.j != 0 || p.k == 0 || p.k >= p.n {
        return Err(Error::InvalidPartition(format!(
            "column-constrained TLS needs j = 0 and 0 < k < n (j={}, k={}, n={})",
            p.j, p.k, p.n
        )));
    }
    let (k, n, ell, m) = (p.k, p.n, p.ell, p.m);
    let width = n - k + ell;
    let a1 = data.a.submatrix(0..m, 0..k);
    let qr = qr_decompose(&a1)?;
    let r1 = qr.r_top();
    let sv = singular_values(r1)?;
    let rank = numerical_rank(&sv, opts.rank_tol);
    let gram_condition = (sv[0] / sv[k - 1]).powi(2);
    let mut diag = Diagnostics {
        gram_condition: Some(gram_condition),
        rank_decisions: vec![RankDecision {
            what: "fixed columns A1",
            rank,
            singular_values: sv,
        }],
        ..Diagnostics::default()
    };
    if rank < k {
        return Err(Error::RankDeficientFixedColumns { rank, expected: k });
    }

    let rest = data.a.submatrix(0..m, k..n).hstack(&data.b);
    let qt = qr.apply_qt(&rest);
    let top = qt.submatrix(0..k, 0..width);
    let lower = qt.submatrix(k..m, 0..width);

    let g = lower.gram();
    let eig = sym_eigen(&g)?;
    let (x2, z_min) = solution_from_basis(&eig.leading_vectors(ell), n - k)?;

    let top_a = top.submatrix(0..k, 0..n - k);
    let top_b = top.submatrix(0..k, n - k..width);
    let x1 = solve_upper_triangular(r1, &top_b.sub(&top_a.matmul(&x2)));

    let smallest = eig.values[..ell].to_vec();
    let (eig_gap, warning) = gap_check(&eig.values, ell, g.frobenius_norm());
    diag.z_lower_min_sv = z_min;
    diag.eig_gap = eig_gap;
    diag.warnings.extend(warning);

    Ok(EstimateResult {
        x_hat: x1.vstack(&x2),
        mu: None,
        sigma2_hat: (smallest.iter().sum::<f64>() / ell as f64 / m as f64).max(0.0),
        smallest_eigs: smallest,
        m,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{generate_model, observe, DesignKind, PartitionSpec};

    #[test]
    fn noise_free_recovery() {
        let p = PartitionSpec::new(0, 2, 4, 2, 40).unwrap();
        let model = generate_model(p, 11, DesignKind::IidRows).unwrap();
        let r = ctls_columns(&model.noise_free()).unwrap();
        let err = r.x_hat.sub(&model.x_true).frobenius_norm();
        assert!(err <= 1e-8 * (1.0 + model.x_true.frobenius_norm()), "err {err}");
    }

    #[test]
    fn all_columns_fixed_rejected() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]);
        let b = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let data = ObservedData::new(a, b, 0, 2).unwrap();
        assert!(matches!(ctls_columns(&data), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn rank_deficient_fixed_columns() {
        let a = Matrix::from_rows(&[
            [1.0, 2.0, 0.3],
            [2.0, 4.0, -1.0],
            [3.0, 6.0, 0.7],
            [4.0, 8.0, 0.1],
            [5.0, 10.0, 2.0],
        ]);
        let b = Matrix::from_rows(&[[1.0], [0.0], [2.0], [1.0], [3.0]]);
        let data = ObservedData::new(a, b, 0, 2).unwrap();
        assert!(matches!(
            ctls_columns(&data),
            Err(Error::RankDeficientFixedColumns { rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn fixed_columns_untouched_by_noise_fit() {
        // The fitted residual on the fixed-column directions vanishes:
        // A1ᵀ(A X̂ - B) is absorbed entirely by the A2/B correction.
        let p = PartitionSpec::new(0, 1, 3, 1, 200).unwrap();
        let model = generate_model(p, 5, DesignKind::IidRows).unwrap().with_sigma(0.1);
        let data = observe(&model, 9);
        let r = ctls_columns(&data).unwrap();
        let resid = data.a.matmul(&r.x_hat).sub(&data.b);
        let a1 = data.a.submatrix(0..200, 0..1);
        assert!(a1.t_matmul(&resid).max_abs() < 1e-9 * (1.0 + data.b.frobenius_norm()));
    }
}
