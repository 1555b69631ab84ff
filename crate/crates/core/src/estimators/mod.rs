//! Total least squares estimators for the errors-in-variables model.
//!
//! All estimators recover `X` from an orthonormal basis `Z` of an
//! `ℓ`-dimensional (approximate) null space of the data via
//! `X = -Z_upper Z_lower⁻¹`; they differ in which matrix is decomposed and
//! over which subspace.

mod blocks;
mod columns;
mod projection;
mod rowcol;
mod tls;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use blocks::{build_blocks, CBlocks};
pub use columns::{ctls_columns, ctls_columns_with};
pub use projection::{projection_estimator, projection_estimator_with};
pub use rowcol::{
    ctls_rowcol, ctls_rowcol_with, ctls_rows, ctls_rows_with, precondition_rowcol, reduced_gram, PreconditionRecord,
    ReducedGram,
};
pub use tls::tls_solve;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, singular_values, solve_linear, Matrix, DEFAULT_RANK_TOL};
use crate::model::ObservedData;

/// How the shift `μ ∈ [λ₁, λ_ℓ]` is picked from the smallest eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuChoice {
    Min,
    #[default]
    Mean,
    Max,
}

impl MuChoice {
    pub fn pick(self, smallest: &[f64]) -> f64 {
        match self {
            MuChoice::Min => smallest[0],
            MuChoice::Max => *smallest.last().unwrap(),
            MuChoice::Mean => smallest.iter().sum::<f64>() / smallest.len() as f64,
        }
    }
}

impl FromStr for MuChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "min" => Ok(MuChoice::Min),
            "mean" => Ok(MuChoice::Mean),
            "max" => Ok(MuChoice::Max),
            other => Err(format!("unknown mu choice '{other}' (expected min|mean|max)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Relative singular-value threshold for every rank decision.
    pub rank_tol: f64,
    pub mu: MuChoice,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            mu: MuChoice::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tls,
    CtlsColumns,
    CtlsRows,
    CtlsRowcol,
    Projection,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Tls,
        Method::CtlsColumns,
        Method::CtlsRows,
        Method::CtlsRowcol,
        Method::Projection,
    ];

    /// Name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Tls => "tls",
            Method::CtlsColumns => "ctls-cols",
            Method::CtlsRows => "ctls-rows",
            Method::CtlsRowcol => "ctls-rowcol",
            Method::Projection => "projection",
        }
    }

    /// Whether the method accepts the `(j, k, n)` structure at all.
    pub fn supports(self, j: usize, k: usize, n: usize) -> bool {
        match self {
            Method::Tls => j == 0 && k == 0,
            Method::CtlsColumns => j == 0 && k > 0 && k < n,
            Method::CtlsRows => k == 0 && j > 0 && j < n,
            Method::CtlsRowcol | Method::Projection => k < n && j < n,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected tls|ctls-cols|ctls-rows|ctls-rowcol|projection)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Warning {
    /// `λ_{ℓ+1} - λ_ℓ` is below `threshold`: the solution subspace is not
    /// unique and the reported basis is one deterministic choice.
    EigGapDegenerate { gap: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDecision {
    pub what: &'static str,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Smallest singular value of `Z_lower`.
    pub z_lower_min_sv: f64,
    /// Condition estimate of `C₂₁ᵀC₂₁` (`cond(R₁)²`), when `k > 0`.
    pub gram_condition: Option<f64>,
    /// `λ_{ℓ+1} - λ_ℓ` of the decomposed matrix, when it exists.
    pub eig_gap: Option<f64>,
    /// Ritz values of the projected problem (projection estimator).
    pub ritz_values: Vec<f64>,
    /// `‖A₁X̂ - B₁‖_F` over the exact rows, when `j > 0`.
    pub constraint_residual: Option<f64>,
    pub rank_decisions: Vec<RankDecision>,
    pub warnings: Vec<Warning>,
}

/// Estimate `X̂` plus the spectral quantities it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub x_hat: Matrix,
    /// Shift `μ` (projection estimator only).
    pub mu: Option<f64>,
    /// Noise-variance estimate, `μ/m` or mean of `smallest_eigs` over `m`.
    pub sigma2_hat: f64,
    /// The `ℓ` smallest eigen/Ritz values used, ascending.
    pub smallest_eigs: Vec<f64>,
    /// Number of rows `m` of the data the estimate came from.
    pub m: usize,
    pub diagnostics: Diagnostics,
}

/// `σ̂² = μ/m` when a shift was used, else the mean of the smallest
/// eigenvalues over `m`. Never negative.
pub fn estimate_sigma(result: &EstimateResult, m: usize) -> f64 {
    let num = match result.mu {
        Some(mu) => mu,
        None if result.smallest_eigs.is_empty() => 0.0,
        None => result.smallest_eigs.iter().sum::<f64>() / result.smallest_eigs.len() as f64,
    };
    (num / m as f64).max(0.0)
}

/// Runs `method` on `data`.
pub fn estimate(data: &ObservedData, method: Method, opts: &EstimatorOptions) -> Result<EstimateResult> {
    match method {
        Method::Tls => tls_solve(&data.a, &data.b),
        Method::CtlsColumns => ctls_columns_with(data, opts),
        Method::CtlsRows => ctls_rows_with(data, opts),
        Method::CtlsRowcol => ctls_rowcol_with(data, opts),
        Method::Projection => projection_estimator_with(data, opts),
    }
}

/// `X = -Z_upper Z_lower⁻¹` with `Z_upper` the first `split` rows.
///
/// Returns `X` and the smallest singular value of `Z_lower`.
pub(crate) fn solution_from_basis(z: &Matrix, split: usize) -> Result<(Matrix, f64)> {
    let ell = z.cols();
    assert_eq!(z.rows(), split + ell);
    let z_low = z.submatrix(split..split + ell, 0..ell);
    let min_sv = *singular_values(&z_low)?.last().unwrap();
    let z_up = z.submatrix(0..split, 0..ell);
    match solve_linear(&z_low.transpose(), &z_up.transpose().negated()) {
        Ok(xt) => Ok((xt.transpose(), min_sv)),
        Err(Error::NearSingular { .. }) => Err(Error::LowerBlockSingular {
            min_singular_value: min_sv,
        }),
        Err(e) => Err(e),
    }
}

/// Gap between the `ℓ`-th and `(ℓ+1)`-th values plus an optional warning.
pub(crate) fn gap_check(values: &[f64], ell: usize, scale: f64) -> (Option<f64>, Option<Warning>) {
    if values.len() <= ell {
        return (None, None);
    }
    let gap = values[ell] - values[ell - 1];
    let threshold = 1e-10 * scale;
    let warn = (gap < threshold).then_some(Warning::EigGapDegenerate { gap, threshold });
    (Some(gap), warn)
}

/// Checks `rank([A₁₁ A₁₂]) = j` on the exact rows.
pub(crate) fn check_upper_rows(data: &ObservedData, rank_tol: f64, diag: &mut Diagnostics) -> Result<()> {
    let p = data.partition;
    if p.j == 0 {
        return Ok(());
    }
    let upper = data.a.submatrix(0..p.j, 0..p.n);
    let sv = singular_values(&upper)?;
    let rank = numerical_rank(&sv, rank_tol);
    diag.rank_decisions.push(RankDecision {
        what: "fixed rows [A11 A12]",
        rank,
        singular_values: sv,
    });
    if rank < p.j {
        return Err(Error::RankDeficientUpperRows { rank, expected: p.j });
    }
    Ok(())
}

pub(crate) fn constraint_residual(data: &ObservedData, x: &Matrix) -> Option<f64> {
    let p = data.partition;
    (p.j > 0).then(|| {
        let a1 = data.a.submatrix(0..p.j, 0..p.n);
        let b1 = data.b.submatrix(0..p.j, 0..p.ell);
        a1.matmul(x).sub(&b1).frobenius_norm()
    })
}

pub(crate) fn require_noisy_columns(data: &ObservedData) -> Result<()> {
    let p = data.partition;
    if p.k >= p.n {
        return Err(Error::InvalidPartition(format!(
            "all {} columns of A are fixed; nothing to estimate by total least squares",
            p.n
        )));
    }
    Ok(())
}
