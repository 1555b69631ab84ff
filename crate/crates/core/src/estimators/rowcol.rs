use crate::error::{Error, Result};
use crate::linalg::{
    numerical_rank, qr_decompose, rank_split, singular_values, solve_upper_triangular, svd, sym_eigen, Block, Matrix,
};
use crate::model::{ObservedData, PartitionSpec};

use super::{
    build_blocks, check_upper_rows, constraint_residual, gap_check, require_noisy_columns, solution_from_basis,
    tls_solve, CBlocks, Diagnostics, EstimateResult, EstimatorOptions, RankDecision,
};

/// Factors of the fixed-block reduction, enough to map a reduced solution
/// back to the original coordinates.
///
/// With `A₁₁ = UΣVᵀ` of rank `r`, the fixed rows are rotated by `Uᵀ` and the
/// fixed columns by `V`. The first `r` rotated rows then read
/// `σᵢyᵢ + P_A x₂ = P_B`, which eliminates `y₁..y_r` from every other row.
/// The reduced problem has `j - r` fixed rows, `k - r` fixed columns and a
/// zero upper-left block.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionRecord {
    /// Partition of the original problem.
    pub original: PartitionSpec,
    /// Number of eliminated pivots, `rank(A₁₁)`.
    pub rank: usize,
    /// Left factor `U` (`j x j`); absent for the identity transform.
    pub u: Option<Matrix>,
    /// Right factor `V` (`k x k`); absent for the identity transform.
    pub v: Option<Matrix>,
    /// Leading `r` singular values of `A₁₁`.
    pub sigma: Vec<f64>,
    /// First `r` rows of `UᵀA₁₂`.
    pub pivot_a: Block,
    /// First `r` rows of `UᵀB₁`.
    pub pivot_b: Block,
    /// Singular values of `A₁₁` behind the rank decision.
    pub a11_singular_values: Vec<f64>,
}

impl PreconditionRecord {
    pub fn identity(partition: PartitionSpec) -> Self {
        Self {
            original: partition,
            rank: 0,
            u: None,
            v: None,
            sigma: Vec::new(),
            pivot_a: Block::Empty {
                rows: 0,
                cols: partition.n - partition.k,
            },
            pivot_b: Block::Empty {
                rows: 0,
                cols: partition.ell,
            },
            a11_singular_values: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rank == 0
    }

    /// Partition of the reduced problem.
    pub fn reduced_partition(&self) -> PartitionSpec {
        let p = self.original;
        let r = self.rank;
        PartitionSpec {
            j: p.j - r,
            k: p.k - r,
            n: p.n - r,
            ell: p.ell,
            m: p.m - r,
        }
    }

    /// Applies the same reduction to another data set with identical fixed
    /// blocks (for example the noise-free counterpart of an observation).
    pub fn apply(&self, blocks: &CBlocks) -> CBlocks {
        assert_eq!(blocks.partition, self.original, "partition mismatch");
        if self.is_identity() {
            return blocks.clone();
        }
        let p = self.original;
        let r = self.rank;
        let width = p.noisy_cols();
        let u = self.u.as_ref().expect("non-identity record has U");
        let v = self.v.as_ref().expect("non-identity record has V");
        let c12 = blocks.c12.dense().expect("j > 0");
        let c21 = blocks.c21.dense().expect("k > 0");
        let c22 = blocks.c22.dense().expect("C22 is never empty");

        let c12u = u.t_matmul(c12);
        let c21v = c21.matmul(v);
        let lower = p.m - p.j;
        let l = Matrix::from_fn(lower, r, |i, c| c21v[(i, c)] / self.sigma[c]);
        let pivots = c12u.submatrix(0..r, 0..width);
        let c22_new = c22.sub(&l.matmul(&pivots));

        let (j2, k2) = (p.j - r, p.k - r);
        CBlocks {
            c11: Block::from_fn(j2, k2, |_, _| 0.0),
            c12: c12u.block(r..p.j, 0..width),
            c21: c21v.block(0..lower, r..p.k),
            c22: Block::Dense(c22_new),
            partition: self.reduced_partition(),
        }
    }

    /// Maps `[y_rest; x₂]` of the reduced problem to `X` of the original:
    /// `y_r = Σ_r⁻¹(P_B - P_A x₂)`, `X₁ = V[y_r; y_rest]`.
    pub fn recover(&self, x_reduced: &Matrix) -> Matrix {
        if self.is_identity() {
            return x_reduced.clone();
        }
        let p = self.original;
        let r = self.rank;
        let k2 = p.k - r;
        let nk = p.n - p.k;
        assert_eq!(x_reduced.rows(), k2 + nk, "reduced solution has wrong height");
        let ell = x_reduced.cols();
        let x2 = x_reduced.submatrix(k2..k2 + nk, 0..ell);
        let pa = self.pivot_a.dense().expect("r > 0");
        let pb = self.pivot_b.dense().expect("r > 0");
        let rhs = pb.sub(&pa.matmul(&x2));
        let y_r = Matrix::from_fn(r, ell, |i, c| rhs[(i, c)] / self.sigma[i]);
        let y = if k2 > 0 {
            y_r.vstack(&x_reduced.submatrix(0..k2, 0..ell))
        } else {
            y_r
        };
        self.v.as_ref().expect("r > 0").matmul(&y).vstack(&x2)
    }
}

/// Reduces a problem with `j > 0` fixed rows and `k > 0` fixed columns to
/// one whose upper-left block is zero.
///
/// Rank decisions on `A₁₁` use `rank_tol` relative to its largest singular
/// value; singular values below it are treated as exact zeros. When
/// `rank(A₁₁) = 0` the transform is the identity.
pub fn precondition_rowcol(blocks: &CBlocks, rank_tol: f64) -> Result<(CBlocks, PreconditionRecord)> {
    let p = blocks.partition;
    let Some(a11) = blocks.c11.dense() else {
        return Err(Error::InvalidPartition(format!(
            "preconditioning needs j > 0 and k > 0 (j={}, k={})",
            p.j, p.k
        )));
    };
    let s = svd(a11)?;
    let rank = s.rank(rank_tol);
    let mut record = PreconditionRecord::identity(p);
    record.a11_singular_values = s.singular_values.clone();
    if rank == 0 {
        let mut reduced = blocks.clone();
        reduced.c11 = Block::from_fn(p.j, p.k, |_, _| 0.0);
        return Ok((reduced, record));
    }
    let nk = p.n - p.k;
    let width = p.noisy_cols();
    let c12u = s.u.t_matmul(blocks.c12.dense().expect("j > 0"));
    record.rank = rank;
    record.sigma = s.singular_values[..rank].to_vec();
    record.pivot_a = c12u.block(0..rank, 0..nk);
    record.pivot_b = c12u.block(0..rank, nk..width);
    record.u = Some(s.u);
    record.v = Some(s.v);
    let reduced = record.apply(blocks);
    Ok((reduced, record))
}

/// Quantities of a reduced problem (zero upper-left block) that the Ritz
/// step and the recovery need.
#[derive(Debug, Clone)]
pub struct ReducedGram {
    /// Orthonormal basis of `null(C₁₂)`, or `I` without fixed rows.
    pub p_tilde: Matrix,
    /// Orthonormal basis of `range(C₁₂ᵀ)`, when there are fixed rows.
    pub p_tilde0: Block,
    /// Schur complement `C₂₂ᵀC₂₂ - C₂₂ᵀC₂₁(C₂₁ᵀC₂₁)⁻¹C₂₁ᵀC₂₂`.
    pub g: Matrix,
    /// `R₁` of `C₂₁ = Q₁R₁`, when there are fixed columns.
    pub r1: Option<Matrix>,
    /// `Q₁ᵀC₂₂`, when there are fixed columns.
    pub q1t_c22: Option<Matrix>,
    pub gram_condition: Option<f64>,
    pub rank_decisions: Vec<RankDecision>,
}

/// Builds `P̃` and `G` for a reduced problem.
///
/// `G` is formed as `MᵀM` with `M` the rows of `QᵀC₂₂` below the first `k`,
/// which equals the Schur complement without inverting `C₂₁ᵀC₂₁`.
pub fn reduced_gram(blocks: &CBlocks, rank_tol: f64) -> Result<ReducedGram> {
    let p = blocks.partition;
    if blocks.c11.max_abs() != 0.0 {
        return Err(Error::InvalidPartition(
            "reduced problem must have a zero upper-left block".into(),
        ));
    }
    let width = p.noisy_cols();
    let c22 = blocks.c22.dense().expect("C22 is never empty");
    let mut rank_decisions = Vec::new();

    let (g, r1, q1t_c22, gram_condition) = match blocks.c21.dense() {
        None => (c22.gram(), None, None, None),
        Some(c21) => {
            let k = c21.cols();
            let qr = qr_decompose(c21)?;
            let r1 = qr.r_top().clone();
            let sv = singular_values(&r1)?;
            let rank = numerical_rank(&sv, rank_tol);
            let cond = (sv[0] / sv[k - 1]).powi(2);
            rank_decisions.push(RankDecision {
                what: "fixed columns C21",
                rank,
                singular_values: sv,
            });
            if rank < k {
                return Err(Error::RankDeficientFixedColumns { rank, expected: k });
            }
            let qt = qr.apply_qt(c22);
            let lower_rows = qt.rows();
            let g = if lower_rows > k {
                qt.submatrix(k..lower_rows, 0..width).gram()
            } else {
                Matrix::zeros(width, width)
            };
            (g, Some(r1), Some(qt.submatrix(0..k, 0..width)), Some(cond))
        }
    };

    let (p_tilde, p_tilde0) = match blocks.c12.dense() {
        None => (Matrix::identity(width), Block::Empty { rows: width, cols: 0 }),
        Some(c12) => {
            let split = rank_split(c12, rank_tol)?;
            rank_decisions.push(RankDecision {
                what: "reduced fixed rows C12",
                rank: split.rank,
                singular_values: split.singular_values.clone(),
            });
            if split.rank < p.j {
                return Err(Error::RankDeficientUpperRows {
                    rank: split.rank,
                    expected: p.j,
                });
            }
            let null = split
                .null
                .dense()
                .cloned()
                .ok_or(Error::FullRank { rank: split.rank })?;
            if null.cols() < p.ell {
                return Err(Error::InvalidPartition(format!(
                    "null space of the fixed rows has dimension {} < ell={}",
                    null.cols(),
                    p.ell
                )));
            }
            (null, split.range)
        }
    };

    Ok(ReducedGram {
        p_tilde,
        p_tilde0,
        g,
        r1,
        q1t_c22,
        gram_condition,
        rank_decisions,
    })
}

/// Total least squares with exact leading rows and exact leading columns.
pub fn ctls_rowcol(data: &ObservedData) -> Result<EstimateResult> {
    ctls_rowcol_with(data, &EstimatorOptions::default())
}

/// [`ctls_rowcol`] with explicit options.
///
/// `j = k = 0` is plain [`tls_solve`]. Otherwise the fixed blocks are reduced
/// by [`precondition_rowcol`], the Ritz problem `P̃ᵀGP̃` gives the noisy
/// coordinates, the remaining fixed-column coordinates come from
/// `R₁Y = Q₁ᵀB₂ - Q₁ᵀA₂₂X₂`, and the reduction is undone.
pub fn ctls_rowcol_with(data: &ObservedData, opts: &EstimatorOptions) -> Result<EstimateResult> {
    let p = data.partition;
    if p.j == 0 && p.k == 0 {
        return tls_solve(&data.a, &data.b);
    }
    require_noisy_columns(data)?;
    let mut diag = Diagnostics::default();
    check_upper_rows(data, opts.rank_tol, &mut diag)?;

    let blocks = build_blocks(data);
    let (reduced, record) = if p.j > 0 && p.k > 0 {
        let (reduced, record) = precondition_rowcol(&blocks, opts.rank_tol)?;
        diag.rank_decisions.push(RankDecision {
            what: "A11",
            rank: record.rank,
            singular_values: record.a11_singular_values.clone(),
        });
        (reduced, record)
    } else {
        (blocks, PreconditionRecord::identity(p))
    };
    let rg = reduced_gram(&reduced, opts.rank_tol)?;
    diag.rank_decisions.extend(rg.rank_decisions.iter().cloned());
    diag.gram_condition = rg.gram_condition;

    let nk = p.n - p.k;
    let ptgp = rg.p_tilde.t_matmul(&rg.g.matmul(&rg.p_tilde));
    let eig = sym_eigen(&ptgp)?;
    let z = rg.p_tilde.matmul(&eig.leading_vectors(p.ell));
    let (x2, z_min) = solution_from_basis(&z, nk)?;

    let x_reduced = match (&rg.r1, &rg.q1t_c22) {
        (Some(r1), Some(top)) => {
            let width = top.cols();
            let k2 = top.rows();
            let top_a = top.submatrix(0..k2, 0..nk);
            let top_b = top.submatrix(0..k2, nk..width);
            solve_upper_triangular(r1, &top_b.sub(&top_a.matmul(&x2))).vstack(&x2)
        }
        _ => x2,
    };
    let x_hat = record.recover(&x_reduced);

    let smallest = eig.values[..p.ell].to_vec();
    let (eig_gap, warning) = gap_check(&eig.values, p.ell, rg.g.frobenius_norm());
    diag.z_lower_min_sv = z_min;
    diag.eig_gap = eig_gap;
    diag.warnings.extend(warning);
    diag.ritz_values = eig.values.clone();
    diag.constraint_residual = constraint_residual(data, &x_hat);

    Ok(EstimateResult {
        x_hat,
        mu: None,
        sigma2_hat: (smallest.iter().sum::<f64>() / p.ell as f64 / p.m as f64).max(0.0),
        smallest_eigs: smallest,
        m: p.m,
        diagnostics: diag,
    })
}

/// Total least squares with the first `j` rows of `[A B]` exact (`k = 0`).
pub fn ctls_rows(data: &ObservedData) -> Result<EstimateResult> {
    ctls_rows_with(data, &EstimatorOptions::default())
}

pub fn ctls_rows_with(data: &ObservedData, opts: &EstimatorOptions) -> Result<EstimateResult> {
    let p = data.partition;
    if p.k != 0 || p.j == 0 || p.j >= p.n {
        return Err(Error::InvalidPartition(format!(
            "row-constrained TLS needs k = 0 and 0 < j < n (j={}, k={}, n={})",
            p.j, p.k, p.n
        )));
    }
    ctls_rowcol_with(data, opts)
}
