//! One-sided Jacobi SVD, null-space bases and rank decisions.

use crate::error::{Error, Result};
use crate::linalg::eigen::fix_sign;
use crate::linalg::qr::qr_decompose;
use crate::linalg::{Block, Matrix};

const MAX_SWEEPS: usize = 80;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// `M = U diag(σ) Vᵀ` with full square orthogonal `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Matrix,
    /// Nonincreasing, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Number of singular values above `rank_tol * σ_max`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        numerical_rank(&self.singular_values, rank_tol)
    }
}

pub fn numerical_rank(singular_values: &[f64], rank_tol: f64) -> usize {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Orthogonalizes the columns in place; returns the accumulated right
/// rotations (`cols x cols`).
fn jacobi_columns(cols: &mut [Vec<f64>]) -> Result<Matrix> {
    let n = cols.len();
    let mut v = Matrix::identity(n);
    if n < 2 {
        return Ok(v);
    }
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        a += x * x;
                        b += y * y;
                        g += x * y;
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                for r in 0..n {
                    let (vp, vq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

fn tall_svd(m: &Matrix) -> Result<SvdResult> {
    let (rows, n) = m.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let v_rot = jacobi_columns(&mut cols)?;
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let smax = singular_values[0];
    let cutoff = smax * f64::EPSILON * rows.max(n) as f64;

    let mut v = Matrix::zeros(n, n);
    let mut good: Vec<Vec<f64>> = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let mut vcol = v_rot.column(src);
        let flip = vcol.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0);
        if flip {
            vcol.iter_mut().for_each(|x| *x = -*x);
        }
        v.set_column(dst, &vcol);
        if norms[src] > cutoff && norms[src] > 0.0 {
            let sgn = if flip { -1.0 } else { 1.0 };
            good.push(cols[src].iter().map(|x| sgn * x / norms[src]).collect());
        }
    }

    let r = good.len();
    let mut u = Matrix::zeros(rows, rows);
    for (j, col) in good.iter().enumerate() {
        u.set_column(j, col);
    }
    if r < rows {
        let complement = if r == 0 {
            Matrix::identity(rows)
        } else {
            let basis = Matrix::from_fn(rows, r, |i, j| good[j][i]);
            qr_decompose(&basis)?.q_full()
        };
        for j in r..rows {
            let mut col = complement.column(j);
            fix_sign(&mut col);
            u.set_column(j, &col);
        }
    }
    Ok(SvdResult { u, singular_values, v })
}

/// Full singular value decomposition.
///
/// Suited to the small blocks the estimators decompose; `U` is `m x m`.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    m.check_finite()?;
    if m.rows() >= m.cols() {
        tall_svd(m)
    } else {
        let t = tall_svd(&m.transpose())?;
        Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        })
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    m.check_finite()?;
    let t;
    let src = if m.rows() >= m.cols() {
        m
    } else {
        t = m.transpose();
        &t
    };
    let mut cols: Vec<Vec<f64>> = (0..src.cols()).map(|j| src.column(j)).collect();
    jacobi_columns(&mut cols)?;
    let mut s: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Row-space and null-space bases of `M` (`p x q`) from its right singular
/// vectors.
#[derive(Debug, Clone)]
pub struct RankSplit {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// `q x rank` orthonormal basis of `range(Mᵀ)`.
    pub range: Block,
    /// `q x (q - rank)` orthonormal basis of `null(M)`.
    pub null: Block,
}

pub fn rank_split(m: &Matrix, rank_tol: f64) -> Result<RankSplit> {
    let s = svd(m)?;
    let q = m.cols();
    let rank = s.rank(rank_tol);
    let range = Block::from_fn(q, rank, |i, j| s.v[(i, j)]);
    let null = Block::from_fn(q, q - rank, |i, j| s.v[(i, rank + j)]);
    Ok(RankSplit {
        rank,
        singular_values: s.singular_values,
        range,
        null,
    })
}

/// Orthonormal basis `P` of the null space of `M`, so `PᵀP = I` and `MP = 0`.
///
/// Singular values at or below `rank_tol * σ_max` count as zero.
pub fn null_space_basis(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let split = rank_split(m, rank_tol)?;
    match split.null {
        Block::Dense(p) => Ok(p),
        Block::Empty { .. } => Err(Error::FullRank { rank: split.rank }),
    }
}
