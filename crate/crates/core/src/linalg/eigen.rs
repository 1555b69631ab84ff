//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 80;
const SIGN_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, values ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigenResult {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors; column `i` pairs with `values[i]`.
    pub vectors: Matrix,
}

impl SymEigenResult {
    /// First `count` eigenvector columns as an `n x count` matrix.
    pub fn leading_vectors(&self, count: usize) -> Matrix {
        self.vectors.submatrix(0..self.vectors.rows(), 0..count)
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as `(S + Sᵀ)/2` first. Rotations are applied
/// until every off-diagonal entry is negligible relative to the geometric
/// mean of its two diagonal entries, which keeps small eigenvalues of
/// Gram-type matrices accurate. Each eigenvector is normalized so that its
/// first entry with magnitude above `1e-12` is positive.
pub fn sym_eigen(s: &Matrix) -> Result<SymEigenResult> {
    if !s.is_square() {
        return Err(Error::NonSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    s.check_finite()?;
    let n = s.rows();
    let mut a = s.symmetrized();
    let mut v = Matrix::identity(n);

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
                rotated = true;
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(SymEigenResult { values, vectors })
}

/// Annihilates `a[p][q]` with a plane rotation and accumulates it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a[(r, p)] = new_rp;
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq;
        a[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

pub(crate) fn fix_sign(col: &mut [f64]) {
    if let Some(first) = col.iter().find(|x| x.abs() > SIGN_TOL) {
        if *first < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
