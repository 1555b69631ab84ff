//! Householder QR with a nonnegative diagonal on `R₁`.

use crate::error::{Error, Result};
use crate::linalg::{Block, Matrix};

/// QR factorization `M = Q [R₁; 0]` of an `m x k` matrix with `m >= k`.
///
/// `Q` is kept in factored form (Householder vectors plus a column sign
/// fix), so applying `Qᵀ` to tall data never materializes the `m x m`
/// orthogonal factor. [`QrResult::q_full`] builds it explicitly when needed.
#[derive(Debug, Clone)]
pub struct QrResult {
    rows: usize,
    reflectors: Vec<Reflector>,
    signs: Vec<f64>,
    r_top: Matrix,
}

#[derive(Debug, Clone)]
struct Reflector {
    offset: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    /// `M <- (I - beta v vᵀ) M` restricted to rows `offset..`.
    fn apply(&self, m: &mut Matrix) {
        if self.beta == 0.0 {
            return;
        }
        let cols = m.cols();
        let mut w = vec![0.0; cols];
        for (i, &vi) in self.v.iter().enumerate() {
            for (wc, &x) in w.iter_mut().zip(m.row(self.offset + i)) {
                *wc += vi * x;
            }
        }
        for (i, &vi) in self.v.iter().enumerate() {
            let f = self.beta * vi;
            for (x, &wc) in m.row_mut(self.offset + i).iter_mut().zip(&w) {
                *x -= f * wc;
            }
        }
    }
}

/// Householder QR of a tall (or square) matrix.
pub fn qr_decompose(m: &Matrix) -> Result<QrResult> {
    let (rows, k) = m.shape();
    if rows < k {
        return Err(Error::WideMatrix { rows, cols: k });
    }
    m.check_finite()?;
    let mut work = m.clone();
    let mut reflectors = Vec::with_capacity(k);
    for j in 0..k {
        let x: Vec<f64> = (j..rows).map(|i| work[(i, j)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let refl = if norm == 0.0 || (x.len() == 1) {
            Reflector {
                offset: j,
                v: vec![1.0],
                beta: 0.0,
            }
        } else {
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x;
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|a| a * a).sum();
            if vtv == 0.0 {
                Reflector {
                    offset: j,
                    v: vec![1.0],
                    beta: 0.0,
                }
            } else {
                Reflector {
                    offset: j,
                    v,
                    beta: 2.0 / vtv,
                }
            }
        };
        refl.apply(&mut work);
        for i in j + 1..rows {
            work[(i, j)] = 0.0;
        }
        reflectors.push(refl);
    }
    let mut r_top = work.submatrix(0..k, 0..k);
    let mut signs = vec![1.0; k];
    for i in 0..k {
        if r_top[(i, i)] < 0.0 {
            signs[i] = -1.0;
            for c in 0..k {
                r_top[(i, c)] = -r_top[(i, c)];
            }
        }
        for c in 0..i {
            r_top[(i, c)] = 0.0;
        }
    }
    Ok(QrResult {
        rows,
        reflectors,
        signs,
        r_top,
    })
}

impl QrResult {
    /// Upper-triangular `k x k` factor with nonnegative diagonal.
    pub fn r_top(&self) -> &Matrix {
        &self.r_top
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank_columns(&self) -> usize {
        self.r_top.cols()
    }

    /// `Qᵀ M` for `M` with `m` rows.
    pub fn apply_qt(&self, m: &Matrix) -> Matrix {
        assert_eq!(m.rows(), self.rows, "apply_qt row mismatch");
        let mut out = m.clone();
        for refl in &self.reflectors {
            refl.apply(&mut out);
        }
        for (i, &s) in self.signs.iter().enumerate() {
            if s < 0.0 {
                out.row_mut(i).iter_mut().for_each(|x| *x = -*x);
            }
        }
        out
    }

    /// `Q M` for `M` with `m` rows.
    pub fn apply_q(&self, m: &Matrix) -> Matrix {
        assert_eq!(m.rows(), self.rows, "apply_q row mismatch");
        let mut out = m.clone();
        for (i, &s) in self.signs.iter().enumerate() {
            if s < 0.0 {
                out.row_mut(i).iter_mut().for_each(|x| *x = -*x);
            }
        }
        for refl in self.reflectors.iter().rev() {
            refl.apply(&mut out);
        }
        out
    }

    /// The full `m x m` orthogonal factor.
    pub fn q_full(&self) -> Matrix {
        self.apply_q(&Matrix::identity(self.rows))
    }

    /// First `k` columns of `Q`.
    pub fn q1(&self) -> Matrix {
        let k = self.r_top.cols();
        let e = Matrix::from_fn(self.rows, k, |i, j| if i == j { 1.0 } else { 0.0 });
        self.apply_q(&e)
    }

    /// Remaining `m - k` columns of `Q`; empty when `m == k`.
    pub fn q2(&self) -> Block {
        let k = self.r_top.cols();
        if self.rows == k {
            return Block::Empty {
                rows: self.rows,
                cols: 0,
            };
        }
        let e = Matrix::from_fn(self.rows, self.rows - k, |i, j| if i == j + k { 1.0 } else { 0.0 });
        Block::Dense(self.apply_q(&e))
    }
}
