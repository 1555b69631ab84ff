use crate::error::{Error, Result};
use crate::linalg::svd::singular_values;
use crate::linalg::Matrix;

/// Relative threshold on `σ_min / σ_max` below which a system is refused.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Condition number `σ_max / σ_min` (infinite when singular).
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let s = singular_values(a)?;
    let smax = s[0];
    let smin = *s.last().unwrap();
    Ok(if smin == 0.0 { f64::INFINITY } else { smax / smin })
}

/// Solves `A X = B` for square nonsingular `A` by LU with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: A is {}x{}, B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    b.check_finite()?;
    let s = singular_values(a)?;
    let smax = s[0];
    let smin = *s.last().unwrap();
    if smax == 0.0 || smin <= SINGULAR_TOL * smax {
        return Err(Error::NearSingular {
            condition: if smin == 0.0 { f64::INFINITY } else { smax / smin },
        });
    }
    Ok(lu_solve(a, b))
}

fn lu_solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().total_cmp(&lu[(j, col)].abs()))
            .unwrap();
        if pivot != col {
            for c in 0..n {
                let tmp = lu[(col, c)];
                lu[(col, c)] = lu[(pivot, c)];
                lu[(pivot, c)] = tmp;
            }
            for c in 0..x.cols() {
                let tmp = x[(col, c)];
                x[(col, c)] = x[(pivot, c)];
                x[(pivot, c)] = tmp;
            }
        }
        let d = lu[(col, col)];
        for r in col + 1..n {
            let f = lu[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            lu[(r, col)] = 0.0;
            for c in col + 1..n {
                lu[(r, c)] -= f * lu[(col, c)];
            }
            for c in 0..x.cols() {
                x[(r, c)] -= f * x[(col, c)];
            }
        }
    }
    for c in 0..x.cols() {
        for r in (0..n).rev() {
            let mut acc = x[(r, c)];
            for k in r + 1..n {
                acc -= lu[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = acc / lu[(r, r)];
        }
    }
    x
}

/// Back substitution `R X = B` for upper-triangular `R`.
pub(crate) fn solve_upper_triangular(r: &Matrix, b: &Matrix) -> Matrix {
    let n = r.rows();
    let mut x = b.clone();
    for c in 0..x.cols() {
        for i in (0..n).rev() {
            let mut acc = x[(i, c)];
            for k in i + 1..n {
                acc -= r[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = acc / r[(i, i)];
        }
    }
    x
}
