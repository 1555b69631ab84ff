//! Brute-force checks of estimator output.
//!
//! Nothing here calls the decompositions in [`crate::linalg`]; the small
//! factorizations needed (Cholesky of an `ℓ x ℓ` matrix, Gram–Schmidt for a
//! null-space basis) are implemented locally so that a bug in a shared
//! kernel cannot hide itself.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CBlocks;
use crate::linalg::Matrix;
use crate::rng::seeded_rng;

/// Relative feasibility tolerance on the exact rows.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Minimal perturbation cost of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveProbe {
    pub x_candidate: Matrix,
    /// `‖ΔA‖² + ‖ΔB‖²` at the optimal perturbation; `+∞` when infeasible.
    pub objective: f64,
    pub feasible: bool,
    /// `‖[A₁₁ A₁₂]x - B₁‖_F` (zero without fixed rows).
    pub constraint_residual: f64,
}

impl ObjectiveProbe {
    /// The objective, or [`Error::InfeasibleCandidate`].
    pub fn value(&self) -> Result<f64> {
        if self.feasible {
            Ok(self.objective)
        } else {
            Err(Error::InfeasibleCandidate {
                residual: self.constraint_residual,
            })
        }
    }
}

/// `min ‖[ΔA ΔB]‖²` subject to `(A + ΔA)X = B + ΔB` for fixed `X`.
///
/// Each row `rᵢ` of `R = AX - B` is removed at cost `rᵢM⁻¹rᵢᵀ` with
/// `M = XᵀX + I`, so the total is `trace(M⁻¹RᵀR)`.
pub fn tls_objective(a: &Matrix, b: &Matrix, x: &Matrix) -> f64 {
    assert_eq!(a.cols(), x.rows(), "A and X do not conform");
    assert_eq!(b.cols(), x.cols(), "B and X do not conform");
    let r = a.matmul(x).sub(b);
    weighted_residual(&r, x)
}

/// Objective of the row- and column-constrained problem.
///
/// Only `[A₂₂ B₂]` may be perturbed, so the lower residual
/// `R = A₂₁X₁ + A₂₂X₂ - B₂` is absorbed at cost `trace(N⁻¹RᵀR)` with
/// `N = X₂ᵀX₂ + I`. Candidates that break the exact rows by more than
/// `1e-8·(1 + ‖B₁‖_F)` are reported infeasible.
pub fn constrained_objective(blocks: &CBlocks, x: &Matrix) -> ObjectiveProbe {
    let p = blocks.partition;
    assert_eq!(x.shape(), (p.n, p.ell), "candidate has wrong shape");
    let c = blocks.assemble();
    let a = c.submatrix(0..p.m, 0..p.n);
    let b = c.submatrix(0..p.m, p.n..p.n + p.ell);
    let resid = a.matmul(x).sub(&b);

    let (constraint_residual, b1_norm) = if p.j > 0 {
        (
            resid.submatrix(0..p.j, 0..p.ell).frobenius_norm(),
            b.submatrix(0..p.j, 0..p.ell).frobenius_norm(),
        )
    } else {
        (0.0, 0.0)
    };
    let feasible = constraint_residual <= FEASIBILITY_TOL * (1.0 + b1_norm);
    let objective = if feasible {
        let lower = resid.submatrix(p.j..p.m, 0..p.ell);
        let x2 = x.submatrix(p.k..p.n, 0..p.ell);
        weighted_residual(&lower, &x2)
    } else {
        f64::INFINITY
    };
    ObjectiveProbe {
        x_candidate: x.clone(),
        objective,
        feasible,
        constraint_residual,
    }
}

/// `trace((XᵀX + I)⁻¹ RᵀR)` via `‖R L⁻ᵀ‖²` with `XᵀX + I = LLᵀ`.
fn weighted_residual(r: &Matrix, x: &Matrix) -> f64 {
    let ell = x.cols();
    let mut m = x.gram();
    for i in 0..ell {
        m[(i, i)] += 1.0;
    }
    let l = small_cholesky(&m);
    let mut total = 0.0;
    for i in 0..r.rows() {
        // Solve L y = rᵢᵀ; the row cost is ‖y‖².
        let mut y = vec![0.0; ell];
        for a in 0..ell {
            let mut acc = r[(i, a)];
            for b in 0..a {
                acc -= l[a][b] * y[b];
            }
            y[a] = acc / l[a][a];
        }
        total += y.iter().map(|v| v * v).sum::<f64>();
    }
    total
}

/// Cholesky of a matrix known to be `≥ I`.
fn small_cholesky(m: &Matrix) -> Vec<Vec<f64>> {
    let n = m.rows();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = m[(i, j)];
            for p in 0..j {
                acc -= l[i][p] * l[j][p];
            }
            l[i][j] = if i == j { acc.sqrt() } else { acc / l[j][j] };
        }
    }
    l
}

/// Orthonormal basis of `null([A₁₁ A₁₂])` (`n x (n - j)`); `I` when `j = 0`.
///
/// Rows are orthonormalized by twice-applied modified Gram–Schmidt, then
/// the unit vectors are orthogonalized against them and kept whenever
/// something substantial is left.
pub fn upper_null_basis(blocks: &CBlocks) -> Matrix {
    let p = blocks.partition;
    if p.j == 0 {
        return Matrix::identity(p.n);
    }
    let c = blocks.assemble();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..p.j {
        let v = c.row(i)[..p.n].to_vec();
        if let Some(q) = orthonormalize(v, &basis) {
            basis.push(q);
        }
    }
    let row_rank = basis.len();
    for e in 0..p.n {
        if basis.len() == p.n {
            break;
        }
        let mut v = vec![0.0; p.n];
        v[e] = 1.0;
        if let Some(q) = orthonormalize(v, &basis) {
            basis.push(q);
        }
    }
    let null = &basis[row_rank..];
    Matrix::from_fn(p.n, null.len(), |i, j| null[j][i])
}

fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..2 {
        for q in basis {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-8 * start.max(1.0) {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    Some(v)
}

/// Candidates `center + WΔ` with `W` an orthonormal basis of the null space
/// of the exact rows and `Δ` seeded Gaussian scaled to `‖WΔ‖_F = radius`.
pub fn feasible_sampler(blocks: &CBlocks, center: &Matrix, radius: f64, count: usize, seed: u64) -> Vec<Matrix> {
    let p = blocks.partition;
    assert_eq!(center.shape(), (p.n, p.ell), "center has wrong shape");
    let w = upper_null_basis(blocks);
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            if radius == 0.0 || w.cols() == 0 {
                return center.clone();
            }
            let delta = Matrix::from_fn(w.cols(), p.ell, |_, _| StandardNormal.sample(&mut rng));
            let step = w.matmul(&delta);
            let norm = step.frobenius_norm();
            center.add(&step.scale(radius / norm))
        })
        .collect()
}

/// Result of a local-optimality probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalProbe {
    pub center_objective: f64,
    pub best_candidate_objective: f64,
    pub candidates: usize,
    /// Candidates whose objective is below the center's.
    pub violations: usize,
}

/// Compares the objective at `center` with `count` feasible candidates at
/// each radius. `rel_slack` absorbs rounding in the comparison.
pub fn local_optimality(
    blocks: &CBlocks,
    center: &Matrix,
    radii: &[f64],
    count: usize,
    seed: u64,
    rel_slack: f64,
) -> Result<LocalProbe> {
    let center_objective = constrained_objective(blocks, center).value()?;
    let mut best = f64::INFINITY;
    let mut violations = 0;
    let mut total = 0;
    for (i, &radius) in radii.iter().enumerate() {
        for cand in feasible_sampler(blocks, center, radius, count, crate::rng::derive_seed(seed, i as u64)) {
            let obj = constrained_objective(blocks, &cand).objective;
            best = best.min(obj);
            total += 1;
            if obj < center_objective * (1.0 - rel_slack) - rel_slack {
                violations += 1;
            }
        }
    }
    Ok(LocalProbe {
        center_objective,
        best_candidate_objective: best,
        candidates: total,
        violations,
    })
}

/// Grid minimizer of `q(x) = ‖ax - b‖²/(1 + x²)` for a single regressor.
///
/// `x = tan θ` with `θ` on `points` midpoints of `(-π/2, π/2)`, so the grid
/// covers the whole real line. Returns `(x, q(x), θ-spacing)`.
pub fn grid_argmin_1d(a: &[f64], b: &[f64], points: usize) -> (f64, f64, f64) {
    assert_eq!(a.len(), b.len());
    let (saa, sab, sbb) = a.iter().zip(b).fold((0.0, 0.0, 0.0), |(aa, ab, bb), (&x, &y)| {
        (aa + x * x, ab + x * y, bb + y * y)
    });
    let h = std::f64::consts::PI / points as f64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..points {
        let theta = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h;
        // q(tan θ) = saa sin²θ - 2 sab sinθ cosθ + sbb cos²θ
        let (s, c) = theta.sin_cos();
        let q = saa * s * s - 2.0 * sab * s * c + sbb * c * c;
        if q < best.1 {
            best = (theta, q);
        }
    }
    (best.0.tan(), best.1, h)
}
