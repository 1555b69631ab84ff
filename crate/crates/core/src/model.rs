//! Synthetic errors-in-variables regression instances.
//!
//! A model fixes the noise-free data `Ā`, `B̄ = ĀX` and the true `X`. The
//! leading `j` rows and leading `k` columns of `A` are observed exactly;
//! noise is added only to the lower-right block `[A₂₂ B₂]`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, singular_values, solve_linear, Block, Matrix, DEFAULT_RANK_TOL};
use crate::rng::{derive_seed, seeded_rng, SimRng};

const STREAM_DESIGN: u64 = 1;
const STREAM_X: u64 = 2;

/// Block structure of an instance.
///
/// `j` leading rows of `[A B]` and `k` leading columns of `A` are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub j: usize,
    pub k: usize,
    pub n: usize,
    pub ell: usize,
    pub m: usize,
}

impl PartitionSpec {
    /// Validated partition for model generation (requires `m > n + ℓ`).
    pub fn new(j: usize, k: usize, n: usize, ell: usize, m: usize) -> Result<Self> {
        let p = Self { j, k, n, ell, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if self.j >= self.n {
            return Err(Error::InvalidPartition(format!(
                "need j < n (j={}, n={})",
                self.j, self.n
            )));
        }
        if self.m <= self.n + self.ell {
            return Err(Error::InvalidPartition(format!(
                "need m > n + ell (m={}, n={}, ell={})",
                self.m, self.n, self.ell
            )));
        }
        Ok(())
    }

    /// Looser check used for observed data: block dimensions must make sense.
    pub fn validate_shape(&self) -> Result<()> {
        if self.n == 0 || self.ell == 0 {
            return Err(Error::InvalidPartition("n and ell must be positive".into()));
        }
        if self.k > self.n {
            return Err(Error::InvalidPartition(format!(
                "need k <= n (k={}, n={})",
                self.k, self.n
            )));
        }
        if self.j >= self.m {
            return Err(Error::InvalidPartition(format!(
                "need at least one noisy row (j={}, m={})",
                self.j, self.m
            )));
        }
        Ok(())
    }

    /// Width of the noisy column block `[A₂₂ B₂]`.
    pub fn noisy_cols(&self) -> usize {
        self.n - self.k + self.ell
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Rows of `Ā` i.i.d. standard normal (unit design covariance).
    #[default]
    IidRows,
    /// Deterministic rows: scaled Legendre polynomials on a midpoint grid.
    FixedGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Uniform on `[-√3σ, √3σ]`.
    Uniform,
    /// `±σ` with equal probability.
    Rademacher,
}

/// Ground-truth instance with a known answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub a_bar: Matrix,
    pub b_bar: Matrix,
    pub x_true: Matrix,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub partition: PartitionSpec,
}

/// Observed `(A, B)` plus the partition the estimators must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub a: Matrix,
    pub b: Matrix,
    pub partition: PartitionSpec,
}

impl ObservedData {
    pub fn new(a: Matrix, b: Matrix, j: usize, k: usize) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows, B has {}",
                a.rows(),
                b.rows()
            )));
        }
        let partition = PartitionSpec {
            j,
            k,
            n: a.cols(),
            ell: b.cols(),
            m: a.rows(),
        };
        partition.validate_shape()?;
        Ok(Self { a, b, partition })
    }

    /// `C = [A B]`.
    pub fn c(&self) -> Matrix {
        self.a.hstack(&self.b)
    }
}

fn legendre_row(t: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n);
    let (mut prev, mut cur) = (0.0, 1.0);
    for d in 0..n {
        if d == 1 {
            prev = 1.0;
            cur = t;
        } else if d > 1 {
            let next = ((2 * d - 1) as f64 * t * cur - (d - 1) as f64 * prev) / d as f64;
            prev = cur;
            cur = next;
        }
        p.push(cur * ((2 * d + 1) as f64).sqrt());
    }
    p
}

/// Draws a ground-truth model. `sigma` starts at zero; see
/// [`RegressionModel::with_noise`].
pub fn generate_model(partition: PartitionSpec, seed: u64, design: DesignKind) -> Result<RegressionModel> {
    partition.validate()?;
    let PartitionSpec { j, k, n, ell, m } = partition;

    let a_bar = match design {
        DesignKind::IidRows => {
            let mut rng = seeded_rng(derive_seed(seed, STREAM_DESIGN));
            Matrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
        }
        DesignKind::FixedGrid => {
            let mut a = Matrix::zeros(m, n);
            for i in 0..m {
                let t = -1.0 + (2 * i + 1) as f64 / m as f64;
                for (c, v) in legendre_row(t, n).into_iter().enumerate() {
                    a[(i, c)] = v;
                }
            }
            a
        }
    };
    let mut rng = seeded_rng(derive_seed(seed, STREAM_X));
    let x_true = Matrix::from_fn(n, ell, |_, _| rng.random_range(-2.0..=2.0));
    let b_bar = a_bar.matmul(&x_true);

    if j > 0 {
        let upper = a_bar.submatrix(0..j, 0..n);
        let rank = numerical_rank(&singular_values(&upper)?, DEFAULT_RANK_TOL);
        if rank < j {
            return Err(Error::InvalidPartition(format!(
                "generated fixed rows have rank {rank} < j={j}"
            )));
        }
    }
    if k > 0 {
        let lower_fixed = a_bar.submatrix(j..m, 0..k);
        let rank = numerical_rank(&singular_values(&lower_fixed)?, DEFAULT_RANK_TOL);
        if rank < k {
            return Err(Error::InvalidPartition(format!(
                "generated fixed columns have rank {rank} < k={k}"
            )));
        }
    }

    Ok(RegressionModel {
        a_bar,
        b_bar,
        x_true,
        sigma: 0.0,
        noise: NoiseKind::Gaussian,
        partition,
    })
}

impl RegressionModel {
    pub fn with_noise(mut self, sigma: f64, noise: NoiseKind) -> Self {
        assert!(
            sigma >= 0.0 && sigma.is_finite(),
            "sigma must be finite and nonnegative"
        );
        self.sigma = sigma;
        self.noise = noise;
        self
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        let noise = self.noise;
        self.with_noise(sigma, noise)
    }

    /// Noise-free data as an observation (same partition).
    pub fn noise_free(&self) -> ObservedData {
        ObservedData {
            a: self.a_bar.clone(),
            b: self.b_bar.clone(),
            partition: self.partition,
        }
    }
}

/// The `(m-j) x (n-k+ℓ)` noise matrix `E` for a given seed.
pub fn draw_noise(model: &RegressionModel, seed: u64) -> Block {
    let p = model.partition;
    let rows = p.m - p.j;
    let cols = p.noisy_cols();
    let mut rng = seeded_rng(seed);
    let sigma = model.sigma;
    let sample = |rng: &mut SimRng| -> f64 {
        match model.noise {
            NoiseKind::Gaussian => Normal::new(0.0, sigma).expect("valid sigma").sample(rng),
            NoiseKind::Uniform => {
                let h = 3f64.sqrt() * sigma;
                if h == 0.0 {
                    0.0
                } else {
                    rng.random_range(-h..h)
                }
            }
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
        }
    };
    Block::from_fn(rows, cols, |_, _| sample(&mut rng))
}

/// Adds seeded noise to the lower-right block `[A₂₂ B₂]` only.
pub fn observe(model: &RegressionModel, seed: u64) -> ObservedData {
    let mut data = model.noise_free();
    if model.sigma == 0.0 {
        return data;
    }
    let p = model.partition;
    if let Block::Dense(e) = draw_noise(model, seed) {
        let na = p.n - p.k;
        for i in 0..e.rows() {
            for c in 0..e.cols() {
                if c < na {
                    data.a[(p.j + i, p.k + c)] += e[(i, c)];
                } else {
                    data.b[(p.j + i, c - na)] += e[(i, c)];
                }
            }
        }
    }
    data
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    if !s.is_square() {
        return Err(Error::NonSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    s.check_finite()?;
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.5 * (s[(i, j)] + s[(j, i)]);
            for p in 0..j {
                acc -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: acc });
                }
                l[(i, i)] = acc.sqrt();
            } else {
                l[(i, j)] = acc / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Observation transformed to unit noise covariance.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub data: ObservedData,
    /// `T = blockdiag(I_k, L⁻ᵀ)`, `(n+ℓ) x (n+ℓ)`, with `C_white = C T`.
    pub transform: Matrix,
}

/// Right-multiplies the noisy columns of `[A B]` by `L⁻ᵀ` where `Σ = LLᵀ`.
///
/// If the rows of `E` have covariance `Σ`, the transformed noise has
/// covariance `I`. The fixed columns and the row split are untouched.
pub fn whiten(data: &ObservedData, sigma_cov: &Matrix) -> Result<Whitened> {
    let p = data.partition;
    let w = p.noisy_cols();
    if sigma_cov.shape() != (w, w) {
        return Err(Error::DimensionMismatch(format!(
            "noise covariance must be {w}x{w}, got {}x{}",
            sigma_cov.rows(),
            sigma_cov.cols()
        )));
    }
    let l = cholesky(sigma_cov)?;
    let l_inv_t = solve_linear(&l.transpose(), &Matrix::identity(w))?;
    let total = p.n + p.ell;
    let transform = Matrix::from_fn(total, total, |i, j| {
        if i < p.k || j < p.k {
            if i == j {
                1.0
            } else {
                0.0
            }
        } else {
            l_inv_t[(i - p.k, j - p.k)]
        }
    });
    let c = data.c();
    let noisy = c.submatrix(0..p.m, p.k..total).matmul(&l_inv_t);
    let c_white = Matrix::from_fn(p.m, total, |i, j| if j < p.k { c[(i, j)] } else { noisy[(i, j - p.k)] });
    let a = c_white.submatrix(0..p.m, 0..p.n);
    let b = c_white.submatrix(0..p.m, p.n..total);
    Ok(Whitened {
        data: ObservedData { a, b, partition: p },
        transform,
    })
}

/// Maps `X` through a column transform: `Z = T [X; -I]`, `X' = -Z_up Z_low⁻¹`.
pub fn map_solution(x: &Matrix, transform: &Matrix) -> Result<Matrix> {
    let (n, ell) = x.shape();
    if transform.shape() != (n + ell, n + ell) {
        return Err(Error::DimensionMismatch("transform does not match X".into()));
    }
    let y = x.vstack(&Matrix::identity(ell).negated());
    let z = transform.matmul(&y);
    let z_up = z.submatrix(0..n, 0..ell);
    let z_low = z.submatrix(n..n + ell, 0..ell);
    // X Z_low = -Z_up  <=>  Z_lowᵀ Xᵀ = -Z_upᵀ
    let xt = solve_linear(&z_low.transpose(), &z_up.transpose().negated())?;
    Ok(xt.transpose())
}

/// Maps an estimate computed on whitened data back to original coordinates.
pub fn unwhiten_solution(x_white: &Matrix, transform: &Matrix) -> Result<Matrix> {
    map_solution(x_white, transform)
}

/// Maps an original-coordinate `X` into whitened coordinates.
pub fn whiten_solution(x: &Matrix, transform: &Matrix) -> Result<Matrix> {
    let inv = solve_linear(transform, &Matrix::identity(transform.rows()))?;
    map_solution(x, &inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(PartitionSpec::new(0, 0, 2, 1, 50).is_ok());
        assert!(PartitionSpec::new(2, 0, 2, 1, 50).is_err());
        assert!(PartitionSpec::new(0, 3, 2, 1, 50).is_err());
        assert!(PartitionSpec::new(0, 0, 2, 1, 3).is_err());
        assert!(PartitionSpec::new(0, 0, 2, 0, 30).is_err());
    }

    #[test]
    fn exact_model_identity() {
        let p = PartitionSpec::new(0, 0, 2, 1, 50).unwrap();
        let model = generate_model(p, 7, DesignKind::IidRows).unwrap();
        let resid = model.a_bar.matmul(&model.x_true).sub(&model.b_bar);
        assert!(resid.frobenius_norm() <= 1e-10 * (1.0 + model.b_bar.frobenius_norm()));
        assert!(model.x_true.max_abs() <= 2.0);
    }

    #[test]
    fn fixed_row_is_nonzero() {
        let p = PartitionSpec::new(1, 1, 3, 2, 100).unwrap();
        let model = generate_model(p, 1, DesignKind::IidRows).unwrap();
        let first = model
            .a_bar
            .submatrix(0..1, 0..3)
            .hstack(&model.b_bar.submatrix(0..1, 0..2));
        assert!(first.max_abs() > 0.0);
    }

    #[test]
    fn generation_is_seeded() {
        let p = PartitionSpec::new(1, 1, 3, 1, 40).unwrap();
        let a = generate_model(p, 99, DesignKind::IidRows).unwrap();
        let b = generate_model(p, 99, DesignKind::IidRows).unwrap();
        let c = generate_model(p, 100, DesignKind::IidRows).unwrap();
        assert_eq!(a, b);
        assert!(a.a_bar.sub(&c.a_bar).frobenius_norm() > 0.0);
    }

    #[test]
    fn grid_design_is_deterministic_in_a() {
        let p = PartitionSpec::new(2, 1, 4, 1, 60).unwrap();
        let a = generate_model(p, 1, DesignKind::FixedGrid).unwrap();
        let b = generate_model(p, 2, DesignKind::FixedGrid).unwrap();
        assert_eq!(a.a_bar, b.a_bar);
        assert_ne!(a.x_true, b.x_true);
        // scaled Legendre columns have unit mean square
        let g = a.a_bar.gram().scale(1.0 / 60.0);
        assert!((g[(2, 2)] - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_noise_observes_model() {
        let p = PartitionSpec::new(1, 1, 3, 1, 30).unwrap();
        let model = generate_model(p, 3, DesignKind::IidRows).unwrap();
        let obs = observe(&model, 11);
        assert_eq!(obs.a, model.a_bar);
        assert_eq!(obs.b, model.b_bar);
    }

    #[test]
    fn noise_only_in_lower_right() {
        let p = PartitionSpec::new(2, 1, 4, 2, 30).unwrap();
        for kind in [NoiseKind::Gaussian, NoiseKind::Uniform, NoiseKind::Rademacher] {
            let model = generate_model(p, 3, DesignKind::IidRows).unwrap().with_noise(0.3, kind);
            let obs = observe(&model, 11);
            for i in 0..30 {
                for c in 0..4 {
                    let same = obs.a[(i, c)] == model.a_bar[(i, c)];
                    assert_eq!(same, i < 2 || c < 1, "A[{i},{c}]");
                }
                for c in 0..2 {
                    let same = obs.b[(i, c)] == model.b_bar[(i, c)];
                    assert_eq!(same, i < 2, "B[{i},{c}]");
                }
            }
        }
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let p = PartitionSpec::new(0, 0, 1, 1, 100_000).unwrap();
        for kind in [NoiseKind::Gaussian, NoiseKind::Uniform, NoiseKind::Rademacher] {
            let model = generate_model(p, 5, DesignKind::IidRows).unwrap().with_noise(0.5, kind);
            let e = draw_noise(&model, 77);
            let e = e.dense().unwrap();
            let vals = e.as_slice();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            assert!((0.24..=0.26).contains(&var), "{kind:?}: {var}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn whiten_identity_is_noop() {
        let p = PartitionSpec::new(1, 1, 3, 1, 20).unwrap();
        let model = generate_model(p, 3, DesignKind::IidRows).unwrap().with_sigma(0.1);
        let obs = observe(&model, 4);
        let w = whiten(&obs, &Matrix::identity(3)).unwrap();
        assert_eq!(w.data, obs);
        assert_eq!(w.transform, Matrix::identity(4));
    }

    #[test]
    fn whiten_diagonal_scales_columns() {
        let p = PartitionSpec::new(0, 1, 3, 1, 20).unwrap();
        let model = generate_model(p, 3, DesignKind::IidRows).unwrap().with_sigma(0.1);
        let obs = observe(&model, 4);
        let w = whiten(&obs, &Matrix::diag(&[4.0, 1.0, 9.0])).unwrap();
        for i in 0..20 {
            assert_eq!(w.data.a[(i, 0)], obs.a[(i, 0)]);
            assert!((w.data.a[(i, 1)] - obs.a[(i, 1)] / 2.0).abs() < 1e-15);
            assert!((w.data.a[(i, 2)] - obs.a[(i, 2)]).abs() < 1e-15);
            assert!((w.data.b[(i, 0)] - obs.b[(i, 0)] / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn solution_round_trip() {
        let x = Matrix::from_rows(&[[1.5, -0.5], [0.25, 2.0], [-1.0, 0.75]]);
        let sigma_cov = Matrix::from_rows(&[
            [2.0, 0.3, 0.1, 0.0],
            [0.3, 1.5, 0.2, 0.1],
            [0.1, 0.2, 1.0, 0.3],
            [0.0, 0.1, 0.3, 0.8],
        ]);
        let a = Matrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64).sin());
        let b = a.matmul(&x);
        let obs = ObservedData::new(a, b, 0, 1).unwrap();
        let w = whiten(&obs, &sigma_cov).unwrap();
        let xw = whiten_solution(&x, &w.transform).unwrap();
        // the whitened data is still exactly consistent with the mapped solution
        let resid = w.data.a.matmul(&xw).sub(&w.data.b);
        assert!(resid.max_abs() < 1e-10);
        let back = unwhiten_solution(&xw, &w.transform).unwrap();
        assert!(back.sub(&x).max_abs() < 1e-10);
    }

    #[test]
    fn scalar_covariance_round_trip_is_identity() {
        let x = Matrix::from_rows(&[[0.7], [-1.2]]);
        let a = Matrix::from_fn(6, 2, |i, j| (i + 2 * j) as f64 * 0.3 + 1.0);
        let b = a.matmul(&x);
        let obs = ObservedData::new(a, b, 0, 0).unwrap();
        let w = whiten(&obs, &Matrix::identity(3).scale(0.09)).unwrap();
        let xw = whiten_solution(&x, &w.transform).unwrap();
        assert!(xw.sub(&x).max_abs() < 1e-10);
        let back = unwhiten_solution(&xw, &w.transform).unwrap();
        assert!(back.sub(&x).max_abs() < 1e-10);
    }
}
