use ctls_core::estimators::{ctls_columns, MuChoice};
use ctls_core::harness::{median, run_sweep, EstimatorKind, SweepConfig};
use ctls_core::model::{
    cholesky, generate_model, unwhiten_solution, whiten, DesignKind, NoiseKind, ObservedData, PartitionSpec,
};
use ctls_core::rng::seeded_rng;
use ctls_core::Matrix;
use rand_distr::{Distribution, StandardNormal};

/// Noise on columns `k..` with row covariance `cov`.
fn correlated_observation(seed: u64, m: usize, cov: &Matrix) -> (Matrix, ObservedData) {
    let p = PartitionSpec::new(0, 1, 2, 1, m).unwrap();
    let model = generate_model(p, seed, DesignKind::IidRows).unwrap();
    let l = cholesky(cov).unwrap();
    let mut rng = seeded_rng(seed ^ 0xABCD);
    let z = Matrix::from_fn(m, 2, |_, _| StandardNormal.sample(&mut rng));
    let e = z.matmul(&l.transpose());
    let a = Matrix::from_fn(m, 2, |i, c| model.a_bar[(i, c)] + if c == 1 { e[(i, 0)] } else { 0.0 });
    let b = Matrix::from_fn(m, 1, |i, _| model.b_bar[(i, 0)] + e[(i, 1)]);
    (model.x_true, ObservedData::new(a, b, 0, 1).unwrap())
}

#[test]
fn whitening_removes_correlated_noise_bias() {
    let cov = Matrix::from_rows(&[[0.09, 0.072], [0.072, 0.09]]);
    let mut raw = Vec::new();
    let mut white = Vec::new();
    for seed in 0..9 {
        let (x, data) = correlated_observation(seed, 20_000, &cov);
        let plain = ctls_columns(&data).unwrap().x_hat;
        let w = whiten(&data, &cov).unwrap();
        let xw = unwhiten_solution(&ctls_columns(&w.data).unwrap().x_hat, &w.transform).unwrap();
        raw.push(plain.sub(&x).frobenius_norm());
        white.push(xw.sub(&x).frobenius_norm());
    }
    let (raw, white) = (median(&raw).unwrap(), median(&white).unwrap());
    assert!(white < 0.02, "whitened error {white}");
    assert!(white < 0.25 * raw, "whitened {white} vs raw {raw}");
}

#[test]
fn naive_ls_does_not_converge() {
    let config = SweepConfig {
        n: 2,
        ell: 1,
        j: 0,
        k: 0,
        m_values: vec![100, 10_000],
        trials: 15,
        sigma: 0.4,
        estimators: vec![EstimatorKind::NaiveLs, EstimatorKind::Tls],
        base_seed: 31,
        design: DesignKind::IidRows,
        noise_kind: NoiseKind::Gaussian,
        mu: MuChoice::Mean,
        lemma_residuals: false,
    };
    let trace = run_sweep(&config).unwrap();
    let ls: Vec<f64> = trace
        .median_errors(EstimatorKind::NaiveLs)
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let tls: Vec<f64> = trace
        .median_errors(EstimatorKind::Tls)
        .into_iter()
        .map(Option::unwrap)
        .collect();
    assert!(ls[1] > 0.5 * ls[0], "{ls:?}");
    assert!(tls[1] < 0.5 * tls[0], "{tls:?}");
    assert!(tls[1] < ls[1]);
}
