//! Acceptance criteria 1 to 12. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p ctls-core --test acceptance -- --nocapture` to
//! see the lines; the test fails when the criterion fails.

use std::time::{Duration, Instant};

use ctls_core::estimators::MuChoice;
use ctls_core::estimators::{
    build_blocks, ctls_columns, ctls_rowcol, ctls_rows, estimate, projection_estimator, tls_solve, EstimatorOptions,
    Method,
};
use ctls_core::harness::{self, median, naive_ls, run_sweep, ConvergenceTrace, EstimatorKind, SweepConfig};
use ctls_core::linalg::sym_eigen;
use ctls_core::model::{generate_model, observe, DesignKind, NoiseKind, ObservedData, PartitionSpec};
use ctls_core::oracle::{grid_argmin_1d, local_optimality, tls_objective};
use ctls_core::Matrix;

fn verdict(id: u32, title: &str, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    println!(
        "criterion {id:>2} [{}] {title}: {detail}; {:.2}s (limit {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its time limit");
}

fn rel_err(x: &Matrix, truth: &Matrix) -> f64 {
    x.sub(truth).frobenius_norm() / (1.0 + truth.frobenius_norm())
}

/// Upper-row residual check `‖A₁X - B₁‖_F ≤ 1e-8·(1 + ‖B₁‖_F)`.
fn hard_constraint_ok(data: &ObservedData, x: &Matrix) -> bool {
    let p = data.partition;
    if p.j == 0 {
        return true;
    }
    let a1 = data.a.submatrix(0..p.j, 0..p.n);
    let b1 = data.b.submatrix(0..p.j, 0..p.ell);
    a1.matmul(x).sub(&b1).frobenius_norm() <= 1e-8 * (1.0 + b1.frobenius_norm())
}

struct Run {
    label: String,
    method: Method,
    data: ObservedData,
    x_true: Matrix,
    x_hat: Result<Matrix, String>,
}

fn applicable(j: usize, k: usize, n: usize) -> Vec<Method> {
    Method::ALL.into_iter().filter(|m| m.supports(j, k, n)).collect()
}

/// The 50 noise-free instances of criterion 1.
fn zero_noise_runs() -> Vec<Run> {
    let mut runs = Vec::new();
    for i in 0..50usize {
        let (j, k) = (i % 3, (i / 3) % 3);
        let m = [20, 200][(i / 9) % 2];
        let n = 3 + i % 3;
        let ell = 1 + (i / 2) % 2;
        let p = PartitionSpec::new(j, k, n, ell, m).unwrap();
        let model = generate_model(p, 1000 + i as u64, DesignKind::IidRows).unwrap();
        let data = observe(&model, 1);
        for method in applicable(j, k, n) {
            let x_hat = estimate(&data, method, &EstimatorOptions::default())
                .map(|r| r.x_hat)
                .map_err(|e| e.to_string());
            runs.push(Run {
                label: format!("instance {i} (j={j}, k={k}, n={n}, ell={ell}, m={m}) {method}"),
                method,
                data: data.clone(),
                x_true: model.x_true.clone(),
                x_hat,
            });
        }
    }
    runs
}

#[test]
fn criterion_01_zero_noise_recovery() {
    let t = Instant::now();
    let runs = zero_noise_runs();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for r in &runs {
        match &r.x_hat {
            Ok(x) => {
                let e = rel_err(x, &r.x_true);
                worst = worst.max(e);
                if e > 1e-8 {
                    failures.push(format!("{}: rel err {e:.2e}", r.label));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", r.label)),
        }
    }
    verdict(
        1,
        "zero-noise exact recovery",
        failures.is_empty(),
        t.elapsed(),
        Duration::from_secs(10),
        format!(
            "{} estimator runs on 50 instances, worst relative error {worst:.2e}{}",
            runs.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failures: {failures:?}")
            }
        ),
    );
}

#[test]
fn criterion_02_tls_identities() {
    let t = Instant::now();
    let mut worst_secular: f64 = 0.0;
    let mut worst_objective: f64 = 0.0;
    for i in 0..20u64 {
        let n = 1 + (i as usize) % 4;
        let p = PartitionSpec::new(0, 0, n, 1, 40).unwrap();
        let model = generate_model(p, 2000 + i, DesignKind::IidRows)
            .unwrap()
            .with_sigma(0.3);
        let data = observe(&model, 2100 + i);
        let r = tls_solve(&data.a, &data.b).unwrap();
        let lam = r.smallest_eigs[0];
        let mut lhs = data.a.gram();
        for d in 0..n {
            lhs[(d, d)] -= lam;
        }
        let atb = data.a.t_matmul(&data.b);
        let secular = lhs.matmul(&r.x_hat).sub(&atb).frobenius_norm() / (1.0 + atb.frobenius_norm());
        let objective = (tls_objective(&data.a, &data.b, &r.x_hat) - lam).abs() / (1.0 + lam);
        worst_secular = worst_secular.max(secular);
        worst_objective = worst_objective.max(objective);
    }
    verdict(
        2,
        "TLS secular equation and objective identity",
        worst_secular <= 1e-8 && worst_objective <= 1e-8,
        t.elapsed(),
        Duration::from_secs(5),
        format!("20 instances, worst secular {worst_secular:.2e}, worst objective {worst_objective:.2e}"),
    );
}

/// Small noisy instances probed by the local-optimality oracle.
fn local_optimality_instances() -> Vec<(EstimatorKind, ObservedData)> {
    let mut out = Vec::new();
    for i in 0..20u64 {
        let n = 2 + (i as usize) % 3;
        let ell = 1 + (i as usize / 3) % 2;
        let m = 30 + (i as usize % 5) * 5;
        let sigma = 0.1;
        let tls = PartitionSpec::new(0, 0, n, ell, m).unwrap();
        let cols = PartitionSpec::new(0, 1 + (i as usize) % (n - 1), n, ell, m).unwrap();
        let rc_j = 1 + (i as usize) % (n - 1);
        let rowcol = PartitionSpec::new(rc_j, 1 + (i as usize / 2) % (n - 1), n, ell, m).unwrap();
        for (kind, p, salt) in [
            (EstimatorKind::Tls, tls, 0),
            (EstimatorKind::CtlsColumns, cols, 1),
            (EstimatorKind::CtlsRowcol, rowcol, 2),
        ] {
            let seed = 3000 + 10 * i + salt;
            let model = generate_model(p, seed, DesignKind::IidRows).unwrap().with_sigma(sigma);
            out.push((kind, observe(&model, seed + 1)));
        }
    }
    out
}

fn run_kind(kind: EstimatorKind, data: &ObservedData) -> Matrix {
    match kind {
        EstimatorKind::Tls => tls_solve(&data.a, &data.b).unwrap().x_hat,
        EstimatorKind::CtlsColumns => ctls_columns(data).unwrap().x_hat,
        EstimatorKind::CtlsRowcol => ctls_rowcol(data).unwrap().x_hat,
        EstimatorKind::CtlsRows => ctls_rows(data).unwrap().x_hat,
        EstimatorKind::Projection => projection_estimator(data).unwrap().x_hat,
        EstimatorKind::NaiveLs => naive_ls(data).unwrap().x_hat,
    }
}

const RADII: [f64; 3] = [1e-3, 1e-2, 1e-1];

#[test]
fn criterion_03_local_optimality() {
    let t = Instant::now();
    let mut violations = 0;
    let mut candidates = 0;
    let mut worst_margin = f64::INFINITY;
    for (i, (kind, data)) in local_optimality_instances().iter().enumerate() {
        let x = run_kind(*kind, data);
        let probe = local_optimality(&build_blocks(data), &x, &RADII, 1000, 4000 + i as u64, 1e-12).unwrap();
        violations += probe.violations;
        candidates += probe.candidates;
        worst_margin = worst_margin.min(probe.best_candidate_objective - probe.center_objective);
    }
    verdict(
        3,
        "oracle local optimality (tls, ctls_columns, ctls_rowcol)",
        violations == 0,
        t.elapsed(),
        Duration::from_secs(60),
        format!("60 instances, {candidates} candidates, {violations} better than the estimate, smallest margin {worst_margin:.3e}"),
    );
}

#[test]
fn criterion_04_global_1d() {
    let t = Instant::now();
    let mut worst_steps: f64 = 0.0;
    let mut below = 0;
    for i in 0..10u64 {
        let p = PartitionSpec::new(0, 0, 1, 1, 25).unwrap();
        let model = generate_model(p, 5000 + i, DesignKind::IidRows)
            .unwrap()
            .with_sigma(0.5);
        let data = observe(&model, 5100 + i);
        let x = tls_solve(&data.a, &data.b).unwrap().x_hat[(0, 0)];
        let (xg, qg, h) = grid_argmin_1d(data.a.as_slice(), data.b.as_slice(), 100_000);
        worst_steps = worst_steps.max((x.atan() - xg.atan()).abs() / h);
        let q = tls_objective(&data.a, &data.b, &Matrix::from_rows(&[[x]]));
        if qg < q * (1.0 - 1e-12) {
            below += 1;
        }
    }
    verdict(
        4,
        "global 1-D grid check",
        worst_steps <= 1.0 && below == 0,
        t.elapsed(),
        Duration::from_secs(10),
        format!(
            "10 instances, worst distance {worst_steps:.3} grid steps, {below} grid points below the TLS objective"
        ),
    );
}

fn consistency_config(estimator: EstimatorKind, seed: u64) -> SweepConfig {
    SweepConfig {
        n: 3,
        ell: 1,
        j: 1,
        k: 1,
        m_values: vec![100, 1000, 10_000],
        trials: 30,
        sigma: 0.1,
        estimators: vec![estimator],
        base_seed: seed,
        design: DesignKind::IidRows,
        noise_kind: NoiseKind::Gaussian,
        mu: MuChoice::Mean,
        lemma_residuals: false,
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn consistency_verdict(id: u32, title: &str, trace: &ConvergenceTrace, kind: EstimatorKind, elapsed: Duration) {
    let medians: Vec<f64> = trace
        .median_errors(kind)
        .into_iter()
        .map(|m| m.unwrap_or(f64::NAN))
        .collect();
    let last = *medians.last().unwrap();
    let pass = strictly_decreasing(&medians) && last < 0.05 && !trace.exceeds_failure_budget();
    verdict(
        id,
        title,
        pass,
        elapsed,
        Duration::from_secs(300),
        format!(
            "median err at m = 1e2, 1e3, 1e4: {:.4e}, {:.4e}, {:.4e}; max failure rate {:.1}%",
            medians[0],
            medians[1],
            medians[2],
            100.0 * trace.max_failure_rate()
        ),
    );
}

#[test]
fn criterion_05_projection_consistency() {
    let t = Instant::now();
    let trace = run_sweep(&consistency_config(EstimatorKind::Projection, 6000)).unwrap();
    consistency_verdict(
        5,
        "projection estimator consistency",
        &trace,
        EstimatorKind::Projection,
        t.elapsed(),
    );
}

#[test]
fn criterion_06_ctls_rowcol_consistency() {
    let t = Instant::now();
    let trace = run_sweep(&consistency_config(EstimatorKind::CtlsRowcol, 6000)).unwrap();
    consistency_verdict(
        6,
        "row+column CTLS consistency",
        &trace,
        EstimatorKind::CtlsRowcol,
        t.elapsed(),
    );
}

#[test]
fn criterion_07_sigma_estimate() {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for (idx, sigma) in [0.1, 0.3].into_iter().enumerate() {
        let mut config = consistency_config(EstimatorKind::Projection, 7000 + idx as u64);
        config.m_values = vec![100_000];
        config.trials = 20;
        config.sigma = sigma;
        let trace = run_sweep(&config).unwrap();
        let cell = trace.cell(EstimatorKind::Projection, 100_000).unwrap();
        let devs: Vec<f64> = cell
            .records
            .iter()
            .filter_map(|r| r.mu_over_m.map(|v| (v - sigma * sigma).abs()))
            .collect();
        let med = median(&devs).unwrap_or(f64::INFINITY);
        pass &= devs.len() == 20 && med < 0.1 * sigma * sigma;
        details.push(format!(
            "sigma {sigma}: median |mu/m - sigma^2| = {med:.3e} (bound {:.1e})",
            0.1 * sigma * sigma
        ));
    }
    verdict(
        7,
        "mu/m estimates sigma^2",
        pass,
        t.elapsed(),
        Duration::from_secs(180),
        details.join("; "),
    );
}

#[test]
fn criterion_08_projected_gram_convergence() {
    let t = Instant::now();
    let mut config = consistency_config(EstimatorKind::CtlsRowcol, 8000);
    config.m_values = vec![1000, 10_000, 100_000];
    config.trials = 20;
    config.lemma_residuals = true;
    let trace = run_sweep(&config).unwrap();
    let medians: Vec<f64> = trace
        .cells
        .iter()
        .map(|c| c.aggregate.median_lemma_pdp.unwrap_or(f64::NAN))
        .collect();
    verdict(
        8,
        "projected Gram residual decreases",
        strictly_decreasing(&medians),
        t.elapsed(),
        Duration::from_secs(180),
        format!(
            "median residual at m = 1e3, 1e4, 1e5: {:.4e}, {:.4e}, {:.4e}",
            medians[0], medians[1], medians[2]
        ),
    );
}

#[test]
fn criterion_09_degenerate_partitions() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let k = if i < 10 { 0 } else { 1 + (i as usize) % 2 };
        let n = 3 + (i as usize) % 2;
        let ell = 1 + (i as usize / 4) % 2;
        let p = PartitionSpec::new(0, k, n, ell, 60).unwrap();
        let model = generate_model(p, 9000 + i, DesignKind::IidRows)
            .unwrap()
            .with_sigma(0.2);
        let data = observe(&model, 9100 + i);
        let rc = ctls_rowcol(&data).unwrap().x_hat;
        let reference = if k == 0 {
            tls_solve(&data.a, &data.b).unwrap().x_hat
        } else {
            ctls_columns(&data).unwrap().x_hat
        };
        worst = worst.max(rc.sub(&reference).max_abs());
    }
    verdict(
        9,
        "degenerate partitions agree with TLS and column CTLS",
        worst <= 1e-8,
        t.elapsed(),
        Duration::from_secs(5),
        format!("20 instances, largest entry difference {worst:.2e}"),
    );
}

#[test]
fn criterion_10_naive_ls_attenuation() {
    let t = Instant::now();
    let config = SweepConfig {
        n: 1,
        ell: 1,
        j: 0,
        k: 0,
        m_values: vec![100_000],
        trials: 20,
        sigma: 0.5,
        estimators: vec![EstimatorKind::NaiveLs],
        base_seed: 10_000,
        design: DesignKind::IidRows,
        noise_kind: NoiseKind::Gaussian,
        mu: MuChoice::Mean,
        lemma_residuals: false,
    };
    let ratios: Vec<f64> = (0..config.trials)
        .map(|trial| {
            let (model, data) = harness::instance(&config, 100_000, trial).unwrap();
            naive_ls(&data).unwrap().x_hat[(0, 0)] / model.x_true[(0, 0)]
        })
        .collect();
    let med = median(&ratios).unwrap();
    verdict(
        10,
        "naive least squares attenuation",
        (0.75..=0.85).contains(&med),
        t.elapsed(),
        Duration::from_secs(120),
        format!("median ratio X_ls/X = {med:.4} over 20 trials (expected near 0.8)"),
    );
}

#[test]
fn criterion_11_hard_constraints() {
    let t = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    // Criterion 1 runs.
    for r in zero_noise_runs() {
        if matches!(r.method, Method::CtlsRows | Method::CtlsRowcol | Method::Projection) {
            if let Ok(x) = &r.x_hat {
                checked += 1;
                if !hard_constraint_ok(&r.data, x) {
                    bad.push(r.label.clone());
                }
            }
        }
    }
    // Criterion 3 row+column instances.
    for (kind, data) in local_optimality_instances() {
        if kind == EstimatorKind::CtlsRowcol {
            checked += 1;
            if !hard_constraint_ok(&data, &run_kind(kind, &data)) {
                bad.push(format!("local-optimality instance {kind:?}"));
            }
        }
    }
    // Criteria 5 and 6 sweep instances.
    for kind in [EstimatorKind::CtlsRowcol, EstimatorKind::Projection] {
        let config = consistency_config(kind, 6000);
        for &m in &config.m_values {
            for trial in 0..config.trials {
                let (_, data) = harness::instance(&config, m, trial).unwrap();
                checked += 1;
                if !hard_constraint_ok(&data, &run_kind(kind, &data)) {
                    bad.push(format!("{kind:?} m={m} trial={trial}"));
                }
            }
        }
    }
    verdict(
        11,
        "hard row constraints hold exactly",
        bad.is_empty(),
        t.elapsed(),
        Duration::from_secs(300),
        format!(
            "{checked} constrained outputs checked, {} violations {bad:?}",
            bad.len()
        ),
    );
}

#[test]
fn criterion_12_determinism() {
    let t = Instant::now();
    let mut same = true;

    let a: Vec<_> = zero_noise_runs().into_iter().map(|r| r.x_hat).collect();
    let b: Vec<_> = zero_noise_runs().into_iter().map(|r| r.x_hat).collect();
    same &= a == b;

    let probe = |i: usize| {
        let inst = local_optimality_instances();
        let (kind, data) = &inst[i];
        local_optimality(&build_blocks(data), &run_kind(*kind, data), &RADII, 200, 12, 1e-12).unwrap()
    };
    same &= (0..6).all(|i| probe(i) == probe(i));

    let mut config = consistency_config(EstimatorKind::Projection, 12_000);
    config.estimators = vec![
        EstimatorKind::NaiveLs,
        EstimatorKind::CtlsRowcol,
        EstimatorKind::Projection,
    ];
    config.trials = 5;
    config.lemma_residuals = true;
    let t1 = run_sweep(&config).unwrap();
    let t2 = run_sweep(&config).unwrap();
    same &= t1 == t2;
    let bits = |t: &ConvergenceTrace| -> Vec<u64> {
        t.cells
            .iter()
            .flat_map(|c| c.records.iter())
            .flat_map(|r| [r.err, r.sigma2_hat, r.lemma_pdp_residual, r.lemma_f_residual])
            .map(|v| v.map_or(u64::MAX, f64::to_bits))
            .collect()
    };
    same &= bits(&t1) == bits(&t2);

    let eig = |s: u64| {
        let p = PartitionSpec::new(0, 0, 4, 2, 50).unwrap();
        let d = observe(&generate_model(p, s, DesignKind::IidRows).unwrap().with_sigma(0.1), s);
        sym_eigen(&d.c().gram()).unwrap()
    };
    same &= eig(1) == eig(1);

    verdict(
        12,
        "bit-identical reruns",
        same,
        t.elapsed(),
        Duration::from_secs(300),
        "criterion 1 estimates, oracle probes, a sweep trace and an eigendecomposition rerun identically".into(),
    );
}
