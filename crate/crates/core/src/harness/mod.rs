//! Monte-Carlo consistency sweeps.
//!
//! Trial `t` at row count `m` draws one instance from
//! `hash(base_seed, m, t)`; every estimator in the sweep sees that same
//! instance, so differences between estimators are not sampling noise.

mod persist;
mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    self, build_blocks, precondition_rowcol, reduced_gram, EstimateResult, EstimatorOptions, Method, MuChoice,
};
use crate::linalg::{solve_linear, sym_eigen, Matrix, DEFAULT_RANK_TOL};
use crate::model::{
    draw_noise, generate_model, observe, DesignKind, NoiseKind, ObservedData, PartitionSpec, RegressionModel,
};
use crate::rng::{derive_seed, hash_words};

pub use persist::{read_trace_json, write_trace_csv, write_trace_json, CSV_COLUMNS};
pub use stats::{iqr, median, quantile};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "CTLS_THREADS";

/// Largest tolerated failure rate per cell.
pub const MAX_FAILURE_RATE: f64 = 0.05;

const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    NaiveLs,
    Tls,
    CtlsColumns,
    CtlsRows,
    CtlsRowcol,
    Projection,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::NaiveLs => "naive_ls",
            EstimatorKind::Tls => "tls",
            EstimatorKind::CtlsColumns => "ctls_columns",
            EstimatorKind::CtlsRows => "ctls_rows",
            EstimatorKind::CtlsRowcol => "ctls_rowcol",
            EstimatorKind::Projection => "projection",
        }
    }

    fn method(self) -> Option<Method> {
        match self {
            EstimatorKind::NaiveLs => None,
            EstimatorKind::Tls => Some(Method::Tls),
            EstimatorKind::CtlsColumns => Some(Method::CtlsColumns),
            EstimatorKind::CtlsRows => Some(Method::CtlsRows),
            EstimatorKind::CtlsRowcol => Some(Method::CtlsRowcol),
            EstimatorKind::Projection => Some(Method::Projection),
        }
    }

    pub fn supports(self, j: usize, k: usize, n: usize) -> bool {
        match self.method() {
            None => true,
            Some(m) => m.supports(j, k, n),
        }
    }
}

/// Sweep description, read from JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub ell: usize,
    pub j: usize,
    pub k: usize,
    /// Strictly ascending row counts.
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub sigma: f64,
    pub estimators: Vec<EstimatorKind>,
    pub base_seed: u64,
    #[serde(default)]
    pub design: DesignKind,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    #[serde(default)]
    pub mu: MuChoice,
    /// Compute the Gram-limit residuals against ground truth.
    #[serde(default = "default_true")]
    pub lemma_residuals: bool,
}

fn default_true() -> bool {
    true
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::IncompatibleConfig(msg));
        if self.m_values.is_empty() {
            return bad("m_values is empty".into());
        }
        if self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("m_values must be strictly ascending: {:?}", self.m_values));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be finite and nonnegative, got {}", self.sigma));
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        for e in &self.estimators {
            if !e.supports(self.j, self.k, self.n) {
                return bad(format!(
                    "{} does not apply to j={}, k={}, n={}",
                    e.name(),
                    self.j,
                    self.k,
                    self.n
                ));
            }
        }
        for &m in &self.m_values {
            PartitionSpec::new(self.j, self.k, self.n, self.ell, m)
                .map_err(|e| Error::IncompatibleConfig(format!("m={m}: {e}")))?;
        }
        Ok(())
    }

    fn partition(&self, m: usize) -> PartitionSpec {
        PartitionSpec {
            j: self.j,
            k: self.k,
            n: self.n,
            ell: self.ell,
            m,
        }
    }

    /// Seed of the instance at `(m, trial)`.
    pub fn instance_seed(&self, m: usize, trial: usize) -> u64 {
        hash_words(&[self.base_seed, m as u64, trial as u64])
    }

    fn options(&self) -> EstimatorOptions {
        EstimatorOptions {
            rank_tol: DEFAULT_RANK_TOL,
            mu: self.mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed { tag: String, message: String },
}

/// One trial of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimator: EstimatorKind,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    /// `‖X̂ - X‖_F`.
    pub err: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub mu_over_m: Option<f64>,
    /// `‖m⁻¹F - m⁻¹F̄‖_max` (projection rows).
    pub lemma_f_residual: Option<f64>,
    /// `‖m⁻¹P̃ᵀGP̃ - m⁻¹P̃ᵀḠP̃ - σ²I‖_max` (constrained TLS rows).
    pub lemma_pdp_residual: Option<f64>,
    /// `‖m⁻¹EᵀE - σ²I‖_max`.
    pub ete_residual: Option<f64>,
    pub constraint_residual: Option<f64>,
    pub z_lower_min_sv: Option<f64>,
    pub gram_condition: Option<f64>,
    pub eig_gap: Option<f64>,
}

/// Median and spread of one `(estimator, m)` cell over its non-failed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub median_err: Option<f64>,
    pub iqr_err: Option<f64>,
    pub median_sigma2_hat: Option<f64>,
    pub median_mu_over_m: Option<f64>,
    pub median_lemma_f: Option<f64>,
    pub median_lemma_pdp: Option<f64>,
    pub median_ete: Option<f64>,
}

impl CellAggregate {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let failures = records
            .iter()
            .filter(|r| matches!(r.status, TrialStatus::Failed { .. }))
            .count();
        let col = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> { records.iter().filter_map(f).collect() };
        let errs = col(|r| r.err);
        Self {
            trials: records.len(),
            failures,
            failure_rate: if records.is_empty() {
                0.0
            } else {
                failures as f64 / records.len() as f64
            },
            median_err: median(&errs),
            iqr_err: iqr(&errs),
            median_sigma2_hat: median(&col(|r| r.sigma2_hat)),
            median_mu_over_m: median(&col(|r| r.mu_over_m)),
            median_lemma_f: median(&col(|r| r.lemma_f_residual)),
            median_lemma_pdp: median(&col(|r| r.lemma_pdp_residual)),
            median_ete: median(&col(|r| r.ete_residual)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTrace {
    pub estimator: EstimatorKind,
    pub m: usize,
    pub records: Vec<TrialRecord>,
    pub aggregate: CellAggregate,
}

/// Raw trial rows plus per-cell aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub config: SweepConfig,
    /// Ordered by estimator, then `m`.
    pub cells: Vec<CellTrace>,
}

impl ConvergenceTrace {
    pub fn cell(&self, estimator: EstimatorKind, m: usize) -> Option<&CellTrace> {
        self.cells.iter().find(|c| c.estimator == estimator && c.m == m)
    }

    pub fn max_failure_rate(&self) -> f64 {
        self.cells.iter().map(|c| c.aggregate.failure_rate).fold(0.0, f64::max)
    }

    pub fn exceeds_failure_budget(&self) -> bool {
        self.max_failure_rate() > MAX_FAILURE_RATE
    }

    /// Median errors of one estimator in `m` order.
    pub fn median_errors(&self, estimator: EstimatorKind) -> Vec<Option<f64>> {
        self.cells
            .iter()
            .filter(|c| c.estimator == estimator)
            .map(|c| c.aggregate.median_err)
            .collect()
    }

    /// Fixed-width table `estimator m trials failures median_err iqr_err
    /// median_sigma2_hat`, one row per cell.
    pub fn aggregate_table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>8} {:>6} {:>8} {:>14} {:>14} {:>18}\n",
            "estimator", "m", "trials", "failures", "median_err", "iqr_err", "median_sigma2_hat"
        );
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        for c in &self.cells {
            let a = &c.aggregate;
            out.push_str(&format!(
                "{:<14} {:>8} {:>6} {:>8} {:>14} {:>14} {:>18}\n",
                c.estimator.name(),
                c.m,
                a.trials,
                a.failures,
                fmt(a.median_err),
                fmt(a.iqr_err),
                fmt(a.median_sigma2_hat),
            ));
        }
        out
    }
}

/// Ordinary least squares `X = (AᵀA)⁻¹AᵀB` by a linear solve.
///
/// `sigma2_hat` is the residual mean square `‖AX - B‖²/(mℓ)`.
pub fn naive_ls(data: &ObservedData) -> Result<EstimateResult> {
    let a = &data.a;
    let b = &data.b;
    let x_hat = solve_linear(&a.gram(), &a.t_matmul(b))?;
    let rss = a.matmul(&x_hat).sub(b).frobenius_norm().powi(2);
    let m = a.rows();
    Ok(EstimateResult {
        x_hat,
        mu: None,
        sigma2_hat: rss / (m * b.cols()) as f64,
        smallest_eigs: Vec::new(),
        m,
        diagnostics: Default::default(),
    })
}

/// Ground-truth residuals of the large-m Gram limits for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LemmaResiduals {
    /// `‖m⁻¹F - m⁻¹F̄‖_max` with `F` shifted by `μ`.
    pub lemma_f: Option<f64>,
    /// `‖m⁻¹P̃ᵀGP̃ - m⁻¹P̃ᵀḠP̃ - σ²I‖_max`.
    pub lemma_pdp: Option<f64>,
    /// `‖m⁻¹EᵀE - σ²I‖_max`.
    pub ete: Option<f64>,
    /// `‖m⁻¹C̄₂₁ᵀE‖_max`, when there are fixed columns.
    pub cross: Option<f64>,
}

/// Compares observed Gram quantities with their noise-free counterparts.
///
/// `μ` is the mean of the `ℓ` smallest eigenvalues of `G`. `P̃` and the
/// fixed-block reduction come from the observed data; both are functions of
/// the exact blocks only, so they are the same for the ground truth.
pub fn lemma_residuals(model: &RegressionModel, data: &ObservedData) -> LemmaResiduals {
    lemma_residuals_with(model, data, MuChoice::Mean)
}

pub fn lemma_residuals_with(model: &RegressionModel, data: &ObservedData, mu_choice: MuChoice) -> LemmaResiduals {
    let p = data.partition;
    let m = p.m as f64;
    let s2 = model.sigma * model.sigma;
    let total = p.n + p.ell;
    let truth = model.noise_free();
    let obs_blocks = build_blocks(data);
    let true_blocks = build_blocks(&truth);

    let e = obs_blocks
        .c22
        .dense()
        .expect("C22 is never empty")
        .sub(true_blocks.c22.dense().expect("C22 is never empty"));
    let mut ete = e.gram().scale(1.0 / m);
    for i in 0..ete.rows() {
        ete[(i, i)] -= s2;
    }
    let cross = true_blocks
        .c21
        .dense()
        .map(|c21| c21.t_matmul(&e).scale(1.0 / m).max_abs());

    let mut out = LemmaResiduals {
        ete: Some(ete.max_abs()),
        cross,
        ..Default::default()
    };
    if p.k >= p.n {
        return out;
    }

    // Projection estimator: m⁻¹F → m⁻¹F̄.
    let mut lower_only = obs_blocks.clone();
    lower_only.c11 = crate::linalg::Block::Empty { rows: 0, cols: p.k };
    lower_only.c12 = crate::linalg::Block::Empty {
        rows: 0,
        cols: p.noisy_cols(),
    };
    if let Ok(rg) = reduced_gram(&lower_only, DEFAULT_RANK_TOL) {
        if let Ok(eig) = sym_eigen(&rg.g) {
            let mu = mu_choice.pick(&eig.values[..p.ell]);
            let mut f = obs_blocks.lower().gram();
            for i in p.k..total {
                f[(i, i)] -= mu;
            }
            let f_bar = true_blocks.lower().gram();
            out.lemma_f = Some(f.sub(&f_bar).scale(1.0 / m).max_abs());
        }
    }

    // Constrained TLS: m⁻¹P̃ᵀGP̃ → m⁻¹P̃ᵀḠP̃ + σ²I.
    let reduced = if p.j > 0 && p.k > 0 {
        precondition_rowcol(&obs_blocks, DEFAULT_RANK_TOL)
            .ok()
            .map(|(red, rec)| (red, rec.apply(&true_blocks)))
    } else {
        Some((obs_blocks.clone(), true_blocks.clone()))
    };
    if let Some((red_obs, red_true)) = reduced {
        if let (Ok(g_obs), Ok(g_true)) = (
            reduced_gram(&red_obs, DEFAULT_RANK_TOL),
            reduced_gram(&red_true, DEFAULT_RANK_TOL),
        ) {
            let pt = &g_obs.p_tilde;
            let proj = |g: &Matrix| pt.t_matmul(&g.matmul(pt)).scale(1.0 / m);
            let mut d = proj(&g_obs.g).sub(&proj(&g_true.g));
            for i in 0..d.rows() {
                d[(i, i)] -= s2;
            }
            out.lemma_pdp = Some(d.max_abs());
        }
    }
    out
}

struct Instance {
    model: RegressionModel,
    data: ObservedData,
    seed: u64,
    lemmas: Option<LemmaResiduals>,
}

fn build_instance(config: &SweepConfig, m: usize, trial: usize, with_lemmas: bool) -> Result<Instance> {
    let seed = config.instance_seed(m, trial);
    let model = generate_model(config.partition(m), seed, config.design)?.with_noise(config.sigma, config.noise_kind);
    let data = observe(&model, derive_seed(seed, STREAM_NOISE));
    let lemmas = with_lemmas.then(|| lemma_residuals_with(&model, &data, config.mu));
    Ok(Instance {
        model,
        data,
        seed,
        lemmas,
    })
}

fn wants_lemmas(config: &SweepConfig, estimators: &[EstimatorKind]) -> bool {
    config.lemma_residuals && estimators.iter().any(|e| *e != EstimatorKind::NaiveLs)
}

fn run_one(
    config: &SweepConfig,
    estimator: EstimatorKind,
    m: usize,
    trial: usize,
    inst: &Result<Instance>,
) -> TrialRecord {
    let mut rec = TrialRecord {
        estimator,
        m,
        trial,
        seed: config.instance_seed(m, trial),
        status: TrialStatus::Ok,
        err: None,
        sigma2_hat: None,
        mu_over_m: None,
        lemma_f_residual: None,
        lemma_pdp_residual: None,
        ete_residual: None,
        constraint_residual: None,
        z_lower_min_sv: None,
        gram_condition: None,
        eig_gap: None,
    };
    let inst = match inst {
        Ok(inst) => inst,
        Err(e) => {
            rec.status = failed(e);
            return rec;
        }
    };
    debug_assert_eq!(inst.seed, rec.seed);
    let result = match estimator.method() {
        None => naive_ls(&inst.data),
        Some(method) => estimators::estimate(&inst.data, method, &config.options()),
    };
    match result {
        Ok(r) => {
            rec.err = Some(r.x_hat.sub(&inst.model.x_true).frobenius_norm());
            rec.sigma2_hat = Some(r.sigma2_hat);
            rec.mu_over_m = r.mu.map(|mu| mu / m as f64);
            rec.constraint_residual = r.diagnostics.constraint_residual;
            if estimator != EstimatorKind::NaiveLs {
                rec.z_lower_min_sv = Some(r.diagnostics.z_lower_min_sv);
            }
            rec.gram_condition = r.diagnostics.gram_condition;
            rec.eig_gap = r.diagnostics.eig_gap;
        }
        Err(e) => rec.status = failed(&e),
    }
    if let Some(l) = &inst.lemmas {
        rec.ete_residual = l.ete;
        match estimator {
            EstimatorKind::Projection => rec.lemma_f_residual = l.lemma_f,
            EstimatorKind::CtlsColumns | EstimatorKind::CtlsRows | EstimatorKind::CtlsRowcol | EstimatorKind::Tls => {
                rec.lemma_pdp_residual = l.lemma_pdp
            }
            EstimatorKind::NaiveLs => {}
        }
    }
    rec
}

fn failed(e: &Error) -> TrialStatus {
    TrialStatus::Failed {
        tag: e.tag().to_string(),
        message: e.to_string(),
    }
}

/// Thread pool honoring [`THREADS_ENV`] when set to a positive integer.
fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize =
            v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                Error::IncompatibleConfig(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::IncompatibleConfig(format!("thread pool: {e}")))
}

/// Runs every `(estimator, m, trial)` of the sweep.
///
/// Estimator failures are recorded with their error tag. The result does
/// not depend on thread count or scheduling.
pub fn run_sweep(config: &SweepConfig) -> Result<ConvergenceTrace> {
    config.validate()?;
    let with_lemmas = wants_lemmas(config, &config.estimators);
    let jobs: Vec<(usize, usize)> = config
        .m_values
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let rows: Vec<Vec<TrialRecord>> = pool()?.install(|| {
        jobs.par_iter()
            .map(|&(m, t)| {
                let inst = build_instance(config, m, t, with_lemmas);
                config
                    .estimators
                    .iter()
                    .map(|&e| run_one(config, e, m, t, &inst))
                    .collect()
            })
            .collect()
    });

    let mut cells: BTreeMap<(usize, usize), Vec<TrialRecord>> = BTreeMap::new();
    for rec in rows.into_iter().flatten() {
        let order = config.estimators.iter().position(|&e| e == rec.estimator).unwrap();
        cells.entry((order, rec.m)).or_default().push(rec);
    }
    let cells = cells
        .into_values()
        .map(|mut records| {
            records.sort_by_key(|r| r.trial);
            CellTrace {
                estimator: records[0].estimator,
                m: records[0].m,
                aggregate: CellAggregate::from_records(&records),
                records,
            }
        })
        .collect();
    Ok(ConvergenceTrace {
        config: config.clone(),
        cells,
    })
}

/// Recomputes a single cell from the configuration alone.
pub fn run_cell(config: &SweepConfig, estimator: EstimatorKind, m: usize) -> Result<CellTrace> {
    config.validate()?;
    if !config.estimators.contains(&estimator) || !config.m_values.contains(&m) {
        return Err(Error::IncompatibleConfig(format!(
            "cell ({}, {m}) is not part of the sweep",
            estimator.name()
        )));
    }
    let with_lemmas = wants_lemmas(config, &config.estimators);
    let records: Vec<TrialRecord> = pool()?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_one(config, estimator, m, t, &build_instance(config, m, t, with_lemmas)))
            .collect()
    });
    Ok(CellTrace {
        estimator,
        m,
        aggregate: CellAggregate::from_records(&records),
        records,
    })
}

/// Noise matrix of a sweep instance, for external checks.
pub fn instance_noise(config: &SweepConfig, m: usize, trial: usize) -> Result<crate::linalg::Block> {
    let inst = build_instance(config, m, trial, false)?;
    Ok(draw_noise(&inst.model, derive_seed(inst.seed, STREAM_NOISE)))
}

/// Ground-truth model and observation of a sweep instance.
pub fn instance(config: &SweepConfig, m: usize, trial: usize) -> Result<(RegressionModel, ObservedData)> {
    let inst = build_instance(config, m, trial, false)?;
    Ok((inst.model, inst.data))
}
