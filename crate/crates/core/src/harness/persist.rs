use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{ConvergenceTrace, TrialStatus};

/// Column order of the flat CSV trace.
pub const CSV_COLUMNS: [&str; 16] = [
    "estimator",
    "m",
    "trial",
    "seed",
    "status",
    "err",
    "sigma2_hat",
    "mu_over_m",
    "lemma_f_residual",
    "lemma_pdp_residual",
    "ete_residual",
    "constraint_residual",
    "z_lower_min_sv",
    "gram_condition",
    "eig_gap",
    "error_tag",
];

pub fn write_trace_json(trace: &ConvergenceTrace, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, trace)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn read_trace_json(path: &Path) -> std::io::Result<ConvergenceTrace> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// One row per trial in [`CSV_COLUMNS`] order; absent values are empty.
pub fn write_trace_csv(trace: &ConvergenceTrace, path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    let num = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.16e}"));
    for cell in &trace.cells {
        for r in &cell.records {
            let (status, tag) = match &r.status {
                TrialStatus::Ok => ("ok", String::new()),
                TrialStatus::Failed { tag, .. } => ("failed", tag.clone()),
            };
            w.write_record([
                r.estimator.name().to_string(),
                r.m.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                status.to_string(),
                num(r.err),
                num(r.sigma2_hat),
                num(r.mu_over_m),
                num(r.lemma_f_residual),
                num(r.lemma_pdp_residual),
                num(r.ete_residual),
                num(r.constraint_residual),
                num(r.z_lower_min_sv),
                num(r.gram_condition),
                num(r.eig_gap),
                tag,
            ])?;
        }
    }
    w.flush()
}
