//! CSV writers. Floats use 17 significant digits in scientific notation.

use std::fs;
use std::path::Path;

use nercc_core::MetricsRow;

use crate::error::{ExperimentError, Result};
use crate::experiment::TunePoint;

pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    Ok(())
}

fn crlf_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| ExperimentError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(file))
}

pub fn metrics_record(r: &MetricsRow) -> Vec<String> {
    let f = fmt_float;
    vec![
        r.trial.to_string(),
        r.scheme.to_string(),
        r.n.to_string(),
        r.k.to_string(),
        r.s_size.to_string(),
        f(r.lambda_enc),
        f(r.lambda_dec),
        f(r.mse),
        f(r.rel_acc),
        f(r.agreement),
        f(r.term1),
        f(r.term2),
        f(r.l2_loss),
        f(r.enc_train_sse),
        f(r.coded_roughness),
        f(r.grad_infnorm),
        f(r.runtime_ms),
        r.setting.to_string(),
        r.status.to_string(),
    ]
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = crlf_writer(path)?;
    w.write_record(MetricsRow::COLUMNS)?;
    for r in rows {
        w.write_record(metrics_record(r))?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))?;
    Ok(())
}

pub const TUNE_COLUMNS: [&str; 4] = ["lambda_enc", "lambda_dec", "median_mse", "selected"];

pub fn write_tune(path: &Path, grid: &[TunePoint], best: &TunePoint) -> Result<()> {
    let mut w = crlf_writer(path)?;
    w.write_record(TUNE_COLUMNS)?;
    for p in grid {
        let selected = p.lambda_enc == best.lambda_enc && p.lambda_dec == best.lambda_dec;
        w.write_record([
            fmt_float(p.lambda_enc),
            fmt_float(p.lambda_dec),
            fmt_float(p.median_mse),
            selected.to_string(),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))?;
    Ok(())
}
