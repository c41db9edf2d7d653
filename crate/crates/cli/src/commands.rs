//! File-producing entry points behind the `nercc` subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nercc_core::TrialLabel;

use crate::config::{ExperimentConfig, LambdaAxis};
use crate::error::Result;
use crate::experiment::{run_experiment, sweep_lambda, sweep_stragglers, tune_lambdas};
use crate::output::{fmt_float, write_metrics, write_tune};
use crate::plot::{render_plot, PlotSpec};

/// Files written by a command and a human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub message: String,
}

/// Built-in configuration of the `demo` subcommand.
pub const DEMO_CONFIG: &str = r#"{
    "N": 60, "K": 15,
    "schemes": ["nercc", "nercc-ag", "bacc"],
    "model": {"builtin": {"kind": "affine-softmax", "d": 6, "m": 4}},
    "dataset": {"synthetic": {"distribution": "normal", "d": 6}},
    "stragglers": {"counts": [0, 10, 20, 30, 40]},
    "lambda_enc": 1e-5, "lambda_dec": 1e-3,
    "trials": 5
}"#;

fn median_plot(x: &str, group: &str, log_x: bool) -> PlotSpec {
    PlotSpec {
        x: x.into(),
        y: "mse".into(),
        group: Some(group.into()),
        filter: Some(("trial".into(), TrialLabel::Median.to_string())),
        log_x,
        log_y: true,
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let rows = run_experiment(cfg)?;
    let path = cfg.out_dir.join("run.csv");
    write_metrics(&path, &rows)?;
    Ok(Report {
        message: format!("{} rows -> {}", rows.len(), path.display()),
        files: vec![path],
    })
}

fn straggler_sweep_to(cfg: &ExperimentConfig, stem: &str) -> Result<Report> {
    let rows = sweep_stragglers(cfg)?;
    let csv = cfg.out_dir.join(format!("{stem}.csv"));
    let svg = cfg.out_dir.join(format!("{stem}.svg"));
    write_metrics(&csv, &rows)?;
    render_plot(&csv, &median_plot("setting", "scheme", false), &svg)?;
    let mut message = String::new();
    for r in rows.iter().filter(|r| r.trial == TrialLabel::Median) {
        let _ = writeln!(
            message,
            "{:<9} setting {:>8}  median mse {}  ({})",
            r.scheme.to_string(),
            r.setting,
            fmt_float(r.mse),
            r.status
        );
    }
    let _ = write!(message, "-> {}, {}", csv.display(), svg.display());
    Ok(Report {
        files: vec![csv, svg],
        message,
    })
}

pub fn sweep_stragglers_cmd(cfg: &ExperimentConfig) -> Result<Report> {
    straggler_sweep_to(cfg, "sweep_stragglers")
}

pub fn sweep_lambda_cmd(cfg: &ExperimentConfig) -> Result<Report> {
    let rep = sweep_lambda(cfg)?;
    let csv = cfg.out_dir.join("sweep_lambda.csv");
    let svg = cfg.out_dir.join("sweep_lambda.svg");
    write_metrics(&csv, &rep.rows)?;
    let x = match rep.axis {
        LambdaAxis::Enc => "lambda_enc",
        LambdaAxis::Dec => "lambda_dec",
    };
    render_plot(&csv, &median_plot(x, "setting", true), &svg)?;
    let mut message = String::new();
    let mut settings: Vec<f64> = rep.points.iter().map(|p| p.setting).collect();
    settings.dedup();
    for s in settings {
        let (Some(best), Some(zero)) = (rep.best(s), rep.at_zero(s)) else {
            continue;
        };
        let grid: Vec<f64> = rep.points.iter().filter(|p| p.setting == s).map(|p| p.lambda).collect();
        let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let interior = best.lambda > lo && best.lambda < hi;
        let _ = writeln!(
            message,
            "setting {s}: best {x} = {} (median mse {}), at 0: {}, interior argmin: {interior}",
            best.lambda,
            fmt_float(best.median_mse),
            fmt_float(zero.median_mse)
        );
    }
    let _ = write!(message, "-> {}, {}", csv.display(), svg.display());
    Ok(Report {
        files: vec![csv, svg],
        message,
    })
}

pub fn tune_cmd(cfg: &ExperimentConfig) -> Result<Report> {
    let rep = tune_lambdas(cfg)?;
    let csv = cfg.out_dir.join("tune.csv");
    write_tune(&csv, &rep.grid, &rep.best)?;
    Ok(Report {
        message: format!(
            "lambda_enc = {}, lambda_dec = {} (median mse {}) -> {}",
            rep.best.lambda_enc,
            rep.best.lambda_dec,
            fmt_float(rep.best.median_mse),
            csv.display()
        ),
        files: vec![csv],
    })
}

pub fn plot_cmd(csv: &Path, spec: &PlotSpec, out: &Path) -> Result<Report> {
    render_plot(csv, spec, out)?;
    Ok(Report {
        files: vec![out.to_path_buf()],
        message: format!("-> {}", out.display()),
    })
}

pub fn demo_config() -> ExperimentConfig {
    ExperimentConfig::from_json(DEMO_CONFIG).expect("built-in demo config is valid")
}

/// Straggler sweep of [`DEMO_CONFIG`].
pub fn demo(cfg: &ExperimentConfig) -> Result<Report> {
    straggler_sweep_to(cfg, "demo")
}
