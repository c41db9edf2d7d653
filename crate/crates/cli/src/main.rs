use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nercc_cli::commands::{self, Report};
use nercc_cli::{ExperimentConfig, PlotSpec};

#[derive(Parser)]
#[command(name = "nercc", version, about = "Nested-regression coded computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One row per (scheme, straggler setting, trial)
    Run(Common),
    /// Straggler sweep with median rows and a plot
    SweepStragglers(Common),
    /// Smoothing-parameter sweep for nercc
    SweepLambda(Common),
    /// Grid search for (lambda_enc, lambda_dec)
    Tune(Common),
    /// Line chart of two CSV columns
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Column whose values split the rows into series
        #[arg(long)]
        group: Option<String>,
        /// Row filter, `column=value`
        #[arg(long = "where")]
        filter: Option<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        /// SVG file to write
        #[arg(long)]
        output: PathBuf,
    },
    /// Small built-in straggler sweep
    Demo(Overrides),
}

fn apply(mut cfg: ExperimentConfig, o: Overrides) -> ExperimentConfig {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(out) = o.out {
        cfg.out_dir = out;
    }
    cfg
}

fn load(c: Common) -> anyhow::Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(&c.config).with_context(|| format!("loading {}", c.config.display()))?;
    Ok(apply(cfg, c.overrides))
}

fn main() -> anyhow::Result<()> {
    let report: Report = match Cli::parse().command {
        Command::Run(c) => commands::run(&load(c)?)?,
        Command::SweepStragglers(c) => commands::sweep_stragglers_cmd(&load(c)?)?,
        Command::SweepLambda(c) => commands::sweep_lambda_cmd(&load(c)?)?,
        Command::Tune(c) => commands::tune_cmd(&load(c)?)?,
        Command::Plot {
            csv,
            x,
            y,
            group,
            filter,
            log_x,
            log_y,
            output,
        } => {
            let filter = match filter {
                None => None,
                Some(f) => match f.split_once('=') {
                    Some((c, v)) => Some((c.to_string(), v.to_string())),
                    None => bail!("--where expects column=value, got {f:?}"),
                },
            };
            let spec = PlotSpec {
                x,
                y,
                group,
                filter,
                log_x,
                log_y,
            };
            commands::plot_cmd(&csv, &spec, &output)?
        }
        Command::Demo(o) => commands::demo(&apply(commands::demo_config(), o))?,
    };
    println!("{}", report.message);
    Ok(())
}
