//! Command-line frontend for the anomaly detection pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use monsoon::gibbs::{GibbsConfig, ScanOrder};
use monsoon::pipeline;

#[derive(Parser)]
#[command(
    name = "monsoon",
    version,
    about = "Spatio-temporally coherent rainfall anomaly detection on gridded data"
)]
struct Cli {
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Directory for outputs (created if missing).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted anomalies.
    Synth {
        /// Synthetic spec file (`key = value`).
        #[arg(long)]
        spec: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Location-wise threshold baseline: Z0 field and year sets.
    Lwa {
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Fit the random field by Gibbs sampling and write the posterior.
    Fit {
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Model config file (`key = value`); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        sweeps: usize,
        #[arg(long, default_value_t = 500)]
        burn_in: usize,
        #[arg(long, default_value_t = 5)]
        thin: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Keep emission means fixed instead of re-estimating each sweep.
        #[arg(long)]
        fixed_means: bool,
        /// Use a random node order each sweep instead of raster order.
        #[arg(long)]
        random_scan: bool,
        /// Update non-adjacent node classes concurrently (not deterministic).
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Extract anomalies from a fitted state field and write all reports.
    Detect {
        /// Fitted state field CSV (`location_id,year,state`).
        #[arg(long)]
        map: PathBuf,
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Reference field for gain/loss (defaults to the baseline).
        #[arg(long, name = "ref")]
        ref_field: Option<PathBuf>,
        /// Smallest spatio-temporal size kept in aggregate statistics.
        #[arg(long, default_value_t = 1)]
        min_size: usize,
        /// Number of case reports (largest anomalies first).
        #[arg(long, default_value_t = 3)]
        top: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run named model settings on one dataset, one statistics row each.
    Sweep {
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Sweep spec file listing the settings and sampler parameters.
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Render one year of a state field (or anomaly nodes) as PGM or SVG.
    Render {
        /// State field CSV or anomaly membership CSV.
        input: PathBuf,
        /// Dataset CSV (for grid geometry).
        #[arg(long)]
        data: PathBuf,
        /// Year to render.
        #[arg(long)]
        year: i32,
        /// Output image path; `.pgm` or `.svg`.
        #[arg(long)]
        out: PathBuf,
        /// Anomaly list CSV with signs, for membership inputs.
        #[arg(long)]
        anomaly_list: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Synth { spec, seed, out } => {
            pipeline::run_synth(&spec, &out.out_dir, seed).map(|()| {
                info(quiet, &format!("wrote dataset and ground truth to {}", out.out_dir.display()));
            })
        }
        Command::Lwa { data, out } => pipeline::run_lwa(&data, &out.out_dir).map(|warnings| {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            info(quiet, &format!("wrote baseline outputs to {}", out.out_dir.display()));
        }),
        Command::Fit {
            data,
            config,
            sweeps,
            burn_in,
            thin,
            seed,
            fixed_means,
            random_scan,
            parallel,
            out,
        } => {
            let gibbs = GibbsConfig {
                sweeps,
                burn_in,
                thin,
                seed,
                reestimate_means: !fixed_means,
                scan: if random_scan {
                    ScanOrder::Random
                } else {
                    ScanOrder::Raster
                },
                parallel,
            };
            pipeline::run_fit(&data, config.as_deref(), None, gibbs, &out.out_dir).map(|outcome| {
                for w in outcome.warnings {
                    eprintln!("warning: {w}");
                }
                info(
                    quiet,
                    &format!(
                        "collected {} samples; wrote posterior to {}",
                        outcome.summary.n_samples,
                        out.out_dir.display()
                    ),
                );
            })
        }
        Command::Detect {
            map,
            data,
            ref_field,
            min_size,
            top,
            out,
        } => {
            let options = pipeline::DetectOptions {
                min_size,
                ref_path: ref_field,
                top,
            };
            pipeline::run_detect(&map, &data, &options, &out.out_dir).map(|()| {
                info(quiet, &format!("wrote anomaly reports to {}", out.out_dir.display()));
            })
        }
        Command::Sweep { data, spec, out } => {
            pipeline::run_sweep_cmd(&data, &spec, &out.out_dir).map(|()| {
                info(quiet, &format!("wrote sweep table to {}", out.out_dir.display()));
            })
        }
        Command::Render {
            input,
            data,
            year,
            out,
            anomaly_list,
        } => pipeline::run_render(&input, &data, year, &out, anomaly_list.as_deref()).map(|()| {
            info(quiet, &format!("wrote {}", out.display()));
        }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn info(quiet: bool, msg: &str) {
    if !quiet {
        println!("{msg}");
    }
}
