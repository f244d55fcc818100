use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pnp_admm::harness::{
    cmd_analyze, cmd_run, cmd_sweep, parse_chunk_lengths, AnalyzeMode, AnalyzeOptions, ExperimentPreset, PgsDemoParams,
    PresetName,
};

#[derive(Parser)]
#[command(
    name = "pnp-admm",
    version,
    about = "PnP-ADMM with adaptive penalty: runs, residual bounds, PGS demos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a test image, run the solver and write trace.csv, images and summary.txt.
    Run {
        /// Flat `key = value` preset file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base preset when no config is given: deblur, superres or smoke.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated eta values run concurrently into out/eta_<value>.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Build and check a residual bound for a trace CSV; writes bound.csv and certificate.txt.
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// auto, s3 or s12.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        eta: Option<f64>,
        /// Inferred from the trace when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Emit a piecewise geometric sequence with partial sums and chunk bounds as CSV.
    PgsDemo {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        peak0: Option<f64>,
        /// Comma-separated, e.g. 2,3,4.
        #[arg(long)]
        chunk_lengths: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Number of terms to emit.
        #[arg(long)]
        length: Option<usize>,
    },
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))
}

fn load_preset(config: Option<&Path>, preset: Option<&str>) -> Result<ExperimentPreset> {
    match (config, preset) {
        (Some(_), Some(_)) => anyhow::bail!("--config and --preset are mutually exclusive"),
        (Some(path), None) => {
            let base = path.parent().unwrap_or(Path::new("."));
            Ok(ExperimentPreset::from_config(&read_config(path)?, base)?)
        }
        (None, Some(name)) => Ok(ExperimentPreset::named(PresetName::parse(name)?)),
        (None, None) => Ok(ExperimentPreset::deblur()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            eta,
            gamma,
            seed,
            sweep,
        } => {
            let mut p = load_preset(config.as_deref(), preset.as_deref())?;
            if let Some(eta) = eta {
                p = p.with_eta(eta);
            }
            if let Some(gamma) = gamma {
                p = p.with_gamma(gamma);
            }
            if let Some(seed) = seed {
                p.solver.seed = seed;
            }
            p.validate()?;
            match sweep {
                Some(etas) => {
                    for (dir, summary) in cmd_sweep(&p, &etas, &out)? {
                        println!("== {}", dir.display());
                        print!("{}", summary.to_text());
                    }
                }
                None => print!("{}", cmd_run(&p, &out)?.to_text()),
            }
        }
        Command::Analyze {
            trace,
            config,
            out,
            mode,
            eta,
            gamma,
            epsilon,
        } => {
            let mut opts = match &config {
                Some(path) => AnalyzeOptions::from_config(&read_config(path)?)?,
                None => AnalyzeOptions::default(),
            };
            if let Some(mode) = mode {
                opts.mode = AnalyzeMode::parse(&mode)?;
            }
            if let Some(eta) = eta {
                opts.eta = eta;
            }
            if gamma.is_some() {
                opts.gamma = gamma;
            }
            if let Some(epsilon) = epsilon {
                opts.epsilon = epsilon;
            }
            let report = cmd_analyze(&trace, &opts, &out).with_context(|| format!("analyzing {}", trace.display()))?;
            print!("{}", report.to_text());
        }
        Command::PgsDemo {
            config,
            out,
            beta,
            peak0,
            chunk_lengths,
            epsilon,
            length,
        } => {
            let mut params = match &config {
                Some(path) => PgsDemoParams::from_config(&read_config(path)?)?,
                None => PgsDemoParams::default(),
            };
            if let Some(beta) = beta {
                params.beta = beta;
            }
            if let Some(peak0) = peak0 {
                params.peak0 = peak0;
            }
            if let Some(lengths) = chunk_lengths {
                params.chunk_lengths = parse_chunk_lengths(&lengths)?;
            }
            if let Some(epsilon) = epsilon {
                params.epsilon = epsilon;
            }
            if length.is_some() {
                params.length = length;
            }
            let demo = params.demo()?;
            fs::write(&out, demo.to_csv()).with_context(|| format!("cannot write {}", out.display()))?;
            print!("{}", demo.report());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
