mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ris_d2d::bcd::{run_bcd, BcdOptions, BcdStatus, SolutionReport};
use ris_d2d::channel::{generate_channels, read_channel_file, write_channel_file};
use ris_d2d::exec::Execution;
use ris_d2d::sweep::run_sweep;

use crate::config::{ConfigFile, SweepFile};

#[derive(Parser)]
#[command(name = "ris-d2d", version, about = "Sum-rate optimization for RIS-assisted D2D underlay uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a channel realization and write it as JSON.
    GenChannels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize one channel realization.
    Solve {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long)]
        max_outer: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        sdr_samples: Option<usize>,
        /// Write the full report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte-Carlo sweep with baselines, written as CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn gen_channels(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let file: ConfigFile = read_json(config)?;
    let cfg = file.to_system()?;
    let ch = generate_channels(&cfg, seed)?;
    write_channel_file(out, &cfg, &ch).with_context(|| format!("writing {}", out.display()))?;
    log::info!("wrote {}x{} channels to {}", cfg.antennas, cfg.elements, out.display());
    Ok(())
}

fn summary(r: &SolutionReport) -> String {
    format!(
        "status {:?}, sum rate {:.6} nats (initial {:.6}), gamma_D {:.6}, gamma_C {:.6}, p_D {:.6} W, p_C {:.6} W, {} outer iterations",
        r.status,
        r.sum_rate,
        r.initial_rate,
        r.gamma_d,
        r.gamma_c,
        r.p_d,
        r.p_c,
        r.outer_iterations()
    )
}

fn solve(channels: &Path, opts: BcdOptions, json: Option<&Path>) -> Result<BcdStatus> {
    let (cfg, ch) = read_channel_file(channels).with_context(|| format!("loading {}", channels.display()))?;
    let report = run_bcd(&cfg, &ch, &opts)?;
    let text = serde_json::to_string_pretty(&report)?;
    match json {
        Some(path) => {
            std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            println!("{}", summary(&report));
        }
        None => {
            eprintln!("{}", summary(&report));
            println!("{text}");
        }
    }
    Ok(report.status)
}

fn sweep(spec: &Path, out: &Path, jobs: Option<usize>) -> Result<()> {
    let file: SweepFile = read_json(spec)?;
    let plan = file.to_plan()?;
    let outcome = match jobs {
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(1) => run_sweep(&plan, Execution::Sequential)?,
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(j).build()?;
            pool.install(|| run_sweep(&plan, Execution::Parallel))?
        }
        None => run_sweep(&plan, Execution::Parallel)?,
    };
    std::fs::write(out, outcome.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    let failed = outcome.trials.iter().filter(|t| t.outcome.is_err()).count();
    log::info!("wrote {} trial results to {} ({failed} failed)", outcome.trials.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenChannels { config, seed, out } => gen_channels(&config, seed, &out)?,
        Command::Solve { channels, max_outer, tol, sdr_samples, json } => {
            let mut opts = BcdOptions::default();
            if let Some(k) = max_outer {
                opts.max_outer = k;
            }
            if let Some(t) = tol {
                opts.tol_rate = t;
            }
            if let Some(m) = sdr_samples {
                opts.phase.samples = m;
            }
            if solve(&channels, opts, json.as_deref())? == BcdStatus::Infeasible {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep { spec, out, jobs } => sweep(&spec, &out, jobs)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIS_D2D_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
