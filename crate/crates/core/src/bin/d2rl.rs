use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use d2rl::harness::{
    compare_runs, emit_plots, render_markdown, run_experiment, run_sweep, ExperimentConfig,
    Profile, WORKERS_ENV_VAR,
};
use d2rl::rewards::RewardVariant;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "d2rl",
    about = "Diffusion-driven actor-critic training for full-duplex beamforming and power allocation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Flat key = value config file (empty file means profile defaults).
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Base profile supplying defaults for keys the config omits.
    #[arg(long, default_value = "desk", value_parser = parse_profile)]
    profile: Profile,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::parse(s).ok_or_else(|| format!("unknown profile {s:?} (expected desk or tiny)"))
}

fn parse_variant(s: &str) -> Result<RewardVariant, String> {
    RewardVariant::parse(s).ok_or_else(|| {
        format!("unknown reward variant {s:?} (expected raw, designed, designed_mlp, gdm, designed_gdm)")
    })
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|e| format!("bad grid value {p:?}: {e}")))
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write metrics.csv, timing.csv, and a checkpoint.
    Run(CommonRunArgs),
    /// Grid-sweep state-exploration hyperparameters (M, eta) per reward
    /// variant, including a no-exploration baseline cell.
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Comma-separated maximum substitute probabilities.
        #[arg(long = "m-grid", value_parser = parse_grid, required = true)]
        m_grid: Vec<Vec<f64>>,
        /// Comma-separated update rates.
        #[arg(long = "eta-grid", value_parser = parse_grid, required = true)]
        eta_grid: Vec<Vec<f64>>,
        /// Reward variants to sweep (defaults to the configured one).
        #[arg(long, value_parser = parse_variant, value_delimiter = ',')]
        variants: Vec<RewardVariant>,
    },
    /// Render the four plot families from one or more metrics.csv files.
    Plot {
        /// metrics.csv paths (timing.csv sidecars are picked up alongside).
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        /// Smoothing window for the sum-rate overlay.
        #[arg(long, default_value_t = 100)]
        ma_window: usize,
    },
    /// Compare a variant run against a baseline run.
    Compare {
        baseline: PathBuf,
        variant: PathBuf,
        /// Convergence-detector window (epochs).
        #[arg(long, default_value_t = 100)]
        window: usize,
        /// Also write the markdown report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &CommonRunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config, common.profile)
        .with_context(|| format!("loading config {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn workers_from_env(cells: usize) -> usize {
    std::env::var(WORKERS_ENV_VAR)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(cells.max(1))
        })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(common) => {
            let cfg = load_config(&common)?;
            let artifacts = run_experiment(&cfg, &common.out)?;
            println!("metrics:     {}", artifacts.metrics_path.display());
            println!("timing:      {}", artifacts.timing_path.display());
            println!("checkpoint:  {}", artifacts.checkpoint_path.display());
            println!(
                "convergence: {}",
                artifacts
                    .convergence_epoch
                    .map_or("not reached".to_string(), |e| format!("epoch {e}"))
            );
            println!("plateau sum rate: {:.4} bits/s/Hz", artifacts.plateau_sum_rate());
            println!("total wall time:  {:.1} s", artifacts.total_seconds);
            println!(
                "actions executed: {} (feasibility violations: {})",
                artifacts.actions_executed, artifacts.feasibility_violations
            );
            if let Some(reason) = artifacts.failed {
                bail!("run aborted: {reason} (partial CSV flushed with failure marker)");
            }
        }
        Command::Sweep { common, m_grid, eta_grid, variants } => {
            let cfg = load_config(&common)?;
            let m_grid: Vec<f64> = m_grid.into_iter().flatten().collect();
            let eta_grid: Vec<f64> = eta_grid.into_iter().flatten().collect();
            let variants = if variants.is_empty() {
                vec![cfg.agent.reward_variant]
            } else {
                variants
            };
            let cells = variants.len() * (1 + m_grid.len() * eta_grid.len());
            let workers = workers_from_env(cells);
            eprintln!("sweeping {cells} cells with {workers} workers");
            let outcome = run_sweep(&cfg, &m_grid, &eta_grid, &variants, workers, &common.out)?;
            for cell in &outcome.cells {
                match &cell.failed {
                    None => println!("cell {}: ok", cell.cell.dir_name()),
                    Some(reason) => println!("cell {}: FAILED ({reason})", cell.cell.dir_name()),
                }
            }
            println!("summary: {}", outcome.summary_path.display());
        }
        Command::Plot { csv, out, ma_window } => {
            let files = emit_plots(&csv, &out, ma_window)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Compare { baseline, variant, window, out } => {
            let report = compare_runs(&baseline, &variant, window)?;
            let markdown = render_markdown(&report, &baseline, &variant);
            if let Some(path) = out {
                std::fs::write(&path, &markdown)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{markdown}");
        }
    }
    Ok(())
}
