use super::checkpoint::Checkpoint;
use super::config::ExperimentConfig;
use super::metrics::{
    convergence_epoch, failure_row, metrics_csv, timing_csv, trailing_mean, MetricRecord,
};
use super::HarnessError;
use crate::agent::Agent;
use crate::env::WirelessEnv;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything a finished (or aborted) run leaves behind.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub timing_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub records: Vec<MetricRecord>,
    pub convergence_epoch: Option<usize>,
    pub total_seconds: f64,
    /// Error text when the run aborted; the metric CSV then carries a
    /// failure marker row after the epochs that completed.
    pub failed: Option<String>,
    pub actions_executed: u64,
    pub feasibility_violations: u64,
    pub final_chi: f64,
}

impl RunArtifacts {
    /// Mean sum rate over the last 20% of completed epochs.
    pub fn plateau_sum_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let n = (self.records.len() / 5).max(1);
        self.records[self.records.len() - n..]
            .iter()
            .map(|r| r.sum_rate)
            .sum::<f64>()
            / n as f64
    }
}

/// Runs one experiment end to end: seeds the generator, trains for the
/// configured number of epochs, writes `metrics.csv` (deterministic),
/// `timing.csv` (wall clock), and a final checkpoint under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut env = WirelessEnv::new(cfg.env.clone(), &mut rng)?;
    let mut agent = Agent::new(&cfg.env, cfg.agent.clone(), &mut rng)?;

    let mut records: Vec<MetricRecord> = Vec::with_capacity(cfg.epochs);
    let mut rewards: Vec<f64> = Vec::with_capacity(cfg.epochs);
    let mut failed = None;
    let mut cumulative = 0.0;
    let run_start = Instant::now();
    for epoch in 1..=cfg.epochs {
        let t0 = Instant::now();
        match agent.train_epoch(&mut env, &mut rng) {
            Ok(stats) => {
                let epoch_seconds = t0.elapsed().as_secs_f64();
                cumulative += epoch_seconds;
                rewards.push(stats.mean_reward);
                let ma = trailing_mean(&rewards, rewards.len() - 1, cfg.ma_window);
                records.push(MetricRecord::from_stats(epoch, &stats, ma, epoch_seconds, cumulative));
            }
            Err(e) => {
                failed = Some(e.to_string());
                break;
            }
        }
    }
    let total_seconds = run_start.elapsed().as_secs_f64();

    let actor_layers = records.first().map_or(1, |r| r.actor_grad_w.len());
    let critic_layers = records.first().map_or(1, |r| r.critic_grad_w.len());
    let mut metrics_text = metrics_csv(&records, actor_layers, critic_layers);
    if failed.is_some() {
        metrics_text.push_str(&failure_row(actor_layers, critic_layers));
        metrics_text.push('\n');
    }
    let metrics_path = out_dir.join("metrics.csv");
    std::fs::write(&metrics_path, metrics_text)?;
    let timing_path = out_dir.join("timing.csv");
    std::fs::write(&timing_path, timing_csv(&records))?;

    let checkpoint_path = out_dir.join("agent.ckpt");
    Checkpoint::capture(&agent, &rng, records.len()).save(&checkpoint_path)?;

    let sum_rates: Vec<f64> = records.iter().map(|r| r.sum_rate).collect();
    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        metrics_path,
        timing_path,
        checkpoint_path,
        convergence_epoch: convergence_epoch(&sum_rates, cfg.ma_window),
        records,
        total_seconds,
        failed,
        actions_executed: agent.actions_executed,
        feasibility_violations: agent.feasibility_violations,
        final_chi: agent.explorer().map_or(0.0, |e| e.chi()),
    })
}
