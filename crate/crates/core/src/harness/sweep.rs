use super::config::ExperimentConfig;
use super::metrics::{convergence_epoch, CsvTable};
use super::runner::run_experiment;
use super::HarnessError;
use crate::agent::StateExplorationConfig;
use crate::rewards::RewardVariant;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One sweep cell: a reward variant with either no state exploration
/// (baseline) or a grid point `(M, η)`.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub variant: RewardVariant,
    pub m: Option<f64>,
    pub eta: Option<f64>,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        match (self.m, self.eta) {
            (Some(m), Some(eta)) => format!("{}_m{}_eta{}", self.variant, m, eta),
            _ => format!("{}_baseline", self.variant),
        }
    }
}

#[derive(Debug)]
pub struct CellResult {
    pub cell: SweepCell,
    pub dir: PathBuf,
    pub failed: Option<String>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub cells: Vec<CellResult>,
    pub summary_path: PathBuf,
    pub summary_text: String,
}

/// Enumerates the sweep cells: per variant, one exploration-free baseline
/// plus every `(M, η)` grid point.
pub fn sweep_cells(m_grid: &[f64], eta_grid: &[f64], variants: &[RewardVariant]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &variant in variants {
        cells.push(SweepCell { variant, m: None, eta: None });
        for &m in m_grid {
            for &eta in eta_grid {
                cells.push(SweepCell { variant, m: Some(m), eta: Some(eta) });
            }
        }
    }
    cells
}

fn cell_config(base: &ExperimentConfig, cell: &SweepCell) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.agent.reward_variant = cell.variant;
    cfg.agent.state_exploration = match (cell.m, cell.eta) {
        (Some(m), Some(eta)) => {
            let threshold = base
                .agent
                .state_exploration
                .as_ref()
                .map_or(5e-4, |e| e.loss_threshold);
            Some(StateExplorationConfig {
                max_substitute_prob: m,
                update_rate: eta,
                loss_threshold: threshold,
            })
        }
        _ => None,
    };
    cfg
}

/// Runs every cell (in parallel up to `workers`), then reduces the per-cell
/// CSVs into `summary.csv`. A failed cell is recorded and the sweep
/// continues.
pub fn run_sweep(
    base: &ExperimentConfig,
    m_grid: &[f64],
    eta_grid: &[f64],
    variants: &[RewardVariant],
    workers: usize,
    out_dir: &Path,
) -> Result<SweepOutcome, HarnessError> {
    if m_grid.is_empty() || eta_grid.is_empty() || variants.is_empty() {
        return Err(HarnessError::Config {
            key: "sweep".into(),
            reason: "m-grid, eta-grid, and variants must be nonempty".into(),
        });
    }
    std::fs::create_dir_all(out_dir)?;
    let cells = sweep_cells(m_grid, eta_grid, variants);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config { key: "workers".into(), reason: e.to_string() })?;

    let results: Vec<CellResult> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|cell| {
                let dir = out_dir.join(cell.dir_name());
                let cfg = cell_config(base, cell);
                let failed = match run_experiment(&cfg, &dir) {
                    Ok(artifacts) => artifacts.failed,
                    Err(e) => Some(e.to_string()),
                };
                CellResult { cell: cell.clone(), dir, failed }
            })
            .collect()
    });

    let summary_text = summarize_cells(&results, base.ma_window)?;
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, &summary_text)?;
    Ok(SweepOutcome { cells: results, summary_path, summary_text })
}

/// Builds the sweep summary purely from the per-cell CSV files — callers
/// can recompute it offline byte-for-byte from the same inputs.
pub fn summarize_cells(cells: &[CellResult], window: usize) -> Result<String, HarnessError> {
    struct Row {
        variant: String,
        m: Option<f64>,
        eta: Option<f64>,
        status: String,
        epochs: usize,
        convergence: Option<usize>,
        final_sum_rate: f64,
        grad_w: f64,
        grad_b: f64,
        total_seconds: f64,
        per_epoch_seconds: f64,
    }

    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let metrics_path = cell.dir.join("metrics.csv");
        if let Some(reason) = &cell.failed {
            rows.push(Row {
                variant: cell.cell.variant.to_string(),
                m: cell.cell.m,
                eta: cell.cell.eta,
                status: format!("failed: {}", reason.replace(',', ";")),
                epochs: 0,
                convergence: None,
                final_sum_rate: 0.0,
                grad_w: 0.0,
                grad_b: 0.0,
                total_seconds: 0.0,
                per_epoch_seconds: 0.0,
            });
            continue;
        }
        let table = CsvTable::read(&metrics_path)?;
        let sum_rates = table.numeric_column("sum_rate")?;
        let plateau_len = (sum_rates.len() / 5).max(1);
        let final_sum_rate =
            sum_rates[sum_rates.len() - plateau_len..].iter().sum::<f64>() / plateau_len as f64;
        let mut grad_w = 0.0;
        for col in table.columns_with_prefix("actor_grad_w_") {
            let vals = table.numeric_column(&col)?;
            grad_w += vals.iter().sum::<f64>() / vals.len() as f64;
        }
        let mut grad_b = 0.0;
        for col in table.columns_with_prefix("actor_grad_b_") {
            let vals = table.numeric_column(&col)?;
            grad_b += vals.iter().sum::<f64>() / vals.len() as f64;
        }
        let timing = CsvTable::read(&cell.dir.join("timing.csv"))?;
        let cumulative = timing.numeric_column("cumulative_seconds")?;
        let epoch_seconds = timing.numeric_column("epoch_seconds")?;
        rows.push(Row {
            variant: cell.cell.variant.to_string(),
            m: cell.cell.m,
            eta: cell.cell.eta,
            status: "ok".into(),
            epochs: sum_rates.len(),
            convergence: convergence_epoch(&sum_rates, window),
            final_sum_rate,
            grad_w,
            grad_b,
            total_seconds: cumulative.last().copied().unwrap_or(0.0),
            per_epoch_seconds: epoch_seconds.iter().sum::<f64>()
                / epoch_seconds.len().max(1) as f64,
        });
    }

    // best grid cell per variant: largest gradient-sum improvement over the
    // variant's no-exploration baseline
    let mut best_flags = vec![false; rows.len()];
    let variants: Vec<String> = {
        let mut seen = Vec::new();
        for row in &rows {
            if !seen.contains(&row.variant) {
                seen.push(row.variant.clone());
            }
        }
        seen
    };
    for variant in &variants {
        let baseline_score = rows
            .iter()
            .find(|r| &r.variant == variant && r.m.is_none() && r.status == "ok")
            .map(|r| r.grad_w + r.grad_b);
        let Some(baseline_score) = baseline_score else { continue };
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if &row.variant == variant && row.m.is_some() && row.status == "ok" {
                let improvement = row.grad_w + row.grad_b - baseline_score;
                if best.map_or(true, |(_, score)| improvement > score) {
                    best = Some((i, improvement));
                }
            }
        }
        if let Some((i, _)) = best {
            best_flags[i] = true;
        }
    }

    let mut out = String::from(
        "variant,m,eta,status,epochs,convergence_epoch,final_sum_rate,\
         mean_actor_grad_w,mean_actor_grad_b,grad_improvement,best,\
         total_seconds,per_epoch_seconds\n",
    );
    for (i, row) in rows.iter().enumerate() {
        let baseline_score = rows
            .iter()
            .find(|r| r.variant == row.variant && r.m.is_none() && r.status == "ok")
            .map(|r| r.grad_w + r.grad_b);
        let improvement = match (row.m, baseline_score) {
            (Some(_), Some(b)) => format!("{}", row.grad_w + row.grad_b - b),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.variant,
            row.m.map_or(String::new(), |v| v.to_string()),
            row.eta.map_or(String::new(), |v| v.to_string()),
            row.status,
            row.epochs,
            row.convergence.map_or(String::new(), |v| v.to_string()),
            row.final_sum_rate,
            row.grad_w,
            row.grad_b,
            improvement,
            u8::from(best_flags[i]),
            row.total_seconds,
            row.per_epoch_seconds,
        );
    }
    Ok(out)
}
