use super::HarnessError;
use crate::agent::EpochStats;
use std::fmt::Write as _;
use std::path::Path;

/// Per-epoch metrics. Wall-clock fields are written to a separate timing
/// sidecar so the metric CSV stays byte-reproducible under a fixed seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    /// Mean sum rate over the epoch's environment steps (bits/s/Hz).
    pub sum_rate: f64,
    /// Mean emitted reward over the epoch.
    pub reward: f64,
    /// Trailing-window arithmetic mean of `reward`.
    pub ma_reward: f64,
    pub updated: bool,
    pub chi: f64,
    pub actor_grad_w: Vec<f64>,
    pub actor_grad_b: Vec<f64>,
    pub critic_grad_w: Vec<f64>,
    pub critic_grad_b: Vec<f64>,
    pub epoch_seconds: f64,
    pub cumulative_seconds: f64,
}

impl MetricRecord {
    pub fn from_stats(
        epoch: usize,
        stats: &EpochStats,
        ma_reward: f64,
        epoch_seconds: f64,
        cumulative_seconds: f64,
    ) -> Self {
        Self {
            epoch,
            sum_rate: stats.mean_sum_rate,
            reward: stats.mean_reward,
            ma_reward,
            updated: stats.updated,
            chi: stats.chi,
            actor_grad_w: stats.actor_report.weight_sums.clone(),
            actor_grad_b: stats.actor_report.bias_sums.clone(),
            critic_grad_w: stats.critic_report.weight_sums.clone(),
            critic_grad_b: stats.critic_report.bias_sums.clone(),
            epoch_seconds,
            cumulative_seconds,
        }
    }
}

/// Trailing-window arithmetic mean ending at index `end` (inclusive).
pub fn trailing_mean(values: &[f64], end: usize, window: usize) -> f64 {
    let start = (end + 1).saturating_sub(window);
    let slice = &values[start..=end];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// First epoch (1-based) whose trailing-window mean sum rate reaches 95% of
/// the final plateau mean (the mean over the last 20% of epochs). The
/// detector is invariant to rescaling all sum rates by a positive constant.
pub fn convergence_epoch(sum_rates: &[f64], window: usize) -> Option<usize> {
    if sum_rates.is_empty() || window == 0 || sum_rates.len() < window {
        return None;
    }
    let plateau_len = (sum_rates.len() / 5).max(1);
    let plateau = sum_rates[sum_rates.len() - plateau_len..]
        .iter()
        .sum::<f64>()
        / plateau_len as f64;
    let threshold = 0.95 * plateau;
    (window - 1..sum_rates.len())
        .find(|&e| trailing_mean(sum_rates, e, window) >= threshold)
        .map(|e| e + 1)
}

fn fixed_columns() -> [&'static str; 6] {
    ["epoch", "sum_rate", "reward", "ma_reward", "updated", "chi"]
}

/// Header of the metric CSV for the given per-network layer counts. The
/// column set and order are fixed across variants (golden-file tested).
pub fn metrics_header(actor_layers: usize, critic_layers: usize) -> String {
    let mut cols: Vec<String> = fixed_columns().iter().map(|s| s.to_string()).collect();
    for i in 1..=actor_layers {
        cols.push(format!("actor_grad_w_{i}"));
    }
    for i in 1..=actor_layers {
        cols.push(format!("actor_grad_b_{i}"));
    }
    for i in 1..=critic_layers {
        cols.push(format!("critic_grad_w_{i}"));
    }
    for i in 1..=critic_layers {
        cols.push(format!("critic_grad_b_{i}"));
    }
    cols.join(",")
}

/// Marker row appended when a run aborts; keeps the schema parseable.
pub fn failure_row(actor_layers: usize, critic_layers: usize) -> String {
    let zeros = 5 + 2 * actor_layers + 2 * critic_layers;
    let mut row = String::from("failed");
    for _ in 0..zeros {
        row.push_str(",0");
    }
    row
}

/// Serializes records into the metric CSV (deterministic: shortest
/// round-trip float formatting, no timing columns).
pub fn metrics_csv(records: &[MetricRecord], actor_layers: usize, critic_layers: usize) -> String {
    let mut out = String::new();
    out.push_str(&metrics_header(actor_layers, critic_layers));
    out.push('\n');
    for r in records {
        debug_assert_eq!(r.actor_grad_w.len(), actor_layers);
        debug_assert_eq!(r.critic_grad_w.len(), critic_layers);
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.sum_rate,
            r.reward,
            r.ma_reward,
            u8::from(r.updated),
            r.chi
        );
        for v in r
            .actor_grad_w
            .iter()
            .chain(&r.actor_grad_b)
            .chain(&r.critic_grad_w)
            .chain(&r.critic_grad_b)
        {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Serializes the wall-clock sidecar.
pub fn timing_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from("epoch,epoch_seconds,cumulative_seconds\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.epoch, r.epoch_seconds, r.cumulative_seconds);
    }
    out
}

/// A parsed CSV: header names plus rows of raw string cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub path: String,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| HarnessError::EmptyCsv(path.to_string()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            rows.push(line.split(',').map(|s| s.to_string()).collect());
        }
        if rows.is_empty() {
            return Err(HarnessError::EmptyCsv(path.to_string()));
        }
        Ok(Self { columns, rows, path: path.to_string() })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, HarnessError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| HarnessError::MissingColumn {
            path: self.path.clone(),
            column: name.to_string(),
        })
    }

    /// Numeric column, skipping any failure marker row.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let idx = self.column_index(name)?;
        let mut out = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            if row.first().map(String::as_str) == Some("failed") {
                continue;
            }
            let cell = row.get(idx).ok_or_else(|| HarnessError::Csv {
                path: self.path.clone(),
                reason: format!("short row while reading column {name}"),
            })?;
            out.push(cell.parse::<f64>().map_err(|e| HarnessError::Csv {
                path: self.path.clone(),
                reason: format!("bad numeric cell {cell:?} in column {name}: {e}"),
            })?);
        }
        Ok(out)
    }

    /// Names of columns starting with a prefix, in header order.
    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.columns.iter().filter(|c| c.starts_with(prefix)).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: usize, sum_rate: f64, reward: f64) -> MetricRecord {
        MetricRecord {
            epoch,
            sum_rate,
            reward,
            ma_reward: 0.0,
            updated: true,
            chi: 0.0,
            actor_grad_w: vec![1.0, 2.0],
            actor_grad_b: vec![0.1, 0.2],
            critic_grad_w: vec![3.0],
            critic_grad_b: vec![0.3],
            epoch_seconds: 0.5,
            cumulative_seconds: epoch as f64 * 0.5,
        }
    }

    #[test]
    fn header_is_stable_and_complete() {
        let h = metrics_header(2, 1);
        assert_eq!(
            h,
            "epoch,sum_rate,reward,ma_reward,updated,chi,actor_grad_w_1,actor_grad_w_2,\
             actor_grad_b_1,actor_grad_b_2,critic_grad_w_1,critic_grad_b_1"
        );
    }

    #[test]
    fn csv_round_trips_through_the_parser() {
        let records = vec![record(1, 2.5, -1.0), record(2, 3.0, -0.5)];
        let text = metrics_csv(&records, 2, 1);
        let table = CsvTable::parse(&text, "test").unwrap();
        assert_eq!(table.numeric_column("sum_rate").unwrap(), vec![2.5, 3.0]);
        assert_eq!(table.numeric_column("actor_grad_w_2").unwrap(), vec![2.0, 2.0]);
        assert!(table.numeric_column("nope").is_err());
    }

    #[test]
    fn trailing_mean_truncates_at_the_start() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(trailing_mean(&v, 0, 3), 1.0);
        assert_eq!(trailing_mean(&v, 2, 3), 2.0);
        assert_eq!(trailing_mean(&v, 3, 3), 3.0);
    }

    #[test]
    fn convergence_detector_finds_the_rise() {
        // ramp to 10 at epoch 50, flat afterwards
        let rates: Vec<f64> =
            (0..100).map(|e| if e < 50 { 10.0 * e as f64 / 50.0 } else { 10.0 }).collect();
        let epoch = convergence_epoch(&rates, 10).unwrap();
        assert!(epoch > 40 && epoch <= 60, "epoch {epoch}");
    }

    #[test]
    fn convergence_detector_is_scale_invariant() {
        let rates: Vec<f64> =
            (0..200).map(|e| 5.0 / (1.0 + (-0.08 * (e as f64 - 60.0)).exp())).collect();
        let base = convergence_epoch(&rates, 20);
        let scaled: Vec<f64> = rates.iter().map(|r| r * 123.456).collect();
        assert_eq!(base, convergence_epoch(&scaled, 20));
        assert!(base.is_some());
    }

    #[test]
    fn failure_row_matches_schema_width() {
        let header = metrics_header(2, 1);
        let row = failure_row(2, 1);
        assert_eq!(header.split(',').count(), row.split(',').count());
        // parser skips it
        let text = format!("{header}\n{row}\n");
        let err = CsvTable::parse(&text, "t").and_then(|t| t.numeric_column("sum_rate"));
        assert!(err.unwrap().is_empty());
    }
}
